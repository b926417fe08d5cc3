"""Command line front end: ``curveflow run|analyze|compare|sweep``.

Runs are described by a JSON config file::

    {
      "initial": {"preset": "harmonic 2 0.1"},
      "alpha":   {"mode": "area"},
      "solver":  {"M": 256, "dt": 1e-4, "t_end": 2.0, "record_every": 100,
                  "kind": "support"},
      "output":  {"dir": "runs/h2", "svg": false, "snapshots": true},
      "compare": {"threshold": 1e-5, "oracle_modes": 64},
      "sweep":   {"M": [64, 128, 256], "workers": 2}
    }

See README.md for the full schema.  Exit codes: 0 success, 1 configuration
or input error, 2 convexity violation / numerical blowup, 3 line or point
regime stop, 4 comparison threshold exceeded.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import diagnostics, geometry, solver, spectral
from .errors import ConfigError, CurveflowError, ConvexityViolation, SnapshotFormatError
from .geometry import TWO_PI, SupportCurve, ThetaGrid

log = logging.getLogger("curveflow")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSTABLE = 2
EXIT_REGIME = 3
EXIT_THRESHOLD = 4

STATUS_EXIT = {
    solver.STATUS_COMPLETED: EXIT_OK,
    solver.STATUS_CONVEXITY: EXIT_UNSTABLE,
    solver.STATUS_BLOWUP: EXIT_UNSTABLE,
    solver.STATUS_LINE: EXIT_REGIME,
    solver.STATUS_POINT: EXIT_REGIME,
}

ANALYZE_HEADER = "L,A,alpha,deficit,k_min,k_max,r_in,pan_yang,bonnesen"
COMPARE_HEADER = "tau,sup_err,L_err,A_err"
SWEEP_HEADER = (
    "run,M,dt,alpha,kind,status,final_deficit,decay_rate,"
    "max_area_drift,max_length_drift,sup_err"
)


# -- initial curves -----------------------------------------------------------


def _poisson(rho: float, eps: float):
    def f(theta):
        z = rho * np.exp(1j * theta)
        return 1.0 + eps * ((z / (1.0 - z)).real - rho * np.cos(theta))

    return f


def preset_function(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    """Support function for a named preset.

    ``circle R``, ``harmonic n eps`` (1 + eps cos n theta), ``ellipse a b``
    (semi-axes along x and y), ``poisson rho eps`` (1 + eps sum_{n>=2} rho^n cos n theta).
    """
    parts = spec.split()
    if not parts:
        raise ConfigError("empty preset")
    name, args = parts[0], parts[1:]
    try:
        nums = [float(x) for x in args]
    except ValueError:
        raise ConfigError(f"preset {spec!r}: arguments must be numbers") from None
    arity = {"circle": 1, "harmonic": 2, "ellipse": 2, "poisson": 2}
    if name not in arity:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(arity)}")
    if len(nums) != arity[name]:
        raise ConfigError(f"preset {name!r} takes {arity[name]} argument(s), got {len(nums)}")
    if name == "circle":
        (R,) = nums
        if R <= 0:
            raise ConfigError("circle radius must be positive")
        return lambda t: np.full_like(t, R)
    if name == "harmonic":
        n, eps = nums
        if n != int(n) or n < 0:
            raise ConfigError("harmonic index must be a nonnegative integer")
        return lambda t: 1.0 + eps * np.cos(int(n) * t)
    if name == "ellipse":
        a, b = nums
        if a <= 0 or b <= 0:
            raise ConfigError("ellipse semi-axes must be positive")
        return lambda t: np.sqrt((a * np.cos(t)) ** 2 + (b * np.sin(t)) ** 2)
    rho, eps = nums
    if not 0 <= rho < 1:
        raise ConfigError("poisson rho must lie in [0, 1)")
    return _poisson(rho, eps)


def _fourier_function(spec: dict):
    try:
        a0 = float(spec["a0"])
        a = np.asarray(spec.get("a", []), dtype=float)
        b = np.asarray(spec.get("b", []), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad fourier spec: {exc}") from None

    def f(theta):
        out = np.full_like(theta, a0)
        for n, c in enumerate(a, start=1):
            out += c * np.cos(n * theta)
        for n, c in enumerate(b, start=1):
            out += c * np.sin(n * theta)
        return out

    return f


@dataclass
class InitialCurve:
    """Initial data that can be sampled at any resolution (except polygons)."""

    func: Optional[Callable] = None
    polygon: Optional[np.ndarray] = None
    label: str = ""

    def curve(self, M: int) -> SupportCurve:
        grid = ThetaGrid(M)
        if self.polygon is not None:
            return geometry.support_from_polygon(self.polygon, grid)
        return SupportCurve(grid, self.func(grid.nodes))

    def oracle(self, M: int, n_modes: int) -> spectral.FourierSupport:
        if self.polygon is not None:
            return spectral.to_fourier(self.curve(M), min(n_modes, M // 2 - 1))
        fine = max(M, 4 * (n_modes + 1))
        fine += fine % 2
        return spectral.to_fourier(self.curve(fine), n_modes)


def parse_initial(spec) -> InitialCurve:
    if not isinstance(spec, dict):
        raise ConfigError("'initial' must be an object")
    keys = [k for k in ("preset", "fourier", "polygon") if k in spec]
    if len(keys) != 1:
        raise ConfigError("'initial' needs exactly one of preset / fourier / polygon")
    key = keys[0]
    if key == "preset":
        return InitialCurve(func=preset_function(str(spec["preset"])), label=str(spec["preset"]))
    if key == "fourier":
        return InitialCurve(func=_fourier_function(spec["fourier"]), label="fourier")
    pts = np.asarray(spec["polygon"], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError("polygon must be a list of [x, y] pairs")
    return InitialCurve(polygon=pts, label=f"polygon{len(pts)}")


def parse_alpha(spec) -> object:
    spec = spec or {"mode": "area"}
    mode = spec.get("mode", "area")
    try:
        if mode == "area":
            return solver.AreaPreserving()
        if mode == "length":
            return solver.LengthPreserving()
        if mode == "constant":
            return solver.Constant(float(spec["c"]))
        if mode == "tabulated":
            return solver.Tabulated(tuple(spec["times"]), tuple(spec["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad alpha spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown alpha mode {mode!r}")


def alpha_label(mode) -> str:
    if isinstance(mode, solver.Constant):
        return f"constant:{mode.c:g}"
    return mode.name


@dataclass
class RunConfig:
    initial: InitialCurve
    alpha: object
    solver: solver.SolverConfig
    out_dir: Path
    emit_svg: bool = False
    snapshots: bool = True
    threshold: float = 1e-5
    oracle_modes: int = spectral.DEFAULT_MODES
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def load_config(path, out: Optional[str] = None, svg: bool = False,
                threshold: Optional[float] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(raw, out=out, svg=svg, threshold=threshold)


def build_config(raw: dict, out=None, svg=False, threshold=None) -> RunConfig:
    if not isinstance(raw, dict) or "initial" not in raw:
        raise ConfigError("config must be an object with an 'initial' section")
    s = raw.get("solver", {})
    known = {"M", "dt", "t_end", "record_every", "kind", "scheme"}
    unknown = set(s) - known
    if unknown:
        raise ConfigError(f"unknown solver keys {sorted(unknown)}")
    try:
        sc = solver.SolverConfig(
            M=int(s.get("M", 256)),
            dt=float(s.get("dt", 1e-4)),
            t_end=float(s.get("t_end", 1.0)),
            record_every=int(s.get("record_every", 100)),
            solver_kind=str(s.get("kind", "support")),
            scheme=str(s.get("scheme", "rk4")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver section: {exc}") from None
    o = raw.get("output", {})
    c = raw.get("compare", {})
    out_dir = Path(out if out is not None else o.get("dir", "curveflow_out"))
    cfg = RunConfig(
        initial=parse_initial(raw["initial"]),
        alpha=parse_alpha(raw.get("alpha")),
        solver=sc,
        out_dir=out_dir,
        emit_svg=bool(svg or o.get("svg", False)),
        snapshots=bool(o.get("snapshots", True)),
        threshold=float(threshold if threshold is not None else c.get("threshold", 1e-5)),
        oracle_modes=int(c.get("oracle_modes", spectral.DEFAULT_MODES)),
        sweep=dict(raw.get("sweep", {})),
        raw=raw,
    )
    if not all(math.isfinite(x) for x in (cfg.threshold, sc.dt, sc.t_end)):
        raise ConfigError("numeric fields must be finite")
    return cfg


# -- outputs ------------------------------------------------------------------


def write_svg(path, states, size: int = 480) -> None:
    """Overlay of the recorded curves plus the limiting circle of radius L/2pi."""
    if len(states) > 50:
        idx = np.unique(np.linspace(0, len(states) - 1, 50).round().astype(int))
        states = [states[i] for i in idx]
    polys = [geometry.reconstruct_points(s.curve) for s in states]
    final = polys[-1]
    R = states[-1].length / TWO_PI
    centre = final.mean(axis=0)
    allpts = np.vstack(polys + [centre + R * np.array([[1, 1], [-1, -1]])])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = float(max(hi - lo)) * 1.1 or 1.0
    mid = 0.5 * (lo + hi)
    scale = size / span

    def tx(p):
        return (p[:, 0] - mid[0]) * scale + size / 2, size / 2 - (p[:, 1] - mid[1]) * scale

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for j, p in enumerate(polys):
        x, y = tx(p)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        opacity = 0.15 + 0.85 * (j + 1) / len(polys)
        lines.append(
            f'<polygon points="{pts}" fill="none" stroke="#1f4e9c" '
            f'stroke-width="1" stroke-opacity="{opacity:.3f}"/>'
        )
    cx, cy = tx(centre[None, :])
    lines.append(
        f'<circle cx="{cx[0]:.2f}" cy="{cy[0]:.2f}" r="{R * scale:.2f}" fill="none" '
        f'stroke="#c0392b" stroke-dasharray="4 3" stroke-width="1"/>'
    )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def write_outputs(cfg: RunConfig, result: solver.FlowResult) -> None:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    diagnostics.write_csv(out / "diagnostics.csv", result.records)
    if cfg.snapshots:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for j, st in enumerate(result.states):
            geometry.write_snapshot(snap / f"snapshot_{j:05d}.csv", st.curve)
    summary = {
        "status": result.status,
        "message": result.message,
        "records": len(result.records),
        "final_tau": result.final.tau,
        "final_L": result.records[-1].L if result.records else None,
    }
    if result.k_max_trend is not None:
        summary["k_max_trend"] = result.k_max_trend
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if cfg.emit_svg:
        write_svg(out / "curves.svg", result.states)


def _ingest(cfg: RunConfig) -> SupportCurve:
    curve = cfg.initial.curve(cfg.solver.M)
    geometry.radius_of_curvature(curve)
    return curve


def execute(cfg: RunConfig, strict_cfl: bool = True) -> solver.FlowResult:
    return solver.run_flow(_ingest(cfg), cfg.solver, cfg.alpha, strict_cfl=strict_cfl)


# -- subcommands --------------------------------------------------------------


def cmd_run(config_path, out=None, svg=False) -> int:
    try:
        cfg = load_config(config_path, out=out, svg=svg)
        curve = _ingest(cfg)
        cfg.solver.validate()
    except ConvexityViolation as exc:
        print(f"error: initial curve rejected at ingestion: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CurveflowError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = solver.run_flow(curve, cfg.solver, cfg.alpha)
    write_outputs(cfg, result)
    code = STATUS_EXIT[result.status]
    if code:
        print(f"run stopped: {result.status}: {result.message}", file=sys.stderr)
    return code


def cmd_analyze(curve_path, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        curve = geometry.read_snapshot(curve_path)
        q = geometry.quantities(curve)
    except (OSError, SnapshotFormatError, CurveflowError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    row = [
        q.L, q.A, q.alpha, q.deficit_raw, q.k_min, q.k_max, q.r_in,
        geometry.pan_yang_residual(q.L, q.A, q.alpha),
        geometry.bonnesen_residual(q.L, q.A, q.r_in),
    ]
    stream.write(ANALYZE_HEADER + "\n")
    stream.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return EXIT_OK


def compare_run(cfg: RunConfig):
    """FD run plus per-record error against the exact harmonic evolution."""
    if not isinstance(cfg.alpha, solver.AreaPreserving):
        raise ConfigError("compare needs the area-preserving alpha mode (the only one with an oracle)")
    if cfg.solver.solver_kind != "support":
        raise ConfigError("compare runs the support solver")
    F0 = cfg.initial.oracle(cfg.solver.M, cfg.oracle_modes)
    result = solver.run_flow(_ingest(cfg), cfg.solver, cfg.alpha, strict_cfl=False,
                             with_records=False)
    taus = [s.tau for s in result.states]
    oracle = spectral.spectral_trajectory(F0, taus)
    return result, diagnostics.compare_trajectories(result.states, oracle)


def write_compare(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(COMPARE_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.tau:.17g},{r.sup_err:.17g},{r.L_err:.17g},{r.A_err:.17g}\n")


def cmd_compare(config_path, out=None, threshold=None) -> int:
    try:
        cfg = load_config(config_path, out=out, threshold=threshold)
        result, rows = compare_run(cfg)
    except (CurveflowError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_compare(cfg.out_dir / "compare.csv", rows)
    if not result.completed:
        print(f"run stopped: {result.status}: {result.message}", file=sys.stderr)
        return STATUS_EXIT[result.status]
    worst = max(r.sup_err for r in rows)
    if worst > cfg.threshold:
        print(f"sup error {worst:.3e} exceeds threshold {cfg.threshold:.3e}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def sweep_points(cfg: RunConfig) -> list[dict]:
    grid = {k: v for k, v in cfg.sweep.items() if k in ("M", "dt", "alpha", "kind")}
    unknown = set(cfg.sweep) - {"M", "dt", "alpha", "kind", "workers"}
    if unknown:
        raise ConfigError(f"unknown sweep keys {sorted(unknown)}")
    if not grid or any(not isinstance(v, list) or not v for v in grid.values()):
        raise ConfigError("sweep grid is empty")
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _sweep_one(cfg: RunConfig, j: int, point: dict, root: Path) -> dict:
    sc = cfg.solver
    if "M" in point:
        sc = replace(sc, M=int(point["M"]))
    if "dt" in point:
        sc = replace(sc, dt=float(point["dt"]))
    if "kind" in point:
        sc = replace(sc, solver_kind=str(point["kind"]))
    mode = parse_alpha(point["alpha"]) if "alpha" in point else cfg.alpha
    tag = "_".join(
        f"{k}{alpha_label(mode) if k == 'alpha' else point[k]}" for k in sorted(point)
    ).replace(":", "")
    run_cfg = replace(cfg, solver=sc, alpha=mode, out_dir=root / f"run_{j:03d}_{tag}")
    row = {"run": run_cfg.out_dir.name, "M": sc.M, "dt": sc.dt, "alpha": alpha_label(mode),
           "kind": sc.solver_kind}
    try:
        sc.validate()
        result = execute(run_cfg)
    except (CurveflowError, ValueError) as exc:
        row.update(status=f"ConfigError: {exc}")
        return row
    write_outputs(run_cfg, result)
    recs = result.records
    A = diagnostics.series(recs, "A")
    L = diagnostics.series(recs, "L")
    taus = diagnostics.series(recs, "tau")
    dfc = diagnostics.series(recs, "deficit")
    window = diagnostics.signal_window(taus, dfc, scale=L[0] ** 2)
    rate = float("nan")
    if window is not None:
        rate = diagnostics.fit_decay_rate(taus, dfc, window, scale=L[0] ** 2).rate
    sup = float("nan")
    if isinstance(mode, solver.AreaPreserving) and sc.solver_kind == "support":
        F0 = cfg.initial.oracle(sc.M, cfg.oracle_modes)
        oracle = spectral.spectral_trajectory(F0, [s.tau for s in result.states])
        sup = max(r.sup_err for r in diagnostics.compare_trajectories(result.states, oracle))
    row.update(
        status=result.status,
        final_deficit=dfc[-1],
        decay_rate=rate,
        max_area_drift=float(np.max(np.abs(A - A[0])) / A[0]),
        max_length_drift=float(np.max(np.abs(L - L[0])) / L[0]),
        sup_err=sup,
    )
    return row


def cmd_sweep(config_path, out=None) -> int:
    try:
        cfg = load_config(config_path, out=out)
        points = sweep_points(cfg)
    except (CurveflowError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    root = cfg.out_dir
    root.mkdir(parents=True, exist_ok=True)
    workers = int(cfg.sweep.get("workers", 1))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda jp: _sweep_one(cfg, jp[0], jp[1], root), enumerate(points)))
    cols = SWEEP_HEADER.split(",")
    with open(root / "sweep_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in cols])
    statuses = [r["status"] for r in rows]
    if any(s.startswith("ConfigError") for s in statuses):
        return EXIT_CONFIG
    codes = [STATUS_EXIT[s] for s in statuses]
    if EXIT_UNSTABLE in codes:
        return EXIT_UNSTABLE
    return max(codes)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curveflow", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate the flow and write diagnostics")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--svg", action="store_true")

    a = sub.add_parser("analyze", help="geometry and inequality residuals of a snapshot")
    a.add_argument("curve")

    c = sub.add_parser("compare", help="finite-difference run against the exact evolution")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.add_argument("--threshold", type=float)

    s = sub.add_parser("sweep", help="run a grid of configurations")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(args.config, out=args.out, svg=args.svg)
    if args.command == "analyze":
        return cmd_analyze(args.curve)
    if args.command == "compare":
        return cmd_compare(args.config, out=args.out, threshold=args.threshold)
    return cmd_sweep(args.config, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
