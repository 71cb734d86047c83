"""Command-line entry point: ``qssts {forward,generate-data,invert,radial,spectrum}``.

Configuration files hold ``key = value`` lines with ``#`` comments.
Exit codes: 0 success, 2 configuration or parse error, 3 solver failure,
4 stalled descent (partial outputs are still written).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data, descent, fem, radial, stability
from .errors import (
    DegenerateFieldError, GeometryError, MeshingError, ParseError, QsstsError, ReversedTriangleError,
    SolverError, StalledError, StepUnderflowError, TopologyError,
)
from .mesh import (
    Marker, Mesh, build_annulus_mesh, circle, extract_boundary_trace, kite, read_mesh, trace_from_polyline,
    write_mesh,
)
from .objective import check_condition_a1, cost_boundary, cost_domain

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_STALLED = 0, 2, 3, 4


class ConfigError(QsstsError):
    pass


# ---------------------------------------------------------------- configuration

KEYS = {
    # geometry and discretization
    "outer_radius": float, "h": float, "mesh": str, "gamma": str, "truth": str, "initial": str,
    "n_layers": int, "curve_points": int,
    # data
    "f": float, "g": float, "refine_factor": int, "measurements": str,
    # descent
    "algorithm": str, "kernel": str, "c_step": float, "max_iters": int, "dt_min": float,
    "target_cost": float, "backtrack_factor": float, "compare_kernels": bool,
    # radial
    "R": float, "r_star": float, "dimension": int, "r0": float, "dt": float, "T": float,
    "compare": bool, "compare_iters": int,
    # stability
    "r_sigma": float, "rho0": float, "k_min": int, "k_max": int, "mode_k": int, "amplitude": float,
}


@dataclass
class RunConfig:
    values: dict
    base: Path

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required key '{key}'")
        return self.values[key]

    def path(self, key, must_exist=True) -> Path:
        p = Path(self.require(key))
        if not p.is_absolute():
            p = self.base / p
        if must_exist and not p.exists():
            raise ConfigError(f"key '{key}': file not found: {p}")
        return p


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig({}, Path.cwd())
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), delimiters=("=",),
                                       interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    values = {}
    for key, raw in parser["run"].items():
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}'")
        kind = KEYS[key]
        try:
            if kind is bool:
                values[key] = parser["run"].getboolean(key)
            else:
                values[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"key '{key}': cannot parse {raw!r} as {kind.__name__}") from exc
    return RunConfig(values, p.parent)


def parse_curve(text: str, cfg: RunConfig, key: str, n: int) -> np.ndarray:
    """``circle:RADIUS[:CX:CY]``, ``kite[:SCALE:CX:CY]`` or a CSV file of x,y rows."""
    parts = text.split(":")
    try:
        if parts[0] == "circle":
            nums = [float(v) for v in parts[1:]]
            if len(nums) not in (1, 3):
                raise ValueError
            centre = (nums[1], nums[2]) if len(nums) == 3 else (0.0, 0.0)
            return circle(nums[0], n, centre)
        if parts[0] == "kite":
            nums = [float(v) for v in parts[1:]]
            if len(nums) not in (0, 3):
                raise ValueError
            return kite(n, *([nums[0], (nums[1], nums[2])] if nums else []))
    except ValueError as exc:
        raise ConfigError(f"key '{key}': malformed curve {text!r}") from exc
    values = dict(cfg.values)
    values[key] = text
    path = RunConfig(values, cfg.base).path(key)
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise ConfigError(f"key '{key}': cannot read curve file {path}: {exc}") from exc
    if pts.shape[1] != 2 or len(pts) < 3:
        raise ConfigError(f"key '{key}': curve file needs at least three x,y rows")
    return pts


def _h(cfg: RunConfig) -> float:
    h = cfg.get("h", 0.04)
    if not h > 0:
        raise ConfigError("key 'h' must be positive")
    return h


def _curve_points(cfg: RunConfig, radius_hint: float = 0.9) -> int:
    return cfg.get("curve_points", max(16, int(round(2 * np.pi * radius_hint / _h(cfg)))))


def build_mesh(cfg: RunConfig, key: str) -> Mesh:
    if "mesh" in cfg.values:
        return read_mesh(cfg.path("mesh"))
    curve = parse_curve(cfg.require(key), cfg, key, _curve_points(cfg))
    return build_annulus_mesh(cfg.get("outer_radius", 1.0), curve, _h(cfg), cfg.get("n_layers"))


# ---------------------------------------------------------------- commands

def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])


def cmd_forward(cfg: RunConfig, out: Path, args) -> int:
    mesh = build_mesh(cfg, "gamma")
    f = cfg.get("f", 1.0)
    if "g" in cfg.values:
        f_s, g_s = fem.sigma_values(mesh, f), fem.sigma_values(mesh, cfg.values["g"])
    elif "measurements" in cfg.values:
        f_s, g_s = data.resample_to_mesh(data.read_measurements(cfg.path("measurements")), mesh)
    else:
        raise ConfigError("forward needs key 'g' or key 'measurements'")
    u_d = fem.solve_state_dirichlet(mesh, f_s)
    u_n = fem.solve_state_mixed(mesh, g_s)
    gamma = extract_boundary_trace(mesh, Marker.GAMMA)
    dn_d = fem.normal_derivative_on_gamma(mesh, u_d, gamma)
    dn_n = fem.normal_derivative_on_gamma(mesh, u_n, gamma)
    write_mesh(mesh, out / "mesh.txt")
    fem.write_field(out / "u_d.csv", u_d)
    fem.write_field(out / "u_n.csv", u_n)
    _write_rows(out / "flux_gamma.csv", ["node_id", "x", "y", "dn_d", "dn_n"],
                ([int(i), *p, a, b] for i, p, a, b in zip(gamma.node_ids, gamma.positions, dn_d, dn_n)))
    j_dom = cost_domain(mesh, u_d, u_n)
    j_bnd = cost_boundary(mesh, u_d, u_n, f_s, g_s)
    margin = check_condition_a1(dn_d, dn_n)[1]
    print(f"J_domain={j_dom!r} J_boundary={j_bnd!r} a1_margin={margin!r}")
    return EXIT_OK


def cmd_generate_data(cfg: RunConfig, out: Path, args) -> int:
    n = cfg.get("curve_points", 256)
    truth = parse_curve(cfg.require("truth"), cfg, "truth", n)
    ms = data.generate_synthetic(truth, cfg.get("f", 1.0), cfg.get("refine_factor", 4), _h(cfg),
                                 cfg.get("outer_radius", 1.0))
    target = Path(cfg.get("measurements", "measurements.csv"))
    target = target if target.is_absolute() else out / target
    data.write_measurements(target, ms)
    print(f"wrote {len(ms)} samples to {target}; g in [{ms.g.min():.6g}, {ms.g.max():.6g}]")
    return EXIT_OK


def _descent_config(cfg: RunConfig, **override) -> descent.DescentConfig:
    keys = ("algorithm", "kernel", "c_step", "max_iters", "dt_min", "target_cost", "backtrack_factor")
    kw = {k: cfg.values[k] for k in keys if k in cfg.values}
    kw.update(override)
    try:
        return descent.DescentConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _emit_run(result: descent.RunResult, out: Path, stem: str, every: int | None,
              reference: np.ndarray | None, extent: float) -> None:
    descent.write_history(out / f"{stem}.csv", result.history)
    _write_rows(out / f"{stem}_gamma.csv", ["x", "y"], result.trace.positions.tolist())
    if every:
        for i in range(0, len(result.gamma_history), every):
            svg = descent.svg_snapshot(result.gamma_history[: i + 1: every], reference, extent=extent)
            (out / f"{stem}_{i:04d}.svg").write_text(svg)


def cmd_invert(cfg: RunConfig, out: Path, args) -> int:
    ms = data.read_measurements(cfg.path("measurements"))
    mesh0 = build_mesh(cfg, "initial")
    f_s, g_s = data.resample_to_mesh(ms, mesh0)
    ref_pts = None
    reference = None
    if "truth" in cfg.values:
        ref_pts = parse_curve(cfg.values["truth"], cfg, "truth", 256)
        reference = trace_from_polyline(ref_pts)
    extent = cfg.get("outer_radius", 1.0) * 1.05
    kernels = ["g_minus", "g_full"] if cfg.get("compare_kernels", False) else [None]
    results = {}
    status = EXIT_OK
    for kern in kernels:
        dcfg = _descent_config(cfg, **({"kernel": kern} if kern else {}))
        stem = "history" if kern is None else f"history_{kern}"
        try:
            res = descent.run_inversion(dcfg, mesh0, f_s, g_s, reference)
        except StalledError as exc:
            res = exc.result
            print(f"stalled: {exc}", file=sys.stderr)
            status = EXIT_STALLED
        _emit_run(res, out, stem, args.svg_every, ref_pts, extent)
        results[kern] = res
        if res.history:
            last = res.history[-1]
            print(f"{stem}: {len(res.history)} iterations, J {res.initial_J:.6g} -> {last.J:.6g}"
                  + ("" if last.hausdorff is None else
                     f", hausdorff {res.initial_hausdorff:.4g} -> {last.hausdorff:.4g}"))
        else:
            print(f"{stem}: 0 iterations, J {res.initial_J:.6g}")
    if len(kernels) == 2 and reference is not None:
        table = _kernel_table(results)
        _write_rows(out / "kernel_comparison.csv", ["iter", "hausdorff_g_minus", "hausdorff_g_full"], table)
        print("iter  hausdorff(g_minus)  hausdorff(g_full)")
        step = max(1, len(table) // 10)
        for row in table[::step]:
            print(f"{row[0]:4d}  {row[1]:18.6g}  {row[2]:17.6g}")
    return status


def _kernel_table(results) -> list:
    def column(res):
        return [res.initial_hausdorff] + [r.hausdorff for r in res.history]
    a, b = column(results["g_minus"]), column(results["g_full"])
    n = max(len(a), len(b))
    pad = lambda c: c + [c[-1]] * (n - len(c))  # noqa: E731
    return [[i, x, y] for i, (x, y) in enumerate(zip(pad(a), pad(b)))]


def _radial_config(cfg: RunConfig) -> radial.RadialConfig:
    try:
        return radial.RadialConfig(cfg.get("R", cfg.get("outer_radius", 1.0)), cfg.get("r_star", 0.5),
                                   cfg.get("f", 1.0), cfg.get("dimension", 2))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def radial_comparison(rcfg: radial.RadialConfig, r0: float, h: float, iters: int,
                      c_step: float = 0.05) -> list[list[float]]:
    """Boundary-variation run on the concentric benchmark against the exact normal velocity.

    Rows: iter, t, mean radius, exact radius (RK4 on the same step lengths),
    measured mean normal velocity, exact velocity at the measured radius, relative gap.
    """
    mesh = build_annulus_mesh(rcfg.R, circle(r0, max(16, int(round(2 * np.pi * r0 / h)))), h)
    dcfg = descent.DescentConfig(algorithm="boundary_variation", kernel="g_minus", c_step=c_step,
                                 max_iters=iters)
    res = descent.run_inversion(dcfg, mesh, rcfg.f, rcfg.g)
    radii = [float(np.mean(np.linalg.norm(p, axis=1))) for p in res.gamma_history]
    exact = radial.integrate_schedule(rcfg, radii[0], res.dts)
    rows, t = [], 0.0
    for k, rec in enumerate(res.history):
        v_fem = (radii[k + 1] - radii[k]) / rec.dt
        v_ex = radial.vn(radii[k], rcfg)
        t += rec.dt
        rows.append([rec.iter, t, radii[k + 1], exact[k + 1].r, v_fem, v_ex, abs(v_fem - v_ex) / abs(v_ex)])
    return rows


def cmd_radial(cfg: RunConfig, out: Path, args) -> int:
    rcfg = _radial_config(cfg)
    r0 = cfg.get("r0", 0.9)
    traj = radial.integrate_radius(rcfg, r0, cfg.get("dt", 1e-4), cfg.get("T", 0.02))
    radial.write_trajectory(out / "trajectory.csv", traj, rcfg)
    print(f"r({traj[-1].t:.6g}) = {traj[-1].r!r}")
    if cfg.get("compare", False):
        if rcfg.dimension != 2:
            raise ConfigError("compare requires dimension = 2")
        rows = radial_comparison(rcfg, r0, cfg.get("h", 0.025), cfg.get("compare_iters", 20),
                                 cfg.get("c_step", 0.05))
        _write_rows(out / "radial_compare.csv",
                    ["iter", "t", "r_fem", "r_exact", "vn_fem", "vn_exact", "rel_gap"], rows)
        print(f"max relative velocity gap {max(r[-1] for r in rows):.4g} over {len(rows)} steps")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out: Path, args) -> int:
    try:
        scfg = stability.StabilityConfig(cfg.get("r_sigma", 1.0), cfg.get("f", 1.0),
                                         cfg.get("g", 1.0 / np.log(2.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rho0 = cfg.get("rho0", 0.9)
    ks = range(cfg.get("k_min", 1), cfg.get("k_max", 64) + 1)
    rows = stability.spectrum(ks, rho0, scfg)
    stability.write_spectrum(out / "spectrum.csv", rows)
    if rows:
        print(f"{len(rows)} modes, max lambda {max(l for _, l in rows):.6g}")
    if "mode_k" in cfg.values:
        traj = stability.evolve_mode(stability.ModeState(cfg.values["mode_k"], rho0, cfg.get("amplitude", 1e-3)),
                                     scfg, cfg.get("dt", 1e-4), cfg.get("T", 0.01))
        stability.write_mode(out / "mode.csv", traj)
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "generate-data": cmd_generate_data,
    "invert": cmd_invert,
    "radial": cmd_radial,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qssts", description="Inclusion reconstruction from Cauchy data.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=0, help="reserved; all commands are deterministic")
    p.add_argument("--svg-every", type=int, default=0, metavar="N",
                   help="write an SVG snapshot every N iterations (invert only)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, ParseError, GeometryError, MeshingError, TopologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, DegenerateFieldError, ReversedTriangleError, StepUnderflowError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StalledError as exc:
        print(f"stalled: {exc}", file=sys.stderr)
        return EXIT_STALLED


if __name__ == "__main__":
    sys.exit(main())
