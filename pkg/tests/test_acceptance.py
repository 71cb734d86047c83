"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import frozen  # noqa: E402
from conftest import F, G, R_STAR, annulus  # noqa: E402
from qssts import radial, stability  # noqa: E402
from qssts.data import generate_synthetic, resample_to_mesh  # noqa: E402
from qssts.descent import DescentConfig, run_inversion  # noqa: E402
from qssts.fem import normal_derivative_on_gamma, solve_state_dirichlet, solve_state_mixed  # noqa: E402
from qssts.mesh import Marker, build_annulus_mesh, circle, kite, trace_from_polyline  # noqa: E402
from qssts.objective import cost_boundary, cost_domain  # noqa: E402

RCFG = radial.RadialConfig(1.0, R_STAR, F, 2)
RCFG3 = radial.RadialConfig(1.0, R_STAR, F, 3)
SCFG = stability.StabilityConfig(1.0, F, G)


@pytest.fixture
def report(capsys):
    """Print the verdict past pytest's capture, then assert it."""
    def emit(number: int, ok: bool, detail: str, extra: str = "") -> None:
        line = f"[acceptance {number}] {'PASS' if ok else 'FAIL'}: {detail}"
        with capsys.disabled():
            print("\n" + extra + line, flush=True)
        assert ok, line
    return emit


def order(errs) -> np.ndarray:
    return np.log2(np.asarray(errs[:-1]) / np.asarray(errs[1:]))


def test_1_fem_accuracy(report):
    errs, times = [], []
    for h in (0.1, 0.05, 0.025):
        mesh = annulus(0.5, h)
        t0 = time.perf_counter()
        u = solve_state_dirichlet(mesh, F)
        times.append(time.perf_counter() - t0)
        rho = np.linalg.norm(mesh.nodes, axis=1)
        errs.append(np.abs(u - F * np.log(rho / R_STAR) / np.log(1 / R_STAR)).max())
    p = order(errs)
    ok = errs[1] <= 1e-2 and np.all(p >= 1.7) and max(times) <= 10
    report(1, ok, f"max error {errs[1]:.2e} at h=0.05 (<=1e-2); orders {np.round(p, 2).tolist()} (>=1.7); "
                  f"slowest solve {max(times):.2f}s (<=10s)")


def test_2_flux_recovery(report):
    mesh = annulus(0.5, 0.025)
    dn = normal_derivative_on_gamma(mesh, solve_state_dirichlet(mesh, F))
    rel = np.sqrt(np.mean((dn - frozen.FLUX_GAMMA_05) ** 2)) / frozen.FLUX_GAMMA_05
    report(2, rel <= 0.05, f"relative L2 flux error {rel:.3%} at h=0.025 (<=5%)")


def test_3_cost_oracle(report):
    mesh = annulus(0.9, 0.02)
    ud, un = solve_state_dirichlet(mesh, F), solve_state_mixed(mesh, G)
    j = cost_domain(mesh, ud, un)
    rel = abs(j / frozen.J_09 - 1)
    gaps = []
    for h in (0.04, 0.02, 0.01):
        m = annulus(0.9, h)
        a, b = solve_state_dirichlet(m, F), solve_state_mixed(m, G)
        gaps.append(abs(cost_domain(m, a, b) - cost_boundary(m, a, b, F, G)))
    p = order(gaps)
    ok = rel <= 0.05 and np.all(p >= 1.0)
    report(3, ok, f"J={j:.4f} vs {frozen.J_09:.4f} ({rel:.2%}, <=5%); |J_dom-J_bnd| "
                  f"{['%.3g' % g for g in gaps]} orders {np.round(p, 2).tolist()} (>=1)")


def _radius_gap(algorithm):
    res = run_inversion(DescentConfig(algorithm=algorithm, kernel="g_minus", max_iters=20),
                        annulus(0.9, 0.05), F, G)
    radii = np.array([np.linalg.norm(p, axis=1).mean() for p in res.gamma_history])
    exact = np.array([s.r for s in radial.integrate_schedule(RCFG, radii[0], res.dts)])
    return res, radii, exact, float(np.max(np.abs(radii - exact) / exact))


def test_4_radial_dynamics(report):
    t0 = time.perf_counter()
    res, radii, exact, gap = _radius_gap("domain_variation")
    elapsed = time.perf_counter() - t0
    # not part of the verdict: the boundary-driven variant shows the ODE itself is reproduced
    ref_gap = _radius_gap("boundary_variation")[3]
    ok = len(res.history) == 20 and gap <= 0.05 and elapsed <= 120
    report(4, ok, f"domain variation, 20 iterations at h=0.05: max relative mean-radius gap to RK4 "
                  f"{gap:.2%} (<=5%), final r {radii[-1]:.4f} vs {exact[-1]:.4f}; {elapsed:.1f}s (<=120s) "
                  f"[boundary variation for reference: {ref_gap:.3%}]")


def test_5_radial_properties(report):
    checks = {}
    checks["vn(r*)=0"] = radial.vn(R_STAR, RCFG) == 0 and radial.vn(R_STAR, RCFG3) == 0
    rs = np.linspace(R_STAR, 1.0, 10_002)[1:-1]
    checks["vn<0 sweep"] = all(radial.vn(r, c) < 0 for c in (RCFG, RCFG3) for r in rs)
    traj = radial.integrate_radius(RCFG, 0.9, 1e-4, 0.02)
    r = np.array([s.r for s in traj])
    checks["monotone, above r*"] = bool(np.all(np.diff(r) < 0) and np.all(r > R_STAR))
    dt, T = 2e-5, 0.02
    diff = abs(radial.integrate_radius(RCFG, 0.9, dt, T)[-1].r - radial.integrate_euler(RCFG, 0.9, dt / 100, T))
    checks[f"RK4 vs Euler {diff:.1e}"] = diff <= 1e-6
    k0, _ = radial.peano_bounds(RCFG, 0.9, 10.0)
    checks["|F1|<=K0"] = max(abs(radial.ivp_rhs(0, x, RCFG)) for x in np.linspace(R_STAR, 0.9, 10_000)) <= k0
    report(5, all(checks.values()), "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


def test_6_stability_numerics(report):
    checks = {}
    lam2 = stability.lambda_k(2, 0.9, SCFG)
    checks[f"lambda_2={lam2:.4f}"] = abs(lam2 - frozen.LAMBDA_2) <= 0.05
    lam = [stability.lambda_k(k, 0.9, SCFG) for k in range(1, 65)]
    checks["lambda_k<0 k=1..64"] = all(v < 0 for v in lam)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        k, rho = int(rng.integers(1, 30)), float(rng.uniform(0.2, 0.99))
        coef = stability.tilde_coefficients(k, rho, SCFG)
        for (m, rhs), x in zip(stability.tilde_systems(k, rho, SCFG), (coef[:2], coef[2:])):
            x = np.array(x)
            worst = max(worst, float(np.max(np.abs(m @ x - rhs) / (np.abs(m) @ np.abs(x) + np.abs(rhs)))))
    checks[f"2x2 residual {worst:.1e}"] = worst <= 1e-12
    ratio = [np.divide(*stability.determinants(k, 0.9, SCFG)[::-1]) for k in range(1, 65)]
    checks["det ratios -> 1 monotone"] = bool(np.all(np.diff(ratio) < 0) and np.all(np.array(ratio) > 1))
    ident = max(abs(stability.rho0_rhs(r, SCFG) - radial.ivp_rhs(0, r, RCFG)) for r in np.linspace(0.5, 0.99, 500))
    checks[f"rho0_rhs=ivp_rhs {ident:.1e}"] = ident <= 1e-12
    report(6, all(checks.values()), "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


def test_7_descent_contract(report):
    mesh0 = annulus(0.9, 0.05)
    res = run_inversion(DescentConfig(max_iters=20), mesh0, F, G)
    js = np.array([res.initial_J] + [r.J for r in res.history])
    sigma = mesh0.boundary_nodes(Marker.SIGMA)
    moved = float(np.abs(res.state.mesh.nodes[sigma] - mesh0.nodes[sigma]).max())
    margin = min(r.a1_margin for r in res.history)
    ok = len(res.history) >= 20 and np.all(np.diff(js) < 0) and moved == 0 and margin > 0
    report(7, ok, f"{len(res.history)} accepted iterations, J {js[0]:.3f} -> {js[-1]:.4f} strictly decreasing; "
                  f"Sigma displacement {moved}; min A1 margin {margin:.3f}")


@pytest.mark.slow
def test_8_kite_reconstruction(report):
    t0 = time.perf_counter()
    h = 0.04
    truth = kite(256)
    data = generate_synthetic(truth, F, 4, h)
    mesh0 = build_annulus_mesh(1.0, circle(0.9, int(round(2 * np.pi * 0.9 / h))), h)
    f, g = resample_to_mesh(data, mesh0)
    ref = trace_from_polyline(truth)
    runs = {}
    for kern in ("g_minus", "g_full"):
        runs[kern] = run_inversion(DescentConfig(kernel=kern, max_iters=300), mesh0, f, g, ref)
    elapsed = time.perf_counter() - t0
    main = runs["g_minus"]
    reduction = 1 - main.history[-1].hausdorff / main.initial_hausdorff
    table = "  iter  hausdorff(g_minus)  hausdorff(g_full)\n"
    for i in (0, 10, 25, 50, 100, 200, 300):
        cols = [r.initial_hausdorff if i == 0 else r.history[min(i, len(r.history)) - 1].hausdorff
                for r in runs.values()]
        table += f"  {i:4d}  {cols[0]:18.4f}  {cols[1]:17.4f}\n"
    ok = reduction >= 0.5 and len(main.history) <= 300 and elapsed <= 300
    report(8, ok, f"Hausdorff {main.initial_hausdorff:.4f} -> {main.history[-1].hausdorff:.4f} "
                  f"({reduction:.1%} reduction, >=50%) in {len(main.history)} iterations; "
                  f"both kernels {elapsed:.1f}s (<=300s)", table)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
