"""Shape-descent loops: boundary variation and the H1 domain variation (QSSTS)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateFieldError, ReversedTriangleError, StalledError
from .fem import (
    SparseSystem, _stiffness, harmonic_extension, h1_norm_sq, normal_derivative_on_gamma,
    sigma_values, solve_spd, solve_state_dirichlet, solve_state_mixed,
)
from .mesh import (
    BoundaryTrace, Marker, Mesh, deform_mesh, extract_boundary_trace, hausdorff_distance,
    min_signed_area,
)
from .objective import KernelMode, check_condition_a1, cost_domain, kernel_on_gamma


class Algorithm(str, Enum):
    BOUNDARY_VARIATION = "boundary_variation"
    DOMAIN_VARIATION = "domain_variation"


@dataclass(frozen=True)
class DescentConfig:
    algorithm: Algorithm = Algorithm.DOMAIN_VARIATION
    kernel: KernelMode = KernelMode.G_MINUS
    c_step: float = 0.05
    max_iters: int = 100
    dt_min: float = 1e-12
    target_cost: float = 0.0
    backtrack_factor: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "kernel", KernelMode(self.kernel))
        if not self.c_step > 0:
            raise ValueError("c_step must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.dt_min > 0:
            raise ValueError("dt_min must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    J: float
    dt: float
    hausdorff: float | None
    min_area: float
    a1_margin: float


@dataclass(frozen=True, eq=False)
class DescentState:
    """A geometry together with its state solutions and Gamma fluxes."""

    mesh: Mesh
    f_sigma: np.ndarray
    g_sigma: np.ndarray
    u_d: np.ndarray
    u_n: np.ndarray
    J: float
    gamma: BoundaryTrace
    dn_d: np.ndarray
    dn_n: np.ndarray

    @property
    def a1_margin(self) -> float:
        return check_condition_a1(self.dn_d, self.dn_n)[1]


def evaluate_state(mesh: Mesh, f_sigma, g_sigma) -> DescentState:
    f = sigma_values(mesh, f_sigma)
    g = sigma_values(mesh, g_sigma)
    u_d = solve_state_dirichlet(mesh, f)
    u_n = solve_state_mixed(mesh, g)
    gamma = extract_boundary_trace(mesh, Marker.GAMMA)
    return DescentState(mesh, f, g, u_d, u_n, cost_domain(mesh, u_d, u_n), gamma,
                        normal_derivative_on_gamma(mesh, u_d, gamma),
                        normal_derivative_on_gamma(mesh, u_n, gamma))


def _gamma_rows(mesh: Mesh, trace: BoundaryTrace) -> np.ndarray:
    # position of each trace node inside mesh.boundary_nodes(GAMMA)
    order = np.argsort(mesh.boundary_nodes(Marker.GAMMA))
    pos = np.searchsorted(mesh.boundary_nodes(Marker.GAMMA)[order], trace.node_ids)
    return order[pos]


def solve_descent_field(mesh: Mesh, kernel_values, gamma_trace: BoundaryTrace) -> np.ndarray:
    """H1 descent field: grad-grad form, V = 0 on Sigma, Gamma load -G nu weighted by the trace.

    The minus sign makes V a descent direction for dJ[V] = int_Gamma G nu.V.
    """
    k = np.asarray(kernel_values, dtype=float)
    sigma = mesh.boundary_nodes(Marker.SIGMA)
    out = np.zeros((mesh.n_nodes, 2))
    if not np.any(k):
        return out
    load = -(gamma_trace.weights * k)[:, None] * gamma_trace.normals
    stiff = _stiffness(mesh)
    for j in range(2):
        rhs = np.zeros(mesh.n_nodes)
        rhs[gamma_trace.node_ids] = load[:, j]
        out[:, j] = solve_spd(SparseSystem(stiff, rhs, sigma, np.zeros(len(sigma))))
    return out


def boundary_field(mesh: Mesh, kernel_values, gamma_trace: BoundaryTrace) -> np.ndarray:
    """Normal velocity -G along nu on Gamma, extended harmonically with zero on Sigma."""
    vn = -np.asarray(kernel_values, dtype=float)
    out = np.zeros((mesh.n_nodes, 2))
    if not np.any(vn):
        return out
    rows = np.empty((len(gamma_trace), 2))
    rows[_gamma_rows(mesh, gamma_trace)] = vn[:, None] * gamma_trace.normals
    return harmonic_extension(mesh, rows)


def step_size(J: float, v: np.ndarray, cfg: DescentConfig, mesh: Mesh) -> float:
    norm = h1_norm_sq(mesh, v)
    if not norm > 1e-30:
        raise DegenerateFieldError(f"descent field has H1 norm^2 {norm:.3e}")
    return cfg.c_step * J / norm


@dataclass(frozen=True, eq=False)
class StepOutcome:
    state: DescentState
    dt: float
    backtracks: int = 0
    field: np.ndarray | None = None

    @property
    def moved(self) -> bool:
        return self.dt > 0


def _backtrack(state: DescentState, v: np.ndarray, cfg: DescentConfig) -> StepOutcome:
    dt = step_size(state.J, v, cfg, state.mesh)
    tries = 0
    while dt >= cfg.dt_min:
        try:
            mesh = deform_mesh(state.mesh, v, dt)
        except ReversedTriangleError:
            mesh = None
        if mesh is not None:
            new = evaluate_state(mesh, state.f_sigma, state.g_sigma)
            if new.J < state.J:
                return StepOutcome(new, dt, tries, v)
        dt *= cfg.backtrack_factor
        tries += 1
    raise StalledError(f"no acceptable step above dt_min={cfg.dt_min:g} after {tries} reductions")


def _step(state: DescentState, cfg: DescentConfig, build) -> StepOutcome:
    kernel = kernel_on_gamma(state.dn_d, state.dn_n, cfg.kernel)
    v = build(state.mesh, kernel, state.gamma)
    if not np.any(v):
        return StepOutcome(state, 0.0, 0, v)
    return _backtrack(state, v, cfg)


def qssts_step(state: DescentState, cfg: DescentConfig) -> StepOutcome:
    """One domain-variation iteration with backtracking on J increase or element inversion."""
    return _step(state, cfg, solve_descent_field)


def boundary_variation_step(state: DescentState, cfg: DescentConfig) -> StepOutcome:
    """One boundary-variation iteration: Gamma moves by -G nu, the interior follows harmonically."""
    return _step(state, cfg, boundary_field)


@dataclass(eq=False)
class RunResult:
    history: list[IterationRecord]
    state: DescentState
    initial_J: float
    initial_hausdorff: float | None
    gamma_history: list[np.ndarray] = field(default_factory=list)
    stalled: bool = False

    @property
    def trace(self) -> BoundaryTrace:
        return self.state.gamma

    @property
    def dts(self) -> np.ndarray:
        return np.array([r.dt for r in self.history])


def run_inversion(cfg: DescentConfig, mesh0: Mesh, f_sigma, g_sigma,
                  reference: BoundaryTrace | None = None) -> RunResult:
    """Iterate until max_iters, J <= target_cost, or a fixed point.

    On a stall the partial result rides on the raised StalledError.
    """
    step = qssts_step if cfg.algorithm is Algorithm.DOMAIN_VARIATION else boundary_variation_step
    state = evaluate_state(mesh0, f_sigma, g_sigma)
    h0 = hausdorff_distance(state.gamma, reference) if reference is not None else None
    result = RunResult([], state, state.J, h0, [state.gamma.positions.copy()])
    for k in range(1, cfg.max_iters + 1):
        if state.J <= cfg.target_cost:
            break
        try:
            out = step(state, cfg)
        except StalledError as exc:
            result.stalled = True
            exc.result = result
            raise
        if not out.moved:
            break
        state = out.state
        result.state = state
        result.gamma_history.append(state.gamma.positions.copy())
        result.history.append(IterationRecord(
            k, state.J, out.dt,
            hausdorff_distance(state.gamma, reference) if reference is not None else None,
            min_signed_area(state.mesh), state.a1_margin))
    return result


HISTORY_HEADER = ["iter", "J", "dt", "hausdorff", "min_area", "a1_margin"]


def write_history(path, history: list[IterationRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for r in history:
            cells = [r.J, r.dt, r.hausdorff, r.min_area, r.a1_margin]
            w.writerow([r.iter] + ["" if c is None else repr(float(c)) for c in cells])


def svg_snapshot(curves: list[np.ndarray], reference: np.ndarray | None = None, size: int = 480,
                 extent: float = 1.0) -> str:
    """Plain SVG overlay of closed polylines; the reference is drawn dashed."""
    def pts(c):
        s = size / (2 * extent)
        return " ".join(f"{(x + extent) * s:.3f},{(extent - y) * s:.3f}" for x, y in np.asarray(c))

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<circle cx="{size / 2}" cy="{size / 2}" r="{size / 2 - 1}" fill="none" stroke="#999"/>']
    if reference is not None:
        lines.append(f'<polygon points="{pts(reference)}" fill="none" stroke="#c33" stroke-dasharray="4 3"/>')
    for i, c in enumerate(curves):
        shade = int(200 * (1 - (i + 1) / len(curves)))
        lines.append(f'<polygon points="{pts(c)}" fill="none" stroke="rgb({shade},{shade},255)"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


__all__ = [
    "Algorithm", "DescentConfig", "DescentState", "IterationRecord", "RunResult", "StepOutcome",
    "boundary_field", "boundary_variation_step", "evaluate_state", "qssts_step", "run_inversion",
    "solve_descent_field", "step_size", "svg_snapshot", "write_history",
]
