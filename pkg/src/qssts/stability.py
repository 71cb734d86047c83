"""Linear stability of concentric configurations under cos(k theta) perturbations of Gamma."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StepUnderflowError


@dataclass(frozen=True)
class StabilityConfig:
    r_sigma: float = 1.0
    f: float = 1.0
    g: float = 1.0 / math.log(2.0)

    def __post_init__(self):
        if not (self.r_sigma > 0 and self.f > 0 and self.g > 0):
            raise ValueError("r_sigma, f and g must be positive")


@dataclass(frozen=True)
class ModeState:
    k: int
    rho0: float
    amplitude: float
    t: float = 0.0


def _check(rho0: float, cfg: StabilityConfig) -> None:
    if not 0 < rho0 < cfg.r_sigma:
        raise DomainError(f"rho0={rho0} outside (0, {cfg.r_sigma})")


def coefficients(rho0: float, cfg: StabilityConfig) -> tuple[float, float]:
    """(C_D, C_N): radial flux constants of the unperturbed Dirichlet and Neumann states."""
    _check(rho0, cfg)
    return cfg.f / math.log(cfg.r_sigma / rho0), cfg.g * cfg.r_sigma


def rho0_rhs(rho0: float, cfg: StabilityConfig) -> float:
    c_d, c_n = coefficients(rho0, cfg)
    return (c_n - c_d) / rho0


def stationary_radius(cfg: StabilityConfig) -> float:
    """Root of rho0_rhs, where C_D = C_N."""
    return cfg.r_sigma * math.exp(-cfg.f / (cfg.g * cfg.r_sigma))


def determinants(k: int, rho0: float, cfg: StabilityConfig) -> tuple[float, float]:
    _check(rho0, cfg)
    q = (cfg.r_sigma / rho0) ** k
    return q - 1 / q, q + 1 / q


def tilde_coefficients(k: int, rho0: float, cfg: StabilityConfig) -> tuple[float, float, float, float]:
    """Coefficients of r^k and r^-k in the first-order Dirichlet and Neumann corrections.

    Both solve a 2x2 system: zero value (resp. zero flux) on Sigma, and on Gamma
    a_X rho0^k + b_X rho0^-k = -C_X / rho0.
    """
    c_d, c_n = coefficients(rho0, cfg)
    det_d, det_n = determinants(k, rho0, cfg)
    rs = cfg.r_sigma
    s_d = c_d / (rho0 * det_d)
    s_n = -c_n / (rho0 * det_n)
    return s_d * rs**-k, -s_d * rs**k, s_n * rs**-k, s_n * rs**k


def tilde_systems(k: int, rho0: float, cfg: StabilityConfig):
    """The two 2x2 systems (matrix, rhs) solved by :func:`tilde_coefficients`."""
    c_d, c_n = coefficients(rho0, cfg)
    rs = cfg.r_sigma
    gam = [rho0**k, rho0**-k]
    dirichlet = np.array([[rs**k, rs**-k], gam])
    neumann = np.array([[k * rs ** (k - 1), -k * rs ** (-k - 1)], gam])
    return (dirichlet, np.array([0.0, -c_d / rho0])), (neumann, np.array([0.0, -c_n / rho0]))


def lambda_k(k: int, rho0: float, cfg: StabilityConfig) -> float:
    """Growth rate of mode k at background radius rho0."""
    c_d, c_n = coefficients(rho0, cfg)
    det_d, det_n = determinants(k, rho0, cfg)
    return -(k / rho0**2) * (c_d * det_n / det_d + cfg.g * det_d / det_n) + (c_d - c_n) / rho0**2


def spectrum(ks, rho0: float, cfg: StabilityConfig) -> list[tuple[int, float]]:
    return [(int(k), lambda_k(int(k), rho0, cfg)) for k in ks]


def _rhs(y: np.ndarray, k: int, cfg: StabilityConfig) -> np.ndarray:
    return np.array([rho0_rhs(y[0], cfg), lambda_k(k, y[0], cfg) * y[1]])


def evolve_mode(mode: ModeState, cfg: StabilityConfig, dt: float, T: float) -> list[ModeState]:
    """RK4 for the coupled background radius and mode amplitude.

    Sub-steps that would push rho0 out of (0, r_sigma) are halved.
    """
    if mode.k < 1:
        raise ValueError("k must be >= 1")
    _check(mode.rho0, cfg)
    if not dt > 0:
        raise ValueError("dt must be positive")
    floor = 1e-12 * T
    y = np.array([mode.rho0, mode.amplitude], dtype=float)
    t = mode.t
    out = [mode]
    end = mode.t + T
    while t < end - 1e-15 * T:
        h = min(dt, end - t)
        while True:
            try:
                k1 = _rhs(y, mode.k, cfg)
                k2 = _rhs(y + 0.5 * h * k1, mode.k, cfg)
                k3 = _rhs(y + 0.5 * h * k2, mode.k, cfg)
                k4 = _rhs(y + h * k3, mode.k, cfg)
                nxt = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
                _check(nxt[0], cfg)
                break
            except DomainError:
                h *= 0.5
                if h < floor:
                    raise StepUnderflowError(f"step fell below {floor:.3e} at rho0={y[0]!r}")
        y = nxt
        t += h
        out.append(ModeState(mode.k, float(y[0]), float(y[1]), t))
    return out


def write_spectrum(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "lambda"])
        for k, lam in rows:
            w.writerow([k, repr(float(lam))])


def write_mode(path, traj: list[ModeState]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "rho0", "amplitude"])
        for s in traj:
            w.writerow([repr(float(s.t)), repr(float(s.rho0)), repr(float(s.amplitude))])
