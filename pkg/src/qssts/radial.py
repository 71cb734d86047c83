"""Closed-form concentric dynamics in 2D and 3D and a barrier-aware RK4 integrator."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

from .errors import DomainError, StepUnderflowError


@dataclass(frozen=True)
class RadialConfig:
    R: float = 1.0
    r_star: float = 0.5
    f: float = 1.0
    dimension: int = 2

    def __post_init__(self):
        if not 0 < self.r_star < self.R:
            raise ValueError("need 0 < r_star < R")
        if not self.f > 0:
            raise ValueError("f must be positive")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @property
    def g(self) -> float:
        R, rs, f = self.R, self.r_star, self.f
        if self.dimension == 2:
            return f / (R * math.log(R / rs))
        return f * rs / (R * (R - rs))


@dataclass(frozen=True)
class RadialState:
    t: float
    r: float


def _check_rho(rho: float, r: float, cfg: RadialConfig) -> None:
    if not r <= rho <= cfg.R:
        raise DomainError(f"rho={rho} outside [{r}, {cfg.R}]")


def exact_uD(rho: float, r: float, cfg: RadialConfig) -> float:
    """Dirichlet state for a Gamma of radius r: f on Sigma, zero on Gamma."""
    _check_rho(rho, r, cfg)
    if cfg.dimension == 2:
        return cfg.f * math.log(rho / r) / math.log(cfg.R / r)
    return cfg.f * cfg.R / (cfg.R - r) * (1 - r / rho)


def exact_uN(rho: float, r: float, cfg: RadialConfig) -> float:
    """Neumann-data state: flux g (generated by r_star) on Sigma, zero on Gamma."""
    _check_rho(rho, r, cfg)
    if cfg.dimension == 2:
        return cfg.f * math.log(rho / r) / math.log(cfg.R / cfg.r_star)
    return cfg.g * cfg.R**2 * (1 / r - 1 / rho)


def _vn(r: float, cfg: RadialConfig) -> float:
    R, rs, f = cfg.R, cfg.r_star, cfg.f
    if cfg.dimension == 2:
        return -f * math.log(r / rs) / (r * math.log(R / r) * math.log(R / rs))
    return -f * R**2 * (r - rs) / (r**2 * (R - r) * (R - rs))


def vn(r: float, cfg: RadialConfig) -> float:
    """Normal velocity of Gamma at radius r (negative means shrinking)."""
    if not cfg.r_star <= r < cfg.R:
        raise DomainError(f"r={r} outside [{cfg.r_star}, {cfg.R})")
    return _vn(r, cfg)


def ivp_rhs(t: float, r: float, cfg: RadialConfig) -> float:
    # autonomous: f and g are constants
    return vn(r, cfg)


def peano_bounds(cfg: RadialConfig, R0: float, T: float) -> tuple[float, float]:
    """Speed bound K0 on [r_star, R0] and existence time T0 for the planar problem."""
    if not cfg.r_star < R0 < cfg.R:
        raise DomainError("need r_star < R0 < R")
    k0 = cfg.f / (cfg.r_star * math.log(cfg.R / R0))
    return k0, min(T, (cfg.R - cfg.r_star) / k0)


def rk4_step(fun: Callable[[float], float], y: float, h: float) -> float:
    k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def _advance(cfg: RadialConfig, r: float, h: float, floor: float) -> list[tuple[float, float]]:
    """Cover a step of length h from r, halving sub-steps that would leave (r_star, R).

    Returns the (sub-step, new r) sequence actually taken.
    """
    out = []
    left = h
    sub = h
    while left > 0:
        sub = min(sub, left)
        try:
            nxt = rk4_step(lambda y: vn(y, cfg), r, sub)
        except DomainError:
            nxt = -math.inf
        if not cfg.r_star < nxt < cfg.R:
            sub *= 0.5
            if sub < floor:
                raise StepUnderflowError(f"step fell below {floor:.3e} near r={r!r}")
            continue
        r = nxt
        left -= sub
        if left <= 1e-15 * h:
            left = 0.0
        out.append((sub, r))
    return out


def integrate_radius(cfg: RadialConfig, r0: float, dt: float, T: float) -> list[RadialState]:
    """Classical RK4 from r0 to time T; steps that would cross r_star are halved."""
    if not cfg.r_star < r0 < cfg.R:
        raise DomainError("r0 must lie in (r_star, R)")
    if not dt > 0:
        raise ValueError("dt must be positive")
    floor = 1e-12 * T
    t, r = 0.0, r0
    traj = [RadialState(t, r)]
    n = int(math.ceil(T / dt - 1e-9))
    for i in range(n):
        h = min(dt, T - t) if i == n - 1 else dt
        for sub, r in _advance(cfg, r, h, floor):
            t += sub
        traj.append(RadialState(t, r))
    return traj


def integrate_schedule(cfg: RadialConfig, r0: float, dts) -> list[RadialState]:
    """RK4 over a prescribed sequence of step lengths (one state per entry)."""
    t, r = 0.0, r0
    traj = [RadialState(t, r)]
    total = float(sum(dts))
    for h in dts:
        for sub, r in _advance(cfg, r, float(h), 1e-12 * total):
            t += sub
        traj.append(RadialState(t, r))
    return traj


def integrate_euler(cfg: RadialConfig, r0: float, dt: float, T: float) -> float:
    """Explicit Euler to time T; returns r(T). Used as an independent comparator."""
    n = int(math.ceil(T / dt - 1e-9))
    h = T / n
    r = r0
    for _ in range(n):
        r = r + h * vn(r, cfg)
    return r


def write_trajectory(path, traj: list[RadialState], cfg: RadialConfig) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "r", "vn"])
        for s in traj:
            w.writerow([repr(float(s.t)), repr(float(s.r)), repr(float(vn(s.r, cfg)))])
