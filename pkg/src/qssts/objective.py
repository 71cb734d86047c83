"""Energy-gap cost, shape-gradient kernels and the flux positivity monitor."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .fem import element_gradients, normal_derivative, sigma_values
from .mesh import Marker, Mesh, extract_boundary_trace


class KernelMode(str, Enum):
    FULL_G = "g_full"
    G_MINUS = "g_minus"
    G_PLUS = "g_plus"


def cost_domain(mesh: Mesh, u_d: np.ndarray, u_n: np.ndarray) -> float:
    """Integral over the domain of |grad(u_d - u_n)|^2 (exact for P1)."""
    g = element_gradients(mesh, np.asarray(u_d) - np.asarray(u_n))
    return float(np.sum(mesh.areas * np.einsum("ek,ek->e", g, g)))


def cost_boundary(mesh: Mesh, u_d: np.ndarray, u_n: np.ndarray, f_sigma, g_sigma) -> float:
    """Boundary form of the cost: lumped integral over Sigma of (g - du_d/dn)(u_n - f)."""
    sigma = extract_boundary_trace(mesh, Marker.SIGMA)
    flux = normal_derivative(mesh, u_d, sigma)
    f = sigma_values(mesh, f_sigma)
    g = sigma_values(mesh, g_sigma)
    return float(np.sum(sigma.weights * (g - flux) * (np.asarray(u_n)[sigma.node_ids] - f)))


def kernel_on_gamma(dn_d, dn_n, mode: KernelMode) -> np.ndarray:
    dn_d = np.asarray(dn_d, dtype=float)
    dn_n = np.asarray(dn_n, dtype=float)
    if dn_d.shape != dn_n.shape:
        raise ValueError("flux arrays must have equal length")
    mode = KernelMode(mode)
    if mode is KernelMode.FULL_G:
        return dn_d**2 - dn_n**2
    if mode is KernelMode.G_MINUS:
        return dn_d - dn_n
    return dn_d + dn_n


def check_condition_a1(dn_d, dn_n) -> tuple[bool, float]:
    """Positivity of du_D/dnu - du_N/dnu on Gamma; returns (holds, minimum)."""
    margin = float(np.min(np.asarray(dn_d, dtype=float) - np.asarray(dn_n, dtype=float)))
    return margin > 0, margin
