"""P1 finite elements on a :class:`~qssts.mesh.Mesh`.

Scalar fields are arrays of shape ``(n_nodes,)`` and vector fields arrays of
shape ``(n_nodes, 2)``, indexed by mesh node id. Boundary data on Sigma
(``f_sigma``, ``g_sigma``) are ordered like
``extract_boundary_trace(mesh, Marker.SIGMA).node_ids``; a scalar is
broadcast to every Sigma node.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, SolverError
from .mesh import BoundaryTrace, Marker, Mesh, extract_boundary_trace

RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Symmetric system ``matrix @ x = rhs`` with essential constraints ``x[constrained] = values``."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))


def assemble_stiffness(mesh: Mesh) -> SparseSystem:
    """Stiffness matrix of the Laplacian with zero load and no constraints."""
    return SparseSystem(_stiffness(mesh), np.zeros(mesh.n_nodes))


def _stiffness(mesh: Mesh) -> sp.csr_matrix:
    cached = mesh.__dict__.get("_stiffness")
    if cached is None:
        g = mesh.basis_gradients
        local = mesh.areas[:, None, None] * np.einsum("eik,ejk->eij", g, g)
        cached = _scatter(mesh, local)
        mesh.__dict__["_stiffness"] = cached
    return cached


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _scatter(mesh, mesh.areas[:, None, None] * ref[None])


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def pcg(a: sp.spmatrix, b: np.ndarray, rtol: float = RTOL, maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients from a zero initial guess."""
    n = len(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    if maxiter is None:
        maxiter = int(50 * np.sqrt(n)) + 1000
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix diagonal is not positive")
    dinv = 1.0 / diag
    x = np.zeros(n)
    r = b.copy()
    res = 1.0
    it = 0
    # restart from the true residual if the recursive one has drifted
    for _ in range(3):
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while it < maxiter:
            ap = a @ p
            pap = p @ ap
            if not pap > 0:
                raise SolverError("matrix is not positive definite", res)
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            it += 1
            res = float(np.linalg.norm(r)) / bnorm
            if res <= rtol:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - a @ x
        res = float(np.linalg.norm(r)) / bnorm
        if res <= rtol:
            return x
    raise SolverError(f"CG stopped after {it} iterations at relative residual {res:.3e}", res)


def solve_spd(system: SparseSystem, rtol: float = RTOL) -> np.ndarray:
    """Eliminate the constraints and solve the reduced SPD system by CG."""
    a = system.matrix.tocsr()
    n = a.shape[0]
    c = np.asarray(system.constrained, dtype=np.int64)
    if len(c) == 0:
        ones = np.ones(n)
        if np.linalg.norm(a @ ones) <= 1e-12 * abs(a).sum():
            raise SolverError("unconstrained system has constants in its kernel")
    x = np.zeros(n)
    x[c] = system.values
    free = np.ones(n, dtype=bool)
    free[c] = False
    a_free = a[free]
    b = system.rhs[free] - a_free[:, c] @ x[c]
    x[free] = pcg(a_free[:, free], b, rtol)
    return x


def sigma_values(mesh: Mesh, values) -> np.ndarray:
    ids = extract_boundary_trace(mesh, Marker.SIGMA).node_ids
    v = np.broadcast_to(np.asarray(values, dtype=float), ids.shape).copy()
    return v


def solve_state_dirichlet(mesh: Mesh, f_sigma) -> np.ndarray:
    """Harmonic u with u = f on Sigma and u = 0 on Gamma."""
    sigma = extract_boundary_trace(mesh, Marker.SIGMA)
    gamma = mesh.boundary_nodes(Marker.GAMMA)
    f = sigma_values(mesh, f_sigma)
    system = SparseSystem(_stiffness(mesh), np.zeros(mesh.n_nodes),
                          np.concatenate([sigma.node_ids, gamma]), np.concatenate([f, np.zeros(len(gamma))]))
    return solve_spd(system)


def solve_state_mixed(mesh: Mesh, g_sigma) -> np.ndarray:
    """Harmonic u with flux g on Sigma (trapezoidal boundary load) and u = 0 on Gamma."""
    sigma = extract_boundary_trace(mesh, Marker.SIGMA)
    gamma = mesh.boundary_nodes(Marker.GAMMA)
    rhs = np.zeros(mesh.n_nodes)
    rhs[sigma.node_ids] = sigma.weights * sigma_values(mesh, g_sigma)
    return solve_spd(SparseSystem(_stiffness(mesh), rhs, gamma, np.zeros(len(gamma))))


def element_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    return np.einsum("eik,ei->ek", mesh.basis_gradients, np.asarray(u)[mesh.triangles])


def nodal_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Area-weighted average of the constant element gradients around each node."""
    ge = element_gradients(mesh, u)
    acc = np.zeros((mesh.n_nodes, 2))
    wsum = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], mesh.areas[:, None] * ge)
        np.add.at(wsum, mesh.triangles[:, k], mesh.areas)
    return acc / np.where(wsum > 0, wsum, 1.0)[:, None]


def _patches(mesh: Mesh, node_ids: np.ndarray, rings: int = 2) -> np.ndarray:
    """Node ids within ``rings`` edge hops of each node, padded with -1."""
    key = ("patch", rings, node_ids.tobytes())
    cache = mesh.connectivity_cache
    if key not in cache:
        t = mesh.triangles
        n = mesh.n_nodes
        adj = sp.csr_matrix((np.ones(9 * len(t)), (np.repeat(t, 3, axis=1).ravel(), np.tile(t, (1, 3)).ravel())),
                            shape=(n, n))
        reach = adj
        for _ in range(rings - 1):
            reach = reach @ adj
        reach = reach[node_ids].tocsr()
        width = int(np.diff(reach.indptr).max())
        out = -np.ones((len(node_ids), width), dtype=np.int64)
        for k in range(len(node_ids)):
            cols = reach.indices[reach.indptr[k]:reach.indptr[k + 1]]
            out[k, :len(cols)] = np.sort(cols)
        cache[key] = out
    return cache[key]


def _patch_gradients(mesh: Mesh, u: np.ndarray, node_ids: np.ndarray) -> np.ndarray:
    """Gradient at each node of a least-squares quadratic fitted to u over its 2-ring."""
    idx = _patches(mesh, node_ids)
    valid = idx >= 0
    safe = np.where(valid, idx, 0)
    d = mesh.nodes[safe] - mesh.nodes[node_ids][:, None, :]
    scale = np.sqrt(np.max(np.where(valid, np.einsum("pqk,pqk->pq", d, d), 0.0), axis=1))
    d = d / scale[:, None, None]
    x, y = d[..., 0], d[..., 1]
    basis = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1) * valid[..., None]
    vals = np.asarray(u)[safe] * valid
    normal = np.einsum("pqi,pqj->pij", basis, basis)
    coef = np.linalg.solve(normal, np.einsum("pqi,pq->pi", basis, vals)[..., None])[..., 0]
    return coef[:, 1:3] / scale[:, None]


def _averaged_gradients(mesh: Mesh, u: np.ndarray, node_ids: np.ndarray) -> np.ndarray:
    ge = element_gradients(mesh, u)
    local = -np.ones(mesh.n_nodes, dtype=np.int64)
    local[node_ids] = np.arange(len(node_ids))
    acc = np.zeros((len(node_ids), 2))
    wsum = np.zeros(len(node_ids))
    for k in range(3):
        hit = local[mesh.triangles[:, k]]
        sel = hit >= 0
        np.add.at(acc, hit[sel], mesh.areas[sel, None] * ge[sel])
        np.add.at(wsum, hit[sel], mesh.areas[sel])
    return acc / wsum[:, None]


def normal_derivative(mesh: Mesh, u: np.ndarray, trace: BoundaryTrace, method: str = "patch") -> np.ndarray:
    """Recovered ``grad u . n`` at the trace nodes, with the trace's normals.

    ``method="patch"`` (default) differentiates a local quadratic least-squares
    fit and is second-order accurate on smooth solutions; ``"average"`` uses the
    area-weighted mean of the adjacent element gradients (first order).
    """
    if method == "patch":
        grad = _patch_gradients(mesh, u, trace.node_ids)
    elif method == "average":
        grad = _averaged_gradients(mesh, u, trace.node_ids)
    else:
        raise ValueError(f"unknown recovery method {method!r}")
    return np.einsum("ij,ij->i", grad, trace.normals)


def normal_derivative_on_gamma(mesh: Mesh, u: np.ndarray, trace: BoundaryTrace | None = None,
                               method: str = "patch") -> np.ndarray:
    """``du/dnu`` on Gamma, nu pointing into the domain (away from the inclusion)."""
    if trace is None:
        trace = extract_boundary_trace(mesh, Marker.GAMMA)
    if trace.marker is not Marker.GAMMA:
        raise ValueError("trace must be the Gamma trace")
    return normal_derivative(mesh, u, trace, method)


def h1_seminorm(mesh: Mesh, v: np.ndarray) -> float:
    """Squared H1 seminorm, summed over components."""
    k = _stiffness(mesh)
    v = np.asarray(v, dtype=float).reshape(mesh.n_nodes, -1)
    return float(sum(c @ (k @ c) for c in v.T))


def h1_norm_sq(mesh: Mesh, v: np.ndarray) -> float:
    """Squared full H1 norm (gradient plus L2 part), summed over components."""
    m = assemble_mass(mesh)
    v = np.asarray(v, dtype=float).reshape(mesh.n_nodes, -1)
    return h1_seminorm(mesh, v) + float(sum(c @ (m @ c) for c in v.T))


def harmonic_extension(mesh: Mesh, gamma_values: np.ndarray) -> np.ndarray:
    """Componentwise discrete harmonic extension of Gamma data with zero on Sigma.

    ``gamma_values`` has one row per Gamma node, ordered like
    ``mesh.boundary_nodes(Marker.GAMMA)``.
    """
    gamma = mesh.boundary_nodes(Marker.GAMMA)
    sigma = mesh.boundary_nodes(Marker.SIGMA)
    vals = np.asarray(gamma_values, dtype=float).reshape(len(gamma), -1)
    k = _stiffness(mesh)
    c = np.concatenate([gamma, sigma])
    out = np.zeros((mesh.n_nodes, vals.shape[1]))
    for j in range(vals.shape[1]):
        values = np.concatenate([vals[:, j], np.zeros(len(sigma))])
        out[:, j] = solve_spd(SparseSystem(k, np.zeros(mesh.n_nodes), c, values))
    return out


# ---------------------------------------------------------------- field CSV

def write_field(path, values: np.ndarray) -> None:
    v = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if v.ndim == 1:
            w.writerow(["node_id", "value"])
            w.writerows([i, repr(x)] for i, x in enumerate(v.tolist()))
        else:
            w.writerow(["node_id", "vx", "vy"])
            w.writerows([i, repr(a), repr(b)] for i, (a, b) in enumerate(v.tolist()))


def read_field(path) -> np.ndarray:
    rows = Path(path).read_text().splitlines()
    if not rows:
        raise ParseError("empty field file", 1)
    header = rows[0].strip().split(",")
    if header not in (["node_id", "value"], ["node_id", "vx", "vy"]):
        raise ParseError(f"unexpected header {rows[0]!r}", 1)
    out = []
    for lineno, line in enumerate(rows[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"expected {len(header)} columns", lineno)
        try:
            if int(parts[0]) != len(out):
                raise ParseError("node ids must be consecutive from 0", lineno)
            out.append([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise ParseError(f"malformed row ({exc})", lineno) from exc
    a = np.array(out, dtype=float).reshape(len(out), len(header) - 1)
    return a[:, 0] if a.shape[1] == 1 else a
