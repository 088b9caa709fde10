"""Dual problem on the lattice: divergence-free projection, dual values, gaps and
the Lipschitz-dual norm computed by linear programming."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from .grid import (
    GridDomain,
    SymTensorField,
    VectorField,
    divergence_array,
    frob_norm,
    from_z,
    interior_dofs,
    strain_matrix_z,
    sym_gradient_array,
    sym_inner,
    to_z,
)
from .integrands import Integrand


class InfeasibleDual(ValueError):
    pass


@lru_cache(maxsize=16)
def _div_system(nx: int, ny: int, h: float):
    dom = GridDomain(nx, ny, h)
    B = strain_matrix_z(dom)[:, interior_dofs(dom)].T.tocsr()  # interior rows of the adjoint
    lu = spla.splu((B @ B.T).tocsc())
    return B, lu


def div_residual(sigma: SymTensorField) -> float:
    """Discrete L2 norm over interior nodes of div sigma."""
    d = divergence_array(sigma.values, sigma.domain.h)[sigma.domain.interior_mask]
    return float(math.sqrt(np.sum(d * d) * sigma.domain.cell_area))


def project_div_free(sigma: SymTensorField, grid: GridDomain | None = None, refine: int = 1) -> SymTensorField:
    """Orthogonal projection (cell weights h^2, Frobenius pairing) onto interior-divergence-free fields.

    Works in the orthonormal chart, so symmetry is kept exactly.
    """
    dom = sigma.domain
    if grid is not None and grid != dom:
        raise ValueError("sigma lives on a different grid")
    B, lu = _div_system(dom.nx, dom.ny, float(dom.h))
    z = to_z(sigma.values).ravel()
    for _ in range(1 + refine):
        z = z - B.T @ lu.solve(B @ z)
    return SymTensorField(dom, from_z(z.reshape(-1, 3)).reshape(*dom.cell_shape, 3))


@dataclass(frozen=True)
class DualCandidate:
    chi: SymTensorField
    div_residual: float
    feasible: bool
    value: float


def dual_value(chi: SymTensorField, u0: VectorField, f: Integrand, tol: float = 1e-8) -> float:
    """sum <chi, eps(u0)> h^2 - sum f*(chi) h^2, or -inf if chi is not admissible."""
    return dual_candidate(chi, u0, f, tol).value


def dual_candidate(chi: SymTensorField, u0: VectorField, f: Integrand, tol: float = 1e-8) -> DualCandidate:
    dom = chi.domain
    if u0.domain != dom:
        raise ValueError("chi and u0 live on different grids")
    res = div_residual(chi)
    norms = frob_norm(chi.values)
    inside = bool(np.all(norms <= f.c_inf))
    if res > tol or not inside:
        return DualCandidate(chi, res, False, -math.inf)
    conj = f.conjugate(norms)
    if np.any(np.isinf(conj)):
        return DualCandidate(chi, res, False, -math.inf)
    eps0 = sym_gradient_array(u0.values, dom.h)
    val = float((np.sum(sym_inner(chi.values, eps0)) - np.sum(conj)) * dom.cell_area)
    return DualCandidate(chi, res, True, val)


def duality_gap(primal_value: float, cand: DualCandidate) -> float:
    if not cand.feasible:
        raise InfeasibleDual(f"candidate infeasible (div residual {cand.div_residual:.2e})")
    return primal_value - cand.value


def admissible_stress(sigma: SymTensorField, f: Integrand) -> SymTensorField:
    """Project onto div-free fields, then shrink radially into the ball |chi| <= c_inf if needed."""
    chi = project_div_free(sigma)
    if math.isfinite(f.c_inf):
        top = float(np.max(frob_norm(chi.values)))
        if top > f.c_inf:
            chi = chi * (f.c_inf / top * (1.0 - 1e-12))
    return chi


def gap_table(solutions, f: Integrand, u0: VectorField) -> list[dict]:
    """Rows (j, primal, dual, gap) along a viscosity sequence.

    Two admissible candidates are built per j: the projected stabilized
    stress sigma_j and the projected unstabilized stress f'(eps(v_j)). Both
    give valid lower bounds; ``dual`` is the larger one.
    """
    from .solver import stress

    rows = []
    for s in solutions:
        vals = {}
        res = 0.0
        for key, jj in (("dual_sigma", s.j), ("dual_tau", None)):
            sig = SymTensorField(s.v.domain, stress(s.v, f, jj))
            cand = dual_candidate(admissible_stress(sig, f), u0, f)
            vals[key] = cand.value
            res = max(res, cand.div_residual)
        dual = max(vals.values())
        gap = s.energy_F - dual if math.isfinite(dual) else math.inf
        rows.append({"j": s.j, "primal": s.energy_F, "dual": dual, "gap": gap, **vals, "div_residual": res})
    return rows


# ------------------------------------------------------------------ Lipschitz-dual norm

@lru_cache(maxsize=16)
def _edge_matrix(nx: int, ny: int):
    """Signed incidence of lattice edges restricted to interior nodes."""
    idx = -np.ones((nx, ny), dtype=int)
    interior = np.zeros((nx, ny), dtype=bool)
    interior[1:-1, 1:-1] = True
    idx[interior] = np.arange(int(interior.sum()))
    rows, cols, vals = [], [], []
    e = 0
    for (a0, a1), (b0, b1) in [((slice(0, nx - 1), slice(None)), (slice(1, nx), slice(None))),
                               ((slice(None), slice(0, ny - 1)), (slice(None), slice(1, ny)))]:
        ia, ib = idx[a0, a1].ravel(), idx[b0, b1].ravel()
        keep = (ia >= 0) | (ib >= 0)
        ia, ib = ia[keep], ib[keep]
        ids = np.arange(e, e + ia.size)
        for node, sgn in ((ib, 1.0), (ia, -1.0)):
            m = node >= 0
            rows.append(ids[m]); cols.append(node[m]); vals.append(np.full(int(m.sum()), sgn))
        e += ia.size
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(e, int(interior.sum()))).tocsr()
    return A, interior


def lip_dual_norm(T, grid: GridDomain, return_potential: bool = False):
    """max sum_nodes T . phi h^2 over phi = 0 on the boundary with |grad phi|_max <= 1 per cell.

    The gradient of the bilinear interpolant on a cell is extremal on the cell
    edges, so the entrywise max-norm bound per cell is exactly
    ``|phi(a) - phi(b)| <= h`` on every lattice edge and component. The LP
    separates over components. ``T`` is ``(nx, ny)`` or ``(nx, ny, 2)``.
    """
    arr = np.asarray(T.values if isinstance(T, VectorField) else T, dtype=float)
    if arr.shape[:2] != grid.node_shape:
        raise ValueError("T does not match the grid")
    comps = arr.reshape(grid.nx, grid.ny, -1)
    A, interior = _edge_matrix(grid.nx, grid.ny)
    total = 0.0
    pots = np.zeros(comps.shape)
    if A.shape[1] == 0:
        return (0.0, pots) if return_potential else 0.0
    A_ub = sp.vstack([A, -A]).tocsr()
    b_ub = np.full(A_ub.shape[0], grid.h)
    for c in range(comps.shape[-1]):
        t = comps[..., c][interior]
        if not np.any(t):
            continue
        res = linprog(-grid.cell_area * t, A_ub=A_ub, b_ub=b_ub, bounds=(None, None), method="highs")
        if res.status != 0:
            raise RuntimeError(f"dual-norm LP failed: {res.message}")
        total += -res.fun
        pots[..., c][interior] = res.x
    total = max(total, 0.0)
    return (total, pots.reshape(arr.shape)) if return_potential else total


def l1_norm(v, grid: GridDomain, component_norm: str = "l1") -> float:
    """sum_nodes |v| h^2; ``l1`` matches the LP's max-norm constraint, ``l2`` is Euclidean."""
    arr = np.asarray(v.values if isinstance(v, VectorField) else v, dtype=float).reshape(grid.nx, grid.ny, -1)
    mag = np.sum(np.abs(arr), axis=-1) if component_norm == "l1" else np.linalg.norm(arr, axis=-1)
    return float(np.sum(mag) * grid.cell_area)


def difference_quotient_functional(v, grid: GridDomain, axis: int, h_steps: int = 1) -> np.ndarray:
    """Delta_{s,kh} v as nodal weights (zero where x + k h e_s leaves the grid)."""
    arr = np.asarray(v.values if isinstance(v, VectorField) else v, dtype=float)
    out = np.zeros_like(arr)
    k = h_steps
    if axis == 0:
        out[: grid.nx - k] = (arr[k:] - arr[:-k]) / (k * grid.h)
    else:
        out[:, : grid.ny - k] = (arr[:, k:] - arr[:, :-k]) / (k * grid.h)
    return out
