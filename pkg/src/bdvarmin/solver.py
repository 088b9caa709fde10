"""Damped Newton minimization of the stabilized energies and the viscosity sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    GridDomain,
    GridError,
    VectorField,
    divergence_array,
    frob_norm,
    interior_dofs,
    strain_matrix_z,
    sym_gradient_array,
)
from .integrands import Integrand, viscosity

HESS_FLOOR = 1e-12
DESCENT_SLACK = 1e-14


class SolverError(RuntimeError):
    """Newton failed to reach the tolerance; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: "ViscositySolution | None" = None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class Schedule:
    j_values: tuple[int, ...]
    tol: float = 1e-9
    max_iters: int = 100

    def __post_init__(self):
        js = tuple(int(j) for j in self.j_values)
        if not js:
            raise ValueError("schedule needs at least one j")
        if js[0] < 1 or any(b <= a for a, b in zip(js, js[1:])):
            raise ValueError(f"j values must be positive and strictly increasing, got {js}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        object.__setattr__(self, "j_values", js)

    @classmethod
    def dyadic(cls, j_max: int, **kw) -> "Schedule":
        js, j = [], 1
        while j <= j_max:
            js.append(j)
            j *= 2
        return cls(tuple(js), **kw)


@dataclass
class ViscositySolution:
    j: int | None
    v: VectorField
    energy_Fj: float
    energy_F: float
    el_residual: float
    eps_l1: float
    iterations: int = 0
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)


def stabilized(f: Integrand, j: int | None) -> Integrand:
    """f + |xi|^2/(2j); ``j=None`` means no stabilization."""
    return f if j is None else viscosity(f, j).as_integrand()


def energy(f: Integrand, v: VectorField) -> float:
    eps = sym_gradient_array(v.values, v.domain.h)
    return float(np.sum(f.value(eps)) * v.domain.cell_area)


def eps_l1(v: VectorField) -> float:
    eps = sym_gradient_array(v.values, v.domain.h)
    return float(np.sum(frob_norm(eps)) * v.domain.cell_area)


def stress(v: VectorField, f: Integrand, j: int | None = None) -> np.ndarray:
    """Cell values of f_j'(eps(v))."""
    return stabilized(f, j).grad(sym_gradient_array(v.values, v.domain.h))


def el_residual(v: VectorField, f: Integrand, j: int | None = None) -> float:
    """Discrete L2 norm over interior nodes of div f_j'(eps(v))."""
    div = divergence_array(stress(v, f, j), v.domain.h)
    inner = div[v.domain.interior_mask]
    return float(math.sqrt(np.sum(inner * inner) * v.domain.cell_area))


def el_residual_dual_norm(v: VectorField, f: Integrand, j: int | None = None) -> float:
    """Lipschitz-dual norm of the residual functional phi -> sum <f_j'(eps v), eps phi> h^2."""
    from .duality import lip_dual_norm

    div = divergence_array(stress(v, f, j), v.domain.h)
    return lip_dual_norm(-div, v.domain)


class _Problem:
    """Energy, gradient and Hessian in the interior unknowns."""

    def __init__(self, f: Integrand, u0: VectorField):
        self.f = f
        self.dom = u0.domain
        self.base = u0.values.ravel().copy()
        self.dofs = interior_dofs(self.dom)
        G = strain_matrix_z(self.dom)
        self.G = G
        self.Gi = G[:, self.dofs].tocsc()
        self.w = self.dom.cell_area

    def full(self, x: np.ndarray) -> np.ndarray:
        u = self.base.copy()
        u[self.dofs] = x
        return u

    def strains(self, x):
        return (self.G @ self.full(x)).reshape(-1, 3)

    def energy(self, x) -> float:
        z = self.strains(x)
        return float(np.sum(self.f.g(np.linalg.norm(z, axis=1))) * self.w)

    def gradient(self, x, z=None):
        z = self.strains(x) if z is None else z
        s = self.f.slope_ratio(np.linalg.norm(z, axis=1))[:, None] * z
        return self.w * (self.Gi.T @ s.ravel())

    def hessian(self, x, z=None):
        z = self.strains(x) if z is None else z
        r = np.linalg.norm(z, axis=1)
        safe = np.where(r > 0, r, 1.0)
        b = z / safe[:, None]
        proj = np.einsum("ni,nj->nij", b, b)
        proj[r == 0] = 0.0
        H = self.f.d2g(r)[:, None, None] * proj + self.f.slope_ratio(r)[:, None, None] * (np.eye(3) - proj)
        nc = H.shape[0]
        Hb = sp.bsr_matrix((H, np.arange(nc), np.arange(nc + 1)), shape=(3 * nc, 3 * nc))
        K = self.w * (self.Gi.T @ (Hb @ self.Gi))
        return (K + HESS_FLOOR * sp.identity(K.shape[0])).tocsc()


def _newton(prob: _Problem, x: np.ndarray, tol: float, max_iters: int):
    h = prob.dom.h
    E = prob.energy(x)
    history = [E]
    g = prob.gradient(x)
    res = float(np.linalg.norm(g) / h)
    it = 0
    while res > tol and it < max_iters:
        it += 1
        z = prob.strains(x)
        d = spla.spsolve(prob.hessian(x, z), -g)
        slope = float(g @ d)
        if slope >= 0:  # regularized Hessian is SPD, so only rounding can cause this
            d, slope = -g, -float(g @ g)
        t, accepted = 1.0, False
        while t > 1e-12:
            xn = x + t * d
            En = prob.energy(xn)
            if En <= E + 1e-4 * t * slope:
                accepted = True
                break
            # close to the optimum the decrease sinks below rounding; accept a
            # step that reduces the residual and keeps the energy within slack
            if En <= E + DESCENT_SLACK * max(1.0, abs(E)):
                gn = prob.gradient(xn)
                if np.linalg.norm(gn) < np.linalg.norm(g):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        x, E = xn, En
        history.append(E)
        g = prob.gradient(x)
        res = float(np.linalg.norm(g) / h)
    return x, E, res, it, history


def minimize_Fj(f: Integrand, j: int | None, u0: VectorField, grid: GridDomain | None = None,
                tol: float = 1e-9, max_iters: int = 100, initial: VectorField | None = None) -> ViscositySolution:
    """Minimize sum_cells f_j(eps(v)) h^2 over v = u0 on the boundary.

    ``j=None`` minimizes the unstabilized energy (meaningful for strictly
    convex f). ``initial`` supplies interior starting values.
    """
    dom = u0.domain
    if grid is not None and grid != dom:
        raise GridError("u0 lives on a different grid")
    if j is not None and j < 1:
        raise ValueError("j must be >= 1")
    if dom.nx < 3 or dom.ny < 3:
        raise GridError("need interior nodes to optimize")
    fj = stabilized(f, j)
    prob = _Problem(fj, u0)
    x0 = (initial.values.ravel() if initial is not None else prob.base)[prob.dofs].copy()
    x, Ej, res, it, hist = _newton(prob, x0, tol, max_iters)
    v = VectorField(dom, prob.full(x).reshape(dom.nx, dom.ny, 2))
    sol = ViscositySolution(
        j=j, v=v, energy_Fj=Ej, energy_F=energy(f, v), el_residual=el_residual(v, f, j),
        eps_l1=eps_l1(v), iterations=it, converged=res <= tol, history=hist,
    )
    if not sol.converged:
        raise SolverError(f"Newton stopped at residual {res:.3e} > tol {tol:.1e} after {it} iterations", sol)
    return sol


@dataclass
class SequenceResult:
    solutions: list[ViscositySolution]
    monitors: dict

    @property
    def passed(self) -> bool:
        return all(v for k, v in self.monitors.items() if k.startswith("ok_"))


def _sigma_h1(sig: np.ndarray, h: float) -> float:
    """Discrete H^1 seminorm of a cell field from neighbour differences."""
    dx = np.diff(sig, axis=0) / h
    dy = np.diff(sig, axis=1) / h
    w = np.array([1.0, 2.0, 1.0])
    return float(math.sqrt((np.sum(dx * dx * w) + np.sum(dy * dy * w)) * h * h))


def run_viscosity_sequence(f: Integrand, schedule: Schedule, u0: VectorField,
                           grid: GridDomain | None = None, slack: float = 1e-10) -> SequenceResult:
    """Solve for every j in the schedule (warm started) and evaluate the monitors."""
    sols: list[ViscositySolution] = []
    prev = None
    for j in schedule.j_values:
        try:
            sol = minimize_Fj(f, j, u0, grid, tol=schedule.tol, max_iters=schedule.max_iters,
                              initial=prev.v if prev else None)
        except SolverError as exc:
            exc.partial = sols  # type: ignore[attr-defined]
            raise
        sols.append(sol)
        prev = sol

    mon: dict = {"j": [s.j for s in sols], "F_j": [s.energy_Fj for s in sols], "F": [s.energy_F for s in sols],
                 "eps_l1": [s.eps_l1 for s in sols], "el_residual": [s.el_residual for s in sols]}

    chain_ok = True
    for a, b in zip(sols, sols[1:]):
        cross = energy(stabilized(f, b.j), a.v)  # F_{j'}[v_j]
        chain_ok &= b.energy_Fj <= cross + slack and cross <= a.energy_Fj + slack
    mon["ok_monotone"] = bool(chain_ok)

    if math.isfinite(f.c_inf):
        gc = f.growth_constants()
        bound = (sols[0].energy_Fj + gc.c2 * u0.domain.area) / gc.c0
        mon.update(c0=gc.c0, c2=gc.c2, r0=gc.r0, coercivity_bound=bound)
        mon["ok_coercivity"] = bool(all(s.eps_l1 <= bound for s in sols))
        tau_sup = [float(np.max(frob_norm(stress(s.v, f)))) for s in sols]
        mon["tau_sup"] = tau_sup
        mon["ok_tau_bounded"] = bool(all(t <= f.c_inf + 1e-12 for t in tau_sup))
    mon["sigma_sup"] = [float(np.max(frob_norm(stress(s.v, f, s.j)))) for s in sols]
    mon["sigma_h1"] = [_sigma_h1(stress(s.v, f, s.j), u0.domain.h) for s in sols]
    return SequenceResult(sols, mon)


def lbmo_monitor(v_list, K: tuple[int, int, int, int]) -> float:
    """max over fields and over nodes of K of the centered sharp maximal function.

    ``K = (i0, i1, j0, j1)`` are inclusive node ranges that must avoid the
    boundary rows/columns. Cubes range over centered node blocks inside the grid.
    """
    from .spaces import sharp_maximal_array

    i0, i1, j0, j1 = K
    out = 0.0
    for v in v_list:
        vf = v.v if isinstance(v, ViscositySolution) else v
        nx, ny = vf.domain.node_shape
        if not (0 < i0 <= i1 < nx - 1 and 0 < j0 <= j1 < ny - 1):
            raise GridError(f"K={K} must lie strictly inside the {nx}x{ny} grid")
        m = sharp_maximal_array(vf.values, vf.domain.h, dim=2)
        out = max(out, float(np.max(m[i0:i1 + 1, j0:j1 + 1])))
    return out
