"""Rigid displacements x -> Ax + b (A skew) on the lattice and the Korn/Poincare quotients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridDomain, VectorField, frob_norm, full_gradient_array, sym_gradient_array


@dataclass(frozen=True)
class RigidBasis:
    domain: GridDomain
    fields: tuple[VectorField, ...]
    gram: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Basis stacked as ``(m, nx*ny*2)``."""
        return np.stack([b.values.ravel() for b in self.fields])


def _inner(a: np.ndarray, b: np.ndarray, h: float) -> float:
    return float(np.sum(a * b) * h * h)


def rigid_basis(grid: GridDomain) -> RigidBasis:
    """Orthonormalize (1,0), (0,1), (-y,x) in the node-weighted L2 product."""
    X, Y = grid.coords()
    raw = [np.stack([np.ones_like(X), np.zeros_like(X)], -1),
           np.stack([np.zeros_like(X), np.ones_like(X)], -1),
           np.stack([-Y, X], -1)]
    out: list[np.ndarray] = []
    for v in raw:
        w = v.astype(float).copy()
        for _ in range(2):  # second pass removes round-off leakage
            for b in out:
                w -= _inner(w, b, grid.h) * b
        w /= np.sqrt(_inner(w, w, grid.h))
        out.append(w)
    gram = np.array([[_inner(a, b, grid.h) for b in out] for a in out])
    return RigidBasis(grid, tuple(VectorField(grid, b) for b in out), gram)


def rigid_coefficients(u: VectorField, basis: RigidBasis | None = None) -> np.ndarray:
    basis = basis or rigid_basis(u.domain)
    return np.array([_inner(u.values, b.values, u.domain.h) for b in basis.fields])


def project_rigid(u: VectorField, basis: RigidBasis | None = None) -> tuple[VectorField, VectorField]:
    """Return (Pi u, u - Pi u)."""
    basis = basis or rigid_basis(u.domain)
    c = rigid_coefficients(u, basis)
    pu = sum(ci * b.values for ci, b in zip(c, basis.fields))
    proj = VectorField(u.domain, pu)
    return proj, VectorField(u.domain, u.values - pu)


def projection_stability_bound(basis: RigidBasis, p: float) -> float:
    """Upper bound for ||Pi u||_p / ||u||_p: sum_j ||b_j||_p ||b_j||_p'."""
    h2 = basis.domain.h ** 2
    if p == 1:
        q = np.inf
    elif np.isinf(p):
        q = 1.0
    else:
        q = p / (p - 1)

    def norm(b, r):
        mag = np.linalg.norm(b.values, axis=-1)
        return float(np.max(mag)) if np.isinf(r) else float((np.sum(mag ** r) * h2) ** (1 / r))

    return sum(norm(b, p) * norm(b, q) for b in basis.fields)


class RigidInputError(ValueError):
    pass


@dataclass(frozen=True)
class KornResult:
    c_q: float
    c_p: float
    q: float
    p: float
    projection: VectorField


def korn_poincare_check(u: VectorField, q: float, p: float, basis: RigidBasis | None = None) -> KornResult:
    """Quotients int|u - b|^q / int|eps u|^q and int|D(u - b)|^p / int|eps u|^p with one b = Pi u."""
    if not (1 <= q <= p and p > 1):
        raise ValueError("need 1 <= q <= p and p > 1")
    h = u.domain.h
    eps = frob_norm(sym_gradient_array(u.values, h))
    du = full_gradient_array(u.values, h)
    scale = float(np.max(np.abs(du))) if du.size else 0.0
    if float(np.max(eps)) <= 1e-12 * max(scale, 1e-300):
        raise RigidInputError("eps(u) vanishes: input is rigid (or a lattice kernel mode)")
    b, rest = project_rigid(u, basis)
    h2 = h * h
    r = rest.values
    num_q = float(np.sum(np.linalg.norm(r, axis=-1) ** q) * h2)
    dr = full_gradient_array(r, h)
    num_p = float(np.sum(np.sqrt(np.sum(dr * dr, axis=(-1, -2))) ** p) * h2)
    c_q = num_q / float(np.sum(eps ** q) * h2)
    c_p = num_p / float(np.sum(eps ** p) * h2)
    if not (np.isfinite(c_q) and np.isfinite(c_p)):
        raise RigidInputError("non-finite quotient")
    return KornResult(c_q, c_p, q, p, b)


def smooth_random_field(grid: GridDomain, seed: int, modes: int = 3) -> VectorField:
    """Low-frequency trigonometric field defined in continuum coordinates.

    The same seed gives samples of the same function on every grid, so
    quotients can be compared across resolutions.
    """
    rng = np.random.default_rng(seed)
    X, Y = grid.coords()
    Lx, Ly = grid.extent
    u = np.zeros(X.shape + (2,))
    for c in range(2):
        for k in range(modes):
            for l in range(modes):
                a, ph1, ph2 = rng.standard_normal(), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi)
                u[..., c] += a / (1 + k + l) ** 2 * np.cos(np.pi * k * X / Lx + ph1) * np.cos(np.pi * l * Y / Ly + ph2)
    return VectorField(grid, u)
