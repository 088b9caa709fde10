"""Uniform 2D node lattice, nodal/cell fields and the discrete strain operators.

Conventions
-----------
* Nodes ``(i, j)`` sit at ``origin + (i*h, j*h)``; arrays are indexed ``[i, j]``.
* A vector field stores ``(nx, ny, 2)`` nodal values.
* A symmetric tensor field stores ``(nx-1, ny-1, 3)`` cell values in the order
  ``(e11, e12, e22)``. The Frobenius inner product counts ``e12`` twice.
* ``z``-coordinates ``(e11, sqrt2*e12, e22)`` are an orthonormal chart of
  Sym(2); the Frobenius norm becomes Euclidean there. Solvers work in it.

The cell gradient averages the two forward differences along the cell edges.
Its kernel on the full lattice is the rigid motions plus three checkerboard
modes ``(c, 0)``, ``(0, c)`` and ``c*(x, -y)`` with ``c = (-1)**(i+j)``; none of
them vanishes on the boundary, so pinned Dirichlet nodes remove them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

SQRT2 = float(np.sqrt(2.0))
_FROB_WEIGHTS = np.array([1.0, 2.0, 1.0])
_Z_SCALE = np.array([1.0, SQRT2, 1.0])


class GridError(ValueError):
    """Raised for malformed grids, shape mismatches or impossible shifts."""


@dataclass(frozen=True)
class GridDomain:
    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridError("node counts must be integers")
        if self.nx < 2 or self.ny < 2:
            raise GridError(f"need at least 2x2 nodes, got {self.nx}x{self.ny}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise GridError(f"spacing must be positive, got {self.h}")

    @classmethod
    def unit_square(cls, n: int) -> "GridDomain":
        """``n x n`` nodes covering ``[0, 1]^2``."""
        return cls(n, n, 1.0 / (n - 1))

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.nx - 1, self.ny - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def n_cells(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def area(self) -> float:
        """Lebesgue measure of the rectangle spanned by the nodes."""
        return self.n_cells * self.h * self.h

    @property
    def extent(self) -> tuple[float, float]:
        return ((self.nx - 1) * self.h, (self.ny - 1) * self.h)

    @property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.node_shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.h * (np.arange(self.nx - 1) + 0.5)
        y = self.origin[1] + self.h * (np.arange(self.ny - 1) + 0.5)
        return np.meshgrid(x, y, indexing="ij")

    def sub(self, di: int, dj: int, nx: int, ny: int) -> "GridDomain":
        """Sub-lattice starting at node ``(di, dj)``."""
        return GridDomain(nx, ny, self.h, (self.origin[0] + di * self.h, self.origin[1] + dj * self.h))


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise GridError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class VectorField:
    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (*self.domain.node_shape, 2):
            raise GridError(f"vector field shape {v.shape} does not match nodes {self.domain.node_shape}")
        _check_finite(v, "vector field")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, domain: GridDomain, fn) -> "VectorField":
        """Sample ``fn(x, y) -> (u1, u2)`` at the nodes."""
        X, Y = domain.coords()
        u1, u2 = fn(X, Y)
        return cls(domain, np.stack(np.broadcast_arrays(u1, u2), axis=-1).astype(float))

    @classmethod
    def zeros(cls, domain: GridDomain) -> "VectorField":
        return cls(domain, np.zeros((*domain.node_shape, 2)))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.domain, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.domain, self.values - other.values)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.domain, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SymTensorField:
    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (*self.domain.cell_shape, 3):
            raise GridError(f"sym tensor shape {v.shape} does not match cells {self.domain.cell_shape}")
        _check_finite(v, "sym tensor field")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, domain: GridDomain, e11: float, e12: float, e22: float) -> "SymTensorField":
        return cls(domain, np.broadcast_to([e11, e12, e22], (*domain.cell_shape, 3)).copy())

    def norm(self) -> np.ndarray:
        """Cellwise Frobenius norm."""
        return frob_norm(self.values)

    def matrices(self) -> np.ndarray:
        return sym_to_matrix(self.values)

    def __add__(self, other: "SymTensorField") -> "SymTensorField":
        return SymTensorField(self.domain, self.values + other.values)

    def __sub__(self, other: "SymTensorField") -> "SymTensorField":
        return SymTensorField(self.domain, self.values - other.values)

    def __mul__(self, c: float) -> "SymTensorField":
        return SymTensorField(self.domain, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TensorField:
    """Full 2x2 matrix per cell; ``values[..., k, l]`` is d u_k / d x_l."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (*self.domain.cell_shape, 2, 2):
            raise GridError(f"tensor shape {v.shape} does not match cells {self.domain.cell_shape}")
        object.__setattr__(self, "values", v)

    def sym(self) -> SymTensorField:
        d = self.values
        return SymTensorField(self.domain, np.stack([d[..., 0, 0], 0.5 * (d[..., 0, 1] + d[..., 1, 0]), d[..., 1, 1]], -1))


# ---------------------------------------------------------------- Sym(2) helpers

def frob_norm(e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    return np.sqrt(e[..., 0] ** 2 + 2.0 * e[..., 1] ** 2 + e[..., 2] ** 2)


def sym_inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(a) * np.asarray(b) * _FROB_WEIGHTS, axis=-1)


def to_z(e: np.ndarray) -> np.ndarray:
    return np.asarray(e, dtype=float) * _Z_SCALE


def from_z(z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=float) / _Z_SCALE


def sym_to_matrix(e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    return np.stack([np.stack([e[..., 0], e[..., 1]], -1), np.stack([e[..., 1], e[..., 2]], -1)], -2)


def matrix_to_sym(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]], -1)


def sym_outer(a: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Symmetric product ``a ⊙ nu`` of two 2-vectors in ``(e11, e12, e22)`` form."""
    a = np.asarray(a, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return np.stack([a[..., 0] * nu[..., 0], 0.5 * (a[..., 0] * nu[..., 1] + a[..., 1] * nu[..., 0]), a[..., 1] * nu[..., 1]], -1)


# ---------------------------------------------------------------- operators on raw arrays

def _cell_derivatives(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    if u.shape[0] < 2 or u.shape[1] < 2:
        raise GridError("need at least 2x2 nodes for a cell gradient")
    a, b, c, d = u[:-1, :-1], u[1:, :-1], u[:-1, 1:], u[1:, 1:]
    dx = ((b - a) + (d - c)) / (2.0 * h)
    dy = ((c - a) + (d - b)) / (2.0 * h)
    return dx, dy


def full_gradient_array(u: np.ndarray, h: float) -> np.ndarray:
    dx, dy = _cell_derivatives(np.asarray(u, dtype=float), h)
    # dx[..., k] = d u_k / dx
    return np.stack([dx, dy], axis=-1)


def sym_gradient_array(u: np.ndarray, h: float) -> np.ndarray:
    dx, dy = _cell_derivatives(np.asarray(u, dtype=float), h)
    return np.stack([dx[..., 0], 0.5 * (dy[..., 0] + dx[..., 1]), dy[..., 1]], axis=-1)


def _scatter_dx_adjoint(q: np.ndarray, h: float) -> np.ndarray:
    """Adjoint of the cell x-derivative: sum_cells q*dx(phi) = sum_nodes phi*out."""
    nx, ny = q.shape[0] + 1, q.shape[1] + 1
    out = np.zeros((nx, ny) + q.shape[2:])
    w = q / (2.0 * h)
    out[:-1, :-1] -= w
    out[1:, :-1] += w
    out[:-1, 1:] -= w
    out[1:, 1:] += w
    return out


def _scatter_dy_adjoint(q: np.ndarray, h: float) -> np.ndarray:
    nx, ny = q.shape[0] + 1, q.shape[1] + 1
    out = np.zeros((nx, ny) + q.shape[2:])
    w = q / (2.0 * h)
    out[:-1, :-1] -= w
    out[:-1, 1:] += w
    out[1:, :-1] -= w
    out[1:, 1:] += w
    return out


def divergence_array(sigma: np.ndarray, h: float) -> np.ndarray:
    """Row-wise divergence, the negative adjoint of ``sym_gradient_array``.

    Cell sums carry weight ``h^2`` and node sums carry ``h^2``, so the
    identity holds with the same weights on both sides and for every nodal
    test field, not only those vanishing on the boundary.
    """
    s = np.asarray(sigma, dtype=float)
    s11, s12, s22 = s[..., 0], s[..., 1], s[..., 2]
    d1 = _scatter_dx_adjoint(s11, h) + _scatter_dy_adjoint(s12, h)
    d2 = _scatter_dx_adjoint(s12, h) + _scatter_dy_adjoint(s22, h)
    return -np.stack([d1, d2], axis=-1)


# ---------------------------------------------------------------- field-level API

def sym_gradient(u: VectorField) -> SymTensorField:
    return SymTensorField(u.domain, sym_gradient_array(u.values, u.domain.h))


def full_gradient(u: VectorField) -> TensorField:
    return TensorField(u.domain, full_gradient_array(u.values, u.domain.h))


def divergence(sigma: SymTensorField) -> VectorField:
    return VectorField(sigma.domain, divergence_array(sigma.values, sigma.domain.h))


def translate_diff(u, axis: int, h_steps: int = 1, variant: str = "forward", delta: bool = False, h: float | None = None):
    """Finite translation difference along ``axis``.

    ``forward``:  u(x + k h e_s) - u(x), kept where the shifted node exists.
    ``backward``: u(x - k h e_s) - u(x), same restriction.
    With ``delta=True`` the result is divided by the shift length ``k*h``.

    Accepts ``VectorField``, ``SymTensorField``, ``TensorField`` (returned on
    the matching sub-lattice) or a raw array (then ``h`` is needed only for
    ``delta``).
    """
    if axis not in (0, 1):
        raise GridError("axis must be 0 or 1")
    k = int(h_steps)
    if k != h_steps or k < 1:
        raise GridError("h_steps must be a positive integer")
    if variant not in ("forward", "backward"):
        raise GridError(f"unknown variant {variant!r}")

    if isinstance(u, (VectorField, SymTensorField, TensorField)):
        arr, dom = u.values, u.domain
        spacing = dom.h
    else:
        arr, dom = np.asarray(u, dtype=float), None
        spacing = h
    n = arr.shape[axis]
    if k >= n:
        raise GridError(f"shift of {k} steps exceeds the {n} available samples along axis {axis}")
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(0, n - k)
    hi[axis] = slice(k, n)
    if variant == "forward":
        out = arr[tuple(hi)] - arr[tuple(lo)]
        start = 0
    else:
        out = arr[tuple(lo)] - arr[tuple(hi)]
        start = k
    if delta:
        if spacing is None:
            raise GridError("delta variant needs the spacing h")
        out = out / (k * spacing)
    if dom is None:
        return out
    di, dj = (start, 0) if axis == 0 else (0, start)
    if isinstance(u, VectorField):
        sub = dom.sub(di, dj, out.shape[0], out.shape[1])
        if sub.nx < 2 or sub.ny < 2:
            raise GridError("shift leaves fewer than 2 nodes")
        return VectorField(sub, out)
    sub = dom.sub(di, dj, out.shape[0] + 1, out.shape[1] + 1)
    return type(u)(sub, out)


# ---------------------------------------------------------------- sparse matrices

@lru_cache(maxsize=32)
def _strain_matrix_z(nx: int, ny: int, h: float) -> sp.csr_matrix:
    """Sparse map from flattened nodal values to flattened cell strains in z-coordinates."""
    ncell = (nx - 1) * (ny - 1)
    ci, cj = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    cell = ci * (ny - 1) + cj

    def node(di, dj):
        return (ci + di) * ny + (cj + dj)

    # corner weights for d/dx and d/dy (before the 1/(2h) factor)
    corners = [((0, 0), -1.0, -1.0), ((1, 0), 1.0, -1.0), ((0, 1), -1.0, 1.0), ((1, 1), 1.0, 1.0)]
    rows, cols, vals = [], [], []
    s = 1.0 / (2.0 * h)
    for (di, dj), wx, wy in corners:
        nd = node(di, dj)
        # e11 = d u1/dx
        rows.append(3 * cell + 0); cols.append(2 * nd + 0); vals.append(np.full(ncell, wx * s))
        # sqrt2 * e12 = (d u1/dy + d u2/dx) / sqrt2
        rows.append(3 * cell + 1); cols.append(2 * nd + 0); vals.append(np.full(ncell, wy * s / SQRT2))
        rows.append(3 * cell + 1); cols.append(2 * nd + 1); vals.append(np.full(ncell, wx * s / SQRT2))
        # e22 = d u2/dy
        rows.append(3 * cell + 2); cols.append(2 * nd + 1); vals.append(np.full(ncell, wy * s))
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(3 * ncell, 2 * nx * ny)
    )
    return m.tocsr()


def strain_matrix_z(domain: GridDomain) -> sp.csr_matrix:
    return _strain_matrix_z(domain.nx, domain.ny, float(domain.h))


def interior_dofs(domain: GridDomain) -> np.ndarray:
    """Flat indices (into ``values.ravel()``) of the interior nodal unknowns."""
    idx = np.flatnonzero(domain.interior_mask.ravel())
    return np.stack([2 * idx, 2 * idx + 1], axis=-1).ravel()
