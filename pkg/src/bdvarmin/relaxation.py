"""Piecewise-constant BD fields, convex functions of their strain measures and the relaxed
Dirichlet functional with its boundary-mismatch penalty."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .grid import GridDomain, GridError, SymTensorField, VectorField, frob_norm, sym_gradient_array, sym_outer
from .integrands import Integrand
from .rigid import project_rigid, rigid_basis
from .solver import Schedule, minimize_Fj, run_viscosity_sequence

# Slope of the no-gap tolerance tol = C h. On the quadratic calibration runs
# (scripts/calibrate_nogap.py) relaxed - inf_j F_j[v_j] was never positive,
# so the constant only absorbs rounding in the face quadrature.
NOGAP_C = 1.0

_E1 = np.array([1.0, 0.0])
_E2 = np.array([0.0, 1.0])


@dataclass(frozen=True)
class DiscreteBDField:
    """u = (constant per cell) + (optional continuous bilinear part on the nodes)."""

    domain: GridDomain
    cell_values: np.ndarray
    smooth_part: VectorField | None = None

    def __post_init__(self):
        cv = np.asarray(self.cell_values, dtype=float)
        if cv.shape != (*self.domain.cell_shape, 2):
            raise GridError(f"cell values must have shape {(*self.domain.cell_shape, 2)}, got {cv.shape}")
        if not np.all(np.isfinite(cv)):
            raise GridError("cell values must be finite")
        if self.smooth_part is not None and self.smooth_part.domain != self.domain:
            raise GridError("smooth part lives on a different grid")
        object.__setattr__(self, "cell_values", cv)

    @classmethod
    def from_smooth(cls, v: VectorField) -> "DiscreteBDField":
        return cls(v.domain, np.zeros((*v.domain.cell_shape, 2)), v)

    @classmethod
    def from_cells(cls, domain: GridDomain, fn) -> "DiscreteBDField":
        """Sample ``fn(x, y) -> (u1, u2)`` at cell centres."""
        X, Y = domain.cell_centers()
        return cls(domain, np.stack(np.broadcast_arrays(*fn(X, Y)), -1).astype(float))

    def plus_smooth(self, w: VectorField) -> "DiscreteBDField":
        sp_ = w if self.smooth_part is None else self.smooth_part + w
        return DiscreteBDField(self.domain, self.cell_values, sp_)

    def __mul__(self, c: float) -> "DiscreteBDField":
        return DiscreteBDField(self.domain, c * self.cell_values,
                               None if self.smooth_part is None else self.smooth_part * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SymMeasure:
    """Strain measure: cell densities (per area) plus jump densities on interior faces (per length).

    ``jumps_x[i, j]`` sits on the vertical face between cells (i, j) and (i+1, j)
    with normal e1; ``jumps_y[i, j]`` on the horizontal face between (i, j) and
    (i, j+1) with normal e2. Every face has length ``face_length``.
    """

    domain: GridDomain
    ac_density: SymTensorField
    jumps_x: np.ndarray
    jumps_y: np.ndarray

    @property
    def face_length(self) -> float:
        return self.domain.h

    def ac_variation(self) -> float:
        return float(np.sum(frob_norm(self.ac_density.values)) * self.domain.cell_area)

    def singular_variation(self) -> float:
        return float((np.sum(frob_norm(self.jumps_x)) + np.sum(frob_norm(self.jumps_y))) * self.face_length)

    def total_variation(self) -> float:
        return self.ac_variation() + self.singular_variation()

    def __add__(self, other: "SymMeasure") -> "SymMeasure":
        return SymMeasure(self.domain, self.ac_density + other.ac_density,
                          self.jumps_x + other.jumps_x, self.jumps_y + other.jumps_y)

    def __mul__(self, c: float) -> "SymMeasure":
        return SymMeasure(self.domain, self.ac_density * c, c * self.jumps_x, c * self.jumps_y)

    __rmul__ = __mul__


def bd_measure(u: DiscreteBDField) -> SymMeasure:
    dom = u.domain
    cv = u.cell_values
    jx = sym_outer(cv[1:] - cv[:-1], _E1)
    jy = sym_outer(cv[:, 1:] - cv[:, :-1], _E2)
    if u.smooth_part is None:
        ac = np.zeros((*dom.cell_shape, 3))
    else:
        ac = sym_gradient_array(u.smooth_part.values, dom.h)
    return SymMeasure(dom, SymTensorField(dom, ac), jx, jy)


def _face_masks(region: np.ndarray):
    """A face belongs to the open region when both adjacent cells do."""
    return region[1:] & region[:-1], region[:, 1:] & region[:, :-1]


def _recession_sum(f: Integrand, jumps: np.ndarray) -> float:
    if jumps.size == 0:
        return 0.0
    return float(np.sum(f.recession(jumps)))


def eval_convex_measure(f: Integrand, m: SymMeasure, region: np.ndarray | None = None) -> float:
    """sum_cells f(ac) h^2 + sum_faces f_inf(jump) len over the cells in ``region`` (default: all)."""
    dom = m.domain
    if region is None:
        region = np.ones(dom.cell_shape, dtype=bool)
    region = np.asarray(region, dtype=bool)
    if region.shape != dom.cell_shape:
        raise GridError("region mask must have the cell shape")
    mx, my = _face_masks(region)
    ac = float(np.sum(f.value(m.ac_density.values[region])) * dom.cell_area)
    sing = (_recession_sum(f, m.jumps_x[mx]) + _recession_sum(f, m.jumps_y[my])) * m.face_length
    return ac + sing


@dataclass(frozen=True)
class BoundaryTrace:
    """Face-midpoint values on the four sides; left/right have ny-1 faces, bottom/top nx-1."""

    left: np.ndarray
    right: np.ndarray
    bottom: np.ndarray
    top: np.ndarray

    def sides(self):
        """(values, outer normal) per side."""
        return [(self.left, -_E1), (self.right, _E1), (self.bottom, -_E2), (self.top, _E2)]

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.left - other.left, self.right - other.right,
                             self.bottom - other.bottom, self.top - other.top)


def _nodal_trace(v: np.ndarray) -> BoundaryTrace:
    mid = lambda e: 0.5 * (e[1:] + e[:-1])  # noqa: E731
    return BoundaryTrace(mid(v[0]), mid(v[-1]), mid(v[:, 0]), mid(v[:, -1]))


def trace(u) -> BoundaryTrace:
    """Boundary trace at face midpoints of a nodal field or a DiscreteBDField."""
    if isinstance(u, BoundaryTrace):
        return u
    if isinstance(u, VectorField):
        return _nodal_trace(u.values)
    cv = u.cell_values
    t = BoundaryTrace(cv[0].copy(), cv[-1].copy(), cv[:, 0].copy(), cv[:, -1].copy())
    if u.smooth_part is not None:
        s = _nodal_trace(u.smooth_part.values)
        t = BoundaryTrace(t.left + s.left, t.right + s.right, t.bottom + s.bottom, t.top + s.top)
    return t


def boundary_penalty(f: Integrand, u, u0) -> float:
    """sum over boundary faces of f_inf((Tr u0 - Tr u) . outer normal) times face length."""
    diff = trace(u0) - trace(u)
    h = (u0.domain if hasattr(u0, "domain") else u.domain).h
    return float(sum(np.sum(f.recession(sym_outer(d, nu))) for d, nu in diff.sides()) * h)


@dataclass(frozen=True)
class RelaxedTerms:
    ac: float
    singular: float
    boundary: float

    @property
    def total(self) -> float:
        return self.ac + self.singular + self.boundary


def relaxed_terms(u: DiscreteBDField, u0, f: Integrand) -> RelaxedTerms:
    m = bd_measure(u)
    ac = float(np.sum(f.value(m.ac_density.values)) * u.domain.cell_area)
    sing = (_recession_sum(f, m.jumps_x) + _recession_sum(f, m.jumps_y)) * m.face_length
    return RelaxedTerms(ac, sing, boundary_penalty(f, u, u0))


def relaxed_functional(u: DiscreteBDField, u0, f: Integrand) -> float:
    """Interior ac energy + recession energy of the jumps + boundary mismatch penalty.

    ``u0`` is a nodal field or an explicit :class:`BoundaryTrace`.
    """
    return relaxed_terms(u, u0, f).total


def mismatch_variation(u: DiscreteBDField, u0) -> float:
    """Total variation of the boundary mismatch measure."""
    diff = trace(u0) - trace(u)
    return float(sum(np.sum(frob_norm(sym_outer(d, nu))) for d, nu in diff.sides()) * u.domain.h)


# ------------------------------------------------------------------ experiments

@dataclass
class NoGapReport:
    relaxed: float
    inf_sequence: float
    dual_lower: float
    tol: float
    ok: bool
    gap_curve: list[dict] = field(default_factory=list)

    @property
    def bracket_width(self) -> float:
        """relaxed value minus the best certified lower bound."""
        return self.relaxed - self.dual_lower


def nogap_check(f: Integrand, u0: VectorField, schedule: Schedule, grid: GridDomain | None = None,
                C: float = NOGAP_C) -> NoGapReport:
    """Relaxed value of the last viscosity iterate against inf_j F_j[v_j].

    The one-sided assertion is ``relaxed <= inf + C h``. The best dual value
    along the sequence is reported as a certified lower bound for the infimum.
    """
    from .duality import gap_table

    seq = run_viscosity_sequence(f, schedule, u0, grid)
    last = seq.solutions[-1].v
    relaxed = relaxed_functional(DiscreteBDField.from_smooth(last), u0, f)
    inf_seq = min(s.energy_Fj for s in seq.solutions)
    rows = gap_table(seq.solutions, f, u0)
    dual = max(r["dual"] for r in rows)
    tol = C * u0.domain.h
    return NoGapReport(relaxed, inf_seq, dual, tol, relaxed <= inf_seq + tol, rows)


@dataclass(frozen=True)
class UniquenessReport:
    eps_distance: float
    eps_reference: float
    rigid_residual: float
    rigid_part: float

    @property
    def eps_relative(self) -> float:
        return self.eps_distance / self.eps_reference if self.eps_reference > 0 else self.eps_distance


def _l2(v: np.ndarray, h: float) -> float:
    return float(math.sqrt(np.sum(v * v) * h * h))


def uniqueness_check(f: Integrand, u0: VectorField, grid: GridDomain | None = None, seeds=(1, 2),
                     amplitude: float = 0.1, tol: float = 1e-10, max_iters: int = 200) -> UniquenessReport:
    """Minimize the unstabilized energy from two random starts and compare modulo rigid motions."""
    dom = u0.domain
    sols = []
    for seed in seeds[:2]:
        rng = np.random.default_rng(seed)
        start = u0.values.copy()
        start[dom.interior_mask] += amplitude * rng.standard_normal(start[dom.interior_mask].shape)
        sols.append(minimize_Fj(f, None, u0, grid, tol=tol, max_iters=max_iters,
                                initial=VectorField(dom, start)).v)
    e1 = sym_gradient_array(sols[0].values, dom.h)
    e2 = sym_gradient_array(sols[1].values, dom.h)
    dist = float(np.sum(frob_norm(e1 - e2)) * dom.cell_area)
    ref = float(np.sum(frob_norm(e1)) * dom.cell_area)
    R, rest = project_rigid(sols[0] - sols[1])
    return UniquenessReport(dist, ref, _l2(rest.values, dom.h), _l2(R.values, dom.h))


def boundary_integral(f: Integrand | None, R: VectorField) -> float:
    """sum over boundary faces of f_inf(-R . outer normal) len (f=None uses |.|)."""
    t = _nodal_trace(R.values)
    total = 0.0
    for d, nu in t.sides():
        xi = sym_outer(-d, nu)
        total += float(np.sum(frob_norm(xi) if f is None else f.recession(xi)))
    return total * R.domain.h


@dataclass
class AttainmentReport:
    ok: bool
    margin: float
    witness: np.ndarray
    per_element: list[float]
    identity_error: float | None = None


def _boundary_rows(dom: GridDomain, basis) -> list[np.ndarray]:
    """Per boundary face, the 3x3 map from basis coefficients to the z-chart of R . nu."""
    traces = [_nodal_trace(b.values) for b in basis.fields]
    rows = []
    for side in range(4):
        nu = traces[0].sides()[side][1]
        cols = [sym_outer(-t.sides()[side][0], nu) for t in traces]  # each (faces, 3)
        M = np.stack(cols, -1)  # faces, 3 comps, 3 coeffs
        M[:, 1, :] *= math.sqrt(2.0)
        rows.append(M)
    return rows


def boundary_attainment_check(u: DiscreteBDField | VectorField | None, u0: VectorField,
                              f: Integrand | None = None, n_directions: int = 2000) -> AttainmentReport:
    """Minimum over unit rigid motions R of the boundary integral of f_inf(-R . nu).

    Coefficients are taken in the L2-orthonormal rigid basis. The map is a
    norm on the three-dimensional coefficient space, so the minimum over the
    sphere is found by a dense Fibonacci scan refined by Nelder-Mead. When ``u``
    attains ``u0`` the report also carries the largest error of the identity
    relaxed(u + R) = relaxed(u) + boundary_integral(R) over the basis.
    """
    dom = u0.domain
    basis = rigid_basis(dom)
    c_inf = 1.0 if f is None else f.c_inf
    if math.isinf(c_inf):
        per = [math.inf] * 3
        return AttainmentReport(True, math.inf, np.array([1.0, 0.0, 0.0]), per)
    rows = np.concatenate(_boundary_rows(dom, basis), axis=0)

    def psi(c):
        c = np.asarray(c, dtype=float)
        return c_inf * dom.h * float(np.sum(np.linalg.norm(rows @ c, axis=-1)))

    k = np.arange(n_directions) + 0.5
    polar = np.arccos(1 - 2 * k / n_directions)
    azim = math.pi * (1 + 5 ** 0.5) * k
    dirs = np.stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)], -1)
    vals = c_inf * dom.h * np.sum(np.linalg.norm(np.einsum("fij,dj->dfi", rows, dirs), axis=-1), axis=-1)
    c0 = dirs[int(np.argmin(vals))]
    res = minimize(lambda c: psi(c / np.linalg.norm(c)), c0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    witness = res.x / np.linalg.norm(res.x)
    margin = min(psi(witness), float(vals.min()))
    per = [boundary_integral(f, b) for b in basis.fields]

    ident = None
    if u is not None:
        ubd = DiscreteBDField.from_smooth(u) if isinstance(u, VectorField) else u
        if f is not None and mismatch_variation(ubd, u0) <= 1e-12:
            base = relaxed_functional(ubd, u0, f)
            ident = max(abs(relaxed_functional(ubd.plus_smooth(b), u0, f) - base - pe)
                        for b, pe in zip(basis.fields, per))
    return AttainmentReport(margin > 0, margin, witness, per, ident)


@dataclass
class ContinuityStudy:
    widths: list[float]
    values: list[float]
    limit: float
    errors: list[float]
    variations: list[float]
    limit_variation: float


def mollified_jump_study(f: Integrand, jump=(1.0, 0.0), cells: int = 64, width_cells=(32, 16, 8, 4, 2)) -> ContinuityStudy:
    """Ramp profiles of width delta across x = 1/2 converging strictly to a straight jump.

    The values of eval_convex_measure along the ramps are compared with the
    value on the jump field; with ramps aligned to nodes the strain total
    variation is exactly preserved.
    """
    if cells % 2:
        raise GridError("need an even number of cells so the jump sits on a face")
    dom = GridDomain.unit_square(cells + 1)
    a = np.asarray(jump, dtype=float)
    X, _ = dom.coords()
    widths, vals, tvs = [], [], []
    for m in width_cells:
        delta = m * dom.h
        ramp = np.clip((X - 0.5) / delta + 0.5, 0.0, 1.0)
        u = DiscreteBDField.from_smooth(VectorField(dom, ramp[..., None] * a))
        meas = bd_measure(u)
        widths.append(delta)
        vals.append(eval_convex_measure(f, meas))
        tvs.append(meas.total_variation())
    Xc, _ = dom.cell_centers()
    step = DiscreteBDField(dom, (Xc > 0.5)[..., None] * a)
    ml = bd_measure(step)
    limit = eval_convex_measure(f, ml)
    return ContinuityStudy(widths, vals, limit, [abs(v - limit) for v in vals], tvs, ml.total_variation())
