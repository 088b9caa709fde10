"""Command line entry point: configuration, experiment orchestration and report emission."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as bio
from .grid import GridDomain, VectorField
from .integrands import IntegrandError, get_integrand

U0_GENERATORS = {
    "affine": lambda x, y: (0.3 * x + 0.1 * y, -0.2 * x + 0.4 * y),
    "shear": lambda x, y: (0.5 * y, 0.0 * x),
    "rigid": lambda x, y: (0.1 - y, 0.2 + x),
    "bump": lambda x, y: (0.5 * np.exp(-4 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)), 0.25 * x * y),
    "step": lambda x, y: (0.0 * x, (x > 0.5).astype(float)),
}

DIAGNOSTICS = ("monitors", "gap", "relaxed", "nogap", "attainment", "lbmo", "el_dual", "exponents", "spaces")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def parse_grid(spec: str) -> GridDomain:
    """``"NxM"`` cells on [0, N/max] x [0, M/max], i.e. spacing 1/max(N, M)."""
    try:
        a, b = (int(t) for t in str(spec).lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"grid: expected 'NxM', got {spec!r}") from exc
    if a < 2 or b < 2:
        raise ConfigError(f"grid: need at least 2 cells per side, got {spec!r}")
    return GridDomain(a + 1, b + 1, 1.0 / max(a, b))


def make_u0(spec, dom: GridDomain, amplitude: float = 1.0) -> VectorField:
    """Named generator (see U0_GENERATORS) or ``file:<path>`` of a field CSV."""
    spec = str(spec)
    if spec.startswith("file:"):
        u = bio.read_field(spec[5:])
        if u.domain != dom:
            raise ConfigError(f"u0: file grid {u.domain.node_shape} does not match {dom.node_shape}")
        return u
    if spec not in U0_GENERATORS:
        raise ConfigError(f"u0: unknown generator {spec!r}; choose from {sorted(U0_GENERATORS)} or file:<path>")
    fn = U0_GENERATORS[spec]
    return VectorField.from_function(dom, lambda x, y: tuple(amplitude * np.asarray(c, dtype=float) for c in fn(x, y)))


@dataclass
class ExperimentConfig:
    integrand: str = "quadratic"
    grid: str = "16x16"
    u0: str = "affine"
    u0_amplitude: float = 1.0
    schedule: list[int] = field(default_factory=lambda: [1, 4, 16, 64])
    tol: float = 1e-9
    diagnostics: list[str] = field(default_factory=list)
    output_dir: str = "out"
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"config.{sorted(extra)[0]}: unknown field")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            get_integrand(self.integrand)
        except (IntegrandError, ValueError) as exc:
            raise ConfigError(f"config.integrand: {exc}") from exc
        try:
            parse_grid(self.grid)
        except ConfigError as exc:
            raise ConfigError(f"config.{exc}") from exc
        if not str(self.u0).startswith("file:") and self.u0 not in U0_GENERATORS:
            raise ConfigError(f"config.u0: unknown generator {self.u0!r}")
        if not isinstance(self.schedule, list) or not self.schedule:
            raise ConfigError("config.schedule: need a non-empty list of j values")
        for k, j in enumerate(self.schedule):
            if not isinstance(j, int) or j < 1:
                raise ConfigError(f"config.schedule[{k}]: must be a positive integer, got {j!r}")
            if k and j <= self.schedule[k - 1]:
                raise ConfigError(f"config.schedule[{k}]: j values must increase")
        if not self.tol > 0:
            raise ConfigError("config.tol: must be positive")
        for k, d in enumerate(self.diagnostics):
            if d not in DIAGNOSTICS:
                raise ConfigError(f"config.diagnostics[{k}]: unknown diagnostic {d!r}")

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return fmt_float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    return x


def fmt_float(x: float):
    """Floats as 17-significant-digit numbers; non-finite values as strings."""
    if math.isfinite(x):
        return float(format(x, ".17g"))
    return str(x)


@dataclass
class Metric:
    name: str
    params: dict
    value: object


@dataclass
class DiagnosticsReport:
    config_hash: str
    metrics: list[Metric] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def add(self, name: str, value, **params) -> None:
        self.metrics.append(Metric(name, params, value))

    def to_dict(self) -> dict:
        return {"provenance": {"config_hash": self.config_hash},
                "metrics": [_jsonable(asdict(m)) for m in self.metrics],
                "errors": self.errors}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        d = self.to_dict()
        d["digest"] = self.digest()
        path.write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")
        return path

    def value(self, name: str, **params):
        for m in self.metrics:
            if m.name == name and all(m.params.get(k) == v for k, v in params.items()):
                return m.value
        raise KeyError(name)


def run(config: ExperimentConfig, write: bool = True) -> DiagnosticsReport:
    """Solve the viscosity sequence and evaluate the configured diagnostics.

    Each diagnostic runs in isolation; a failure is recorded under ``errors``
    and the remaining ones still run.
    """
    from .duality import gap_table
    from .relaxation import DiscreteBDField, boundary_attainment_check, nogap_check, relaxed_terms
    from .solver import Schedule, SolverError, el_residual_dual_norm, lbmo_monitor, run_viscosity_sequence
    from .spaces import bmo_norm, exponent_report, gagliardo

    config.validate()
    report = DiagnosticsReport(config.hash())
    if not config.diagnostics:
        if write:
            report.write(Path(config.output_dir) / "report.json")
        return report
    out = Path(config.output_dir)
    dom = parse_grid(config.grid)
    f = get_integrand(config.integrand)
    u0 = make_u0(config.u0, dom, config.u0_amplitude)
    schedule = Schedule(tuple(config.schedule), tol=config.tol)
    try:
        seq = run_viscosity_sequence(f, schedule, u0)
    except SolverError as exc:
        report.errors.append({"stage": "sequence", "message": str(exc)})
        if write:
            report.write(out / "report.json")
        return report
    last = seq.solutions[-1]
    if write:
        bio.write_field(out / "solution.csv", last.v)
    for s in seq.solutions:
        report.add("F_j", s.energy_Fj, j=s.j)
        report.add("F", s.energy_F, j=s.j)
        report.add("el_residual", s.el_residual, j=s.j)

    def stage(name, fn):
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - partial-failure report
            report.errors.append({"stage": name, "message": f"{type(exc).__name__}: {exc}"})

    def monitors():
        for k, v in seq.monitors.items():
            if k.startswith("ok_") or np.isscalar(v):
                report.add(f"monitor.{k}", v)
        if write:
            rows = [{"j": s.j, "F_j": s.energy_Fj, "F": s.energy_F, "eps_l1": s.eps_l1,
                     "el_residual": s.el_residual} for s in seq.solutions]
            bio.write_table(out / "sequence.csv", rows)

    def gap():
        rows = gap_table(seq.solutions, f, u0)
        for r in rows:
            report.add("gap", r["gap"], j=r["j"])
        if write:
            bio.write_table(out / "gap_table.csv", rows)

    def relaxed():
        t = relaxed_terms(DiscreteBDField.from_smooth(last.v), u0, f)
        report.add("relaxed.ac", t.ac)
        report.add("relaxed.singular", t.singular)
        report.add("relaxed.boundary", t.boundary)
        report.add("relaxed.total", t.total)

    def nogap():
        r = nogap_check(f, u0, schedule)
        report.add("nogap.relaxed", r.relaxed)
        report.add("nogap.inf_sequence", r.inf_sequence)
        report.add("nogap.dual_lower", r.dual_lower)
        report.add("nogap.ok", r.ok)

    def attainment():
        r = boundary_attainment_check(last.v, u0, f)
        report.add("attainment.margin", r.margin)
        report.add("attainment.ok", r.ok)

    def lbmo():
        K = (dom.nx // 4, dom.nx - 1 - dom.nx // 4, dom.ny // 4, dom.ny - 1 - dom.ny // 4)
        report.add("lbmo", lbmo_monitor(seq.solutions, K), K=list(K))

    def el_dual():
        report.add("el_residual_dual_norm", el_residual_dual_norm(last.v, f, last.j), j=last.j)

    def exponents():
        for n in (2, 3):
            for k, v in exponent_report(n, f.mu if f.mu is not None and f.mu < 2 else None).items():
                report.add(f"exponent.{k}", v, n=n)

    def spaces():
        v = last.v
        report.add("gagliardo", gagliardo(v, 0.5, 2.0), s=0.5, p=2.0)
        report.add("bmo", bmo_norm(v))

    for name, fn in [("monitors", monitors), ("gap", gap), ("relaxed", relaxed), ("nogap", nogap),
                     ("attainment", attainment), ("lbmo", lbmo), ("el_dual", el_dual),
                     ("exponents", exponents), ("spaces", spaces)]:
        if name in config.diagnostics:
            stage(name, fn)
    if write:
        report.write(out / "report.json")
    return report


def _thread_cap() -> int:
    raw = os.environ.get("BDVARMIN_THREADS", "")
    try:
        return max(1, int(raw)) if raw else (os.cpu_count() or 1)
    except ValueError:
        return 1


def _run_file(path: str) -> dict:
    cfg = ExperimentConfig.from_dict(json.loads(Path(path).read_text()))
    rep = run(cfg)
    return {"config": path, "hash": cfg.hash(), "digest": rep.digest(), "errors": len(rep.errors)}


# ------------------------------------------------------------------ subcommands

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--integrand", default="quadratic", help="e.g. phi_mu:1.2, area, quadratic")
    p.add_argument("--grid", default="16x16", help="cells per side, NxM")
    p.add_argument("--u0", default="affine", help=f"one of {sorted(U0_GENERATORS)} or file:<csv>")
    p.add_argument("--out", default="out")


def cmd_solve(a) -> int:
    from .solver import minimize_Fj

    dom = parse_grid(a.grid)
    f = get_integrand(a.integrand)
    u0 = make_u0(a.u0, dom)
    sol = minimize_Fj(f, a.j, u0, tol=a.tol)
    out = Path(a.out)
    bio.write_field(out / "solution.csv", sol.v)
    rep = DiagnosticsReport(hashlib.sha256(json.dumps(vars(a), sort_keys=True, default=str).encode()).hexdigest())
    rep.add("F_j", sol.energy_Fj, j=a.j)
    rep.add("F", sol.energy_F)
    rep.add("el_residual", sol.el_residual)
    rep.add("eps_l1", sol.eps_l1)
    rep.add("iterations", sol.iterations)
    rep.write(out / "report.json")
    print(f"F={sol.energy_F:.12g} residual={sol.el_residual:.3e} iterations={sol.iterations}")
    return 0


def cmd_sequence(a) -> int:
    cfg = ExperimentConfig(integrand=a.integrand, grid=a.grid, u0=a.u0,
                           schedule=[2 ** k for k in range(int(math.log2(a.jmax)) + 1)],
                           diagnostics=["monitors", "gap"], output_dir=a.out)
    rep = run(cfg)
    print(json.dumps(rep.to_dict()["errors"]) if rep.errors else f"wrote {a.out}/report.json")
    return 1 if rep.errors else 0


def cmd_dual(a) -> int:
    """Gap of a stored solution: its boundary values define the Dirichlet data."""
    from .duality import gap_table
    from .solver import ViscositySolution, energy, el_residual, eps_l1, stabilized

    v = bio.read_field(a.from_solution)
    f = get_integrand(a.integrand)
    sol = ViscositySolution(a.j, v, energy(stabilized(f, a.j), v), energy(f, v), el_residual(v, f, a.j), eps_l1(v))
    rows = gap_table([sol], f, v)
    path = bio.write_table(Path(a.out) / "gap_table.csv", rows)
    print(f"gap={rows[0]['gap']:.6e} -> {path}")
    return 0


def cmd_relax(a) -> int:
    from .relaxation import DiscreteBDField, relaxed_terms

    f = get_integrand(a.integrand)
    if a.bd:
        u = bio.read_bd_field(a.bd)
    else:
        u = DiscreteBDField.from_smooth(bio.read_field(a.from_solution))
    u0 = make_u0(a.u0, u.domain)
    t = relaxed_terms(u, u0, f)
    res = {"ac": t.ac, "singular": t.singular, "boundary": t.boundary, "total": t.total}
    print(json.dumps(_jsonable(res)))
    return 0


SPACE_OPS = ("gagliardo", "besov", "bmo", "doro", "calderon")


def _space_op(op, fld, s, p, q):
    from . import spaces

    if op == "gagliardo":
        return spaces.gagliardo(fld, s, p)
    if op == "besov":
        return spaces.besov_nikolskii(fld, s, p, q)
    if op == "bmo":
        return spaces.bmo_norm(fld)
    if op == "doro":
        return spaces.doro_seminorm(fld, s, p)
    return spaces.calderon_seminorm(fld, s, p)


def cmd_spaces(a) -> int:
    from .spaces import SCALAR_CORPUS, SampledFunction, corpus_field

    rows = []
    if a.corpus:
        for name in SCALAR_CORPUS:
            for n in a.sizes:
                fld = corpus_field(name, n)
                rows.append({"field": name, "n": n, "op": a.op, "s": a.s, "p": a.p, "q": a.q,
                             "value": _space_op(a.op, fld, a.s, a.p, a.q)})
    else:
        u = bio.read_field(a.input)
        rows.append({"field": a.input, "n": u.domain.nx, "op": a.op, "s": a.s, "p": a.p, "q": a.q,
                     "value": _space_op(a.op, SampledFunction.from_field(u), a.s, a.p, a.q)})
    if a.out:
        bio.write_table(Path(a.out) / "spaces.csv", rows)
    for r in rows:
        print(",".join(bio.fmt(v) if isinstance(v, float) else str(v) for v in r.values()))
    return 0


def cmd_experiment(a) -> int:
    if a.parallel and len(a.configs) > 1:
        with ProcessPoolExecutor(max_workers=min(_thread_cap(), len(a.configs))) as ex:
            results = list(ex.map(_run_file, a.configs))
    else:
        results = [_run_file(c) for c in a.configs]
    for r in results:
        print(json.dumps(r))
    return 1 if any(r["errors"] for r in results) else 0


def cmd_selftest(a) -> int:
    """Quick end-to-end smoke checks; prints one PASS/FAIL line each."""
    from .duality import gap_table
    from .grid import divergence_array, sym_gradient_array
    from .integrands import phi_mu
    from .solver import minimize_Fj

    checks = []
    r = np.linspace(0, 10, 101)
    checks.append(("phi_3 closed form", float(np.max(np.abs(phi_mu(3.0, r) - (np.sqrt(1 + r * r) - 1)))) < 1e-10))
    rng = np.random.default_rng(0)
    dom = GridDomain.unit_square(9)
    sig = rng.standard_normal((*dom.cell_shape, 3))
    phi = rng.standard_normal((*dom.node_shape, 2))
    phi[dom.boundary_mask] = 0
    lhs = np.sum((sig * sym_gradient_array(phi, dom.h)) @ np.array([1.0, 2.0, 1.0]))
    rhs = -np.sum(divergence_array(sig, dom.h) * phi)
    checks.append(("summation by parts", abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))))
    f = get_integrand("quadratic")
    u0 = make_u0("bump", dom)
    sol = minimize_Fj(f, None, u0)
    gap = gap_table([sol], f, u0)[0]["gap"]
    checks.append(("quadratic duality gap", abs(gap) <= 1e-8))
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if all(ok for _, ok in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bdvarmin", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="minimize one (stabilized) energy")
    _common(p)
    p.add_argument("--j", type=int, default=None, help="viscosity index; omit for the plain energy")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sequence", help="viscosity sequence j = 1, 2, 4, ..., jmax")
    _common(p)
    p.add_argument("--jmax", type=int, default=64)
    p.set_defaults(fn=cmd_sequence)

    p = sub.add_parser("dual", help="duality gap of a stored solution")
    p.add_argument("--from-solution", required=True)
    p.add_argument("--integrand", default="quadratic")
    p.add_argument("--j", type=int, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_dual)

    p = sub.add_parser("relax", help="relaxed functional of a stored field")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--from-solution")
    g.add_argument("--bd", help="prefix written by io.write_bd_field")
    p.add_argument("--integrand", default="area")
    p.add_argument("--u0", default="affine")
    p.set_defaults(fn=cmd_relax)

    p = sub.add_parser("spaces", help="seminorms of a stored field or of the corpus")
    p.add_argument("--op", choices=SPACE_OPS, required=True)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=math.inf)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--in", dest="input")
    g.add_argument("--corpus", action="store_true")
    p.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_spaces)

    p = sub.add_parser("experiment", help="run JSON experiment configs")
    p.add_argument("configs", nargs="+")
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("selftest", help="fast smoke checks")
    p.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        code = args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if os.environ.get("BDVARMIN_TIMING"):
        print(f"[{args.cmd}] {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
