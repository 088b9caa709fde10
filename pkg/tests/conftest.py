import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bdvarmin.grid import GridDomain, VectorField

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[number] = (bool(ok), f"{title}: {detail}" if detail else title)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{k:2d}] {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(dom: GridDomain, rng, pinned: bool = False) -> VectorField:
    v = rng.standard_normal((*dom.node_shape, 2))
    if pinned:
        v[dom.boundary_mask] = 0.0
    return VectorField(dom, v)
