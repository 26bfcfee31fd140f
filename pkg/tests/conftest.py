import numpy as np
import pytest

from cachecast.phy import PhyConfig
from cachecast.topology import CacheNode, CellLayout, HotZone, UserDistribution
from cachecast.traffic import FileSpec, ShadowingModel


@pytest.fixture
def cfg():
    return PhyConfig()


@pytest.fixture
def two_cache_layout():
    return CellLayout(500.0, (CacheNode((400.0, 0.0), 150.0), CacheNode((-300.0, 200.0), 150.0)))


@pytest.fixture
def four_cache_layout():
    pos = [(350.0, 0.0), (0.0, 350.0), (-350.0, 0.0), (0.0, -350.0)]
    return CellLayout(500.0, tuple(CacheNode(p, 90.0) for p in pos))


@pytest.fixture
def hot_two(two_cache_layout):
    return UserDistribution("hotzone", tuple(HotZone(n.position, n.service_radius, 0.3)
                                             for n in two_cache_layout.cache_nodes))


@pytest.fixture
def shadowing():
    return ShadowingModel(8.0, 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_file(load=5.0, lifetime=1000.0, num_segments=1, bits=14e6, file_id=0, start=0.0):
    return FileSpec(file_id, load / lifetime, lifetime, start, num_segments, bits)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    def _record(k: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
