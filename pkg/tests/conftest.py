import numpy as np
import pytest

from ranspinn.data import make_mms_case
from ranspinn.network import FieldNetworkSet, NetworkConfig


def small_nets(seed=0, mode="fixed-Re", bounds=((0.0, 1.0), (0.0, 1.0)), re_range=None, widths=(8, 8), n_freq=3):
    cfg = NetworkConfig(widths=list(widths), n_freq=n_freq, seed=seed, mode=mode,
                        bounds=[list(b) for b in bounds], re_range=re_range)
    return FieldNetworkSet.init(cfg)


@pytest.fixture
def nets():
    return small_nets()


@pytest.fixture(scope="session")
def vortex():
    """Small trig-vortex case (MmsCase, CaseDataset)."""
    return make_mms_case("trig-vortex", 5600.0, n_data=300, n_colloc=300, n_cloud=1000, n_boundary=20, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
