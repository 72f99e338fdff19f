import numpy as np
import pytest

from quasisym import solutions as S
from quasisym.sampling import sample_interior


@pytest.fixture(scope="session")
def bqs():
    return S.local_qs(k=0.18)


@pytest.fixture(scope="session")
def bqs_pts(bqs):
    return sample_interior(bqs, 1000, seed=0)


@pytest.fixture(scope="session")
def flux_aligned():
    return S.flux_aligned_qs(k=0.18)


@pytest.fixture(scope="session")
def flux_aligned_pts(flux_aligned):
    return sample_interior(flux_aligned, 1000, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance summary ------------------------------------------------------------------

_ACCEPTANCE_KEY = "_quasisym_acceptance"

CRITERIA = {
    1: "chart fidelity",
    2: "twisted-field identity suite",
    3: "flux-aligned identity suite",
    4: "anisotropic force balance",
    5: "characteristic integration",
    6: "asymmetry certification",
    7: "locality obstruction",
    8: "figure data",
}


@pytest.fixture
def acceptance(request):
    """record(criterion, check, ok, detail) stores one sub-check result and prints its line."""
    store = getattr(request.config, _ACCEPTANCE_KEY, None)
    if store is None:
        store = {}
        setattr(request.config, _ACCEPTANCE_KEY, store)

    def record(n, check, ok, detail=""):
        store.setdefault(n, []).append((check, bool(ok), detail))
        print(f"criterion {n} [{check}]: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, _ACCEPTANCE_KEY, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        checks = store[n]
        ok = all(c[1] for c in checks)
        failed = [f"{c[0]} ({c[2]})" for c in checks if not c[1]]
        line = f"criterion {n} ({CRITERIA.get(n, '')}): {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " - failing: " + "; ".join(failed)
        terminalreporter.write_line(line)
