import numpy as np
import pytest

from scltpe.data import Dataset, bundled_path, load_keel

# numpy 2 renamed trapz; keep both supported versions working
trapezoid = getattr(np, "trapezoid", None) or np.trapz


@pytest.fixture(scope="session")
def glass0():
    return load_keel(bundled_path("glass0"))


def make_blobs(n_per_class=(30, 10), d=3, sep=3.0, seed=0):
    """Gaussian blobs, one per class, centred ``sep`` apart along each axis."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c, n in enumerate(n_per_class):
        X.append(rng.normal(c * sep, 1.0, size=(n, d)))
        y.append(np.full(n, c))
    names = tuple(f"c{c}" for c in range(len(n_per_class)))
    return Dataset(np.vstack(X), np.concatenate(y), names)


@pytest.fixture
def blobs():
    return make_blobs()


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number: int, ok: bool, detail: str):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, 11):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"criterion {n:2d}: NOT RUN")
