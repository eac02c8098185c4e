import numpy as np
import pytest

from airreg import kernels


@pytest.fixture(params=kernels.available())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def dense_F(X, C, groups=None):
    """Materialize F column by column from its definition.

    Row block for group (i, c) is diag(x_i) placed at the columns of w[:, c]
    in the column-major vectorization of w.
    """
    n, p = X.shape
    if groups is None:
        groups = range(n * C)
    groups = list(groups)
    F = np.zeros((len(groups) * p, p * C))
    for k, g in enumerate(groups):
        i, c = divmod(g, C)
        for j in range(p):
            F[k * p + j, c * p + j] = X[i, j]
    return F


def vec(w):
    return np.asarray(w).ravel(order="F")


def unvec(x, p, C):
    return np.asarray(x).reshape(C, p).T


VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record a one-line pass/fail verdict, echoed in the terminal summary."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    def record(number, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number:>2}: {status}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
