import numpy as np
import pytest

from ekfpnp.camera import Intrinsics, Pose


def central_diff(fun, x, h=1e-6):
    """Numerical Jacobian of ``fun`` at ``x`` by central differences."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (np.asarray(fun(x + e)) - np.asarray(fun(x - e))).ravel() / (2 * h)
    return J


def rel_err(A, B):
    """Frobenius-norm relative error of ``A`` against reference ``B``."""
    return np.linalg.norm(A - B) / max(np.linalg.norm(B), 1e-12)


def random_quat(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


def random_scene(rng, n=10):
    """Random pose and points guaranteed to lie 2..10 m in front of it."""
    pose = Pose(q=random_quat(rng), c=rng.uniform(-5, 5, 3))
    xc = np.column_stack((rng.uniform(-1, 1, (n, 2)), np.ones(n))) * rng.uniform(2, 10, (n, 1))
    pts = xc @ pose.R + pose.c
    return pose, pts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def intr():
    return Intrinsics()


# one line per acceptance criterion, appended by tests/test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
