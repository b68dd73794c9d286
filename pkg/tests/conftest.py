import numpy as np
import pytest

import ltvlq


@pytest.fixture(scope="session")
def example1_bundle_098():
    """One full benchmark run at gamma = 0.98, shared across acceptance checks."""
    from ltvlq.cli import run_example1
    return run_example1(gamma=0.98, l=5, sigma=0.0, seed=20240601)


@pytest.fixture(scope="session")
def example1_bundle_100():
    """Full benchmark run at gamma = 1.0 with l = 5."""
    from ltvlq.cli import run_example1
    return run_example1(gamma=1.0, l=5, sigma=0.0, seed=20240601)


def random_system(rng, n, m, N, stable=False):
    """Random LTV (or scaled-stable LTI) instance with PSD/PD weights."""
    A = rng.standard_normal((N, n, n)) * 0.6
    B = rng.standard_normal((N, n, m))
    if stable:
        A0 = rng.standard_normal((n, n))
        ev = np.abs(np.linalg.eigvals(A0))
        if ev.max() > 0:
            A0 *= 0.9 / ev.max()
        A = np.repeat(A0[None], N, axis=0)
        B = np.repeat(rng.standard_normal((n, m))[None], N, axis=0)
    sys_ = ltvlq.TimeVaryingSystem(A, B)
    Q = np.empty((N, n, n))
    R = np.empty((N, m, m))
    for k in range(N):
        Mq = rng.standard_normal((n, n))
        Q[k] = Mq @ Mq.T / n
        Mr = rng.standard_normal((m, m))
        R[k] = Mr @ Mr.T / m + 0.3 * np.eye(m)
    Mf = rng.standard_normal((n, n))
    Qf = Mf @ Mf.T / n
    gamma = float(rng.uniform(0.9, 1.0))
    cost = ltvlq.CostSpec(Q, R, Qf, gamma)
    return sys_, cost


def random_lti_problem(rng, n, m, N):
    """Stable LTI plant with constant weights, for single-trajectory synthesis."""
    A = rng.standard_normal((n, n))
    ev = np.abs(np.linalg.eigvals(A))
    if ev.max() > 0:
        A *= 0.9 / ev.max()
    B = rng.standard_normal((n, m))
    Mq = rng.standard_normal((n, n))
    Q = Mq @ Mq.T / n + 0.1 * np.eye(n)
    Mr = rng.standard_normal((m, m))
    R = Mr @ Mr.T / m + 0.3 * np.eye(m)
    Mf = rng.standard_normal((n, n))
    Qf = Mf @ Mf.T / n
    gamma = float(rng.choice([1.0, 0.95, 0.9]))
    sys_ = ltvlq.TimeVaryingSystem.constant(A, B, N)
    cost = ltvlq.CostSpec.constant(Q, R, Qf, gamma, N)
    return sys_, cost
