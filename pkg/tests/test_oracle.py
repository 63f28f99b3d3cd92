import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustavg import oracle
from robustavg.mdp import MdpModel, Policy, induced_chain

SYM = np.array([[0.7, 0.3], [0.3, 0.7]])
WORST = np.array([[0.46, 0.54], [0.94, 0.06]])


def test_stationary_examples():
    np.testing.assert_allclose(oracle.stationary_distribution(SYM), [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(
        oracle.stationary_distribution(WORST), [0.94 / 1.48, 0.54 / 1.48], atol=1e-12)
    with pytest.raises(oracle.NonUnichainError):
        oracle.stationary_distribution(np.eye(2))


def test_transient_states_are_allowed():
    P = np.array([[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.2, 0.3, 0.5]])
    np.testing.assert_allclose(oracle.stationary_distribution(P), [0, 1, 0], atol=1e-14)
    assert len(oracle.recurrent_classes(P)) == 1


def test_limit_matrix_examples():
    mu = np.array([0.2, 0.5, 0.3])
    iid = np.tile(mu, (3, 1))
    np.testing.assert_allclose(oracle.limit_matrix(iid), iid, atol=1e-14)
    np.testing.assert_allclose(oracle.limit_matrix(SYM), 0.5, atol=1e-14)
    np.testing.assert_allclose(oracle.limit_matrix(WORST), [[0.63514, 0.36486]] * 2, atol=1e-5)


def test_deviation_matrix_iid():
    mu = np.array([0.2, 0.5, 0.3])
    iid = np.tile(mu, (3, 1))
    np.testing.assert_allclose(oracle.deviation_matrix(iid), np.eye(3) - iid, atol=1e-14)


def test_bias_matches_cesaro_sum():
    r = np.array([0.0, 1.0])
    H = oracle.deviation_matrix(SYM)
    Pstar = oracle.limit_matrix(SYM)
    # truncated sum of (P^t - P*) r; terms vanish long before 1e6 steps
    acc = np.zeros(2)
    Pt = np.eye(2)
    for _ in range(10**6):
        term = (Pt - Pstar) @ r
        if np.max(np.abs(term)) < 1e-18:
            break
        acc += term
        Pt = Pt @ SYM
    h = H @ r
    np.testing.assert_allclose(h, acc, atol=1e-12)
    assert np.ptp(h) == pytest.approx(np.ptp(acc), abs=1e-8)


def _random_chain(seed, n=5, zeros=False):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n), size=n)
    if zeros:
        P[rng.random((n, n)) < 0.3] = 0.0
        P[np.arange(n), (np.arange(n) + 1) % n] += 0.1  # keep it irreducible
        P /= P.sum(axis=1, keepdims=True)
    return P


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.booleans())
def test_chain_identities(seed, n, zeros):
    P = _random_chain(seed, n, zeros)
    ca = oracle.analyze_chain(P)
    np.testing.assert_allclose(ca.stationary @ P, ca.stationary, atol=1e-10)
    Ps = ca.limit_matrix
    for M in (P @ Ps, Ps @ P, Ps @ Ps):
        np.testing.assert_allclose(M, Ps, atol=1e-9)
    np.testing.assert_allclose(ca.deviation_matrix @ np.ones(n), 0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gain_bias_satisfy_bellman(seed):
    rng = np.random.default_rng(seed)
    K = rng.dirichlet(np.ones(4), size=(4, 3))
    m = MdpModel(K, rng.random((4, 3)))
    pol = Policy(rng.dirichlet(np.ones(3), size=4))
    gb = oracle.gain_and_bias(m, K, pol)
    P, r = induced_chain(m, K, pol)
    assert np.ptp(gb.gain) <= 1e-12
    np.testing.assert_allclose(gb.bias, r - gb.gain + P @ gb.bias, atol=1e-9)


def test_gain_examples(cycle, smoothed_chain, one_state):
    pol = Policy.deterministic([0, 0], 1)
    np.testing.assert_allclose(oracle.gain_and_bias(cycle, cycle.kernel, pol).gain, 0.5, atol=1e-14)
    gb = oracle.gain_and_bias(smoothed_chain, WORST[:, None, :], pol)
    assert gb.g == pytest.approx(0.54 / 1.48, abs=1e-12)
    one = oracle.gain_and_bias(one_state, one_state.kernel, Policy.deterministic([0], 1))
    assert one.g == pytest.approx(0.7) and one.bias[0] == pytest.approx(0.0, abs=1e-15)


def test_discounted_examples(cycle):
    m = MdpModel(np.ones((1, 1, 1)), np.ones((1, 1)))
    assert oracle.discounted_value(m, m.kernel, Policy.deterministic([0], 1), 0.9)[0] == pytest.approx(10.0)
    V = oracle.discounted_value(cycle, cycle.kernel, Policy.deterministic([0, 0], 1), 0.5)
    np.testing.assert_allclose(V, [2 / 3, 4 / 3], atol=1e-14)


def test_discounted_matches_truncated_series():
    rng = np.random.default_rng(7)
    K = rng.dirichlet(np.ones(6), size=(6, 2))
    m = MdpModel(K, rng.random((6, 2)))
    pol = Policy.uniform(6, 2)
    gamma = 0.99
    P, r = induced_chain(m, K, pol)
    acc, x = np.zeros(6), r.copy()
    for t in range(10**4):
        acc += gamma**t * x
        x = P @ x
    np.testing.assert_allclose(oracle.discounted_value(m, K, pol, gamma), acc, atol=1e-6)


def test_laurent_limit():
    rng = np.random.default_rng(8)
    K = rng.dirichlet(np.ones(5), size=(5, 2))
    m = MdpModel(K, rng.random((5, 2)))
    pol = Policy.deterministic([0, 1, 0, 1, 0], 2)
    g = oracle.gain_and_bias(m, K, pol).g
    gaps = []
    for gamma in (0.9, 0.99, 0.999):
        gaps.append(np.max(np.abs((1 - gamma) * oracle.discounted_value(m, K, pol, gamma) - g)))
    C = gaps[0] / 0.1
    for gap, gamma in zip(gaps, (0.9, 0.99, 0.999)):
        assert gap <= C * (1 - gamma) * 1.01
    assert gaps[0] > gaps[1] > gaps[2]


def test_ill_conditioned_warning():
    eps = 1e-15
    P = np.array([[1 - eps, eps], [eps, 1 - eps]])
    with pytest.warns(oracle.IllConditionedWarning):
        oracle.deviation_matrix(P)
