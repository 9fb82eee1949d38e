import numpy as np
import pytest

from accelfp.numeric import dense_eigenvalues, match_multisets
from accelfp.problems import (
    HjbSpec,
    RandomMdpSpec,
    gen_random_mdp,
    hjb_c0,
    hjb_discretize,
    hjb_eigen_oracle,
    hjb_imag_bound,
    hjb_policy_matrix,
    hjb_preset,
    hjb_to_fixed_point,
    rng_stream,
)


def test_random_mdp_is_deterministic():
    spec = RandomMdpSpec(n=40, m=3, p=0.3, epsilon=0.01, seed=99)
    a, b = gen_random_mdp(spec), gen_random_mdp(spec)
    assert np.array_equal(a.transitions.toarray(), b.transitions.toarray())
    assert np.array_equal(a.rewards, b.rewards) and np.array_equal(a.discounts, b.discounts)
    c = gen_random_mdp(RandomMdpSpec(n=40, m=3, p=0.3, epsilon=0.01, seed=100))
    assert not np.array_equal(a.rewards, c.rewards)


def test_random_mdp_structure():
    eps = 0.02
    mdp = gen_random_mdp(RandomMdpSpec(n=50, m=4, p=0.2, epsilon=eps, seed=1))
    assert mdp.n == 50 and mdp.uniform_actions == 4
    np.testing.assert_allclose(mdp.transitions.row_sums(), 1.0, atol=1e-15)
    assert np.all((mdp.discounts >= 1 - 2 * eps) & (mdp.discounts <= 1 - eps))
    assert np.all((mdp.rewards >= 0) & (mdp.rewards <= 1))
    assert mdp.meta["epsilon"] == eps


def test_rows_are_uniform_on_their_support():
    mdp = gen_random_mdp(RandomMdpSpec(n=20, m=2, p=0.5, epsilon=0.1, seed=3))
    for r in range(mdp.transitions.n_rows):
        _, vals = mdp.transitions.row(r)
        assert np.all(vals == vals[0])


def test_full_density_gives_uniform_rows():
    mdp = gen_random_mdp(RandomMdpSpec(n=5, m=2, p=1.0, epsilon=0.1, seed=0))
    np.testing.assert_allclose(mdp.transitions.toarray(), 0.2)


def test_tiny_density_falls_back_to_self_loop():
    mdp = gen_random_mdp(RandomMdpSpec(n=3, m=1, p=1e-12, epsilon=0.1, seed=0))
    np.testing.assert_array_equal(mdp.transitions.toarray(), np.eye(3))


def test_streams_are_keyed_per_row():
    # adding actions leaves the rows of existing (state, action) pairs unchanged
    a = gen_random_mdp(RandomMdpSpec(n=10, m=2, p=0.4, epsilon=0.1, seed=5))
    b = gen_random_mdp(RandomMdpSpec(n=10, m=3, p=0.4, epsilon=0.1, seed=5))
    Pa, Pb = a.transitions.toarray(), b.transitions.toarray()
    for i in range(10):
        np.testing.assert_array_equal(Pa[2 * i:2 * i + 2], Pb[3 * i:3 * i + 2])
    np.testing.assert_array_equal(a.discounts, b.discounts)


def test_rng_stream_independence():
    x = rng_stream(1, 0, 0, 0).random(4)
    y = rng_stream(1, 0, 0, 1).random(4)
    assert not np.array_equal(x, y)
    np.testing.assert_array_equal(x, rng_stream(1, 0, 0, 0).random(4))


@pytest.mark.parametrize("kwargs", [
    dict(n=0, m=1, p=0.5, epsilon=0.1),
    dict(n=5, m=1, p=0.0, epsilon=0.1),
    dict(n=5, m=1, p=0.5, epsilon=0.6),
    dict(n=5, m=1, p=0.5, epsilon=0.1, seed=-1),
    dict(n=5, m=1, p=0.5, epsilon=0.1, reward_low=2.0, reward_high=1.0),
])
def test_random_spec_validation(kwargs):
    with pytest.raises(ValueError):
        RandomMdpSpec(**kwargs)


def one_d_spec(N=8, drift=0.3, **kw):
    return HjbSpec(dim=1, N=N, sigma=[1.0], lam=1.0, m=1, drift=[drift], **kw)


def test_generator_rows_sum_to_minus_lambda():
    disc = hjb_discretize(one_d_spec())
    np.testing.assert_allclose(disc.A[0].row_sums(), -1.0, atol=1e-9)


def test_policy_matrix_is_substochastic():
    disc = hjb_discretize(one_d_spec(N=16))
    P = hjb_policy_matrix(disc)
    assert np.all(P.values >= 0)
    np.testing.assert_allclose(P.row_sums(), 1 - disc.epsilon, atol=1e-14)
    np.testing.assert_allclose(P.toarray(), np.eye(16) + disc.c * disc.spec.h ** 2 * disc.A[0].toarray(), atol=1e-13)


def test_step_above_c0_rejected():
    spec = one_d_spec()
    with pytest.raises(ValueError, match="c0"):
        hjb_discretize(one_d_spec(c=1.01 * hjb_c0(spec)))
    # c = c0 is admissible and keeps the matrix nonnegative
    P = hjb_policy_matrix(hjb_discretize(one_d_spec(c=hjb_c0(spec))))
    assert np.all(P.values >= 0)


@pytest.mark.parametrize("spec", [
    one_d_spec(N=8, drift=0.3),
    one_d_spec(N=9, drift=-0.7),
    HjbSpec(dim=2, N=4, sigma=[1.0, 0.5], lam=2.0, m=1, drift=[0.4, -0.2]),
])
def test_eigen_oracle_matches_dense(spec):
    disc = hjb_discretize(spec)
    eta = hjb_eigen_oracle(spec, disc.c)
    dense = dense_eigenvalues(hjb_policy_matrix(disc).toarray())
    assert match_multisets(dense, eta) < 1e-10
    assert eta[-1] == pytest.approx(1 - disc.epsilon, abs=1e-15)
    assert np.all(hjb_imag_bound(spec, eta, disc.c) - np.abs(eta.imag) >= 0)


def test_oracle_needs_uniform_drift():
    with pytest.raises(ValueError):
        hjb_eigen_oracle(hjb_preset("1d", N=8))


def test_fixed_point_packaging():
    disc = hjb_discretize(hjb_preset("1d", seed=2, N=20, m=3))
    mdp = hjb_to_fixed_point(disc)
    assert mdp.n == 20 and mdp.uniform_actions == 3
    np.testing.assert_allclose(mdp.transitions.row_sums(), 1.0, atol=1e-12)
    np.testing.assert_allclose(mdp.discounts, 1 - disc.epsilon)
    # row of state 4 under action 2 is P_h^2 row 4 rescaled
    P2 = hjb_policy_matrix(disc, 2).toarray()
    np.testing.assert_allclose(mdp.transitions.toarray()[4 * 3 + 2] * (1 - disc.epsilon), P2[4], atol=1e-15)
    assert mdp.rewards[4 * 3 + 2] == pytest.approx(disc.c * disc.spec.h ** 2 * disc.rewards[2, 4])


def test_presets_are_seeded():
    a, b = hjb_preset("2d", seed=1, N=5), hjb_preset("2d", seed=1, N=5)
    np.testing.assert_array_equal(a.drift, b.drift)
    assert a.drift.shape == (10, 25, 2)
    assert np.all(a.drift[..., 1] <= 0) and np.all(a.drift[..., 0] >= 0)
    with pytest.raises(ValueError):
        hjb_preset("3d")
