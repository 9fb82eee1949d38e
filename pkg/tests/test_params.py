import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accelfp.numeric import poly_roots
from accelfp.params import (
    AccelConfig,
    PoleError,
    alpha_star,
    d_accel_alphas,
    flying_saucer_params,
    phi_map,
    phi_star_map,
    psi_map,
    u_coeffs,
)

# Reference weights from symbolic coefficient matching of
# lam**d - (1-eps) U(lam) against (lam - (1 - eps**(1/d)))**d.
FROZEN_ALPHAS = {
    (2, 0.01): [0.81818181818181818182],
    (3, 0.001): [-0.72972972972972972973, 2.4324324324324324324],
    (4, 0.0001): [0.65616561656165616562, -2.9162916291629162916, 4.8604860486048604861],
}


def test_alpha_star_values():
    assert alpha_star(0.25) == pytest.approx(1 / 3, abs=1e-15)
    assert alpha_star(0.01) == pytest.approx(9 / 11, abs=1e-15)


@pytest.mark.parametrize("key", sorted(FROZEN_ALPHAS))
def test_d_accel_alphas_frozen(key):
    d, eps = key
    np.testing.assert_allclose(d_accel_alphas(d, eps), FROZEN_ALPHAS[key], rtol=1e-13)


def test_degree_two_matches_alpha_star():
    for eps in (1e-6, 0.01, 0.3):
        assert d_accel_alphas(2, eps)[0] == pytest.approx(alpha_star(eps), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.floats(1e-4, 0.5))
def test_optimal_weights_give_multiple_root(d, eps):
    # at lambda = 1 - eps the characteristic polynomial collapses to one d-fold root
    U = u_coeffs(d_accel_alphas(d, eps))
    roots = poly_roots(np.concatenate([[1.0], -(1 - eps) * U]))
    target = 1 - eps ** (1 / d)
    # a d-fold root scatters by about machine_eps**(1/d); the mean does not
    assert abs(roots.mean() - target) < 1e-12
    assert np.max(np.abs(roots - target)) < 1e-3


def test_flying_saucer_frozen():
    fs = flying_saucer_params(0.04)
    assert fs.beta == pytest.approx(0.675675675675675675, abs=1e-15)
    assert fs.alpha == pytest.approx(0.717624303872321128, abs=1e-15)
    assert fs.rate_bound == pytest.approx(0.836700683814454793, abs=1e-15)


def test_flying_saucer_endpoints():
    assert flying_saucer_params(0.0).beta == pytest.approx(2 / 3)
    assert flying_saucer_params(1.0).beta == pytest.approx(1.0)


def test_u_coeffs_layout():
    np.testing.assert_allclose(u_coeffs([0.1, 0.2, 0.3]), [1.6, -0.3, -0.2, -0.1])


def test_phi_star_maps_optimal_root():
    for d in (2, 3, 4):
        eps = 0.01
        lam = 1 - eps ** (1 / d)
        assert phi_star_map(d, eps, lam) == pytest.approx(1 - eps, rel=1e-12)
        assert phi_map(d, d_accel_alphas(d, eps), lam) == pytest.approx(1 - eps, rel=1e-12)


def test_psi_map_pole():
    # psi_d(1) = 1 / (1 - 0) and psi_d has a pole where mu**d = (mu - 1)**d
    assert psi_map(2, 1.0) == pytest.approx(1.0)
    with pytest.raises(PoleError):
        psi_map(2, 0.5)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, float("nan")])
def test_epsilon_validation(bad):
    with pytest.raises(ValueError):
        alpha_star(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        AccelConfig(degree=3, alpha=(0.1,))
    with pytest.raises(ValueError):
        AccelConfig(beta=0.0)
    with pytest.raises(ValueError):
        AccelConfig(delta=0.0)
    with pytest.raises(ValueError):
        AccelConfig(degree=1, alpha=())


def test_config_roundtrip():
    cfg = AccelConfig.optimal(3, 0.01, delta=1e-8)
    back = AccelConfig.from_dict(cfg.to_dict())
    assert back == cfg
    derived = AccelConfig.from_dict({"degree": 3, "epsilon": 0.01})
    np.testing.assert_allclose(derived.alpha_array, d_accel_alphas(3, 0.01))


def test_plain_config_is_value_iteration():
    cfg = AccelConfig.plain()
    assert cfg.degree == 2 and cfg.alpha == (0.0,) and cfg.beta == 1.0
