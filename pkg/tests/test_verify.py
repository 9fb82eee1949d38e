import pytest

from accelfp.verify import CHECKS, run_checks


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_all_checks_pass(seed):
    results = run_checks(seed)
    assert [r.name for r in results] == list(CHECKS)
    failed = [r.line() for r in results if not r.passed]
    assert not failed, failed


def test_perturbed_weights_fail_only_rate_checks():
    results = {r.name: r for r in run_checks(0, perturb_alpha=1e-3)}
    assert not results["scalar_rate_law"].passed
    # the spectral identity holds for any weights
    assert results["companion_spectrum"].passed
    assert results["hjb_eigen_oracle"].passed


def test_subset_and_line_format():
    (res,) = run_checks(0, only=["tolerance_sharpness"])
    assert res.line().startswith("PASS tolerance_sharpness: measured=")
