import numpy as np
import pytest

from accelfp.problems import RandomMdpSpec, gen_random_mdp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_mdp():
    return gen_random_mdp(RandomMdpSpec(n=30, m=3, p=0.5, epsilon=0.05, seed=7))


def random_dense_mdp(rng, n=6, m=3, gamma=None):
    """Dense random MDP with full-support rows, used by property tests."""
    from accelfp.mdp import MdpInstance

    P = rng.uniform(size=(m, n, n))
    P /= P.sum(axis=2, keepdims=True)
    rewards = rng.uniform(-1, 1, size=(n, m))
    discounts = rng.uniform(0.5, 0.95, n) if gamma is None else np.full(n, gamma)
    return MdpInstance.from_dense(P, rewards, discounts)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """``report(number, title, passed, detail)`` prints and records one acceptance line."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'} {title}: {detail}".rstrip(": ")
        lines.append((number, line))
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
