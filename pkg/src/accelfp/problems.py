"""Benchmark instances: Bernoulli random MDPs and upwind HJB discretisations on a torus.

Random streams are derived from one integer seed with
``numpy.random.SeedSequence(seed, spawn_key=key)`` feeding a PCG64 generator.
Keys: ``(0, i, a)`` for the transition row of state ``i`` / action ``a``,
``(1,)`` discounts, ``(2,)`` rewards, ``(3,)`` HJB drifts, ``(4,)`` HJB rewards.
The same seed therefore yields the same instance on any platform.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from ._validation import check_epsilon
from .mdp import MdpInstance
from .numeric import SparseRowMatrix

__all__ = [
    "RandomMdpSpec",
    "HjbSpec",
    "HjbDiscretization",
    "rng_stream",
    "gen_random_mdp",
    "hjb_c0",
    "hjb_discretize",
    "hjb_to_fixed_point",
    "hjb_policy_matrix",
    "hjb_eigen_oracle",
    "hjb_imag_bound",
    "hjb_preset",
    "HJB_PRESETS",
]

MAX_RESAMPLE = 64


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 generator for ``(seed, key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


# ---------------------------------------------------------------- random MDPs


@dataclass(frozen=True)
class RandomMdpSpec:
    """Bernoulli random MDP with ``m`` actions per state.

    Each row is ``X / sum(X)`` with ``X_j ~ Bernoulli(p)``; discounts are
    uniform on ``[1 - 2 eps, 1 - eps]`` and rewards uniform on
    ``[reward_low, reward_high]``, independently per (state, action).
    """

    n: int
    m: int
    p: float
    epsilon: float
    seed: int = 0
    reward_low: float = 0.0
    reward_high: float = 1.0

    def __post_init__(self):
        if int(self.n) < 1 or int(self.m) < 1:
            raise ValueError("n and m must be positive")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        check_epsilon(self.epsilon)
        if not self.epsilon < 0.5:
            raise ValueError("epsilon must be below 1/2 so that 1 - 2 eps > 0")
        if not self.reward_low <= self.reward_high:
            raise ValueError("reward_low must not exceed reward_high")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _bernoulli_row(rng, n: int, p: float, self_index: int) -> np.ndarray:
    for _ in range(MAX_RESAMPLE + 1):
        cols = np.flatnonzero(rng.random(n) < p)
        if cols.size:
            return cols
    return np.array([self_index])


def gen_random_mdp(spec: RandomMdpSpec) -> MdpInstance:
    """Sample an instance; an all-zero row is redrawn up to 64 times, then becomes a self-loop."""
    n, m = int(spec.n), int(spec.m)
    indptr = [0]
    cols, vals = [], []
    for i in range(n):
        for a in range(m):
            c = _bernoulli_row(rng_stream(spec.seed, 0, i, a), n, spec.p, i)
            cols.append(c)
            vals.append(np.full(c.size, 1.0 / c.size))
            indptr.append(indptr[-1] + c.size)
    P = SparseRowMatrix(n * m, n, np.asarray(indptr), np.concatenate(cols), np.concatenate(vals))
    gamma = rng_stream(spec.seed, 1).uniform(1.0 - 2.0 * spec.epsilon, 1.0 - spec.epsilon, n)
    rewards = rng_stream(spec.seed, 2).uniform(spec.reward_low, spec.reward_high, n * m)
    meta = {"generator": "random", "n": n, "m": m, "p": spec.p, "epsilon": spec.epsilon, "seed": int(spec.seed),
            "reward_low": spec.reward_low, "reward_high": spec.reward_high}
    return MdpInstance(P, np.arange(n + 1) * m, rewards, gamma, meta)


# ---------------------------------------------------------------- HJB on the torus


@dataclass(frozen=True)
class HjbSpec:
    """Upwind discretisation data on the torus ``[0, 1)^dim`` with ``N`` points per axis.

    Attributes
    ----------
    dim : int
    N : int
        Grid points per axis, ``h = 1/N``.
    sigma : array, shape (dim,)
        Volatility per axis.
    lam : float
        Dissipation rate.
    m : int
        Number of actions.
    drift : array
        Shape ``(m, N**dim, dim)`` (tabulated per action and grid point) or
        ``(dim,)`` for a drift shared by all actions and points.
    reward : array or float
        Shape ``(m, N**dim)`` or a constant.
    c : float or None
        Time-step scaling; ``None`` selects ``c0 / 2``.
    """

    dim: int
    N: int
    sigma: np.ndarray
    lam: float
    m: int = 1
    drift: np.ndarray = field(default_factory=lambda: np.zeros(1))
    reward: object = 0.0
    c: float | None = None

    def __post_init__(self):
        dim, N = int(self.dim), int(self.N)
        if dim < 1 or N < 2 or int(self.m) < 1:
            raise ValueError("need dim >= 1, N >= 2 and m >= 1")
        sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), (dim,)).copy()
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        drift = np.asarray(self.drift, dtype=float)
        size = N ** dim
        if drift.shape == (dim,) or drift.size == 1:
            drift = np.broadcast_to(drift.reshape(-1) if drift.size == dim else drift, (dim,))
            drift = np.broadcast_to(drift, (self.m, size, dim)).copy()
        if drift.shape != (self.m, size, dim):
            raise ValueError(f"drift must have shape {(self.m, size, dim)} or ({dim},)")
        reward = np.broadcast_to(np.asarray(self.reward, dtype=float), (self.m, size)).copy()
        for name, value in (("sigma", sigma), ("drift", drift), ("reward", reward)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "N", N)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def size(self) -> int:
        return self.N ** self.dim

    @property
    def uniform_drift(self) -> bool:
        return bool(np.all(self.drift == self.drift[0, 0]))


@dataclass(frozen=True)
class HjbDiscretization:
    """Per-action generator matrices ``A`` (negative diagonal) and rewards."""

    A: tuple
    rewards: np.ndarray
    c: float
    c0: float
    epsilon: float
    spec: HjbSpec


def hjb_c0(spec: HjbSpec) -> float:
    """Largest ``c`` keeping ``I + c h^2 A`` nonnegative for every action."""
    h = spec.h
    max_drift = float(np.max(np.sum(np.abs(spec.drift), axis=2)))
    return 1.0 / (float(np.sum(spec.sigma ** 2)) + h * max_drift + h * h * spec.lam)


def _grid_shift(N: int, dim: int, axis: int, step: int) -> np.ndarray:
    # row-major linear index of the neighbour k + step e_axis (mod N)
    k = np.indices((N,) * dim).reshape(dim, -1)
    k[axis] = (k[axis] + step) % N
    return np.ravel_multi_index(tuple(k), (N,) * dim)


def _assemble(spec: HjbSpec, a: int, diag_const: float, scale: float):
    """Rows of ``diag_const I + scale * (generator stencil)``; shared by A and P."""
    h, size = spec.h, spec.size
    g = spec.drift[a]
    gp, gm = np.maximum(g, 0.0), np.maximum(-g, 0.0)
    rows, cols, vals = [np.arange(size)], [np.arange(size)], []
    diag = np.full(size, diag_const)
    for j in range(spec.dim):
        s2 = spec.sigma[j] ** 2
        up = scale * (0.5 * s2 + h * gp[:, j])
        down = scale * (0.5 * s2 + h * gm[:, j])
        rows += [np.arange(size), np.arange(size)]
        cols += [_grid_shift(spec.N, spec.dim, j, 1), _grid_shift(spec.N, spec.dim, j, -1)]
        vals += [up, down]
        diag = diag - scale * (s2 + h * np.abs(g[:, j]))
    vals = [diag] + vals
    return SparseRowMatrix.from_coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (size, size))


def hjb_discretize(spec: HjbSpec) -> HjbDiscretization:
    """Upwind finite differences; returns ``A`` per action, rewards, ``c`` and ``eps = c h^2 lam``.

    Raises
    ------
    ValueError
        If ``spec.c`` exceeds ``c0``.
    """
    c0 = hjb_c0(spec)
    c = c0 / 2.0 if spec.c is None else float(spec.c)
    if not 0.0 < c <= c0:
        raise ValueError(f"c={c} must lie in (0, c0={c0}]")
    h2 = spec.h ** 2
    A = tuple(_assemble(spec, a, -spec.lam, 1.0 / h2) for a in range(spec.m))
    return HjbDiscretization(A, spec.reward.copy(), c, c0, c * h2 * spec.lam, spec)


def hjb_policy_matrix(disc: HjbDiscretization, action: int = 0) -> SparseRowMatrix:
    """``P_h = I + c h^2 A`` for one action, assembled directly from the stencil."""
    spec = disc.spec
    h2 = spec.h ** 2
    P = _assemble(spec, action, 1.0 - disc.c * h2 * spec.lam, disc.c)
    vals = P.values
    if np.any(vals < -1e-14):
        raise ValueError(f"negative entry {vals.min()!r} in P_h: c exceeds c0")
    if np.any(vals < 0):
        P = SparseRowMatrix(P.n_rows, P.n_cols, P.row_offsets, P.col_indices, np.maximum(vals, 0.0))
    return P


def hjb_to_fixed_point(disc: HjbDiscretization) -> MdpInstance:
    """Package ``V = max_a (P_h^a V + c h^2 r^a)`` as an MDP.

    Every state gets discount ``1 - eps`` and transition rows ``P_h / (1 - eps)``,
    which sum to one.
    """
    spec = disc.spec
    gamma = 1.0 - disc.epsilon
    mats = [hjb_policy_matrix(disc, a).to_scipy() for a in range(spec.m)]
    # interleave rows state-major: row i*m + a is state i under action a
    stacked = sp.vstack(mats, format="csr")
    order = (np.arange(spec.m)[None, :] * spec.size + np.arange(spec.size)[:, None]).ravel()
    stacked = stacked[order] / gamma
    rewards = (disc.c * spec.h ** 2) * disc.rewards.T.ravel()
    meta = {"generator": "hjb", "dim": spec.dim, "N": spec.N, "lam": spec.lam, "m": spec.m,
            "c": disc.c, "c0": disc.c0, "epsilon": disc.epsilon}
    return MdpInstance(SparseRowMatrix.from_scipy(stacked), np.arange(spec.size + 1) * spec.m, rewards,
                       np.full(spec.size, gamma), meta)


def _uniform_drift(spec: HjbSpec) -> np.ndarray:
    if spec.m != 1 or not np.all(spec.drift == spec.drift[0, 0][None, None, :]):
        raise ValueError("the eigenvalue formula needs a single action and state-independent drift")
    return spec.drift[0, 0]


def hjb_eigen_oracle(spec: HjbSpec, c: float | None = None) -> np.ndarray:
    """Closed-form eigenvalues of ``P_h`` for one action and constant drift.

    For each ``k`` in ``{1..N}^dim`` (row-major),
    ``1 - c sum s_j^2 (1 - cos 2 pi k_j h) - c lam h^2
    + 2 i c h sum sin(pi k_j h) (g_j^+ e^{i pi k_j h} - g_j^- e^{-i pi k_j h})``.
    The last entry, ``k = (N, ..., N)``, equals ``1 - eps``.
    """
    g = _uniform_drift(spec)
    if c is None:
        c = hjb_c0(spec) / 2.0
    h = spec.h
    gp, gm = np.maximum(g, 0.0), np.maximum(-g, 0.0)
    out = []
    for k in product(range(1, spec.N + 1), repeat=spec.dim):
        # k = N reduces to 0 so the constant mode comes out exactly real
        t = np.pi * (np.asarray(k) % spec.N) * h
        re = 1.0 - c * np.sum(spec.sigma ** 2 * (1.0 - np.cos(2.0 * t))) - c * spec.lam * h * h
        im = 2j * c * h * np.sum(np.sin(t) * (gp * np.exp(1j * t) - gm * np.exp(-1j * t)))
        out.append(re + im)
    return np.asarray(out)


def hjb_imag_bound(spec: HjbSpec, eta, c: float | None = None) -> np.ndarray:
    """``(sum 2 g_j^2 / (lam s_j^2))**0.5 * sqrt(eps (1 - eps - Re eta))`` per eigenvalue."""
    g = _uniform_drift(spec)
    if c is None:
        c = hjb_c0(spec) / 2.0
    eps = c * spec.h ** 2 * spec.lam
    factor = np.sqrt(np.sum(2.0 * g ** 2 / (spec.lam * spec.sigma ** 2)))
    gap = np.maximum(1.0 - eps - np.real(eta), 0.0)
    return factor * np.sqrt(eps * gap)


# ---------------------------------------------------------------- presets

HJB_PRESETS = {
    # name: (dim, N, sigma, lam, m, drift intervals per axis, reward interval)
    "1d": (1, 500, (1.0,), 1.0, 10, ((0.0, 1.0),), (0.0, 100.0)),
    "2d": (2, 30, (np.sqrt(2.0), np.sqrt(2.0)), 2.0, 10, ((0.0, 1.0), (-1.0, 0.0)), (0.0, 100.0)),
}


def hjb_preset(name: str, seed: int = 0, **overrides) -> HjbSpec:
    """Named experiment with drifts and rewards drawn per (action, grid point)."""
    if name not in HJB_PRESETS:
        raise ValueError(f"unknown HJB preset {name!r}; expected one of {sorted(HJB_PRESETS)}")
    dim, N, sigma, lam, m, drift_box, reward_box = HJB_PRESETS[name]
    N = int(overrides.pop("N", N))
    m = int(overrides.pop("m", m))
    size = N ** dim
    rng = rng_stream(seed, 3)
    drift = np.stack([rng.uniform(lo, hi, (m, size)) for lo, hi in drift_box], axis=2)
    reward = rng_stream(seed, 4).uniform(*reward_box, (m, size))
    params = dict(dim=dim, N=N, sigma=np.asarray(sigma), lam=lam, m=m, drift=drift, reward=reward)
    params.update(overrides)
    return HjbSpec(**params)
