"""Discounted Markov decision processes and accelerated policy iteration.

Transition rows for every (state, action) pair are stacked in one sparse
matrix, state-major, so that ``action_offsets[i]:action_offsets[i+1]`` are the
rows of state ``i``. The Bellman backup evaluates

    q[i, a] = gamma_i * (P^a_i . x) + g_i^a

for every pair and takes the row-wise max; a policy operator evaluates the
same expression on the selected rows only, with identical rounding.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_vector
from .numeric import SparseRowMatrix, as_sparse, spmv
from .params import AccelConfig, d_accel_alphas
from .solvers import AffineProblem, IterationState, IterationTrace, certify_region_for_matrix, davi_solve, vi_solve

__all__ = [
    "MdpInstance",
    "Policy",
    "BellmanOperator",
    "SolverDivergenceError",
    "DapiResult",
    "PolicyIterationResult",
    "action_values",
    "bellman_apply",
    "policy_apply",
    "policy_problem",
    "greedy_improve",
    "dapi_solve",
    "certify_error",
    "top_seminorm",
    "positive_part",
    "exact_policy_value",
    "policy_iteration_exact",
    "bellman_vi_solve",
    "bellman_davi_solve",
    "AcceleratedPolicyIteration",
]

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
DEFAULT_MAX_OUTER = 1000


class SolverDivergenceError(RuntimeError):
    """Inner value determination failed; carries the offending policy and trace."""

    def __init__(self, message, policy=None, trace=None):
        super().__init__(message)
        self.policy = policy
        self.trace = trace


@dataclass(frozen=True)
class MdpInstance:
    """Immutable MDP with per-state action sets.

    Attributes
    ----------
    transitions : SparseRowMatrix, shape (sum(m_i), n)
        Probability row of each (state, action) pair, state-major.
    action_offsets : ndarray of int, shape (n + 1,)
    rewards : ndarray, shape (sum(m_i),)
    discounts : ndarray, shape (n,)
        ``gamma_i`` in (0, 1).
    meta : dict
        Free-form provenance (generator parameters, suggested ``epsilon``).
    """

    transitions: SparseRowMatrix
    action_offsets: np.ndarray
    rewards: np.ndarray
    discounts: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        P = as_sparse(self.transitions)
        if np.iscomplexobj(P.values):
            raise TypeError("transition probabilities must be real")
        off = np.asarray(self.action_offsets, dtype=np.int64)
        n = P.n_cols
        if off.ndim != 1 or off.size != n + 1 or off[0] != 0 or off[-1] != P.n_rows:
            raise ValueError("action_offsets must have length n+1, start at 0 and end at the number of rows")
        if np.any(np.diff(off) < 1):
            raise ValueError("every state needs at least one action")
        if np.any(P.values < 0):
            raise ValueError("transition probabilities must be nonnegative")
        sums = P.row_sums()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise ValueError(f"transition row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        g = check_vector(self.rewards, P.n_rows, name="rewards").astype(float)
        gam = check_vector(self.discounts, n, name="discounts").astype(float)
        if np.any(gam <= 0) or np.any(gam >= 1):
            raise ValueError("discounts must lie in (0, 1)")
        for name, arr in (("action_offsets", off), ("rewards", g), ("discounts", gam)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "transitions", P)
        state_of_row = np.repeat(np.arange(n), np.diff(off))
        row_gamma = gam[state_of_row]
        row_gamma.setflags(write=False)
        object.__setattr__(self, "_row_gamma", row_gamma)

    # -- shape

    @property
    def n(self) -> int:
        return self.transitions.n_cols

    @property
    def actions(self) -> np.ndarray:
        """Action count per state."""
        return np.diff(self.action_offsets)

    @property
    def uniform_actions(self) -> int | None:
        m = self.actions
        return int(m[0]) if np.all(m == m[0]) else None

    @property
    def gamma_max(self) -> float:
        return float(np.max(self.discounts))

    @property
    def row_gamma(self) -> np.ndarray:
        return self._row_gamma

    def rows_of(self, policy) -> np.ndarray:
        sigma = check_policy(self, policy)
        return self.action_offsets[:-1] + sigma

    # -- construction

    @classmethod
    def from_dense(cls, P, rewards, discounts, meta=None) -> "MdpInstance":
        """From ``P`` of shape (m, n, n) and ``rewards`` of shape (n, m); every state gets ``m`` actions."""
        P = np.asarray(P, dtype=float)
        rewards = np.asarray(rewards, dtype=float)
        m, n, _ = P.shape
        if rewards.shape != (n, m):
            raise ValueError(f"rewards must have shape {(n, m)}")
        stacked = P.transpose(1, 0, 2).reshape(n * m, n)
        return cls(SparseRowMatrix.from_dense(stacked), np.arange(n + 1) * m, rewards.ravel(), discounts, meta or {})

    # -- serialization

    def to_dict(self) -> dict:
        P = self.transitions
        rows = []
        for r in range(P.n_rows):
            cols, vals = P.row(r)
            rows.append([[int(j), float(p)] for j, p in zip(cols, vals)])
        return {
            "n": self.n,
            "actions": [int(m) for m in self.actions],
            "gamma": [float(x) for x in self.discounts],
            "transitions": rows,
            "rewards": [float(x) for x in self.rewards],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MdpInstance":
        """Inverse of :meth:`to_dict`; probabilities may be numbers or decimal strings."""
        n = int(data["n"])
        actions = np.asarray(data["actions"], dtype=np.int64)
        if actions.size != n:
            raise ValueError("actions must list one count per state")
        off = np.concatenate([[0], np.cumsum(actions)])
        trans = data["transitions"]
        if len(trans) != off[-1]:
            raise ValueError(f"expected {off[-1]} transition rows, got {len(trans)}")
        rows, cols, vals = [], [], []
        for r, entries in enumerate(trans):
            for j, p in entries:
                rows.append(r)
                cols.append(int(j))
                vals.append(float(p))
        P = SparseRowMatrix.from_coo(rows, cols, vals, (int(off[-1]), n))
        rewards = [float(x) for x in data["rewards"]]
        gamma = [float(x) for x in data["gamma"]]
        return cls(P, off, rewards, gamma, dict(data.get("meta") or {}))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MdpInstance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Policy:
    """Action index per state."""

    choice: np.ndarray

    def __post_init__(self):
        c = np.array(self.choice, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "choice", c)

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.choice, other.choice)

    def __hash__(self):
        return hash(self.choice.tobytes())


def check_policy(mdp: MdpInstance, policy) -> np.ndarray:
    sigma = policy.choice if isinstance(policy, Policy) else np.asarray(policy, dtype=np.int64)
    if sigma.shape != (mdp.n,):
        raise ValueError(f"policy must have one action per state ({mdp.n}), got shape {sigma.shape}")
    if np.any(sigma < 0) or np.any(sigma >= mdp.actions):
        bad = int(np.flatnonzero((sigma < 0) | (sigma >= mdp.actions))[0])
        raise ValueError(f"invalid action {int(sigma[bad])} at state {bad}")
    return sigma


# ---------------------------------------------------------------- operators


def action_values(mdp: MdpInstance, x) -> np.ndarray:
    """``q[r] = gamma_i (P_r . x) + g_r`` for every stacked row ``r``."""
    x = check_vector(x, mdp.n, name="x")
    return mdp.row_gamma * spmv(mdp.transitions, x) + mdp.rewards


def _row_max(mdp: MdpInstance, q):
    m = mdp.uniform_actions
    if m is not None:
        qq = q.reshape(mdp.n, m)
        arg = np.argmax(qq, axis=1)
        return qq[np.arange(mdp.n), arg], arg
    starts = mdp.action_offsets[:-1]
    best = np.maximum.reduceat(q, starts)
    arg = np.array([int(np.argmax(q[s:e])) for s, e in zip(starts, mdp.action_offsets[1:])])
    return best, arg


def bellman_apply(mdp: MdpInstance, x):
    """Return ``(T(x), greedy policy)``; ties go to the smallest action index."""
    best, arg = _row_max(mdp, action_values(mdp, x))
    return best, Policy(arg)


def policy_problem(mdp: MdpInstance, policy) -> AffineProblem:
    """The affine map ``T^sigma`` as an :class:`AffineProblem` with discount row scaling."""
    rows = mdp.rows_of(policy)
    return AffineProblem(mdp.transitions.take_rows(rows), mdp.rewards[rows], row_scale=mdp.discounts)


def policy_apply(mdp: MdpInstance, policy, x) -> np.ndarray:
    """``T^sigma(x)``."""
    x = check_vector(x, mdp.n, name="x")
    return policy_problem(mdp, policy).apply(x)


@dataclass(frozen=True)
class BellmanOperator:
    """``T`` as an object with ``apply``, for iterating directly on the max operator."""

    mdp: MdpInstance

    @property
    def n(self) -> int:
        return self.mdp.n

    def apply(self, x) -> np.ndarray:
        return _row_max(self.mdp, action_values(self.mdp, x))[0]


def greedy_improve(mdp: MdpInstance, y, prev, delta_prime: float = 0.0) -> Policy:
    """Greedy policy at ``y`` keeping ``prev(i)`` when within ``delta_prime`` of the max."""
    if delta_prime < 0:
        raise ValueError("delta_prime must be nonnegative")
    prev = check_policy(mdp, prev)
    q = action_values(mdp, y)
    best, arg = _row_max(mdp, q)
    keep = q[mdp.action_offsets[:-1] + prev] >= best - delta_prime
    return Policy(np.where(keep, prev, arg))


def top_seminorm(x) -> float:
    """``max_i x_i``."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("top of an empty vector")
    return float(np.max(x))


def positive_part(a):
    """``max(a, 0)``, elementwise for arrays."""
    return np.maximum(a, 0.0)


def certify_error(mdp: MdpInstance, x) -> float:
    """Upper bound ``||x - T(x)|| / (1 - gamma_max)`` on the sup-norm distance to the optimal value."""
    tx, _ = bellman_apply(mdp, x)
    return float(np.max(np.abs(np.asarray(x) - tx))) / (1.0 - mdp.gamma_max)


# ---------------------------------------------------------------- exact baseline


def exact_policy_value(mdp: MdpInstance, policy) -> np.ndarray:
    """Solve ``(I - P^sigma_gamma) x = g^sigma`` by dense LU."""
    prob = policy_problem(mdp, policy)
    if mdp.n > 4000:
        raise ValueError("dense LU limited to n <= 4000")
    A = np.eye(mdp.n) - prob.matrix().toarray()
    return scipy.linalg.solve(A, prob.g)


@dataclass
class PolicyIterationResult:
    value: np.ndarray
    policy: Policy
    n_iter: int
    converged: bool


def policy_iteration_exact(mdp: MdpInstance, policy0=None, max_iter: int = DEFAULT_MAX_OUTER) -> PolicyIterationResult:
    """Classical policy iteration with exact (LU) evaluation.

    Switches an action only on strict improvement, which rules out cycling
    between tied actions.
    """
    sigma = Policy(np.zeros(mdp.n, dtype=np.int64)) if policy0 is None else Policy(check_policy(mdp, policy0))
    for k in range(1, max_iter + 1):
        x = exact_policy_value(mdp, sigma)
        nxt = greedy_improve(mdp, x, sigma, 0.0)
        if nxt == sigma:
            return PolicyIterationResult(x, sigma, k, True)
        sigma = nxt
    return PolicyIterationResult(x, sigma, max_iter, False)


# ---------------------------------------------------------------- accelerated policy iteration


@dataclass
class DapiResult:
    """Outcome of :func:`dapi_solve`.

    ``error_bound`` is ``(delta + delta') / (1 - gamma)`` when the loop stopped
    on a repeated policy and None when it hit the outer cap.
    """

    value: np.ndarray
    policy: Policy
    traces: list
    n_outer: int
    converged: bool
    error_bound: float | None
    certified_error: float
    region_reports: list = field(default_factory=list)

    @property
    def total_iterations(self) -> int:
        return int(sum(t.iterations for t in self.traces))

    @property
    def status(self) -> str:
        return "policy_repeat" if self.converged else "outer_cap"


def dapi_solve(
    mdp: MdpInstance,
    cfg: AccelConfig,
    delta_prime: float = 0.0,
    *,
    x0=None,
    policy0=None,
    max_outer: int = DEFAULT_MAX_OUTER,
    check_region: bool = False,
) -> DapiResult:
    """Accelerated policy iteration of degree ``cfg.degree``.

    Each outer step runs :func:`davi_solve` on the current policy's affine map
    until its residual is at most ``cfg.delta``, resuming from the full
    iterate history of the previous step, then improves the policy greedily
    while keeping the current action within ``delta_prime`` of the best.
    Stops when the policy repeats.

    Parameters
    ----------
    mdp : MdpInstance
    cfg : AccelConfig
    delta_prime : float
        Tolerance of the policy improvement step.
    x0 : array, optional
        Initial value (zeros by default); also seeds the whole history.
    policy0 : array or Policy, optional
        Starting policy; greedy at ``x0`` by default.
    max_outer : int
    check_region : bool
        Classify the spectrum of each visited policy matrix against the
        degree-``d`` region (dense eigensolver, small ``n`` only). Without it
        the spectral assumption behind the rate guarantee is not checked.

    Raises
    ------
    SolverDivergenceError
        When an inner solve diverges or exhausts ``cfg.max_iter``.
    """
    x0 = np.zeros(mdp.n) if x0 is None else check_vector(x0, mdp.n, name="x0")
    sigma = bellman_apply(mdp, x0)[1] if policy0 is None else Policy(check_policy(mdp, policy0))
    if not check_region:
        log.debug("spectral assumption on policy matrices not checked")
    state = IterationState.cold(x0, cfg.degree)
    traces: list[IterationTrace] = []
    reports = []
    for k in range(max_outer):
        prob = policy_problem(mdp, sigma)
        if check_region:
            eps = cfg.epsilon if cfg.epsilon is not None else 1.0 - mdp.gamma_max
            rep = certify_region_for_matrix(prob.matrix().toarray(), cfg.degree, eps)
            reports.append(rep)
            if not rep.all_inside:
                log.warning("policy %d: spectrum not inside the degree-%d region", k, cfg.degree)
        trace = davi_solve(prob, cfg=cfg, state=state)
        traces.append(trace)
        if not trace.converged:
            raise SolverDivergenceError(
                f"inner solve {trace.status} at outer step {k}", policy=sigma, trace=trace
            )
        state = trace.state
        y = state.y
        nxt = greedy_improve(mdp, y, sigma, delta_prime)
        if nxt == sigma:
            bound = (cfg.delta + delta_prime) / (1.0 - mdp.gamma_max)
            return DapiResult(y, sigma, traces, k + 1, True, bound, certify_error(mdp, y), reports)
        sigma = nxt
    return DapiResult(y, sigma, traces, max_outer, False, None, certify_error(mdp, y), reports)


def bellman_vi_solve(mdp: MdpInstance, x0=None, cfg: AccelConfig | None = None) -> IterationTrace:
    """Value iteration on the max operator, with its certified error filled in."""
    x0 = np.zeros(mdp.n) if x0 is None else x0
    trace = vi_solve(BellmanOperator(mdp), x0, cfg)
    trace.certified_error = certify_error(mdp, trace.final_point)
    return trace


def bellman_davi_solve(mdp: MdpInstance, x0=None, cfg: AccelConfig | None = None) -> IterationTrace:
    """Accelerated iteration applied directly to the max operator.

    Experimental: convergence is not established for the nonlinear operator.
    Divergence is detected and reported in the trace status.
    """
    x0 = np.zeros(mdp.n) if x0 is None else x0
    trace = davi_solve(BellmanOperator(mdp), x0, cfg)
    trace.certified_error = certify_error(mdp, trace.final_point)
    return trace


class AcceleratedPolicyIteration(BaseEstimator):
    """Estimator front end to :func:`dapi_solve`.

    ``fit(mdp)`` stores ``value_``, ``policy_``, ``traces_``, ``n_outer_``,
    ``error_bound_`` and ``certified_error_``; ``predict(states)`` returns the
    chosen action of each state.
    """

    def __init__(self, degree=2, epsilon=None, alpha=None, beta=1.0, tol=1e-10, tol_improve=0.0,
                 max_iter=1_000_000, max_outer=DEFAULT_MAX_OUTER):
        self.degree = degree
        self.epsilon = epsilon
        self.alpha = alpha
        self.beta = beta
        self.tol = tol
        self.tol_improve = tol_improve
        self.max_iter = max_iter
        self.max_outer = max_outer

    def fit(self, mdp: MdpInstance, y=None):
        if self.alpha is None:
            if self.epsilon is None:
                raise ValueError("either alpha or epsilon is required")
            alpha = tuple(d_accel_alphas(self.degree, self.epsilon))
        else:
            alpha = tuple(np.atleast_1d(self.alpha))
        cfg = AccelConfig(self.degree, alpha, self.beta, self.epsilon, self.tol, self.max_iter)
        res = dapi_solve(mdp, cfg, self.tol_improve, max_outer=self.max_outer)
        self.value_ = res.value
        self.policy_ = res.policy
        self.traces_ = res.traces
        self.n_outer_ = res.n_outer
        self.converged_ = res.converged
        self.error_bound_ = res.error_bound
        self.certified_error_ = res.certified_error
        return self

    def predict(self, states=None) -> np.ndarray:
        check_is_fitted(self, "policy_")
        choice = self.policy_.choice
        return choice.copy() if states is None else choice[np.asarray(states)]
