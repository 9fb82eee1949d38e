"""Fixed-point iterations for ``x = g + P x`` and their companion matrices.

All engines accept any object exposing ``apply(x)`` (an affine problem, a
Bellman operator, ...) and record the sup-norm residual ``||y - T(y)||`` at
each step. One evaluation of ``T`` per iteration serves both the residual and
the update.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_degree, check_epsilon, check_vector
from .numeric import EIG_CAP, SparseRowMatrix, as_sparse, dense_eigenvalues, spmv
from .params import AccelConfig, d_accel_alphas
from .regions import BOUNDARY, INSIDE, in_sigma_d, preimage_roots, sigma_r_d2_roots

__all__ = [
    "AffineProblem",
    "IterationState",
    "IterationTrace",
    "CertificationReport",
    "DIVERGENCE_FACTOR",
    "fit_rate",
    "vi_solve",
    "davi_solve",
    "momentum_solve",
    "build_companion",
    "certify_region_for_matrix",
    "trace_to_dict",
    "write_trace_json",
    "write_trace_csv",
    "ValueIteration",
    "AcceleratedValueIteration",
    "MomentumIteration",
]

DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class AffineProblem:
    """The affine map ``T(x) = g + diag(row_scale) P x``.

    ``row_scale`` is optional; it lets discounted policy problems share the
    unscaled transition rows with the Bellman operator so that both evaluate
    each row with identical rounding.
    """

    P: SparseRowMatrix
    g: np.ndarray
    row_scale: np.ndarray | None = None

    def __post_init__(self):
        P = as_sparse(self.P)
        if P.n_rows != P.n_cols:
            raise ValueError(f"P must be square, got {P.shape}")
        g = check_vector(self.g, P.n_rows, name="g")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "g", g)
        if self.row_scale is not None:
            object.__setattr__(self, "row_scale", check_vector(self.row_scale, P.n_rows, name="row_scale"))

    @property
    def n(self) -> int:
        return self.P.n_rows

    def apply(self, x) -> np.ndarray:
        px = spmv(self.P, x)
        if self.row_scale is not None:
            px = self.row_scale * px
        return self.g + px

    def matrix(self) -> SparseRowMatrix:
        """The effective iteration matrix (row scaling folded in)."""
        return self.P if self.row_scale is None else self.P.scale_rows(self.row_scale)

    def residual(self, x) -> float:
        return float(np.max(np.abs(np.asarray(x) - self.apply(x))))


@dataclass(frozen=True)
class IterationState:
    """Resumable state: ``history = (x_k, x_{k-1}, ..., x_{k-d+2})`` and ``y_k``."""

    history: tuple
    y: np.ndarray

    @classmethod
    def cold(cls, x0, degree: int) -> "IterationState":
        x0 = np.array(x0)
        return cls(history=tuple(x0.copy() for _ in range(degree - 1)), y=x0.copy())


@dataclass
class IterationTrace:
    """Outcome of one run.

    ``residuals[k]`` is the residual at ``y_k``; ``iterations`` counts updates,
    so ``residuals`` has ``iterations + 1`` entries. ``status`` is one of
    ``converged``, ``diverged`` or ``max_iter``.
    """

    residuals: np.ndarray
    iterations: int
    converged: bool
    status: str
    final_point: np.ndarray
    measured_rate: float
    wall_ns: int
    method: str = ""
    config: dict = field(default_factory=dict)
    state: IterationState | None = None
    certified_error: float | None = None

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    @property
    def stalled(self) -> bool:
        """Stopped at the cap without any progress over the last quarter of the run."""
        r = self.residuals
        q = r.size // 4
        if self.status != "max_iter" or q == 0:
            return False
        return bool(np.min(r[-q:]) >= np.min(r[-2 * q:-q]))


def fit_rate(residuals, min_tail: int = 50, frac: float = 0.1) -> float:
    """Geometric rate fitted on the tail of a residual sequence.

    Exponential of the least-squares slope of ``log r_k`` against ``k`` over
    the last ``max(min_tail, frac * len)`` entries; nonpositive residuals are
    skipped. ``nan`` when fewer than two usable points remain.
    """
    r = np.asarray(residuals, dtype=float)
    tail = max(min_tail, int(frac * r.size))
    k = np.arange(r.size)[-tail:]
    r = r[-tail:]
    ok = (r > 0) & np.isfinite(r)
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(k[ok], np.log(r[ok]), 1)[0]
    return float(np.exp(slope))


def _operator(prob):
    if hasattr(prob, "apply"):
        return prob.apply
    if callable(prob):
        return prob
    raise TypeError("problem must expose apply(x) or be callable")


def _sup(v) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _diverging(r: float, r0: float) -> bool:
    return not np.isfinite(r) or (r0 > 0 and r > DIVERGENCE_FACTOR * r0)


def _finish(residuals, status, point, t0, method, config, state=None) -> IterationTrace:
    residuals = np.asarray(residuals, dtype=float)
    return IterationTrace(
        residuals=residuals,
        iterations=residuals.size - 1,
        converged=status == "converged",
        status=status,
        final_point=point,
        measured_rate=fit_rate(residuals),
        wall_ns=time.perf_counter_ns() - t0,
        method=method,
        config=config,
        state=state,
    )


def _start(prob, x0):
    op = _operator(prob)
    n = getattr(prob, "n", None)
    x0 = check_vector(x0, n, name="x0")
    return op, x0


def vi_solve(prob, x0, cfg: AccelConfig | None = None) -> IterationTrace:
    """Plain iteration ``x <- (1 - beta) x + beta T(x)``.

    Only ``beta``, ``delta`` and ``max_iter`` of ``cfg`` are used.

    Examples
    --------
    >>> import numpy as np
    >>> tr = vi_solve(AffineProblem(np.zeros((2, 2)), [1.0, 2.0]), np.zeros(2))
    >>> tr.iterations, tr.final_point.tolist()
    (1, [1.0, 2.0])
    """
    cfg = cfg or AccelConfig.plain()
    op, x = _start(prob, x0)
    beta = cfg.beta
    t0 = time.perf_counter_ns()
    residuals = []
    status = "max_iter"
    for k in range(cfg.max_iter + 1):
        tx = op(x)
        r = _sup(x - tx)
        residuals.append(r)
        if r <= cfg.delta:
            status = "converged"
            break
        if _diverging(r, residuals[0]):
            status = "diverged"
            break
        if k == cfg.max_iter:
            break
        x = tx if beta == 1.0 else (1.0 - beta) * x + beta * tx
    return _finish(residuals, status, x, t0, "vi", cfg.to_dict())


def davi_solve(prob, x0=None, cfg: AccelConfig | None = None, *, state: IterationState | None = None) -> IterationTrace:
    """Degree-``d`` accelerated iteration.

    ``x_{k+1} = (1 - beta) y_k + beta T(y_k)`` followed by
    ``y_{k+1} = (1 + sum(alpha)) x_{k+1} - alpha_{d-2} x_k - ... - alpha_0 x_{k-d+2}``.

    Parameters
    ----------
    prob : object with ``apply(x)``
    x0 : array, optional
        Cold start; every history slot and ``y_0`` are set to ``x0``.
    cfg : AccelConfig
    state : IterationState, optional
        Warm start, taking precedence over ``x0``. The trace returned carries
        the final state, so chaining two runs reproduces one longer run.

    Returns
    -------
    IterationTrace
    """
    if cfg is None:
        raise ValueError("cfg is required")
    d = cfg.degree
    op = _operator(prob)
    if state is None:
        if x0 is None:
            raise ValueError("either x0 or state is required")
        _, x0 = _start(prob, x0)
        state = IterationState.cold(x0, d)
    if len(state.history) != d - 1:
        raise ValueError(f"state history has {len(state.history)} entries, degree {d} needs {d - 1}")
    hist = list(state.history)
    y = state.y
    lead = 1.0 + float(np.sum(cfg.alpha))
    # hist[j] = x_{k-j} pairs with alpha_{d-2-j}
    weights = [cfg.alpha[d - 2 - j] for j in range(d - 1)]
    beta = cfg.beta
    t0 = time.perf_counter_ns()
    residuals = []
    status = "max_iter"
    for k in range(cfg.max_iter + 1):
        ty = op(y)
        r = _sup(y - ty)
        residuals.append(r)
        if r <= cfg.delta:
            status = "converged"
            break
        if _diverging(r, residuals[0]):
            status = "diverged"
            break
        if k == cfg.max_iter:
            break
        x_new = ty if beta == 1.0 else (1.0 - beta) * y + beta * ty
        y = lead * x_new
        for w, xj in zip(weights, hist):
            if w != 0.0:
                y = y - w * xj
        hist = [x_new] + hist[:-1]
    out = IterationState(history=tuple(hist), y=y)
    return _finish(residuals, status, y, t0, f"{d}a-vi", cfg.to_dict(), state=out)


def momentum_solve(prob, x0, alpha: float, beta: float = 1.0, cfg: AccelConfig | None = None, *, x_prev=None) -> IterationTrace:
    """Heavy-ball iteration ``x_{k+1} = (1-beta) x_k + beta T(x_k) + alpha (x_k - x_{k-1})``.

    ``x_prev`` sets ``x_{-1}`` (default ``x0``). Only ``delta`` and
    ``max_iter`` of ``cfg`` are used. No rate guarantee is implied.
    """
    cfg = cfg or AccelConfig.plain()
    op, x = _start(prob, x0)
    prev = x.copy() if x_prev is None else check_vector(x_prev, x.size, name="x_prev")
    alpha, beta = float(alpha), float(beta)
    t0 = time.perf_counter_ns()
    residuals = []
    status = "max_iter"
    for k in range(cfg.max_iter + 1):
        tx = op(x)
        r = _sup(x - tx)
        residuals.append(r)
        if r <= cfg.delta:
            status = "converged"
            break
        if _diverging(r, residuals[0]):
            status = "diverged"
            break
        if k == cfg.max_iter:
            break
        nxt = tx if beta == 1.0 else (1.0 - beta) * x + beta * tx
        if alpha != 0.0:
            nxt = nxt + alpha * (x - prev)
        prev, x = x, nxt
    config = {"alpha": alpha, "beta": beta, "delta": cfg.delta, "max_iter": cfg.max_iter}
    return _finish(residuals, status, x, t0, "momentum", config)


# ---------------------------------------------------------------- spectral verification


def build_companion(P, d: int, alpha, beta: float = 1.0, *, cap: int = EIG_CAP) -> np.ndarray:
    """Dense ``d n x d n`` matrix of the linear recursion behind :func:`davi_solve`.

    Block row one is ``[(1 + sum(alpha)) P_b, -alpha_{d-2} P_b, ..., -alpha_0 P_b]``
    with ``P_b = (1 - beta) I + beta P``; identities sit on the block subdiagonal.
    """
    d = check_degree(d)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.size != d - 1:
        raise ValueError(f"alpha must have length {d - 1}")
    P = P.toarray() if isinstance(P, SparseRowMatrix) else np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    n = P.shape[0]
    if d * n > cap:
        raise ValueError(f"companion size {d * n} exceeds cap {cap}")
    Pb = (1.0 - beta) * np.eye(n) + beta * P
    Q = np.zeros((d * n, d * n), dtype=np.result_type(Pb.dtype, float))
    Q[:n, :n] = (1.0 + alpha.sum()) * Pb
    for j in range(1, d):
        Q[:n, j * n:(j + 1) * n] = -alpha[d - 1 - j] * Pb
    for j in range(1, d):
        Q[j * n:(j + 1) * n, (j - 1) * n:j * n] = np.eye(n)
    return Q


@dataclass
class CertificationReport:
    """Classification of a spectrum against the degree-``d`` region.

    ``guarantee`` is ``"region"`` when every eigenvalue is inside (rate bound
    ``1 - eps**(1/d)``), ``"relaxed"`` when ``d = 2`` and the smallest ``r``
    with all eigenvalues in the relaxed region gives ``r (1 - sqrt(eps)) < 1``,
    and ``"none"`` otherwise. ``companion_radius`` is the spectral radius of
    the companion matrix implied by the preimages, reported for information.
    """

    eigenvalues: np.ndarray
    statuses: list
    degree: int
    epsilon: float
    guarantee: str
    rate_bound: float | None
    r: float | None
    companion_radius: float

    @property
    def all_inside(self) -> bool:
        return self.guarantee == "region"

    def summary(self) -> dict:
        return {
            "degree": self.degree,
            "epsilon": self.epsilon,
            "n_eigenvalues": int(self.eigenvalues.size),
            "n_outside": int(sum(s != INSIDE for s in self.statuses)),
            "guarantee": self.guarantee,
            "rate_bound": self.rate_bound,
            "r": self.r,
            "companion_radius": self.companion_radius,
        }


def certify_region_for_matrix(P, d: int, epsilon: float, *, band: float = 1e-9, eigenvalues=None) -> CertificationReport:
    """Predict the rate of the optimal degree-``d`` scheme from the spectrum of ``P``.

    Eigenvalues inside the boundary band count as inside (the region is closed).
    """
    d = check_degree(d)
    epsilon = check_epsilon(epsilon)
    if eigenvalues is None:
        A = P.toarray() if isinstance(P, SparseRowMatrix) else np.asarray(P)
        eigenvalues = dense_eigenvalues(A)
    eig = np.asarray(eigenvalues, dtype=complex)
    statuses = [in_sigma_d(z, d, epsilon, band).status for z in eig]
    radius = max((float(np.max(np.abs(preimage_roots(z, d, epsilon)))) for z in eig), default=0.0)
    ok = all(s in (INSIDE, BOUNDARY) for s in statuses)
    if ok:
        return CertificationReport(eig, statuses, d, epsilon, "region", 1.0 - epsilon ** (1.0 / d), 1.0, radius)
    if d == 2:
        s = np.sqrt(epsilon)
        top = max(float(np.max(np.abs(sigma_r_d2_roots(z, epsilon)))) for z in eig)
        r = max(1.0, top / (1.0 - s))
        if r * (1.0 - s) < 1.0:
            return CertificationReport(eig, statuses, d, epsilon, "relaxed", r * (1.0 - s), r, radius)
    return CertificationReport(eig, statuses, d, epsilon, "none", None, None, radius)


# ---------------------------------------------------------------- export


def _clean(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def trace_to_dict(trace: IterationTrace, *, timing: bool = True) -> dict:
    out = {
        "method": trace.method,
        "config": trace.config,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "status": trace.status,
        "final_residual": trace.final_residual,
        "measured_rate": _clean(trace.measured_rate),
        "certified_error": _clean(trace.certified_error),
        "residuals": [float(r) for r in trace.residuals],
    }
    if timing:
        out["wall_ns"] = int(trace.wall_ns)
    return out


def write_trace_json(trace: IterationTrace, path, *, timing: bool = True) -> None:
    with open(path, "w") as fh:
        json.dump(trace_to_dict(trace, timing=timing), fh, indent=1)
        fh.write("\n")


def write_trace_csv(trace: IterationTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "residual"])
        for k, r in enumerate(trace.residuals):
            w.writerow([k, repr(float(r))])


# ---------------------------------------------------------------- estimators


class _FixedPointEstimator(BaseEstimator):
    def _problem(self, P, g):
        return AffineProblem(P, g)

    def fit(self, P, g, x0=None):
        """Solve ``x = g + P x``; sets ``x_``, ``trace_``, ``n_iter_`` and ``converged_``."""
        prob = self._problem(P, g)
        if x0 is None:
            x0 = np.zeros(prob.n)
        trace = self._run(prob, x0)
        self.trace_ = trace
        self.x_ = trace.final_point
        self.n_iter_ = trace.iterations
        self.converged_ = trace.converged
        self.measured_rate_ = trace.measured_rate
        return self

    def residual(self, P, g) -> float:
        check_is_fitted(self, "x_")
        return AffineProblem(P, g).residual(self.x_)


class ValueIteration(_FixedPointEstimator):
    """Plain (optionally damped) iteration as an estimator."""

    def __init__(self, beta=1.0, tol=1e-10, max_iter=1_000_000):
        self.beta = beta
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, prob, x0):
        return vi_solve(prob, x0, AccelConfig.plain(beta=self.beta, delta=self.tol, max_iter=self.max_iter))


class AcceleratedValueIteration(_FixedPointEstimator):
    """Degree-``d`` accelerated iteration.

    Either ``alpha`` (length ``degree - 1``) or ``epsilon`` must be given; the
    optimal weights are derived from ``epsilon`` when ``alpha`` is None. With
    ``warm_start=True`` a second ``fit`` resumes from the previous state.

    Examples
    --------
    >>> import numpy as np
    >>> est = AcceleratedValueIteration(degree=2, epsilon=0.01).fit(np.array([[0.99]]), np.array([1.0]))
    >>> round(float(est.x_[0]), 6)
    100.0
    """

    def __init__(self, degree=2, epsilon=None, alpha=None, beta=1.0, tol=1e-10, max_iter=1_000_000, warm_start=False):
        self.degree = degree
        self.epsilon = epsilon
        self.alpha = alpha
        self.beta = beta
        self.tol = tol
        self.max_iter = max_iter
        self.warm_start = warm_start

    def config(self) -> AccelConfig:
        if self.alpha is None:
            if self.epsilon is None:
                raise ValueError("either alpha or epsilon is required")
            alpha = tuple(d_accel_alphas(self.degree, self.epsilon))
        else:
            alpha = tuple(np.atleast_1d(self.alpha))
        return AccelConfig(self.degree, alpha, self.beta, self.epsilon, self.tol, self.max_iter)

    def _run(self, prob, x0):
        state = getattr(self, "trace_", None)
        state = state.state if (self.warm_start and state is not None) else None
        return davi_solve(prob, x0, self.config(), state=state)


class MomentumIteration(_FixedPointEstimator):
    """Heavy-ball iteration, for comparison only."""

    def __init__(self, alpha=0.0, beta=1.0, tol=1e-10, max_iter=1_000_000):
        self.alpha = alpha
        self.beta = beta
        self.tol = tol
        self.max_iter = max_iter

    def _run(self, prob, x0):
        return momentum_solve(prob, x0, self.alpha, self.beta, AccelConfig.plain(delta=self.tol, max_iter=self.max_iter))
