"""Closed-form acceleration parameters and the associated rational maps.

The degree-``d`` scheme extrapolates over the last ``d`` iterates with
constant weights ``alpha = (alpha_0, ..., alpha_{d-2})``. Its behaviour is
governed by the polynomial

    U(lam) = (1 + sum(alpha)) lam**(d-1) - alpha_{d-2} lam**(d-2) - ... - alpha_0

and the rational map ``phi(lam) = lam**d / U(lam)``, which sends eigenvalues
of the iteration matrix onto eigenvalues of ``P``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import comb, sqrt

import numpy as np

from ._validation import check_degree as _check_degree
from ._validation import check_epsilon as _check_epsilon

__all__ = [
    "AccelConfig",
    "FlyingSaucerParams",
    "alpha_star",
    "d_accel_alphas",
    "flying_saucer_params",
    "u_coeffs",
    "phi_map",
    "phi_star_map",
    "psi_map",
    "PoleError",
]


class PoleError(ZeroDivisionError):
    """Raised when a rational map is evaluated at one of its poles."""


def alpha_star(epsilon: float) -> float:
    """Optimal degree-2 extrapolation weight ``(1 - sqrt(eps)) / (1 + sqrt(eps))``."""
    epsilon = _check_epsilon(epsilon)
    s = sqrt(epsilon)
    return (1.0 - s) / (1.0 + s)


def d_accel_alphas(d: int, epsilon: float) -> np.ndarray:
    """Degree-``d`` weights ``alpha_i = C(d, i) (eps**(1/d) - 1)**(d - i) / (1 - eps)``.

    With these weights ``U(lam) = (lam**d - (lam - (1 - eps**(1/d)))**d) / (1 - eps)``,
    so every preimage of ``1 - eps`` equals ``1 - eps**(1/d)``.

    Returns
    -------
    ndarray, shape (d - 1,)
        ``alpha_0, ..., alpha_{d-2}``.
    """
    d = _check_degree(d)
    epsilon = _check_epsilon(epsilon)
    root = epsilon ** (1.0 / d) - 1.0
    return np.array([comb(d, i) * root ** (d - i) / (1.0 - epsilon) for i in range(d - 1)])


@dataclass(frozen=True)
class FlyingSaucerParams:
    beta: float
    alpha: float
    rate_bound: float


def flying_saucer_params(epsilon: float) -> FlyingSaucerParams:
    """Damping and weight for spectra in ``B(0, (1-eps)/2) U [-1+eps, 1-eps]``.

    ``beta = 2 / (3 - eps)`` maps that set into the degree-2 accelerable
    region for the damped contraction ``beta * eps``; ``alpha`` is the
    optimal degree-2 weight for ``2 eps / (3 - eps)``. ``rate_bound`` is
    ``1 - sqrt(2 eps / 3)``.
    """
    epsilon = _check_epsilon(epsilon, closed=True)
    beta = 2.0 / (3.0 - epsilon)
    s = sqrt(2.0 * epsilon / (3.0 - epsilon))
    return FlyingSaucerParams(beta=beta, alpha=(1.0 - s) / (1.0 + s), rate_bound=1.0 - sqrt(2.0 * epsilon / 3.0))


def u_coeffs(alpha) -> np.ndarray:
    """Coefficients of ``U`` from the highest degree (``d - 1``) down."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    return np.concatenate([[1.0 + alpha.sum()], -alpha[::-1]])


def _eval_u(alpha, lam):
    out = np.zeros_like(lam)
    for c in u_coeffs(alpha):
        out = out * lam + c
    return out


def phi_map(d: int, alpha, lam):
    """``lam**d / U(lam)`` for the weights ``alpha`` (length ``d - 1``)."""
    d = _check_degree(d)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.size != d - 1:
        raise ValueError(f"alpha must have length d-1={d - 1}, got {alpha.size}")
    lam = np.asarray(lam, dtype=complex)
    den = _eval_u(alpha, lam)
    if np.any(den == 0):
        raise PoleError("U(lambda) vanishes")
    out = lam ** d / den
    return out[()] if out.ndim == 0 else out


def phi_star_map(d: int, epsilon: float, lam):
    """Optimal map ``(1-eps) lam**d / (lam**d - (lam - (1 - eps**(1/d)))**d)``.

    Evaluated directly from the closed form, independently of the weights.
    """
    d = _check_degree(d)
    epsilon = _check_epsilon(epsilon)
    lam = np.asarray(lam, dtype=complex)
    shift = 1.0 - epsilon ** (1.0 / d)
    den = lam ** d - (lam - shift) ** d
    if np.any(den == 0):
        raise PoleError("denominator vanishes")
    out = (1.0 - epsilon) * lam ** d / den
    return out[()] if out.ndim == 0 else out


def psi_map(d: int, lam):
    """Normalised map ``lam**d / (lam**d - (lam - 1)**d)``."""
    d = _check_degree(d)
    lam = np.asarray(lam, dtype=complex)
    den = lam ** d - (lam - 1.0) ** d
    if np.any(den == 0):
        raise PoleError("denominator vanishes")
    out = lam ** d / den
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class AccelConfig:
    """Parameters of one accelerated run.

    Attributes
    ----------
    degree : int
        Number of iterates combined in the extrapolation (``d >= 2``).
    alpha : tuple of float
        ``alpha_0 ... alpha_{d-2}``.
    beta : float
        Damping in ``(0, 1]``; the update uses ``(1 - beta) y + beta T(y)``.
    epsilon : float or None
        Contraction gap the weights were derived from, if any.
    delta : float
        Stop once the sup-norm residual is at most ``delta``.
    max_iter : int
        Iteration cap.
    """

    degree: int = 2
    alpha: tuple = (0.0,)
    beta: float = 1.0
    epsilon: float | None = None
    delta: float = 1e-10
    max_iter: int = 1_000_000
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        d = _check_degree(self.degree)
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if len(alpha) != d - 1:
            raise ValueError(f"alpha must have length degree-1={d - 1}, got {len(alpha)}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if int(self.max_iter) < 0:
            raise ValueError("max_iter must be nonnegative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "max_iter", int(self.max_iter))

    @classmethod
    def optimal(cls, degree: int, epsilon: float, **kwargs) -> "AccelConfig":
        """Weights from :func:`d_accel_alphas` for the given gap."""
        return cls(degree=degree, alpha=tuple(d_accel_alphas(degree, epsilon)), epsilon=epsilon, **kwargs)

    @classmethod
    def plain(cls, **kwargs) -> "AccelConfig":
        """Configuration reproducing plain (possibly damped) value iteration."""
        return cls(degree=2, alpha=(0.0,), **kwargs)

    @property
    def alpha_array(self) -> np.ndarray:
        return np.asarray(self.alpha)

    def replace(self, **changes) -> "AccelConfig":
        data = {k: v for k, v in asdict(self).items()}
        data.update(changes)
        return AccelConfig(**data)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "alpha": list(self.alpha),
            "beta": self.beta,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "max_iter": self.max_iter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AccelConfig":
        """Build from a mapping; ``alpha`` may be omitted when ``epsilon`` is given."""
        data = dict(data)
        degree = int(data.pop("degree", 2))
        if "alpha" not in data or data["alpha"] is None:
            data.pop("alpha", None)
            eps = data.pop("epsilon", None)
            if eps is None:
                raise ValueError("either alpha or epsilon is required")
            return cls.optimal(degree, eps, **data)
        data["alpha"] = tuple(data["alpha"])
        return cls(degree=degree, **data)
