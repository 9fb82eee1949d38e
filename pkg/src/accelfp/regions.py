"""Membership tests for the regions of the complex plane where acceleration works.

A point ``z`` (an eigenvalue of ``P``) is accelerable at degree ``d`` when every
root of ``lam**d = z * U(lam)`` lies in the disk of radius ``1 - eps**(1/d)``.
With the optimal weights this reduces, after the substitution
``lam = (1 - eps**(1/d)) mu`` and ``w = z / (1 - eps)``, to checking that all
roots of the monic polynomial ``(1 - w) mu**d + w (mu - 1)**d`` lie in the unit
disk. Every test returns a :class:`RegionVerdict` carrying the largest root
modulus so that near-boundary points are reported rather than silently
classified.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb, cos, pi

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_degree, check_epsilon, check_nonnegative
from .numeric import poly_roots

__all__ = [
    "KINDS",
    "RegionSpec",
    "RegionVerdict",
    "RegionClassifier",
    "INSIDE",
    "OUTSIDE",
    "BOUNDARY",
    "DEFAULT_BAND",
    "in_sigma_d",
    "in_cal_s",
    "in_sigma_r_d2",
    "sigma_r_d2_roots",
    "in_flying_saucer",
    "in_robust_region",
    "polygon_q_contains",
    "classify",
    "classify_points",
    "preimage_roots",
    "normalized_preimage_roots",
    "tolerance_g0",
    "robust_rate",
    "inner_disk_radius",
    "outer_disk_radius",
    "sigma_curve",
    "sigma_r_curve",
    "boundary_curve",
    "write_points_csv",
]

INSIDE, OUTSIDE, BOUNDARY = "inside", "outside", "boundary_band"
DEFAULT_BAND = 1e-9
# |w - 1| below this is treated as the isolated point 1 - eps itself
ISOLATED_TOL = 1e-12

KINDS = ("SigmaEps_d2", "SigmaEpsR_d2", "SigmaEps_d", "CalS", "FlyingSaucer", "RobustBalls", "PolygonQ")


@dataclass(frozen=True)
class RegionVerdict:
    """Classification of one point.

    ``witness`` is compared against ``threshold``; for the preimage tests it is
    the largest preimage modulus (normalised so the threshold is 1 for the
    degree-``d`` region), for the disk tests it is the distance to the centre
    of the nearest-to-containing disk.
    """

    status: str
    witness: float
    threshold: float
    band_width: float

    @property
    def inside(self) -> bool:
        return self.status == INSIDE

    @property
    def margin(self) -> float:
        """``threshold - witness``; positive inside."""
        return self.threshold - self.witness


def _verdict(witness: float, threshold: float, band: float) -> RegionVerdict:
    if abs(witness - threshold) <= band:
        status = BOUNDARY
    elif witness < threshold:
        status = INSIDE
    else:
        status = OUTSIDE
    return RegionVerdict(status, float(witness), float(threshold), float(band))


def _best(verdicts) -> RegionVerdict:
    # union of sets: inside beats boundary beats outside, ties by margin
    rank = {INSIDE: 0, BOUNDARY: 1, OUTSIDE: 2}
    return min(verdicts, key=lambda v: (rank[v.status], -v.margin))


@dataclass(frozen=True)
class RegionSpec:
    """A named region with its parameters.

    ``r`` is used by ``SigmaEpsR_d2`` only and ``a`` by ``RobustBalls`` only.
    """

    kind: str
    d: int = 2
    epsilon: float = 0.0
    r: float = 1.0
    a: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}; expected one of {KINDS}")
        check_degree(self.d)
        if self.kind == "SigmaEps_d2" and self.d != 2:
            raise ValueError("SigmaEps_d2 requires d=2")
        if self.kind in ("SigmaEps_d2", "SigmaEps_d", "CalS"):
            check_epsilon(self.epsilon, allow_zero=True)
        elif self.kind in ("SigmaEpsR_d2", "FlyingSaucer", "RobustBalls"):
            check_epsilon(self.epsilon)
        if self.kind == "CalS" and self.epsilon != 0.0:
            raise ValueError("CalS is the epsilon=0 region")
        if not self.r >= 1.0:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if not 0.0 <= self.a < 1.0:
            raise ValueError(f"a must lie in [0, 1), got {self.a}")


# ---------------------------------------------------------------- preimages


def _psi_preimage_coeffs(d: int, w: complex) -> np.ndarray:
    # (1 - w) mu^d + w (mu - 1)^d, highest degree first; leading coeff is 1
    coeffs = np.array([w * comb(d, k) * (-1.0) ** k for k in range(d + 1)], dtype=complex)
    coeffs[0] += 1.0 - w
    return coeffs


def normalized_preimage_roots(z, d: int, epsilon: float = 0.0) -> np.ndarray:
    """Roots ``mu`` of ``psi_d(mu) = z / (1 - eps)``, with multiplicity."""
    d = check_degree(d)
    epsilon = check_epsilon(epsilon, allow_zero=True)
    w = complex(z) / (1.0 - epsilon)
    return poly_roots(_psi_preimage_coeffs(d, w))


def preimage_roots(z, d: int, epsilon: float) -> np.ndarray:
    """Roots of ``lam**d = z U(lam)`` for the optimal degree-``d`` weights."""
    epsilon = check_epsilon(epsilon)
    return (1.0 - epsilon ** (1.0 / d)) * normalized_preimage_roots(z, d, epsilon)


# ---------------------------------------------------------------- membership


def in_sigma_d(z, d: int, epsilon: float, band: float = DEFAULT_BAND) -> RegionVerdict:
    """Degree-``d`` accelerable region, the isolated point ``1 - eps`` included.

    Parameters
    ----------
    z : complex
    d : int
    epsilon : float in [0, 1)
    band : float
        Width of the reported boundary band on the normalised preimage modulus.

    Returns
    -------
    RegionVerdict
        ``witness`` is the largest root modulus of the normalised preimage
        polynomial; the threshold is 1.
    """
    d = check_degree(d)
    epsilon = check_epsilon(epsilon, allow_zero=True)
    band = check_nonnegative(band, "band")
    w = complex(z) / (1.0 - epsilon)
    if abs(w - 1.0) <= ISOLATED_TOL:
        return RegionVerdict(INSIDE, 1.0, 1.0, band)
    witness = float(np.max(np.abs(poly_roots(_psi_preimage_coeffs(d, w)))))
    return _verdict(witness, 1.0, band)


def in_cal_s(z, d: int, band: float = DEFAULT_BAND) -> RegionVerdict:
    """The normalised (``eps = 0``) region, closed under the isolated point 1."""
    return in_sigma_d(z, d, 0.0, band)


def in_sigma_r_d2(z, epsilon: float, r: float, band: float = DEFAULT_BAND) -> RegionVerdict:
    """Relaxed degree-2 region: both roots of ``lam**2 - (1+a) z lam + a z`` within ``r (1 - sqrt(eps))``.

    ``a`` is the optimal degree-2 weight for ``epsilon``. Unlike
    :func:`in_sigma_d` the witness is an unnormalised modulus.

    Notes
    -----
    With ``a = (1 - s)/(1 + s)``, ``s = sqrt(eps)``, the discriminant factors as
    ``4 z (z - (1 - eps)) / (1 + s)**2``, so the roots are
    ``(z +- sqrt(z (z - (1 - eps)))) / (1 + s)``. This form stays exact at the
    double root ``z = 1 - eps`` where a generic root finder loses half the digits.
    """
    epsilon = check_epsilon(epsilon)
    if not r >= 1.0:
        raise ValueError(f"r must be >= 1, got {r}")
    band = check_nonnegative(band, "band")
    s = np.sqrt(epsilon)
    z = complex(z)
    root = np.sqrt(z * (z - (1.0 - epsilon)))
    witness = max(abs(z + root), abs(z - root)) / (1.0 + s)
    return _verdict(witness, r * (1.0 - s), band)


def sigma_r_d2_roots(z, epsilon: float) -> np.ndarray:
    """Both roots of ``lam**2 - (1+a) z lam + a z`` for the optimal degree-2 weight ``a``."""
    epsilon = check_epsilon(epsilon)
    z = complex(z)
    root = np.sqrt(z * (z - (1.0 - epsilon)))
    return np.array([z + root, z - root]) / (1.0 + np.sqrt(epsilon))


def in_flying_saucer(z, epsilon: float, band: float = DEFAULT_BAND) -> RegionVerdict:
    """Union of the disk ``|z| <= (1-eps)/2`` and the segment ``[-1+eps, 1-eps]``.

    A point belongs to the segment when ``|Im z| <= band``.
    """
    epsilon = check_epsilon(epsilon)
    band = check_nonnegative(band, "band")
    z = complex(z)
    disk = _verdict(abs(z), (1.0 - epsilon) / 2.0, band)
    if abs(z.imag) <= band:
        seg = _verdict(abs(z.real), 1.0 - epsilon, band)
        return _best([disk, seg])
    return disk


def in_robust_region(z, d: int, epsilon: float, a: float, band: float = DEFAULT_BAND) -> RegionVerdict:
    """Union of ``B(0, (1-eps)/(2**d+1))`` and ``B(1-eps, a eps)``."""
    d = check_degree(d)
    epsilon = check_epsilon(epsilon)
    if not 0.0 <= a < 1.0:
        raise ValueError(f"a must lie in [0, 1), got {a}")
    band = check_nonnegative(band, "band")
    z = complex(z)
    near_zero = _verdict(abs(z), inner_disk_radius(d, epsilon), band)
    near_one = _verdict(abs(z - (1.0 - epsilon)), a * epsilon, band)
    return _best([near_zero, near_one])


def polygon_q_contains(z, d: int, tol: float = 0.0) -> bool:
    """True iff ``Re(exp(-2 k pi i / d) z) <= 1/2 + tol`` for every ``k``."""
    d = check_degree(d)
    rot = np.exp(-2j * np.pi * np.arange(d) / d)
    return bool(np.all((rot * complex(z)).real <= 0.5 + tol))


def classify(z, spec: RegionSpec, band: float = DEFAULT_BAND) -> RegionVerdict:
    """Dispatch on ``spec.kind``; ``PolygonQ`` yields a witness of max ``Re`` over rotations."""
    k = spec.kind
    if k in ("SigmaEps_d2", "SigmaEps_d", "CalS"):
        return in_sigma_d(z, spec.d, spec.epsilon, band)
    if k == "SigmaEpsR_d2":
        return in_sigma_r_d2(z, spec.epsilon, spec.r, band)
    if k == "FlyingSaucer":
        return in_flying_saucer(z, spec.epsilon, band)
    if k == "RobustBalls":
        return in_robust_region(z, spec.d, spec.epsilon, spec.a, band)
    rot = np.exp(-2j * np.pi * np.arange(spec.d) / spec.d)
    return _verdict(float(np.max((rot * complex(z)).real)), 0.5, band)


def classify_points(points, spec: RegionSpec, band: float = DEFAULT_BAND) -> list[RegionVerdict]:
    return [classify(z, spec, band) for z in np.ravel(np.asarray(points, dtype=complex))]


# ---------------------------------------------------------------- radii and tolerance


def inner_disk_radius(d: int, epsilon: float = 0.0) -> float:
    """Radius of a disk around 0 contained in the degree-``d`` region."""
    return (1.0 - epsilon) / (2.0 ** check_degree(d) + 1.0)


def outer_disk_radius(d: int, epsilon: float = 0.0) -> float:
    """Radius of a disk around 0 containing the region (isolated point aside).

    For ``d >= 4`` this is ``(1-eps)/((2 cos(pi/d))**d - 1)``. At ``d = 3`` the
    denominator vanishes and no finite disk is claimed (``inf``); at ``d = 2``
    the region lies in the disk of radius ``1-eps``.
    """
    d = check_degree(d)
    if d == 2:
        return 1.0 - epsilon
    if d == 3:
        return float("inf")
    return (1.0 - epsilon) / ((2.0 * cos(pi / d)) ** d - 1.0)


def tolerance_g0(d: int, h: float) -> float:
    """Radius around 1 containing every ``psi_d``-preimage of the disk ``B(1, h)``.

    ``h**(1/d) / ((1+h)**(1/d) - h**(1/d))``, sharp at the real point ``1 + h``.
    """
    d = check_degree(d)
    h = check_nonnegative(h, "h")
    if h == 0.0:
        return 0.0
    t = h ** (1.0 / d)
    return t / ((1.0 + h) ** (1.0 / d) - t)


def robust_rate(d: int, epsilon: float, a: float) -> float:
    """Rate bound ``1 - (1 - a**(1/d)) eps**(1/d)`` for the two-disk region."""
    d = check_degree(d)
    epsilon = check_epsilon(epsilon)
    return 1.0 - (1.0 - a ** (1.0 / d)) * epsilon ** (1.0 / d)


# ---------------------------------------------------------------- curves


def sigma_curve(theta, d: int, epsilon: float = 0.0):
    """``(1-eps) e^{i d t} / (e^{i d t} - (e^{i t} - 1)**d)``, the image of the unit circle."""
    d = check_degree(d)
    u = np.exp(1j * np.asarray(theta, dtype=float))
    return (1.0 - epsilon) * u ** d / (u ** d - (u - 1.0) ** d)


def sigma_r_curve(theta, epsilon: float, r: float):
    """``(1-eps) r**2 e^{2 i t} / (2 r e^{i t} - 1)``."""
    u = r * np.exp(1j * np.asarray(theta, dtype=float))
    return (1.0 - epsilon) * u ** 2 / (2.0 * u - 1.0)


def boundary_curve(region: RegionSpec, samples: int = 256) -> np.ndarray:
    """Boundary polyline sampled uniformly in the curve parameter.

    The degree-``d`` curves use ``theta`` in ``(pi - 2 pi/d, pi + 2 pi/d]``
    (right endpoint included), the relaxed degree-2 curve ``(0, 2 pi]``. For
    ``PolygonQ`` the samples are spread evenly over the ``d`` edges.
    """
    if int(samples) < 16:
        raise ValueError("samples must be >= 16")
    samples = int(samples)
    k = region.kind
    if k in ("SigmaEps_d2", "SigmaEps_d", "CalS"):
        d = region.d
        theta = pi - 2 * pi / d + (4 * pi / d) * np.arange(1, samples + 1) / samples
        return sigma_curve(theta, d, region.epsilon)
    if k == "SigmaEpsR_d2":
        theta = 2 * pi * np.arange(1, samples + 1) / samples
        return sigma_r_curve(theta, region.epsilon, region.r)
    if k == "PolygonQ":
        d = region.d
        if d == 2:
            raise ValueError("PolygonQ is an unbounded strip for d=2")
        per_edge = -(-samples // d)
        t = np.linspace(-pi / d, pi / d, per_edge, endpoint=False)
        edge = 0.5 * (1.0 + 1j * np.tan(t))
        rot = np.exp(2j * pi * np.arange(d) / d)
        return (rot[:, None] * edge[None, :]).ravel()
    raise ValueError(f"no boundary curve for region kind {k!r}")


def write_points_csv(path, points, statuses=None) -> None:
    """Write ``re,im[,status]`` rows."""
    points = np.ravel(np.asarray(points, dtype=complex))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im"] + (["status"] if statuses is not None else []))
        for i, z in enumerate(points):
            row = [repr(float(z.real)), repr(float(z.imag))]
            if statuses is not None:
                row.append(statuses[i])
            w.writerow(row)


# ---------------------------------------------------------------- estimator


class RegionClassifier(BaseEstimator):
    """Estimator wrapper classifying complex points against one region.

    ``fit`` only validates the parameters; ``predict`` returns the status
    string per point and ``decision_function`` the signed margin
    (positive inside).

    Examples
    --------
    >>> clf = RegionClassifier(kind="SigmaEps_d", degree=4, epsilon=0.0).fit()
    >>> clf.predict([0.05, 2.0]).tolist()
    ['inside', 'outside']
    """

    def __init__(self, kind="SigmaEps_d", degree=2, epsilon=0.0, r=1.0, a=0.5, band=DEFAULT_BAND):
        self.kind = kind
        self.degree = degree
        self.epsilon = epsilon
        self.r = r
        self.a = a
        self.band = band

    def fit(self, X=None, y=None):
        self.spec_ = RegionSpec(self.kind, self.degree, self.epsilon, self.r, self.a)
        check_nonnegative(self.band, "band")
        return self

    def verdicts(self, X) -> list[RegionVerdict]:
        check_is_fitted(self, "spec_")
        return classify_points(X, self.spec_, self.band)

    def predict(self, X) -> np.ndarray:
        return np.array([v.status for v in self.verdicts(X)])

    def decision_function(self, X) -> np.ndarray:
        return np.array([v.margin for v in self.verdicts(X)])
