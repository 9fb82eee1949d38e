"""Matrix and scalar numerics used throughout the package.

Contents
--------
* :class:`SparseRowMatrix` -- immutable compressed-row matrix with a
  deterministic matrix-vector product.
* :func:`poly_roots` -- roots of a complex polynomial through the companion
  matrix of its monic normalisation.
* :func:`dense_eigenvalues` -- Hessenberg reduction followed by a shifted
  complex QR iteration.
* :func:`spectral_radius_power` -- power iteration for nonnegative matrices.
* Matrix Market coordinate reader / writer.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseRowMatrix",
    "spmv",
    "as_sparse",
    "poly_roots",
    "poly_eval",
    "dense_eigenvalues",
    "spectral_radius",
    "spectral_radius_of",
    "spectral_radius_power",
    "PowerResult",
    "match_multisets",
    "read_matrix_market",
    "write_matrix_market",
    "EIG_CAP",
]

#: Largest matrix accepted by :func:`dense_eigenvalues` unless overridden.
EIG_CAP = 4000
#: Above this size ``method="auto"`` delegates to LAPACK.
_QR_AUTO_LIMIT = 200


@dataclass(frozen=True, eq=False)
class SparseRowMatrix:
    """Compressed-row matrix.

    Rows are stored in canonical form: within each row the column indices are
    strictly increasing. Instances are immutable; the arrays are flagged
    read-only on construction.

    Parameters
    ----------
    n_rows, n_cols : int
        Shape of the matrix.
    row_offsets : array of int, length ``n_rows + 1``
        ``row_offsets[i]:row_offsets[i+1]`` slices the entries of row ``i``.
    col_indices : array of int
        Column index of every stored entry.
    values : array of float or complex
        Stored entries.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offs = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values)
        if not (np.issubdtype(vals.dtype, np.floating) or np.issubdtype(vals.dtype, np.complexfloating)):
            vals = vals.astype(np.float64)
        if offs.shape != (self.n_rows + 1,):
            raise ValueError(f"row_offsets must have length n_rows+1={self.n_rows + 1}, got {offs.shape}")
        if offs[0] != 0 or offs[-1] != cols.size or np.any(np.diff(offs) < 0):
            raise ValueError("row_offsets must be nondecreasing, start at 0 and end at nnz")
        if cols.shape != vals.shape:
            raise ValueError("col_indices and values must have the same length")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise ValueError("column index out of range")
        if cols.size > 1:
            step = np.diff(cols)
            row_start = np.zeros(cols.size, dtype=bool)
            row_start[offs[1:-1][offs[1:-1] < cols.size]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be strictly increasing within each row")
        for arr in (offs, cols, vals):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", offs)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)

    # construction helpers -------------------------------------------------
    @classmethod
    def from_dense(cls, a) -> "SparseRowMatrix":
        a = np.asarray(a)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def from_scipy(cls, m) -> "SparseRowMatrix":
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseRowMatrix":
        """Build from triplets; duplicate entries are summed."""
        m = sp.coo_matrix((np.asarray(vals), (np.asarray(rows), np.asarray(cols))), shape=shape)
        return cls.from_scipy(m.tocsr())

    @classmethod
    def identity(cls, n: int) -> "SparseRowMatrix":
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    @classmethod
    def diag(cls, d) -> "SparseRowMatrix":
        d = np.asarray(d)
        n = d.size
        return cls(n, n, np.arange(n + 1), np.arange(n), d.copy())

    # views ----------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def dtype(self):
        return self.values.dtype

    def to_scipy(self) -> sp.csr_matrix:
        # scipy copies nothing here; the csr kernel walks rows in order and
        # each row in ascending column order.
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.to_scipy().sum(axis=1)).ravel()

    def scale_rows(self, s) -> "SparseRowMatrix":
        s = np.asarray(s)
        counts = np.diff(self.row_offsets)
        return SparseRowMatrix(self.n_rows, self.n_cols, self.row_offsets, self.col_indices,
                               self.values * np.repeat(s, counts))

    def take_rows(self, rows) -> "SparseRowMatrix":
        return SparseRowMatrix.from_scipy(self.to_scipy()[np.asarray(rows)])

    def __matmul__(self, x):
        return spmv(self, x)

    def __repr__(self):
        return f"SparseRowMatrix(shape={self.shape}, nnz={self.nnz}, dtype={self.dtype})"


def as_sparse(a) -> SparseRowMatrix:
    """Coerce a dense array, scipy matrix or :class:`SparseRowMatrix`."""
    if isinstance(a, SparseRowMatrix):
        return a
    if sp.issparse(a):
        return SparseRowMatrix.from_scipy(a)
    return SparseRowMatrix.from_dense(a)


def spmv(A: SparseRowMatrix, x) -> np.ndarray:
    """Sparse product ``A @ x``.

    Summation runs row by row in ascending column order, so repeated calls
    with equal inputs return bitwise equal results.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != A.n_cols:
        raise ValueError(f"dimension mismatch: matrix has {A.n_cols} columns, vector has shape {x.shape}")
    return A.to_scipy() @ x


# --------------------------------------------------------------------------
# polynomials


def _trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    nz = np.flatnonzero(np.abs(c) > 0)
    if nz.size == 0:
        raise ValueError("zero polynomial")
    return c[nz[0]:]


def poly_eval(coeffs, z):
    """Horner evaluation; coefficients ordered from highest degree down."""
    c = np.asarray(coeffs, dtype=complex)
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for a in c:
        out = out * z + a
    return out


def poly_roots(coeffs) -> np.ndarray:
    """All roots (with multiplicity) of a complex polynomial.

    Parameters
    ----------
    coeffs : sequence of complex
        Coefficients from the highest degree down; leading zeros are trimmed.

    Returns
    -------
    ndarray of complex, length = degree
    """
    c = _trim(coeffs)
    deg = c.size - 1
    if deg < 1:
        raise ValueError("polynomial must have degree >= 1")
    monic = c[1:] / c[0]
    # trailing zero coefficients are exact roots at the origin
    nz = np.flatnonzero(np.abs(monic) > 0)
    if nz.size == 0:
        return np.zeros(deg, dtype=complex)
    k = deg - 1 - nz[-1]
    monic = monic[:nz[-1] + 1]
    m = monic.size
    if m == 1:
        roots = np.array([-monic[0]])
    else:
        comp = np.zeros((m, m), dtype=complex)
        comp[0, :] = -monic
        comp[np.arange(1, m), np.arange(m - 1)] = 1.0
        roots = np.linalg.eigvals(comp)
    return np.concatenate([roots, np.zeros(k, dtype=complex)])


# --------------------------------------------------------------------------
# dense eigenvalues


def _hessenberg(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    H = A.copy()
    for k in range(n - 2):
        x = H[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H


def _givens(a: complex, b: complex):
    """Return (c, s, r) with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0], c real."""
    if b == 0:
        return 1.0, 0.0 + 0.0j, a
    if a == 0:
        return 0.0, np.conj(b) / abs(b), abs(b)
    na, nb = abs(a), abs(b)
    nrm = np.hypot(na, nb)
    c = na / nrm
    s = (a / na) * np.conj(b) / nrm
    r = (a / na) * nrm
    return c, s, r


def _hqr(H: np.ndarray, max_sweeps: int) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by shifted complex QR."""
    n = H.shape[0]
    eig = np.empty(n, dtype=complex)
    eps = np.finfo(float).eps
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        # locate the start of the active unreduced block
        lo = hi
        while lo > 0:
            scale = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1])
            if scale == 0.0:
                scale = np.abs(H[: hi + 1, : hi + 1]).sum()
            if abs(H[lo, lo - 1]) <= eps * scale:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        if total > max_sweeps:
            raise np.linalg.LinAlgError("QR iteration failed to converge")
        its += 1
        total += 1
        a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
        c, d = H[hi, hi - 1], H[hi, hi]
        if its % 11 == 0:
            # exceptional shift to break cycles
            mu = d + 0.75 * abs(c) * np.exp(1j * its)
        else:
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            m1, m2 = d + half + disc, d + half - disc
            mu = m1 if abs(m1 - d) < abs(m2 - d) else m2
        blk = slice(lo, hi + 1)
        m = hi + 1 - lo
        W = H[blk, blk]
        W[np.arange(m), np.arange(m)] -= mu
        rots = []
        for k in range(m - 1):
            cc, ss, rr = _givens(W[k, k], W[k + 1, k])
            rk = W[k, k:].copy()
            rk1 = W[k + 1, k:].copy()
            W[k, k:] = cc * rk + ss * rk1
            W[k + 1, k:] = -np.conj(ss) * rk + cc * rk1
            W[k + 1, k] = 0.0
            rots.append((cc, ss))
        for k, (cc, ss) in enumerate(rots):
            top = min(k + 2, m)
            ck = W[:top, k].copy()
            ck1 = W[:top, k + 1].copy()
            W[:top, k] = cc * ck + np.conj(ss) * ck1
            W[:top, k + 1] = -ss * ck + cc * ck1
        W[np.arange(m), np.arange(m)] += mu
        H[blk, blk] = W
    return eig


def dense_eigenvalues(A, *, method: str = "auto", cap: int = EIG_CAP) -> np.ndarray:
    """All eigenvalues of a dense square matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Real or complex matrix; :class:`SparseRowMatrix` is densified.
    method : {"auto", "qr", "lapack"}
        ``"qr"`` runs the in-library Hessenberg + shifted QR iteration,
        ``"lapack"`` calls :func:`numpy.linalg.eigvals`. ``"auto"`` uses the
        in-library routine up to n = 200.
    cap : int
        Largest accepted dimension.
    """
    if isinstance(A, SparseRowMatrix):
        A = A.toarray()
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n > cap:
        raise ValueError(f"matrix dimension {n} exceeds eigensolver cap {cap}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if n == 0:
        return np.zeros(0, dtype=complex)
    if method == "auto":
        method = "qr" if n <= _QR_AUTO_LIMIT else "lapack"
    if method == "lapack":
        return np.linalg.eigvals(A).astype(complex)
    if method != "qr":
        raise ValueError(f"unknown method {method!r}")
    H = _hessenberg(A.astype(complex))
    return _hqr(H, max_sweeps=30 * n + 100)


def spectral_radius(A, *, cluster_tol: float = 1e-7, **kwargs) -> float:
    """Largest eigenvalue modulus via :func:`dense_eigenvalues`.

    Computed eigenvalues of a defective multiple eigenvalue scatter by about
    ``eps**(1/m)`` around the true value while their mean stays accurate to
    working precision. Eigenvalues near the top of the spectrum that lie
    within ``cluster_tol`` of each other (single linkage) are therefore
    replaced by their mean before taking the modulus. ``cluster_tol=0``
    disables this.
    """
    eig = dense_eigenvalues(A, **kwargs)
    return spectral_radius_of(eig, cluster_tol=cluster_tol)


def spectral_radius_of(eig, *, cluster_tol: float = 1e-7) -> float:
    """Cluster-aware largest modulus of an eigenvalue multiset."""
    eig = np.asarray(eig, dtype=complex).ravel()
    if eig.size == 0:
        return 0.0
    mod = np.abs(eig)
    rho = float(mod.max())
    if cluster_tol <= 0:
        return rho
    top = eig[mod >= rho - 10 * cluster_tol]
    if top.size < 2:
        return rho
    # single-linkage components over the candidates
    label = np.arange(top.size)
    close = np.abs(top[:, None] - top[None, :]) <= cluster_tol
    changed = True
    while changed:
        new = np.min(np.where(close, label[None, :], top.size), axis=1)
        changed = bool(np.any(new != label))
        label = new
    return float(max(abs(top[label == c].mean()) for c in np.unique(label)))


# --------------------------------------------------------------------------
# power iteration


@dataclass(frozen=True)
class PowerResult:
    radius: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.radius


def spectral_radius_power(A, tol: float = 1e-12, max_iter: int = 10_000, x0=None) -> PowerResult:
    """Spectral radius of a nonnegative square matrix by power iteration.

    The estimate is ``||A x||_inf`` for the sup-normalised iterate ``x``.
    Iteration stops when either the Collatz-Wielandt bracket
    ``min_i (Ax)_i/x_i <= rho <= max_i (Ax)_i/x_i`` (valid while ``Ax > 0``)
    is narrower than ``tol``, or the geometric extrapolation of successive
    estimate changes falls below ``tol``. ``converged=False`` is reported
    when neither happens within ``max_iter`` sweeps.
    """
    A = as_sparse(A)
    if A.n_rows != A.n_cols:
        raise ValueError("matrix must be square")
    n = A.n_rows
    if n == 0:
        return PowerResult(0.0, True, 0)
    x = np.ones(n) if x0 is None else np.abs(np.asarray(x0, dtype=float))
    if not np.any(x > 0):
        raise ValueError("start vector must have a positive entry")
    x = x / np.linalg.norm(x, np.inf)
    est = prev = np.nan
    prev_step = np.nan
    for it in range(1, max_iter + 1):
        y = spmv(A, x)
        est = float(np.linalg.norm(y, np.inf))
        if est == 0.0:
            return PowerResult(0.0, True, it)
        if not np.isfinite(est):
            break
        if np.all(y > 0) and np.all(x > 0):
            ratios = y / x
            lo, hi = float(ratios.min()), float(ratios.max())
            if hi - lo <= tol:
                return PowerResult(0.5 * (lo + hi), True, it)
        step = abs(est - prev)
        if step <= tol:
            q = step / prev_step if prev_step > 0 else 0.0
            if q < 1 and step * q / (1 - q) <= tol:
                return PowerResult(est, True, it)
        prev, prev_step = est, step
        x = y / est
    return PowerResult(est, False, max_iter)


# --------------------------------------------------------------------------
# multiset comparison


def match_multisets(a, b) -> float:
    """Greedy minimal-distance matching between two equal-size multisets.

    Repeatedly pairs the closest remaining elements, ties broken by the
    lexicographic order (Re, Im) of the first element. Returns the largest
    distance among matched pairs.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError(f"multisets differ in size: {a.size} != {b.size}")
    if a.size == 0:
        return 0.0
    dist = np.abs(a[:, None] - b[None, :])
    ia, ib = np.meshgrid(np.arange(a.size), np.arange(b.size), indexing="ij")
    order = np.lexsort((b.imag[ib].ravel(), b.real[ib].ravel(), a.imag[ia].ravel(),
                        a.real[ia].ravel(), dist.ravel()))
    used_a = np.zeros(a.size, dtype=bool)
    used_b = np.zeros(b.size, dtype=bool)
    worst = 0.0
    left = a.size
    flat_a, flat_b, flat_d = ia.ravel(), ib.ravel(), dist.ravel()
    for idx in order:
        i, j = flat_a[idx], flat_b[idx]
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = used_b[j] = True
        worst = max(worst, float(flat_d[idx]))
        left -= 1
        if left == 0:
            break
    return worst


# --------------------------------------------------------------------------
# Matrix Market


_MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(path, A: SparseRowMatrix) -> None:
    """Write a real :class:`SparseRowMatrix` in coordinate format (1-based)."""
    A = as_sparse(A)
    if np.iscomplexobj(A.values):
        raise ValueError("Matrix Market writer supports real matrices only")
    counts = np.diff(A.row_offsets)
    rows = np.repeat(np.arange(A.n_rows), counts)
    lines = [_MM_HEADER, f"{A.n_rows} {A.n_cols} {A.nnz}"]
    lines.extend(f"{i + 1} {j + 1} {float(v)!r}" for i, j, v in zip(rows, A.col_indices, A.values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_market(path) -> SparseRowMatrix:
    """Read a coordinate real general Matrix Market file."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header.lower().split() != _MM_HEADER.lower().split():
            raise ValueError(f"unsupported Matrix Market header: {header!r}")
        line = fh.readline()
        while line.startswith("%") or not line.strip():
            line = fh.readline()
        n_rows, n_cols, nnz = (int(t) for t in line.split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        k = 0
        for line in fh:
            if not line.strip() or line.startswith("%"):
                continue
            i, j, v = line.split()
            rows[k], cols[k], vals[k] = int(i) - 1, int(j) - 1, float(v)
            k += 1
    if k != nnz:
        raise ValueError(f"expected {nnz} entries, found {k}")
    return SparseRowMatrix.from_coo(rows, cols, vals, (n_rows, n_cols))
