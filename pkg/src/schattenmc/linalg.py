"""Dense linear algebra sized for tall-skinny factor work.

The solvers only ever need singular value machinery for m x d blocks with
d << m, so the thin SVD goes through the d x d Gram matrix (cyclic Jacobi
eigendecomposition) and the spectral norm through power iteration on the
smaller Gram matrix.  A batched Jacobi variant serves callers that evaluate
many small matrices at once.

The Gram route halves the attainable precision for small singular values:
its null-space noise floor sits near sqrt(eps) * sigma_1 ~ 1.5e-8 * sigma_1.
Derived scalar norms therefore trim singular values below
``SIGMA_TRIM_REL * sigma_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

JACOBI_OFF_TOL = 1e-14  # relative off-diagonal Frobenius mass at convergence
JACOBI_SWEEP_CAP = 100
POWER_RTOL = 1e-12  # relative change of successive Rayleigh quotients
POWER_ITER_CAP = 10_000

# Columns with sigma_i <= DEFICIENT_REL * sigma_1 get their left singular
# vector rebuilt by re-orthonormalization instead of a / sigma division.
DEFICIENT_REL = 1e-12

# Numerical-rank / norm-trim threshold, sized to the Gram-route noise floor.
SIGMA_TRIM_REL = 1e-7


class NumericalError(RuntimeError):
    """An iterative kernel exhausted its iteration cap without converging."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array; NaN/Inf are rejected."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ThinSVD:
    """Thin singular value decomposition ``a == left @ diag(s) @ right.T``.

    ``left`` is m x k and ``right`` is n x k with orthonormal columns,
    ``singular_values`` is length k = min(m, n), non-increasing and >= 0.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray


def _jacobi_eigh(sym: np.ndarray, need_vectors: bool = True):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns eigenvalues sorted non-increasing (stable order on ties) and,
    optionally, the matching orthonormal eigenvectors as columns.
    """
    a = np.array(sym, dtype=np.float64)
    k = a.shape[0]
    vecs = np.eye(k) if need_vectors else None
    total = float(np.sum(a * a))
    if k > 1 and total > 0.0:
        threshold = (JACOBI_OFF_TOL**2) * total
        sweeps = 0
        while True:
            offdiag = a.copy()
            np.fill_diagonal(offdiag, 0.0)
            if float(np.sum(offdiag * offdiag)) <= threshold:
                break
            if sweeps >= JACOBI_SWEEP_CAP:
                raise NumericalError(
                    f"Jacobi eigensolver: off-diagonal mass not below tolerance "
                    f"after {JACOBI_SWEEP_CAP} sweeps"
                )
            for p in range(k - 1):
                for q in range(p + 1, k):
                    apq = float(a[p, q])
                    if apq == 0.0:
                        continue
                    app = float(a[p, p])
                    aqq = float(a[q, q])
                    theta = 0.5 * (aqq - app) / apq
                    if abs(theta) > 1e153:  # avoid overflow in theta*theta
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (
                            abs(theta) + math.sqrt(theta * theta + 1.0)
                        )
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    rp = a[p, :].copy()
                    rq = a[q, :].copy()
                    a[p, :] = c * rp - s * rq
                    a[q, :] = s * rp + c * rq
                    cp = a[:, p].copy()
                    cq = a[:, q].copy()
                    a[:, p] = c * cp - s * cq
                    a[:, q] = s * cp + c * cq
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    if need_vectors:
                        vp = vecs[:, p].copy()
                        vq = vecs[:, q].copy()
                        vecs[:, p] = c * vp - s * vq
                        vecs[:, q] = s * vp + c * vq
            sweeps += 1
    evals = np.diagonal(a).copy()
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    if need_vectors:
        vecs = vecs[:, order]
    return evals, vecs


def _jacobi_eigvals_stack(sym_stack: np.ndarray) -> np.ndarray:
    """Eigenvalues (non-increasing) of a stack of symmetric matrices.

    Same cyclic Jacobi schedule as the scalar path, vectorized over the
    leading batch dimension; eigenvectors are not accumulated.
    """
    a = np.array(sym_stack, dtype=np.float64)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"expected a (batch, k, k) stack, got {a.shape}")
    nb, k, _ = a.shape
    if k > 1 and nb:
        total = np.einsum("bij,bij->b", a, a)
        threshold = (JACOBI_OFF_TOL**2) * total
        diag_ix = np.arange(k)
        sweeps = 0
        while True:
            offdiag = a.copy()
            offdiag[:, diag_ix, diag_ix] = 0.0
            off = np.einsum("bij,bij->b", offdiag, offdiag)
            if np.all(off <= threshold):
                break
            if sweeps >= JACOBI_SWEEP_CAP:
                raise NumericalError(
                    f"batched Jacobi eigensolver: not converged after "
                    f"{JACOBI_SWEEP_CAP} sweeps"
                )
            for p in range(k - 1):
                for q in range(p + 1, k):
                    app = a[:, p, p].copy()
                    aqq = a[:, q, q].copy()
                    apq = a[:, p, q].copy()
                    rotate = apq != 0.0
                    safe = np.where(rotate, apq, 1.0)
                    with np.errstate(over="ignore", divide="ignore"):
                        theta = 0.5 * (aqq - app) / safe
                        big = np.abs(theta) > 1e153
                        theta_big = np.where(big, theta, 1.0)
                        theta_small = np.where(big, 1.0, theta)
                        t = np.where(
                            big,
                            0.5 / theta_big,
                            np.where(theta_small >= 0.0, 1.0, -1.0)
                            / (np.abs(theta_small) + np.sqrt(theta_small**2 + 1.0)),
                        )
                    t = np.where(rotate, t, 0.0)
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    cb = c[:, None]
                    sb = s[:, None]
                    rp = a[:, p, :].copy()
                    rq = a[:, q, :].copy()
                    a[:, p, :] = cb * rp - sb * rq
                    a[:, q, :] = sb * rp + cb * rq
                    cp = a[:, :, p].copy()
                    cq = a[:, :, q].copy()
                    a[:, :, p] = cb * cp - sb * cq
                    a[:, :, q] = sb * cp + cb * cq
                    a[:, p, p] = app - t * apq
                    a[:, q, q] = aqq + t * apq
                    a[:, p, q] = 0.0
                    a[:, q, p] = 0.0
            sweeps += 1
    evals = np.einsum("bii->bi", a).copy()
    return np.sort(evals, axis=1)[:, ::-1]


def _orthonormalize_column(col, prev):
    # two projection passes keep orthogonality near machine precision
    if prev.shape[1]:
        col = col - prev @ (prev.T @ col)
        col = col - prev @ (prev.T @ col)
    return col, math.sqrt(float(col @ col))


def _left_vectors(a: np.ndarray, right: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Recover left singular vectors as a @ v / sigma, re-orthonormalized.

    Columns whose sigma falls at or below DEFICIENT_REL * sigma_1 are
    completed from canonical basis vectors instead.
    """
    m = a.shape[0]
    k = sigma.shape[0]
    av = a @ right
    cutoff = DEFICIENT_REL * (float(sigma[0]) if k else 0.0)
    left = np.zeros((m, k))
    fill = 0
    for i in range(k):
        si = float(sigma[i])
        if si > cutoff and si > 0.0:
            col, nrm = _orthonormalize_column(av[:, i] / si, left[:, :i])
            if nrm > 0.5:
                left[:, i] = col / nrm
                continue
        while fill < m:
            cand = np.zeros(m)
            cand[fill] = 1.0
            fill += 1
            col, nrm = _orthonormalize_column(cand, left[:, :i])
            if nrm > 0.5:
                left[:, i] = col / nrm
                break
        else:
            raise NumericalError("failed to complete an orthonormal left basis")
    return left


def _gram_scale(a: np.ndarray) -> float:
    """Rescaling factor applied before forming a^T a, nonzero only when the
    entry magnitude would underflow or overflow the squared Gram entries."""
    peak = float(np.max(np.abs(a))) if a.size else 0.0
    if peak != 0.0 and not (1e-100 < peak < 1e100):
        return peak
    return 1.0


def thin_svd(a) -> ThinSVD:
    """Thin SVD with all min(m, n) singular triplets, via the small Gram matrix.

    Deterministic for a fixed input.  Raises NumericalError if the Jacobi
    eigensolver does not converge within its sweep cap.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m == 0 or n == 0:
        raise ValueError("thin_svd requires at least one row and one column")
    if m < n:
        flipped = thin_svd(a.T)
        return ThinSVD(flipped.right, flipped.singular_values, flipped.left)
    scale = _gram_scale(a)
    if scale != 1.0:
        f = thin_svd(a / scale)
        return ThinSVD(f.left, f.singular_values * scale, f.right)
    evals, evecs = _jacobi_eigh(a.T @ a)
    sigma = np.sqrt(np.maximum(evals, 0.0))
    left = _left_vectors(a, evecs, sigma)
    return ThinSVD(left, sigma, evecs)


def trim_singular_values(sigma: np.ndarray) -> np.ndarray:
    """Zero out entries at or below the Gram-route noise floor."""
    s = np.array(sigma, dtype=np.float64)
    if s.size and s[0] > 0.0:
        s[s <= SIGMA_TRIM_REL * s[0]] = 0.0
    return s


def singular_values(a, trim: bool = True) -> np.ndarray:
    """Singular values only (non-increasing), optionally noise-trimmed."""
    a = as_matrix(a)
    if a.shape[0] < a.shape[1]:
        a = a.T
    scale = _gram_scale(a)
    if scale != 1.0:
        a = a / scale
    evals, _ = _jacobi_eigh(a.T @ a, need_vectors=False)
    s = np.sqrt(np.maximum(evals, 0.0)) * scale
    return trim_singular_values(s) if trim else s


def singular_values_stack(a_stack: np.ndarray, trim: bool = True) -> np.ndarray:
    """Singular values of a (batch, m, n) stack, shape (batch, min(m, n))."""
    a = np.asarray(a_stack, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"expected a (batch, m, n) stack, got {a.shape}")
    if a.shape[1] < a.shape[2]:
        a = np.transpose(a, (0, 2, 1))
    grams = np.matmul(np.transpose(a, (0, 2, 1)), a)
    s = np.sqrt(np.maximum(_jacobi_eigvals_stack(grams), 0.0))
    if trim and s.shape[1]:
        top = s[:, :1]
        s[s <= SIGMA_TRIM_REL * top] = 0.0
    return s


def nuclear_norms_stack(a_stack: np.ndarray) -> np.ndarray:
    return np.sum(singular_values_stack(a_stack), axis=1)


def spectral_norm(a) -> float:
    """Largest singular value, by power iteration on the smaller Gram matrix.

    Deterministic (all-ones start vector); converges when successive
    Rayleigh quotients agree to POWER_RTOL relative.  Returns 0.0 for the
    zero matrix; raises NumericalError past the iteration cap.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m == 0 or n == 0:
        raise ValueError("spectral_norm requires nonzero dimensions")
    scale = _gram_scale(a)
    if scale != 1.0:
        a = a / scale
    g = a.T @ a if n <= m else a @ a.T
    if float(np.sum(g * g)) == 0.0:
        return 0.0
    k = g.shape[0]
    b = np.full(k, 1.0 / math.sqrt(k))
    prev = None
    fill = 0
    for _ in range(POWER_ITER_CAP):
        y = g @ b
        ray = float(b @ y)
        ynorm = math.sqrt(float(y @ y))
        if ynorm == 0.0:
            # start vector fell in the null space: restart on canonical axes
            if fill >= k:
                return 0.0
            b = np.zeros(k)
            b[fill] = 1.0
            fill += 1
            prev = None
            continue
        if prev is not None and abs(ray - prev) <= POWER_RTOL * max(abs(ray), 1e-300):
            return math.sqrt(max(ray, 0.0)) * scale
        prev = ray
        b = y / ynorm
    raise NumericalError(
        f"power iteration: Rayleigh quotient did not settle within "
        f"{POWER_ITER_CAP} iterations"
    )


def sigma_max(a) -> float:
    """Largest singular value via the Gram eigenvalues (exact to machine
    precision even for clustered spectra, unlike the power iteration)."""
    s = singular_values(a, trim=False)
    return float(s[0]) if s.size else 0.0


def nuclear_norm(a) -> float:
    """Sum of singular values (noise-trimmed, see module docstring)."""
    return float(np.sum(singular_values(a)))


def frobenius_norm(a) -> float:
    a = as_matrix(a)
    return math.sqrt(float(np.sum(a * a)))
