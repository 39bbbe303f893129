"""Recovery metrics (RSE, RMSE, PSNR) and computable recovery-bound terms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import RatingSet
from .linalg import as_matrix, frobenius_norm
from .quasinorm import FactorPair
from .sparse_obs import SparseObservations, grad_u, masked_residual

__all__ = ["EvalReport", "BoundTerms", "rse", "rmse", "psnr", "bound_terms"]


@dataclass(frozen=True)
class BoundTerms:
    """Computable pieces of the critical-point recovery bound.

    beta = max |D_ij| over the observed set; c2 is the gradient-to-residual
    norm ratio with provable lower bound c2_lower = (2 lam / 3) / sqrt(gamma),
    gamma = ||P_omega(D)||_F^2; sample_term = (m d log(m) / |omega|)^(1/4).
    """

    beta: float
    c2: float
    c2_lower: float
    sample_term: float
    degenerate: bool = False


@dataclass(frozen=True)
class EvalReport:
    rse: float | None = None
    rmse: float | None = None
    psnr: float | None = None
    bound_terms: BoundTerms | None = None


def rse(x, z) -> float:
    """Relative squared error ||x - z||_F / ||z||_F; z must be nonzero."""
    x = as_matrix(x, "x")
    z = as_matrix(z, "z")
    if x.shape != z.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {z.shape}")
    zn = frobenius_norm(z)
    if zn == 0.0:
        raise ValueError("reference matrix is zero")
    return frobenius_norm(x - z) / zn


def rmse(fp: FactorPair, test: RatingSet) -> float:
    """Root mean squared error of u_i . v_j against held-out ratings."""
    if test.size == 0:
        raise ValueError("empty test set")
    pred = np.einsum("ij,ij->i", fp.u[test.users], fp.v[test.items])
    err = pred - test.values
    return math.sqrt(float(err @ err) / err.size)


def psnr(x, z, max_value: float = 255.0) -> float:
    """10 log10(max_value^2 / MSE) in dB; +inf for identical inputs."""
    x = as_matrix(x, "x")
    z = as_matrix(z, "z")
    if x.shape != z.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {z.shape}")
    mse = float(np.mean((x - z) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / mse)


def bound_terms(
    obs: SparseObservations, fp: FactorPair, lam: float, d: int
) -> BoundTerms:
    beta = float(np.max(np.abs(obs.values))) if obs.nnz else 0.0
    r = masked_residual(fp.u, fp.v, obs)
    q = grad_u(r, fp.v)
    rnorm = math.sqrt(r.sq_norm())
    if rnorm == 0.0:
        c2, degenerate = math.inf, True
    else:
        c2, degenerate = math.sqrt(float(np.sum(q * q))) / rnorm, False
    gamma = float(obs.values @ obs.values)
    c2_lower = (2.0 * lam / 3.0) / math.sqrt(gamma) if gamma > 0.0 else math.inf
    if obs.nnz:
        sample_term = (obs.m * d * math.log(obs.m) / obs.nnz) ** 0.25
    else:
        sample_term = math.inf
    return BoundTerms(beta, c2, c2_lower, sample_term, degenerate)
