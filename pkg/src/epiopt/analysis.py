"""Convergence-rate analysis: surrogate Hessians, condition numbers, rates.

Polynomial surrogates of the sampled objective provide Hessians of the
fine and coarse models; the generalized condition number of the
(preconditioned) Hessian pair maps to the steepest-descent contraction
factor rho = (kappa - 1) / (kappa + 1).  The kappa -> rho map is
inferred from exact agreement with all published condition/rate pairs;
the experimental rate is the geometric-mean error contraction of a run
log against a reference value.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import IllPosedFitError

log = logging.getLogger(__name__)


def monomial_exponents(dim: int, degree: int) -> list:
    """All exponent tuples with total degree <= degree."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            exps = [0] * dim
            for i in combo:
                exps[i] += 1
            out.append(tuple(exps))
    return out


@dataclass(frozen=True)
class SurrogateFit:
    """Least-squares polynomial model of a sampled objective."""

    points: np.ndarray
    values: np.ndarray
    degree: int
    exponents: tuple
    coefficients: np.ndarray
    center: np.ndarray
    hessian: np.ndarray
    rms_residual: float

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=np.float64)
        total = 0.0
        for c, exps in zip(self.coefficients, self.exponents):
            term = c
            for x, e in zip(u, exps):
                term *= x**e
            total += term
        return float(total)


def fit_surrogate(points, values, degree: int, center) -> SurrogateFit:
    """Ordinary least-squares polynomial fit with analytic Hessian.

    Requires at least twice as many samples as monomials; a numerically
    rank-deficient design matrix raises IllPosedFitError.  The Hessian
    at ``center`` is symmetrized.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] != values.shape[0]:
        raise ValueError("points and values do not match")
    dim = points.shape[1]
    exps = monomial_exponents(dim, degree)
    n_terms = len(exps)
    if points.shape[0] < 2 * n_terms:
        raise IllPosedFitError(
            f"need >= {2 * n_terms} samples for degree {degree} in {dim}D, "
            f"got {points.shape[0]}"
        )
    design = np.empty((points.shape[0], n_terms))
    for j, e in enumerate(exps):
        col = np.ones(points.shape[0])
        for d in range(dim):
            if e[d]:
                col = col * points[:, d] ** e[d]
        design[:, j] = col
    if np.linalg.matrix_rank(design) < n_terms:
        raise IllPosedFitError("rank-deficient design matrix")
    coeffs, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = design @ coeffs - values
    rms = float(np.sqrt(np.mean(residual**2)))

    center = np.asarray(center, dtype=np.float64)
    hess = np.zeros((dim, dim))
    for c, e in zip(coeffs, exps):
        for a in range(dim):
            for b in range(dim):
                ee = list(e)
                # d^2/du_a du_b of the monomial
                factor = ee[a]
                if factor == 0:
                    continue
                ee[a] -= 1
                factor *= ee[b]
                if factor == 0:
                    continue
                ee[b] -= 1
                term = c * factor
                for d in range(dim):
                    if ee[d]:
                        term *= center[d] ** ee[d]
                hess[a, b] += term
    hess = 0.5 * (hess + hess.T)
    return SurrogateFit(
        points=points,
        values=values,
        degree=degree,
        exponents=tuple(exps),
        coefficients=coeffs,
        center=center,
        hessian=hess,
        rms_residual=rms,
    )


def grid_points(n_per_axis: int, lower, upper) -> np.ndarray:
    """Uniform sampling grid over a box (row-major flattened)."""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    axes = [np.linspace(lower[d], upper[d], n_per_axis) for d in range(lower.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def latin_hypercube_ball(center, radius: float, count: int, seed: int,
                         lower=0.0, upper=1.0) -> np.ndarray:
    """Latin-hypercube sample of the l-inf ball around center, clipped to U."""
    center = np.asarray(center, dtype=np.float64)
    dim = center.size
    rng = np.random.default_rng(seed)
    pts = np.empty((count, dim))
    for d in range(dim):
        strata = (np.arange(count) + rng.random(count)) / count
        pts[:, d] = rng.permutation(strata)
    pts = center + radius * (2.0 * pts - 1.0)
    return np.clip(pts, lower, upper)


def _check_spd(name: str, h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(h, h.T, rtol=1e-10, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(h)
    if eigs[0] <= 0:
        raise ValueError(f"{name} must be positive definite (min eig {eigs[0]:.3g})")
    return h


def condition_and_rate(h_coarse, h_fine):
    """(kappa, rho): generalized condition number and contraction factor.

    kappa is the ratio of extreme eigenvalues of H_coarse^-1 H_fine,
    computed on the symmetric similarity transform L^-1 H_fine L^-T with
    H_coarse = L L^T; rho = (kappa - 1) / (kappa + 1).  Pass the identity
    as H_coarse for the unpreconditioned case.
    """
    h_fine = _check_spd("H_fine", h_fine)
    h_coarse = _check_spd("H_coarse", h_coarse)
    chol = np.linalg.cholesky(h_coarse)
    tmp = np.linalg.solve(chol, h_fine)
    sym = np.linalg.solve(chol, tmp.T)
    sym = 0.5 * (sym + sym.T)
    eigs = np.linalg.eigvalsh(sym)
    kappa = float(eigs[-1] / eigs[0])
    return kappa, rate_from_condition(kappa)


def rate_from_condition(kappa: float) -> float:
    """Steepest-descent contraction factor (kappa-1)/(kappa+1)."""
    if kappa < 1.0:
        raise ValueError("condition number must be >= 1")
    return (kappa - 1.0) / (kappa + 1.0)


def experimental_rate(objective_trace, reference_value: float) -> float:
    """Geometric-mean per-iteration contraction of |J_k - J*|.

    A non-monotone error sequence is replaced by its monotone envelope
    (running minimum) with a logged warning; trailing exact zeros are
    dropped (no contraction below zero error).
    """
    errors = np.abs(np.asarray(objective_trace, dtype=np.float64) - reference_value)
    if errors.size < 2:
        raise ValueError("need at least 2 recorded objective values")
    if np.any(np.diff(errors) > 0):
        log.warning("non-monotone error sequence; using the monotone envelope")
        errors = np.minimum.accumulate(errors)
    positive = errors > 0.0
    if not positive[0]:
        raise ValueError("initial error is zero; rate undefined")
    last = int(np.nonzero(positive)[0][-1])
    if last == 0:
        raise ValueError("all later errors are zero; rate degenerate")
    return float((errors[last] / errors[0]) ** (1.0 / last))
