"""Tikhonov-regularized estimation of the autocorrelation operator.

The estimator of ``rho*`` minimises ``||R_{-1} - R0 Phi||_2^2 + alpha ||Phi||_2^2``
over Hilbert-Schmidt ``Phi``; its closed form is ``K_alpha R_{-1}`` with
``K_alpha = (R0 R0 + alpha I)^{-1} R0``. The same formula applied to the
population operators gives the deterministic approximation ``Phi_alpha``.
"""
from dataclasses import dataclass
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from funcar.errors import NumericalError
from funcar.estimators import CovPair
from funcar.hilbert import DEFAULT_PINV_TOL, HilbertOperator, adjoint, pseudo_inverse, schatten_norm

__all__ = [
    "TikhonovEstimate",
    "SourceCheck",
    "OracleSolution",
    "regularized_resolvent",
    "k_alpha",
    "estimate_rho",
    "population_phi",
    "oracle_rho_star",
    "source_condition_check",
    "choose_alpha",
]


def _check_alpha(alpha):
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be a finite positive real, got {alpha!r}")
    return float(alpha)


def _spectral_apply(r0, alpha, filt, rhs):
    """``V diag(filt(lambda)) V' rhs`` for self-adjoint ``r0 = V diag(lambda) V'``.

    Working on the eigenvalues of ``R0`` rather than factorizing ``R0 R0 +
    alpha I`` keeps a null direction of ``R0`` at exactly ``1/alpha``: forming
    ``R0 R0`` first perturbs its small eigenvalues by ``eps ||R0||^2``, which
    is large relative to ``alpha`` when ``alpha`` is small.
    """
    try:
        lam, v = np.linalg.eigh(r0.coords)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition of R0 did not converge") from exc
    f = filt(lam, lam * lam + alpha)
    if rhs is None:
        return (v * f) @ v.T
    return (v * f) @ (v.T @ rhs)


def _regularized_solve(r0, rhs, alpha, with_r0=False):
    """``(R0 R0 + alpha I)^{-1} rhs``, or ``(R0 R0 + alpha I)^{-1} R0 rhs``.

    ``rhs=None`` stands for the identity.
    """
    if r0.self_adjoint:
        filt = (lambda lam, d: lam / d) if with_r0 else (lambda lam, d: 1.0 / d)
        return _spectral_apply(r0, alpha, filt, rhs)
    a = r0.coords
    J = a.shape[0]
    b = np.eye(J) if rhs is None else rhs
    if with_r0:
        b = a @ b
    try:
        return linalg.solve(a @ a + alpha * np.eye(J), b, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"R0^2 + alpha I is singular (alpha={alpha:g})") from exc


def regularized_resolvent(r0, alpha):
    """``(R0 R0 + alpha I)^{-1}``, formed only for inspection and tests."""
    alpha = _check_alpha(alpha)
    out = _regularized_solve(r0, None, alpha)
    if r0.self_adjoint:
        return HilbertOperator.symmetrized(out, r0.basis)
    return HilbertOperator(out, r0.basis)


def k_alpha(r0, alpha):
    """The regularized inverse ``(R0 R0 + alpha I)^{-1} R0``.

    ``r0`` may be indefinite; ``R0 R0`` is still nonnegative, and the
    spectral filter ``lambda / (lambda^2 + alpha)`` is bounded by
    ``1 / (2 sqrt(alpha))``.
    """
    alpha = _check_alpha(alpha)
    out = _regularized_solve(r0, None, alpha, with_r0=True)
    if r0.self_adjoint:
        return HilbertOperator.symmetrized(out, r0.basis)
    return HilbertOperator(out, r0.basis)


@dataclass(frozen=True, eq=False)
class TikhonovEstimate:
    phi_hat: HilbertOperator
    rho_hat: HilbertOperator
    alpha: float
    source: Optional[CovPair] = None


def estimate_rho(cov, alpha):
    """``Phi_hat = K_alpha(R0_hat) R1_hat*`` and ``rho_hat = Phi_hat*``."""
    alpha = _check_alpha(alpha)
    r0 = cov.r0_hat
    phi = HilbertOperator(_regularized_solve(r0, cov.r1_hat.coords.T, alpha, with_r0=True), r0.basis)
    return TikhonovEstimate(phi, adjoint(phi), alpha, cov)


def population_phi(r0, r1, alpha):
    """Deterministic counterpart ``Phi_alpha = K_alpha R_{-1}``."""
    alpha = _check_alpha(alpha)
    return HilbertOperator(_regularized_solve(r0, r1.coords.T, alpha, with_r0=True), r0.basis)


class OracleSolution(NamedTuple):
    phi: HilbertOperator
    residual: float


def oracle_rho_star(r0, r1, tol=DEFAULT_PINV_TOL):
    """Exact solution ``(R0 R0)^+ R0 R_{-1}`` of ``R_{-1} = R0 Phi``.

    The residual ``||R_{-1} - R0 Phi||_2`` is returned alongside so that
    ill-conditioning is visible to the caller.
    """
    gram = HilbertOperator.symmetrized(r0.coords @ r0.coords, r0.basis)
    r_minus1 = r1.coords.T
    phi = pseudo_inverse(gram, tol).coords @ r0.coords @ r_minus1
    residual = float(np.linalg.norm(r_minus1 - r0.coords @ phi))
    return OracleSolution(HilbertOperator(phi, r0.basis), residual)


@dataclass(frozen=True, eq=False)
class SourceCheck:
    """Outcome of testing ``rho* = R0 w`` with ``||w||_p <= M``.

    ``partial_norms[k-1]`` is the p-norm of ``w`` compressed to the span of
    the ``k`` leading eigenvectors of ``R0``; ``growth_slope`` is the log-log
    slope of that sequence over its upper half, near 0 when the norm settles
    and near the growth exponent when it diverges with the truncation level.
    """

    w: HilbertOperator
    p: float
    w_norm: float
    residual: float
    tolerance: float
    satisfied: bool
    budget: Optional[float]
    partial_norms: np.ndarray
    growth_slope: float

    @property
    def appears_unbounded(self):
        return self.growth_slope > GROWTH_SLOPE_FLAG


GROWTH_SLOPE_FLAG = 0.25


def _growth_slope(values):
    k = np.arange(1, values.size + 1)
    lo = values.size // 2
    sel = slice(lo, None)
    kk, vv = k[sel], values[sel]
    ok = vv > 0
    if ok.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(kk[ok]), np.log(vv[ok]), 1)[0])


def source_condition_check(r0, rho, p=2, tol=None, budget=None, pinv_tol=DEFAULT_PINV_TOL):
    """Compute the source element ``w = R0^+ rho*`` and test ``rho* = R0 w``.

    Parameters
    ----------
    r0 : HilbertOperator
        Self-adjoint covariance operator.
    rho : HilbertOperator
        Autocorrelation operator.
    p : float
        Schatten index used for ``M = ||w||_p``.
    tol : float, optional
        Residual tolerance; defaults to ``1e-8 * ||rho*||_2``.
    budget : float, optional
        If given, the check also requires ``||w||_p <= budget``.
    """
    rho_star = rho.coords.T
    if tol is None:
        tol = 1e-8 * float(np.linalg.norm(rho_star))
    w = pseudo_inverse(r0, pinv_tol).coords @ rho_star
    residual = float(np.linalg.norm(rho_star - r0.coords @ w))
    w_op = HilbertOperator(w, r0.basis)
    w_norm = schatten_norm(w_op, p)

    vals, vecs = np.linalg.eigh(r0.coords)
    order = np.argsort(-np.abs(vals), kind="stable")
    wv = vecs[:, order].T @ w @ vecs[:, order]
    partial = np.array([schatten_norm(wv[:k, :k], p) for k in range(1, wv.shape[0] + 1)])

    satisfied = residual <= tol and math.isfinite(w_norm)
    if budget is not None:
        satisfied = satisfied and w_norm <= budget
    return SourceCheck(
        w=w_op,
        p=float(p),
        w_norm=w_norm,
        residual=residual,
        tolerance=float(tol),
        satisfied=bool(satisfied),
        budget=budget,
        partial_norms=partial,
        growth_slope=_growth_slope(partial),
    )


def choose_alpha(gamma_n, c=1.0):
    """Tuned regularization ``alpha_n = c * gamma_n**(1/4)``."""
    if not (gamma_n > 0 and c > 0):
        raise ValueError(f"gamma_n and c must be positive, got {gamma_n!r}, {c!r}")
    return float(c) * float(gamma_n) ** 0.25
