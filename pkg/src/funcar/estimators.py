"""Plug-in estimators of the lag-0 and lag-1 autocovariance operators.

Two observation regimes are covered: complete sample paths (the usual sample
covariances) and sparse, noisy pointwise records ``Y = X_t(U) + noise``
handled by a two-stage ridge projection.
"""
from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from funcar.arh import OBSERVATION_STREAM, make_rng
from funcar.hilbert import HilbertOperator, design_matrix

__all__ = [
    "CovPair",
    "SparseDesign",
    "empirical_cov",
    "empirical_lag1",
    "complete_cov_estimate",
    "sparse_observe",
    "sparse_cov_estimate",
    "NOISELESS_RIDGE",
]

NOISELESS_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class CovPair:
    """Estimates of ``R0`` (self-adjoint, possibly indefinite) and ``R1``."""

    r0_hat: HilbertOperator
    r1_hat: HilbertOperator
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.r0_hat.self_adjoint:
            object.__setattr__(self, "r0_hat", HilbertOperator.symmetrized(self.r0_hat.coords, self.r0_hat.basis))
        if self.r1_hat.basis != self.r0_hat.basis:
            raise ValueError("r0_hat and r1_hat must share a basis")

    @property
    def basis(self):
        return self.r0_hat.basis


def _path_coords(path):
    x = np.asarray(path.coords)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("empty path")
    return x


def empirical_cov(path):
    """``(1/n) sum_t X_t (x) X_t``."""
    x = _path_coords(path)
    return HilbertOperator.symmetrized(x.T @ x / x.shape[0], path.basis)


def empirical_lag1(path):
    """``1/(n-1) sum_{t<n} X_{t+1} (x) X_t``."""
    x = _path_coords(path)
    n = x.shape[0]
    if n < 2:
        raise ValueError("lag-1 covariance needs at least two states")
    return HilbertOperator(x[1:].T @ x[:-1] / (n - 1), path.basis)


def complete_cov_estimate(path):
    return CovPair(empirical_cov(path), empirical_lag1(path), {"regime": "complete", "n": path.n})


@dataclass(frozen=True, eq=False)
class SparseDesign:
    """Pointwise records ``(t, u, y)`` with exactly ``m`` records per curve.

    Records are stored sorted by curve index ``t = 1..n``. ``noise_sd`` is
    ``None`` when the measurement-error level is unknown (e.g. imported data).
    """

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    n: int
    m: int
    noise_sd: Optional[float] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        u = np.asarray(self.u, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if not (t.shape == u.shape == y.shape) or t.ndim != 1:
            raise ValueError("t, u and y must be 1-d arrays of equal length")
        if self.n < 1 or self.m < 1 or t.size != self.n * self.m:
            raise ValueError(f"expected n*m = {self.n * self.m} records, got {t.size}")
        order = np.argsort(t, kind="stable")
        t, u, y = t[order], u[order], y[order]
        if not np.array_equal(t, np.repeat(np.arange(1, self.n + 1), self.m)):
            raise ValueError(f"each curve index 1..{self.n} must appear exactly {self.m} times")
        if np.any(u < 0) or np.any(u > 2 * math.pi):
            raise ValueError("sampling locations must lie in [0, 2*pi]")
        if not np.all(np.isfinite(y)):
            raise ValueError("measurements must be finite")
        if self.noise_sd is not None and not self.noise_sd >= 0:
            raise ValueError("noise_sd must be nonnegative")
        for name, arr in (("t", t), ("u", u), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t,u,y\n")
            for t, u, y in zip(self.t, self.u, self.y):
                fh.write(f"{int(t)},{float(u)!r},{float(y)!r}\n")

    @classmethod
    def from_csv(cls, path, noise_sd=None):
        with open(path) as fh:
            header = fh.readline().strip()
        if header.replace(" ", "") != "t,u,y":
            raise ValueError(f"{path}: expected header t,u,y, got {header!r}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            raise ValueError(f"{path}: no records")
        t = data[:, 0]
        if not np.array_equal(t, np.round(t)):
            raise ValueError(f"{path}: curve index t must be integral")
        t = t.astype(np.int64)
        n = int(t.max())
        counts = np.bincount(t, minlength=n + 1)[1:]
        if t.min() < 1 or np.any(counts != counts[0]):
            raise ValueError(f"{path}: every curve 1..n must have the same number of records")
        return cls(t, data[:, 1], data[:, 2], n=n, m=int(counts[0]), noise_sd=noise_sd)


def sparse_observe(path, m, noise_sd, seed):
    """Observe each state at ``m`` uniform random locations with Gaussian error.

    Draws come from ``make_rng(seed, OBSERVATION_STREAM)``, which is
    independent of the stream used to simulate the path.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    if not noise_sd >= 0:
        raise ValueError(f"noise_sd must be nonnegative, got {noise_sd!r}")
    m = int(m)
    x = _path_coords(path)
    n = x.shape[0]
    rng = make_rng(seed, OBSERVATION_STREAM)
    u = rng.uniform(0.0, 2 * math.pi, size=(n, m))
    eps = rng.standard_normal((n, m))
    b = design_matrix(path.basis, u.ravel()).reshape(n, m, -1)
    y = np.einsum("tmj,tj->tm", b, x) + noise_sd * eps
    t = np.repeat(np.arange(1, n + 1), m)
    return SparseDesign(t, u.ravel(), y.ravel(), n=n, m=m, noise_sd=float(noise_sd))


def _ridge_fit(b, y, ridge):
    """Per-curve ridge fits. Returns coefficients, smoother maps and residuals."""
    n, m, J = b.shape
    gram = np.einsum("tmj,tmk->tjk", b, b)
    gram += ridge * np.eye(J)
    chol = np.linalg.cholesky(gram)
    # S_t = (B'B + ridge I)^{-1} B'
    bt = np.swapaxes(b, 1, 2)
    smoother = np.linalg.solve(np.swapaxes(chol, 1, 2), np.linalg.solve(chol, bt))
    coef = np.einsum("tjm,tm->tj", smoother, y)
    resid = y - np.einsum("tmj,tj->tm", b, coef)
    return coef, smoother, resid


def _noise_variance(b, smoother, resid):
    # E||y - H y||^2 = sigma^2 (m - 2 tr H + tr H'H) when the fit is unbiased.
    hat = np.einsum("tmj,tjk->tmk", b, smoother)
    m = b.shape[1]
    dof = m - 2 * np.einsum("tmm->t", hat) + np.einsum("tmk,tmk->t", hat, hat)
    rss = np.einsum("tm,tm->t", resid, resid)
    usable = dof > 0.5
    if not np.any(usable):
        return None
    return float(rss[usable].sum() / dof[usable].sum())


def sparse_cov_estimate(design, basis, ridge=None):
    """Two-stage ridge-projection estimates of ``R0`` and ``R1``.

    Stage 1 fits each curve separately by ridge regression on the basis
    evaluations. Stage 2 averages outer products of the fitted coefficients;
    the lag-0 average is corrected by ``sigma2 * mean_t S_t S_t*``, where
    ``S_t`` is the per-curve smoother and ``sigma2`` the pooled residual
    variance. The correction is approximate when the ridge term biases the
    fits. ``R0`` is symmetrized but not projected onto the PSD cone.

    Parameters
    ----------
    design : SparseDesign
    basis : BasisSpec
    ridge : float, optional
        Ridge weight. Defaults to ``sigma2 * J / m`` when measurement noise is
        detected and ``1e-8`` otherwise.

    Returns
    -------
    CovPair
        ``meta`` records the regime, sample sizes, ridge, noise estimate and
        any warnings.
    """
    if ridge is not None and not ridge > 0:
        raise ValueError(f"ridge must be positive, got {ridge!r}")
    n, m, J = design.n, design.m, basis.dimension
    warnings = []
    b = design_matrix(basis, design.u).reshape(n, m, J)
    y = np.asarray(design.y).reshape(n, m)

    pilot_ridge = NOISELESS_RIDGE if ridge is None else ridge
    coef, smoother, resid = _ridge_fit(b, y, pilot_ridge)
    sigma2 = _noise_variance(b, smoother, resid)
    if sigma2 is None:
        if design.noise_sd is not None:
            sigma2 = design.noise_sd ** 2
            warnings.append("too few measurements per curve to estimate noise; using declared noise_sd")
        else:
            sigma2 = 0.0
            warnings.append("too few measurements per curve to estimate noise; no bias correction applied")
    noisy = sigma2 > 0 and (design.noise_sd is None or design.noise_sd > 0)
    if not noisy:
        sigma2 = 0.0
    if m < 2 and (design.noise_sd is None or design.noise_sd > 0):
        warnings.append("m < 2 with measurement noise: covariance estimates are unreliable")

    if ridge is None:
        ridge = max(sigma2 * J / m, NOISELESS_RIDGE) if noisy else NOISELESS_RIDGE
        if ridge != pilot_ridge:
            coef, smoother, resid = _ridge_fit(b, y, ridge)

    r0 = coef.T @ coef / n
    if sigma2 > 0:
        r0 = r0 - sigma2 * np.einsum("tjm,tkm->jk", smoother, smoother) / n
    r1 = coef[1:].T @ coef[:-1] / (n - 1) if n > 1 else np.zeros((J, J))
    if n < 2:
        warnings.append("a single curve gives no lag-1 information")
    meta = {
        "regime": "sparse",
        "n": n,
        "m": m,
        "ridge": float(ridge),
        "sigma2_hat": float(sigma2),
        "warnings": warnings,
    }
    return CovPair(HilbertOperator.symmetrized(r0, basis), HilbertOperator(r1, basis), meta)
