"""ARH(1) laws: stationarity, exact autocovariances and Gaussian simulation."""
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from funcar import kernels
from funcar.errors import BasisMismatchError, NumericalError
from funcar.hilbert import BasisSpec, HilbertOperator, compose

__all__ = [
    "Stationarity",
    "ArhModel",
    "SamplePath",
    "check_stationarity",
    "stationary_cov",
    "lag_cov",
    "simulate",
    "make_rng",
    "PATH_STREAM",
    "OBSERVATION_STREAM",
]

STATIONARITY_MARGIN = 1e-8
_PSD_TOL = 1e-12
_STEIN_RESIDUAL_TOL = 1e-10

# Independent random streams derived from one integer seed.
PATH_STREAM = 0
OBSERVATION_STREAM = 1


def make_rng(seed, stream=PATH_STREAM):
    """Philox (counter-based) generator keyed by ``(seed, stream)``.

    Philox4x64 is platform independent, so a given ``(seed, stream)`` pair
    yields the same draws everywhere.
    """
    if int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


class Stationarity(NamedTuple):
    stationary: bool
    spectral_radius: float


def check_stationarity(rho):
    """Spectral-radius test ``r(rho) < 1 - 1e-8``.

    In finite dimension this is equivalent to summability of
    ``||rho^j||_inf^2`` by Gelfand's formula.
    """
    a = rho.coords if isinstance(rho, HilbertOperator) else np.asarray(rho, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"rho must be square, got shape {a.shape}")
    radius = float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0
    return Stationarity(radius < 1.0 - STATIONARITY_MARGIN, radius)


def _psd_sqrt(a):
    vals, vecs = np.linalg.eigh(a)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


@dataclass(frozen=True, eq=False)
class ArhModel:
    """The law of ``X_t = rho(X_{t-1}) + eps_t`` with ``eps_t ~ N(0, noise_cov)``.

    ``noise_cov`` is symmetrized; eigenvalues in ``[-1e-12 * scale, 0)`` are
    clipped to zero and anything more negative is rejected.
    """

    basis: BasisSpec
    rho: HilbertOperator
    noise_cov: HilbertOperator

    def __post_init__(self):
        if self.rho.basis != self.basis or self.noise_cov.basis != self.basis:
            raise BasisMismatchError("rho and noise_cov must live on the model basis")
        s = 0.5 * (self.noise_cov.coords + self.noise_cov.coords.T)
        vals, vecs = np.linalg.eigh(s)
        scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
        if vals.size and vals.min() < -_PSD_TOL * scale:
            raise ValueError(f"noise covariance is not nonnegative definite (min eigenvalue {vals.min():.3e})")
        if vals.size and vals.min() < 0:
            s = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        object.__setattr__(self, "noise_cov", HilbertOperator.symmetrized(s, self.basis))
        st = check_stationarity(self.rho)
        if not st.stationary:
            raise ValueError(f"rho is not stationary: spectral radius {st.spectral_radius:.6g} >= 1")

    @classmethod
    def from_covariance(cls, r0, rho):
        """Model whose stationary covariance is ``r0``.

        The noise covariance is ``r0 - rho r0 rho*``, which must be
        nonnegative definite.
        """
        basis = r0.basis
        a = np.asarray(rho.coords)
        noise = r0.coords - a @ r0.coords @ a.T
        return cls(basis, rho, HilbertOperator.symmetrized(noise, basis))

    @classmethod
    def diagonal(cls, basis, lambdas, mus, rotation=None):
        """Model with ``R0`` and ``rho`` simultaneously diagonal.

        ``lambdas`` are the eigenvalues of the stationary covariance and
        ``mus`` those of ``rho``. An orthogonal ``rotation`` Q replaces the
        coordinate eigenbasis by the columns of Q.
        """
        lam = np.asarray(lambdas, dtype=float)
        mu = np.asarray(mus, dtype=float)
        J = basis.dimension
        if lam.shape != (J,) or mu.shape != (J,):
            raise ValueError(f"need {J} eigenvalues for both R0 and rho")
        if np.any(lam < 0):
            raise ValueError("covariance eigenvalues must be nonnegative")
        if np.any(np.abs(mu) >= 1):
            raise ValueError("rho eigenvalues must lie strictly inside (-1, 1)")
        q = np.eye(J) if rotation is None else np.asarray(rotation, dtype=float)
        if q.shape != (J, J) or not np.allclose(q.T @ q, np.eye(J), atol=1e-10):
            raise ValueError("rotation must be an orthogonal JxJ matrix")
        rho = HilbertOperator.symmetrized((q * mu) @ q.T, basis)
        noise = HilbertOperator.symmetrized((q * (lam * (1.0 - mu ** 2))) @ q.T, basis)
        return cls(basis, rho, noise)

    @cached_property
    def r0(self):
        return _solve_stein(self)

    @cached_property
    def noise_sqrt(self):
        return _psd_sqrt(self.noise_cov.coords)

    @cached_property
    def r0_sqrt(self):
        return _psd_sqrt(self.r0.coords)


def _solve_stein(model):
    # vec(R0) = (I - rho (x) rho)^{-1} vec(Sigma); row-major vec makes the
    # Kronecker factor kron(rho, rho).
    rho = model.rho.coords
    sigma = model.noise_cov.coords
    J = rho.shape[0]
    system = np.eye(J * J) - np.kron(rho, rho)
    try:
        vec = np.linalg.solve(system, sigma.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Stein equation solve failed: {exc}") from exc
    r0 = vec.reshape(J, J)
    r0 = 0.5 * (r0 + r0.T)
    resid = np.linalg.norm(r0 - rho @ r0 @ rho.T - sigma)
    scale = np.linalg.norm(r0)
    if resid > _STEIN_RESIDUAL_TOL * max(scale, 1e-300) and resid > 1e-300:
        raise NumericalError(f"Stein residual {resid:.3e} exceeds tolerance (|R0|_2 = {scale:.3e})")
    return HilbertOperator(r0, model.basis, self_adjoint=True)


def stationary_cov(model):
    """The stationary covariance ``R0`` solving ``R0 = rho R0 rho* + Sigma``."""
    return model.r0


def lag_cov(model, h):
    """Lag-h autocovariance ``rho^h R0``; use the adjoint for negative lags."""
    if int(h) != h or h < 0:
        raise ValueError(f"lag must be a nonnegative integer, got {h!r}")
    out = model.r0
    for _ in range(int(h)):
        out = compose(model.rho, out)
    return out


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A finite stretch ``X_1, ..., X_n``; row t holds the coordinates of ``X_{t+1}``."""

    coords: np.ndarray
    basis: BasisSpec
    model_seed: Optional[int] = None
    burn_in: int = 0

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64, copy=True)
        if c.ndim != 2 or c.shape[1] != self.basis.dimension:
            raise ValueError(f"path must have shape (n, {self.basis.dimension}), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("path coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self):
        return self.coords.shape[0]

    def to_csv(self, path):
        """Write columns ``t, coord_1, ..., coord_J`` with ``t`` starting at 1."""
        J = self.basis.dimension
        header = ",".join(["t"] + [f"coord_{k}" for k in range(1, J + 1)])
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            for t, row in enumerate(self.coords, start=1):
                fh.write(",".join([str(t)] + [repr(float(x)) for x in row]) + "\n")

    @classmethod
    def from_csv(cls, path, basis=None):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        J = len(header) - 1
        expected = ["t"] + [f"coord_{k}" for k in range(1, J + 1)]
        if J < 1 or header != expected:
            raise ValueError(f"{path}: expected header t,coord_1..coord_J, got {','.join(header)}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if basis is None:
            basis = BasisSpec(J)
        elif basis.dimension != J:
            raise BasisMismatchError(f"{path}: file has {J} coordinates, basis has {basis.dimension}")
        if data.size == 0:
            raise ValueError(f"{path}: no rows")
        if not np.array_equal(data[:, 0], np.arange(1, data.shape[0] + 1)):
            raise ValueError(f"{path}: column t must run 1..n in order")
        return cls(data[:, 1:], basis)


def simulate(model, n, burn_in=0, seed=0, x0=None):
    """Simulate ``n`` consecutive states of the stationary process.

    The initial state is drawn exactly from ``N(0, R0)`` (or taken from
    ``x0``), then the recursion is run for ``burn_in + n - 1`` steps and the
    first ``burn_in`` states are dropped. Draws come from
    ``make_rng(seed, PATH_STREAM)``.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    if int(burn_in) != burn_in or burn_in < 0:
        raise ValueError(f"burn_in must be a nonnegative integer, got {burn_in!r}")
    n, burn_in = int(n), int(burn_in)
    J = model.basis.dimension
    rng = make_rng(seed, PATH_STREAM)
    z0 = rng.standard_normal(J)
    z = rng.standard_normal((burn_in + n - 1, J))
    if x0 is None:
        start = model.r0_sqrt @ z0
    else:
        start = np.asarray(x0, dtype=float)
        if start.shape != (J,):
            raise ValueError(f"x0 must have {J} coordinates")
    innovations = z @ model.noise_sqrt.T
    states = kernels.ar_recursion(
        np.ascontiguousarray(model.rho.coords), np.ascontiguousarray(start), np.ascontiguousarray(innovations)
    )
    return SamplePath(states[burn_in:], model.basis, model_seed=int(seed), burn_in=burn_in)
