"""Coordinate model of the Sobolev space of periodic functions on [0, 2*pi].

Every element and operator is stored through its coordinates with respect to
the orthonormal basis ``psi_k = phi_k / sqrt(w_k)`` of ``H_r``, where
``phi_k`` is the L2 Fourier basis and ``w_k = (1 + f(k)**2)**r`` with
``f(k)`` the frequency of the k-th function. In these coordinates the
Hilbert norm is Euclidean and Schatten norms are singular-value norms of the
coordinate matrix.
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from funcar import kernels
from funcar.errors import BasisMismatchError, NumericalError

__all__ = [
    "BasisSpec",
    "HilbertVector",
    "HilbertOperator",
    "tensor_product",
    "schatten_norm",
    "pseudo_inverse",
    "compose",
    "adjoint",
    "apply",
    "basis_eval",
    "design_matrix",
    "DEFAULT_PINV_TOL",
]

DEFAULT_PINV_TOL = 1e-10
_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """Truncated Fourier basis of ``H_r([0, 2*pi])``.

    Parameters
    ----------
    dimension : int
        Number of retained basis functions ``J``.
    sobolev_order : float
        Sobolev order ``r >= 0``; ``r = 0`` gives plain L2.
    kind : str
        Only ``"fourier_circle"`` is supported.
    """

    dimension: int = 30
    sobolev_order: float = 0.0
    kind: str = "fourier_circle"

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if not (self.sobolev_order >= 0 and math.isfinite(self.sobolev_order)):
            raise ValueError(f"sobolev_order must be a finite nonnegative real, got {self.sobolev_order!r}")
        object.__setattr__(self, "sobolev_order", float(self.sobolev_order))
        if self.kind != "fourier_circle":
            raise ValueError(f"unsupported basis kind {self.kind!r}")

    @property
    def frequencies(self):
        """Frequency of each basis index: 0, 1, 1, 2, 2, ..."""
        return (np.arange(self.dimension) + 1) // 2

    @cached_property
    def weights(self):
        w = (1.0 + self.frequencies.astype(float) ** 2) ** self.sobolev_order
        w.setflags(write=False)
        return w

    def identity(self):
        return HilbertOperator(np.eye(self.dimension), self, self_adjoint=True)

    def zeros(self):
        return HilbertOperator(np.zeros((self.dimension, self.dimension)), self, self_adjoint=True)

    def unit(self, k):
        """The k-th coordinate vector (1-based)."""
        _check_index(self, k)
        c = np.zeros(self.dimension)
        c[k - 1] = 1.0
        return HilbertVector(c, self)


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    arr.setflags(write=False)
    return arr


def _same_basis(*objs):
    first = objs[0].basis
    for o in objs[1:]:
        if o.basis != first:
            raise BasisMismatchError(f"basis mismatch: {first} vs {o.basis}")
    return first


@dataclass(frozen=True, eq=False)
class HilbertVector:
    """An element of the truncated Hilbert space, stored by its coordinates."""

    coords: np.ndarray
    basis: BasisSpec

    def __post_init__(self):
        c = _frozen(self.coords, 1)
        if c.shape[0] != self.basis.dimension:
            raise ValueError(f"expected {self.basis.dimension} coordinates, got {c.shape[0]}")
        object.__setattr__(self, "coords", c)

    def norm(self):
        return float(np.linalg.norm(self.coords))

    def inner(self, other):
        _same_basis(self, other)
        return float(self.coords @ other.coords)

    def __call__(self, u):
        """Evaluate the function at points ``u`` in [0, 2*pi]."""
        return design_matrix(self.basis, np.atleast_1d(u)) @ self.coords


@dataclass(frozen=True, eq=False)
class HilbertOperator:
    """A bounded operator acting on basis coordinates.

    ``coords[i, j]`` is ``<psi_i, T psi_j>``. When ``self_adjoint`` is set the
    matrix must be symmetric to within ``1e-12`` (relative to its largest
    entry, floor 1); the stored matrix is then exactly symmetrized.
    """

    coords: np.ndarray
    basis: BasisSpec
    self_adjoint: bool = False

    def __post_init__(self):
        c = _frozen(self.coords, 2)
        J = self.basis.dimension
        if c.shape != (J, J):
            raise ValueError(f"expected a {J}x{J} matrix, got shape {c.shape}")
        if self.self_adjoint:
            scale = max(1.0, float(np.max(np.abs(c))))
            if np.max(np.abs(c - c.T)) > _SYMMETRY_TOL * scale:
                raise ValueError("operator flagged self-adjoint but its matrix is not symmetric")
            c = 0.5 * (c + c.T)
            c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def symmetrized(cls, a, basis):
        """Build the self-adjoint operator ``(A + A*) / 2``."""
        a = np.asarray(a, dtype=np.float64)
        return cls(0.5 * (a + a.T), basis, self_adjoint=True)

    @property
    def T(self):
        return adjoint(self)

    def __matmul__(self, other):
        if isinstance(other, HilbertOperator):
            return compose(self, other)
        if isinstance(other, HilbertVector):
            return apply(self, other)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, HilbertOperator):
            return NotImplemented
        basis = _same_basis(self, other)
        return HilbertOperator(self.coords + other.coords, basis,
                               self_adjoint=self.self_adjoint and other.self_adjoint)

    def __sub__(self, other):
        if not isinstance(other, HilbertOperator):
            return NotImplemented
        basis = _same_basis(self, other)
        return HilbertOperator(self.coords - other.coords, basis,
                               self_adjoint=self.self_adjoint and other.self_adjoint)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return HilbertOperator(float(scalar) * self.coords, self.basis, self_adjoint=self.self_adjoint)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def norm(self, p=2):
        return schatten_norm(self, p)


def tensor_product(u, v):
    """The rank-one operator ``f -> u <f, v>``."""
    basis = _same_basis(u, v)
    return HilbertOperator(np.outer(u.coords, v.coords), basis)


def schatten_norm(T, p=2):
    """Schatten p-norm of ``T``; ``p = math.inf`` gives the operator norm.

    ``p = 2`` uses the Frobenius norm of the coordinate matrix; other values go
    through a full singular value decomposition.
    """
    p = float(p)
    if not p >= 1:
        raise ValueError(f"Schatten index must satisfy p >= 1, got {p}")
    a = T.coords if isinstance(T, HilbertOperator) else np.asarray(T, dtype=np.float64)
    if p == 2:
        return float(np.linalg.norm(a, "fro"))
    s = np.linalg.svd(a, compute_uv=False)
    if math.isinf(p):
        return float(s[0]) if s.size else 0.0
    if p == 1:
        return float(s.sum())
    return float(np.sum(s ** p) ** (1.0 / p))


def pseudo_inverse(T, tol=DEFAULT_PINV_TOL):
    """Moore-Penrose inverse, discarding singular values below ``tol * s_max``."""
    a = T.coords
    u, s, vt = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    keep = s > tol * smax
    inv_s = np.zeros_like(s)
    with np.errstate(over="ignore", invalid="ignore"):
        inv_s[keep] = 1.0 / s[keep]
        out = (vt.T * inv_s) @ u.T
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"pseudo-inverse overflows: smallest kept singular value {s[keep].min():.3e}")
    if T.self_adjoint:
        return HilbertOperator.symmetrized(out, T.basis)
    return HilbertOperator(out, T.basis)


def compose(A, B):
    """The product ``A B`` (apply ``B`` first)."""
    basis = _same_basis(A, B)
    return HilbertOperator(A.coords @ B.coords, basis)


def adjoint(A):
    return HilbertOperator(A.coords.T, A.basis, self_adjoint=A.self_adjoint)


def apply(A, f):
    basis = _same_basis(A, f)
    return HilbertVector(A.coords @ f.coords, basis)


def _check_index(basis, k):
    if int(k) != k or not 1 <= k <= basis.dimension:
        raise ValueError(f"basis index must be in 1..{basis.dimension}, got {k!r}")


def basis_eval(basis, k, u):
    """Value of the k-th (1-based) orthonormal basis function at ``u``."""
    _check_index(basis, k)
    if not 0.0 <= u <= 2 * math.pi:
        raise ValueError(f"evaluation point must lie in [0, 2*pi], got {u!r}")
    k = int(k)
    m = k // 2
    if k == 1:
        phi = 1.0 / math.sqrt(2 * math.pi)
    elif k % 2 == 0:
        phi = math.cos(m * u) / math.sqrt(math.pi)
    else:
        phi = math.sin(m * u) / math.sqrt(math.pi)
    return phi / math.sqrt(basis.weights[k - 1])


def design_matrix(basis, u):
    """Matrix ``B[i, k] = psi_k(u_i)`` for a 1-d array of points ``u``."""
    u = np.ascontiguousarray(u, dtype=np.float64).ravel()
    return kernels.fourier_design(u, basis.dimension, np.ascontiguousarray(basis.weights))
