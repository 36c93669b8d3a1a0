"""Pure numpy fallbacks for the compiled kernels in ``_ckernels.pyx``."""
import math

import numpy as np


def ar_recursion(rho, x0, innovations):
    """Iterate ``x[t+1] = rho @ x[t] + innovations[t]`` starting from ``x0``.

    Returns an array of shape ``(len(innovations) + 1, J)`` whose first row
    is ``x0``.
    """
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    innovations = np.ascontiguousarray(innovations, dtype=np.float64)
    J = rho.shape[0]
    T = innovations.shape[0]
    if rho.shape[1] != J or x0.shape[0] != J or (T > 0 and innovations.shape[1] != J):
        raise ValueError("shape mismatch between rho, x0 and innovations")
    out = np.empty((T + 1, J))
    out[0] = x0
    for t in range(T):
        out[t + 1] = rho @ out[t] + innovations[t]
    return out


def fourier_design(u, dimension, weights):
    """Evaluate the first ``dimension`` weighted Fourier functions at ``u``."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.shape[0] != dimension:
        raise ValueError("weights must have one entry per basis function")
    k = np.arange(dimension)
    freq = (k + 1) // 2
    phase = np.multiply.outer(u, freq.astype(np.float64))
    out = np.where(k % 2 == 1, np.cos(phase), np.sin(phase))
    out[:, 0] = 1.0
    scale = 1.0 / np.sqrt(math.pi * weights)
    scale[0] = 1.0 / math.sqrt(2.0 * math.pi * weights[0])
    return out * scale
