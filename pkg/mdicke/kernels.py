"""Overlaps between displaced number states.

The displaced-Fock basis attached to magnetic index ``m`` is built on
``A_m = a + g_m``; its number states are ``D(-g_m)|k>``. Any overlap between
two such bases reduces to a matrix element of a real displacement operator,
``<l|D(delta)|k>`` with ``delta = g_n - g_n'``.
"""

from functools import lru_cache
from math import log
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import KernelOverflowError


def _diagonal_start(x: float, offsets: np.ndarray) -> np.ndarray:
    """``|<a|D|0>| = exp(-x/2) x^(a/2) / sqrt(a!)`` for every offset a, in log form."""
    if x == 0.0:
        return (offsets == 0).astype(float)
    log_mag = -0.5 * x + 0.5 * offsets * log(x) - 0.5 * gammaln(offsets + 1.0)
    return np.exp(log_mag)


@lru_cache(maxsize=64)
def _displacement_cached(delta: float, rows: int, cols: int) -> np.ndarray:
    size = max(rows, cols)
    x = delta * delta
    offsets = np.arange(size, dtype=float)

    # Along the diagonal l - k = a the magnitude is
    #   f_k = sqrt(k!/(k+a)!) exp(-x/2) x^(a/2) L_k^(a)(x),
    # advanced by the Laguerre three-term recurrence in normalized form.
    lower = np.zeros((size, size))
    prev = np.zeros(size)
    cur = _diagonal_start(x, offsets)
    for k in range(size):
        a = offsets[: size - k]
        lower[k + a.astype(int), k] = cur[: size - k]
        if k == size - 1:
            break
        nxt = ((2.0 * k + 1.0 + a - x) * cur[: size - k] - np.sqrt(k * (k + a)) * prev[: size - k])
        nxt /= np.sqrt((k + 1.0) * (k + a + 1.0))
        prev, cur = cur[: size - k - 1], nxt[: size - k - 1]

    if not np.all(np.isfinite(lower)):
        raise KernelOverflowError(
            f"Non-finite displacement matrix elements for delta={delta}, size={size}"
        )

    # <l|D|k> = sign(delta)^(l-k) f below the diagonal, (-sign(delta))^(k-l) f above it.
    l_idx, k_idx = np.indices((size, size))
    gap = np.abs(l_idx - k_idx)
    base = np.sign(delta) if delta != 0.0 else 1.0
    below = np.where(gap % 2 == 1, base, 1.0)
    matrix = np.where(l_idx >= k_idx, below * lower, below * np.where(gap % 2 == 1, -1.0, 1.0) * lower.T)

    result = np.ascontiguousarray(matrix[:rows, :cols])
    result.setflags(write=False)
    return result


def displacement_matrix(delta: float, rows: int, cols: Optional[int] = None) -> np.ndarray:
    """Return the read-only block ``<l|D(delta)|k>``, 0 <= l < rows, 0 <= k < cols."""
    if rows < 1:
        raise ValueError("rows must be >= 1")
    if cols is None:
        cols = rows
    if cols < 1:
        raise ValueError("cols must be >= 1")
    if not np.isfinite(delta):
        raise ValueError(f"displacement must be finite, got {delta}")
    return _displacement_cached(float(delta), int(rows), int(cols))


def displaced_overlap_kernel(G: float, size: int) -> np.ndarray:
    """Kernel ``D_{l,k}(G)`` of the displaced-basis matrix elements.

    ``D_{l,k}(G) = e^{-G^2/2} sum_r (-1)^r sqrt(l! k!) G^{l+k-2r} / ((l-r)!(k-r)! r!)``
    which equals ``(-1)^k <l|D(G)|k>``. It is symmetric in (l, k) and every
    entry is bounded by one in magnitude.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    signs = np.where(np.arange(size) % 2 == 1, -1.0, 1.0)
    kernel = displacement_matrix(G, size) * signs[np.newaxis, :]
    if not np.all(np.isfinite(kernel)):
        raise KernelOverflowError(f"Non-finite kernel entries for G={G}, size={size}")
    return kernel
