"""Float64 array helpers, a fixed-order matrix product and a seeded RNG.

Arrays are plain ``numpy.ndarray`` objects of dtype float64 in C order.
``matmul`` does not call BLAS: it runs an i-k-j triple loop compiled with
numba so that every output element is accumulated over k in increasing order,
which makes results bit-identical to a naive Python loop on any platform.
"""

import numba
import numpy as np

from .errors import DimensionError, RangeError

__all__ = ["as_tensor", "matmul", "Rng", "derive_seed"]


def as_tensor(x):
    """Return ``x`` as a C-contiguous float64 array (no copy when possible)."""
    return np.ascontiguousarray(x, dtype=np.float64)


@numba.njit(cache=True, nogil=True)
def _matmul_ikj(a, b, out):
    m, k = a.shape
    n = b.shape[1]
    for i in range(m):
        for j in range(n):
            out[i, j] = 0.0
        for p in range(k):
            aip = a[i, p]
            for j in range(n):
                out[i, j] += aip * b[p, j]


def matmul(a, b):
    """Matrix product of an (m, k) and a (k, n) array.

    >>> matmul([[1.0, 2.0]], [[3.0], [4.0]])
    array([[11.]])
    """
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    out = np.empty((a.shape[0], b.shape[1]), dtype=np.float64)
    _matmul_ikj(a, b, out)
    return out


_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed, *keys):
    """Deterministically mix integer keys into a 64-bit seed."""
    z = np.array([seed & _MASK], dtype=np.uint64)
    with np.errstate(over="ignore"):  # wraparound is the point
        for key in keys:
            z = _splitmix(z + _GOLDEN * np.array([key & _MASK], dtype=np.uint64))
    return int(z[0])


class Rng:
    """SplitMix64 generator run in counter mode.

    Output ``i`` (1-based) is ``mix(seed + i * 0x9E3779B97F4A7C15)``, with the
    standard SplitMix64 finaliser. Draws are therefore a pure function of
    ``(seed, position)`` and vectorise over numpy uint64 arithmetic.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK
        self.position = 0

    def __repr__(self):
        return f"Rng(seed={self.seed}, position={self.position})"

    def next_u64(self, n):
        n = int(n)
        idx = np.arange(self.position + 1, self.position + n + 1, dtype=np.uint64)
        self.position += n
        return _splitmix(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, lo, hi, n):
        """``n`` float64 draws from [lo, hi)."""
        if not lo < hi:
            raise RangeError(f"empty range [{lo}, {hi})")
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        out = lo + (hi - lo) * u
        # lo + (hi - lo) * u can round up to hi
        return np.minimum(out, np.nextafter(hi, lo))

    def permutation(self, n):
        return np.argsort(self.next_u64(n), kind="stable")
