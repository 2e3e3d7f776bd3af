"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, counter)`` so a realization
can be replayed from its seed alone and is independent of the order in which
edges or cells are visited. The mixing function is SplitMix64, evaluated
vectorised over numpy ``uint64`` arrays.
"""

import numpy as np
from scipy.special import ndtr, ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _key(seed, salt):
    # fold seed and a per-purpose salt into one 64-bit key
    k = np.uint64((int(seed) * 0x9E3779B97F4A7C15 + int(salt)) & _MASK64)
    with np.errstate(over="ignore"):
        return _mix(k + _GOLDEN)


def uint64(seed, salt, stream, counter=0):
    """Raw 64-bit draws for each entry of ``stream`` (array of ints)."""
    stream = np.asarray(stream, dtype=np.uint64)
    key = _key(seed, salt)
    with np.errstate(over="ignore"):
        z = key ^ _mix(stream * _GOLDEN + np.uint64(counter) + np.uint64(1))
        return _mix(z + _GOLDEN)


def uniform(seed, salt, stream, counter=0):
    """Uniform draws in the open interval (0, 1)."""
    bits = uint64(seed, salt, stream, counter) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) / 9007199254740992.0


def normal(seed, salt, stream, counter=0):
    """Standard normal draws by inverse-CDF transform."""
    return ndtri(uniform(seed, salt, stream, counter))


def truncated_normal(seed, salt, stream, bound=4.0, counter=0):
    """Standard normal draws truncated at +-bound (inverse CDF on the clipped range)."""
    u = uniform(seed, salt, stream, counter)
    lo = ndtr(-bound)
    return ndtri(lo + u * (1.0 - 2.0 * lo))
