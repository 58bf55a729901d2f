"""Numerical kernels: normal CDF and quantile, beta quantile, seeded streams.

Everything here is pure. Functions accept python floats or numpy arrays and
return the same kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_UINT64_MAX = (1 << 64) - 1

# Rational approximation coefficients for the lower-tail initial guess
# (Acklam's central and tail fits, relative error about 1e-9).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _is_scalar(value) -> bool:
    return np.ndim(value) == 0


def std_normal_cdf(x):
    """Standard normal CDF computed through the complementary error function.

    ``erfc`` keeps full relative precision in the lower tail, so the upper
    tail is evaluated as ``1 - Phi(-x)`` only implicitly through symmetry of
    the argument.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("std_normal_cdf needs finite input")
    if _is_scalar(x):
        return 0.5 * math.erfc(-float(x) / _SQRT2)
    return 0.5 * special.erfc(-arr / _SQRT2)


def _initial_lower_tail(p: np.ndarray) -> np.ndarray:
    """Rational guess for the quantile when ``p <= 0.5``."""
    out = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[tail] = num / den
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        out[mid] = num / den
    return out


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1).

    Solves in the lower tail (``1 - p`` is exact for ``p >= 0.5``) and
    polishes the rational guess with two Halley steps.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("std_normal_quantile needs p strictly inside (0, 1)")
    flat = np.atleast_1d(arr).ravel()
    upper = flat > 0.5
    lower_p = np.where(upper, 1.0 - flat, flat)
    x = _initial_lower_tail(lower_p)
    for _ in range(2):
        err = 0.5 * special.erfc(-x / _SQRT2) - lower_p
        u = err * _SQRT2PI * np.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    x = np.where(upper, -x, x)
    x[flat == 0.5] = 0.0
    if _is_scalar(p):
        return float(x[0])
    return x.reshape(arr.shape)


def beta_quantile(a: float, b: float, p: float) -> float:
    """Return ``x`` with regularized incomplete beta ``I_x(a, b) = p``."""
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"beta shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"beta_quantile needs p in [0, 1], got {p}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return float(special.betaincinv(a, b, p))


@dataclass(frozen=True)
class RngStream:
    """Immutable token naming one counter-based random lane.

    The value at draw index ``i`` depends only on ``(seed, stream_id, i)``,
    so any slice of a stream can be regenerated without replaying the rest.
    Backed by the Philox-4x64 counter generator.
    """

    seed: int
    stream_id: int

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _UINT64_MAX:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def raw(self, n: int, start: int = 0) -> np.ndarray:
        """Raw 64-bit words at draw indices ``start .. start + n - 1``."""
        if n < 0 or start < 0:
            raise DomainError("draw count and start index must be nonnegative")
        # Philox emits four words per counter increment.
        block, offset = divmod(int(start), 4)
        key = int(self.seed) | (int(self.stream_id) << 64)
        gen = np.random.Philox(key=key, counter=[block, 0, 0, 0])
        return gen.random_raw(offset + int(n))[offset:]

    def uniform01(self, n: int, start: int = 0) -> np.ndarray:
        """Uniform draws on the open interval (0, 1) with 53-bit resolution."""
        words = self.raw(n, start) >> np.uint64(11)
        return (words.astype(np.float64) + 0.5) * 2.0 ** -53

    def standard_normal(self, n: int, start: int = 0) -> np.ndarray:
        """Standard normal draws by inversion of the uniform lane."""
        if n == 0:
            return np.empty(0)
        return std_normal_quantile(self.uniform01(n, start))


def draw(stream: RngStream, law: str, index: int = 0) -> float:
    """Single value of ``stream`` at ``index`` under ``law``."""
    if law == "uniform01":
        return float(stream.uniform01(1, index)[0])
    if law == "standard_normal":
        return float(stream.standard_normal(1, index)[0])
    raise DomainError(f"unknown law {law!r}")
