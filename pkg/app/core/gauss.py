"""
Gaussian sampling and norm kernels shared by every experiment.

Randomness comes from counter-based Philox streams keyed by
(seed, stream_id); the output is a pure function of (seed, stream_id,
counter), so any chunk of any experiment can be regenerated in isolation.
Normals are produced by the inverse-CDF transform of 53-bit uniforms.
"""

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import DomainError, UndefinedValueError, require
from app.core.specfun import std_normal_inv_cdf

MASK64 = (1 << 64) - 1
_HALF_RANGE = 1 << 52
_TOP_53 = (1 << 53) - 1
_TWO_M53 = 2.0 ** -53
_TWO_M52 = 2.0 ** -52
_WORDS_PER_BLOCK = 4


@dataclass(frozen=True)
class PExponent:
    """
    Norm index p in [1, infinity].

    Attributes:
        value: The exponent; ``math.inf`` selects the maximum norm
    """

    value: float

    def __post_init__(self):
        if math.isnan(self.value) or self.value < 1:
            raise DomainError(f"p must satisfy 1 <= p <= inf, got {self.value}")

    @classmethod
    def parse(cls, raw: Union[str, float, int, "PExponent"]) -> "PExponent":
        """Build an exponent from a number or from the strings 'inf'/'infinity'."""
        if isinstance(raw, PExponent):
            return raw
        if isinstance(raw, str):
            text = raw.strip().lower()
            if text in ("inf", "infinity", "+inf"):
                return cls(math.inf)
            try:
                return cls(float(text))
            except ValueError as exc:
                raise DomainError(f"cannot parse p from {raw!r}") from exc
        return cls(float(raw))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return "inf" if self.is_infinite else format(self.value, "g")


def as_exponent(p: Union[str, float, int, PExponent]) -> float:
    """Validate ``p`` and return it as a float (``math.inf`` for infinity)."""
    return PExponent.parse(p).value


def derive_stream_id(*parts: object) -> int:
    """
    Hash an experiment label and task indices into a 64-bit stream id.

    Args:
        *parts: Labels and integers identifying the task

    Returns:
        int: Stream id in [0, 2^64)
    """
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """
    Counter-addressable random stream.

    The counter counts 64-bit words already consumed. Reconstructing a
    stream with the same (seed, stream_id, counter) replays the same words.
    """

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0):
        require(counter >= 0, "stream counter must be non-negative")
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self.counter = int(counter)

    @classmethod
    def for_task(cls, seed: int, *parts: object) -> "RngStream":
        """Stream for the task identified by ``parts`` (e.g. experiment id and chunk index)."""
        return cls(seed, derive_stream_id(*parts))

    def substream(self, *parts: object) -> "RngStream":
        """Independent stream derived from this one's id and ``parts``."""
        return RngStream(self.seed, derive_stream_id(self.stream_id, *parts))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def raw(self, size: int) -> np.ndarray:
        """Return the next ``size`` 64-bit words and advance the counter."""
        block, offset = divmod(self.counter, _WORDS_PER_BLOCK)
        bitgen = np.random.Philox(
            counter=block,
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
        )
        words = bitgen.random_raw(offset + size)[offset:]
        self.counter += size
        return np.asarray(words, dtype=np.uint64)

    def uniform(self, size: int) -> np.ndarray:
        """Uniforms on the open interval (0, 1) from the top 52 bits."""
        bits = (self.raw(size) >> np.uint64(12)).astype(np.float64)
        return (bits + 0.5) * _TWO_M52

    def normal(self, shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
        """
        Standard normal variates of the given shape.

        The 53-bit integer k gives u = (k + 1/2) 2^-53. The lower half is
        inverted directly; the upper half uses the exact complement so
        that u is never rounded to 1.
        """
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        size = int(np.prod(shape, dtype=np.int64))
        if size == 0:
            return np.empty(shape)
        k = self.raw(size) >> np.uint64(11)
        upper = k > np.uint64(_HALF_RANGE - 1)
        mirrored = np.where(upper, np.uint64(_TOP_53) - k, k)
        q = (mirrored.astype(np.float64) + 0.5) * _TWO_M53
        z = std_normal_inv_cdf(q)
        return np.where(upper, -z, z).reshape(shape)


def sample_gaussian_vector(stream: RngStream, n: int) -> np.ndarray:
    """
    Draw X ~ N(0, I_n).

    Args:
        stream: Source of randomness, advanced by n words
        n: Dimension

    Returns:
        np.ndarray: Vector of n i.i.d. standard normal coordinates

    Raises:
        DomainError: If n < 1
    """
    require(n >= 1, f"sample_gaussian_vector requires n >= 1, got {n}")
    return stream.normal(n)


def sample_gaussian_rows(stream: RngStream, rows: int, n: int) -> np.ndarray:
    """Draw ``rows`` independent Gaussian vectors of dimension n as a (rows, n) array."""
    require(n >= 1, f"sample_gaussian_rows requires n >= 1, got {n}")
    require(rows >= 0, f"row count must be non-negative, got {rows}")
    return stream.normal((rows, n))


def lp_norms(x: np.ndarray, p: Union[float, PExponent], axis: int = -1) -> np.ndarray:
    """
    Stable l_p norms along ``axis``.

    For finite p the norm is m * (sum (|x_i|/m)^p)^(1/p) with m = max |x_i|,
    which equals m * (sum exp(p (ln|x_i| - ln m)))^(1/p) with zeros skipped.
    Rows of zeros give 0.
    """
    p = as_exponent(p)
    a = np.abs(np.asarray(x, dtype=np.float64))
    if a.shape[axis] == 0:
        return np.zeros(np.delete(a.shape, axis if axis >= 0 else a.ndim + axis))
    m = np.max(a, axis=axis, keepdims=True)
    if math.isinf(p):
        return np.squeeze(m, axis=axis)
    safe_m = np.where(m > 0, m, 1.0)
    scaled = a / safe_m
    if p == 1.0:
        total = np.sum(scaled, axis=axis, keepdims=True)
    elif p == 2.0:
        total = np.sqrt(np.sum(scaled * scaled, axis=axis, keepdims=True))
        return np.squeeze(np.where(m > 0, m * total, 0.0), axis=axis)
    else:
        total = np.sum(np.power(scaled, p), axis=axis, keepdims=True)
    norms = np.where(m > 0, m * np.power(total, 1.0 / p), 0.0)
    return np.squeeze(norms, axis=axis)


def lp_norm(x: Iterable[float], p: Union[float, PExponent]) -> float:
    """
    l_p norm of a single vector; empty vectors have norm 0.

    Args:
        x: Real vector
        p: Exponent in [1, inf]

    Returns:
        float: ||x||_p
    """
    arr = np.asarray(list(x) if not isinstance(x, np.ndarray) else x, dtype=np.float64).ravel()
    if arr.size == 0:
        return 0.0
    return float(lp_norms(arr, p))


def sorted_abs_desc(x: np.ndarray) -> np.ndarray:
    """Non-increasing rearrangement of |x| along the last axis."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    return -np.sort(-a, axis=-1)


@dataclass
class MomentAccumulator:
    """
    Streaming count, mean and central moment sums M2, M3, M4.

    Accumulators built on separate chunks combine with ``merge`` using the
    pairwise update formulas; merging in a fixed order makes the result
    independent of how chunks were scheduled.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_values(cls, values: np.ndarray) -> "MomentAccumulator":
        """Two-pass batch statistics of ``values``."""
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size == 0:
            return cls()
        mean = float(np.mean(v))
        d = v - mean
        d2 = d * d
        return cls(
            count=int(v.size),
            mean=mean,
            m2=float(np.sum(d2)),
            m3=float(np.sum(d2 * d)),
            m4=float(np.sum(d2 * d2)),
        )

    def copy(self) -> "MomentAccumulator":
        return MomentAccumulator(self.count, self.mean, self.m2, self.m3, self.m4)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """
        Combine two accumulators into a new one.

        Args:
            other: Statistics of a disjoint sample

        Returns:
            MomentAccumulator: Statistics of the union
        """
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        na, nb = float(self.count), float(other.count)
        n = na + nb
        delta = other.mean - self.mean
        delta_n = delta / n
        delta_n2 = delta_n * delta_n
        term = delta * delta_n * na * nb
        mean = self.mean + delta_n * nb
        m2 = self.m2 + other.m2 + term
        m3 = (self.m3 + other.m3 + term * delta_n * (na - nb)
              + 3.0 * delta_n * (na * other.m2 - nb * self.m2))
        m4 = (self.m4 + other.m4 + term * delta_n2 * (na * na - na * nb + nb * nb)
              + 6.0 * delta_n2 * (na * na * other.m2 + nb * nb * self.m2)
              + 4.0 * delta_n * (na * other.m3 - nb * self.m3))
        return MomentAccumulator(self.count + other.count, mean, m2, m3, max(m4, 0.0))

    def accumulate(self, value: float) -> "MomentAccumulator":
        """Add one observation in place and return self."""
        merged = self.merge(MomentAccumulator(1, float(value)))
        self.count, self.mean, self.m2, self.m3, self.m4 = (
            merged.count, merged.mean, merged.m2, merged.m3, merged.m4)
        return self

    def accumulate_batch(self, values: np.ndarray) -> "MomentAccumulator":
        """Add a batch of observations in place and return self."""
        merged = self.merge(MomentAccumulator.from_values(values))
        self.count, self.mean, self.m2, self.m3, self.m4 = (
            merged.count, merged.mean, merged.m2, merged.m3, merged.m4)
        return self

    @property
    def variance(self) -> float:
        """Unbiased sample variance (divisor count - 1)."""
        if self.count < 2:
            raise UndefinedValueError(f"variance needs at least 2 values, have {self.count}")
        return self.m2 / (self.count - 1)

    @property
    def mean_std_error(self) -> float:
        return math.sqrt(self.variance / self.count)

    @property
    def central_moment4(self) -> float:
        if self.count < 1:
            raise UndefinedValueError("fourth moment of an empty accumulator is undefined")
        return self.m4 / self.count

    @property
    def standardized_moment4(self) -> float:
        """Kurtosis m4 * n / m2^2 (3 for Gaussian data)."""
        if self.count < 2 or self.m2 == 0:
            raise UndefinedValueError("standardized fourth moment needs non-degenerate data")
        return self.count * self.m4 / (self.m2 * self.m2)

    @property
    def variance_std_error(self) -> float:
        """
        Standard error of the sample variance from the fourth central moment,
        sqrt((mu4 - (n-3)/(n-1) s^4) / n).
        """
        n = self.count
        if n < 4:
            raise UndefinedValueError(f"variance standard error needs at least 4 values, have {n}")
        s2 = self.variance
        value = (self.central_moment4 - (n - 3) / (n - 1) * s2 * s2) / n
        return math.sqrt(max(value, 0.0))


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    """Functional form of :meth:`MomentAccumulator.merge`."""
    return a.merge(b)


def merge_all(parts: Iterable[MomentAccumulator],
              start: Optional[MomentAccumulator] = None) -> MomentAccumulator:
    """Left fold of ``merge`` in iteration order."""
    total = start.copy() if start is not None else MomentAccumulator()
    for part in parts:
        total = total.merge(part)
    return total
