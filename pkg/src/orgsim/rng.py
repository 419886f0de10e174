"""Seeded, named random-number streams and the input distributions.

Every stochastic input of a run is drawn from a *named* stream.  A stream's
seed is a 64-bit BLAKE2b digest of ``(base_seed, name)``, so its sequence
depends on nothing else: creating streams in another order, or adding new
streams, never shifts an existing stream.

Each stream is a :class:`random.Random` (Mersenne Twister) instance.  All
distributions consume exactly one uniform ``u = rng.random()`` per draw,
including ``constant``, which keeps streams positionally aligned when a
config swaps a constant for a random input.  Inversion methods:

========================  ===============================================
constant(c)               ``c``
uniform(a, b)             ``a + (b - a) * u``
exponential(mean)         ``-mean * log(1 - u)``  (inverse CDF)
triangular(a, m, b)       inverse CDF, split at ``F(m) = (m - a)/(b - a)``
bernoulli(p)              ``1.0 if u < p else 0.0``
========================  ===============================================
"""

from __future__ import annotations

import hashlib
import math
import random
import struct
from dataclasses import dataclass
from typing import Any, Mapping, Union

__all__ = [
    "BadDistributionParams",
    "Bernoulli",
    "Constant",
    "Distribution",
    "Exponential",
    "RngStreams",
    "Triangular",
    "Uniform",
    "derive_seed",
    "dist_from_json",
    "dist_to_json",
    "draw_sample",
]

_MASK64 = (1 << 64) - 1


class BadDistributionParams(ValueError):
    """Raised when a distribution is declared with invalid parameters."""


def derive_seed(*parts: int | str) -> int:
    """Hash an ordered tuple of ints/strings into a 64-bit seed.

    Ints are encoded as 8 little-endian bytes (mod 2**64), strings as
    length-prefixed UTF-8, each behind a one-byte type tag.
    """
    h = hashlib.blake2b(digest_size=8, person=b"orgsim-seed")
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        if isinstance(part, int):
            h.update(b"i")
            h.update(struct.pack("<Q", part & _MASK64))
        else:
            raw = part.encode("utf-8")
            h.update(b"s")
            h.update(struct.pack("<Q", len(raw)))
            h.update(raw)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class Constant:
    value: float

    def validate(self) -> None:
        if not math.isfinite(self.value):
            raise BadDistributionParams(f"constant value must be finite, got {self.value}")

    def invert(self, u: float) -> float:
        return float(self.value)

    @property
    def support(self) -> tuple[float, float]:
        return (self.value, self.value)


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def validate(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a > self.b:
            raise BadDistributionParams(f"uniform needs finite a <= b, got a={self.a}, b={self.b}")

    def invert(self, u: float) -> float:
        return self.a + (self.b - self.a) * u

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Exponential:
    mean: float

    def validate(self) -> None:
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise BadDistributionParams(f"exponential needs mean > 0, got {self.mean}")

    def invert(self, u: float) -> float:
        return -self.mean * math.log1p(-u)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)


@dataclass(frozen=True)
class Triangular:
    a: float
    mode: float
    b: float

    def validate(self) -> None:
        finite = all(math.isfinite(x) for x in (self.a, self.mode, self.b))
        if not finite or not (self.a <= self.mode <= self.b):
            raise BadDistributionParams(
                f"triangular needs a <= mode <= b, got ({self.a}, {self.mode}, {self.b})"
            )

    def invert(self, u: float) -> float:
        a, m, b = self.a, self.mode, self.b
        width = b - a
        if width == 0:
            return a
        cut = (m - a) / width
        if u < cut:
            return a + math.sqrt(u * width * (m - a))
        return b - math.sqrt((1.0 - u) * width * (b - m))

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def validate(self) -> None:
        if not (0.0 <= self.p <= 1.0):
            raise BadDistributionParams(f"bernoulli needs 0 <= p <= 1, got {self.p}")

    def invert(self, u: float) -> float:
        return 1.0 if u < self.p else 0.0

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, 1.0)


Distribution = Union[Constant, Uniform, Exponential, Triangular, Bernoulli]


class RngStreams:
    """Lazily created, independently seeded named substreams.

    Conventional names: ``arrivals``, ``durations:<agent>``,
    ``decisions:<agent>``, ``init:<agent>``, ``calibration``.
    """

    def __init__(self, base_seed: int):
        self.base_seed = int(base_seed) & _MASK64
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            rng = random.Random(derive_seed(self.base_seed, name))
            self._streams[name] = rng
        return rng

    def uniform01(self, name: str) -> float:
        return self.stream(name).random()

    def draw(self, name: str, dist: Distribution) -> float:
        return draw_sample(self, name, dist)

    def names(self) -> list[str]:
        return sorted(self._streams)


def draw_sample(streams: RngStreams, stream: str, dist: Distribution) -> float:
    """Draw one value of ``dist`` from the named stream only."""
    dist.validate()
    return dist.invert(streams.stream(stream).random())


_DIST_FIELDS = {
    "constant": (Constant, ("value",)),
    "uniform": (Uniform, ("a", "b")),
    "exponential": (Exponential, ("mean",)),
    "triangular": (Triangular, ("a", "mode", "b")),
    "bernoulli": (Bernoulli, ("p",)),
}


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def dist_from_json(obj: Any) -> Distribution:
    """Build a distribution from its JSON form.

    A bare number is a constant; otherwise ``{"dist": name, <params>}``.
    """
    if _is_number(obj):
        d: Distribution = Constant(float(obj))
    elif isinstance(obj, Mapping):
        name = obj.get("dist")
        if name not in _DIST_FIELDS:
            raise BadDistributionParams(
                f"unknown distribution {name!r}; expected one of {sorted(_DIST_FIELDS)}"
            )
        cls, fields = _DIST_FIELDS[name]
        extra = set(obj) - set(fields) - {"dist"}
        if extra:
            raise BadDistributionParams(f"{name}: unexpected parameter(s) {sorted(extra)}")
        args = []
        for f in fields:
            if f not in obj:
                raise BadDistributionParams(f"{name}: missing parameter {f!r}")
            if not _is_number(obj[f]):
                raise BadDistributionParams(f"{name}: parameter {f!r} must be a number")
            args.append(float(obj[f]))
        d = cls(*args)
    else:
        raise BadDistributionParams(f"expected a number or a distribution object, got {obj!r}")
    d.validate()
    return d


def dist_to_json(dist: Distribution) -> float | dict[str, Any]:
    if isinstance(dist, Constant):
        return dist.value
    for name, (cls, fields) in _DIST_FIELDS.items():
        if isinstance(dist, cls):
            out: dict[str, Any] = {"dist": name}
            out.update({f: getattr(dist, f) for f in fields})
            return out
    raise TypeError(f"not a distribution: {dist!r}")
