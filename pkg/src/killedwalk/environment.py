"""Bernoulli potentials on the integers and their gap encoding.

Two encodings of the same environment are used throughout the package:
explicit site values on a finite window, and the vector of successive
distances between occupied sites on ``(0, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class WalkParams:
    """Model parameters: obstacle density ``p``, height ``M`` and tilt ``lam``."""

    p: float
    M: float
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not self.M > 0.0:
            raise ValueError(f"M must be positive, got {self.M}")
        if self.lam < 0.0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def rho(self) -> float:
        """p/(1-p); ``inf`` when p == 1."""
        if self.p >= 1.0:
            return math.inf
        return self.p / (1.0 - self.p)

    @property
    def rho_defined(self) -> bool:
        return self.p < 1.0

    @property
    def survival(self) -> float:
        """Per-visit survival probability at an obstacle, e^{-M}."""
        return math.exp(-self.M)


@dataclass(frozen=True, eq=False)
class Environment:
    """Potential values on the integer window ``[a, b]``.

    ``values[i]`` is the potential at site ``a + i``; every entry is 0 or ``M``.
    """

    a: int
    values: np.ndarray
    M: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("environment needs a nonempty 1-d value array")
        if not np.all((vals == 0.0) | (vals == self.M)):
            raise ValueError("potential values must be exactly 0 or M")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def b(self) -> int:
        return self.a + self.values.size - 1

    @property
    def window(self) -> tuple[int, int]:
        return (self.a, self.b)

    def covers(self, lo: int, hi: int) -> bool:
        return self.a <= lo and hi <= self.b

    def potential(self, x: int) -> float:
        if not self.a <= x <= self.b:
            raise IndexError(f"site {x} outside window [{self.a}, {self.b}]")
        return float(self.values[x - self.a])

    def __getitem__(self, x: int) -> float:
        return self.potential(x)

    @property
    def origin_value(self) -> float | None:
        return self.potential(0) if self.covers(0, 0) else None

    def occupied(self) -> np.ndarray:
        """Sorted array of occupied sites."""
        return self.a + np.flatnonzero(self.values > 0.0)

    def slice(self, lo: int, hi: int) -> np.ndarray:
        """Potential values on ``[lo, hi]`` as an array."""
        if not self.covers(lo, hi):
            raise IndexError(f"[{lo}, {hi}] not inside window {self.window}")
        return self.values[lo - self.a : hi - self.a + 1]

    def survival(self, lo: int, hi: int) -> np.ndarray:
        """e^{-V(x)} for x in ``[lo, hi]``."""
        return np.exp(-self.slice(lo, hi))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.a == other.a
            and self.M == other.M
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.a, self.M, self.values.tobytes()))

    def to_line(self) -> str:
        """One-line text form ``a b v_a ... v_b``."""
        vals = " ".join(_fmt(v) for v in self.values)
        return f"{self.a} {self.b} {vals}"

    @classmethod
    def from_line(cls, line: str, M: float | None = None) -> "Environment":
        parts = line.split()
        if len(parts) < 3:
            raise ValueError("environment line needs 'a b v_a ...'")
        a, b = int(parts[0]), int(parts[1])
        vals = np.array([float(v) for v in parts[2:]])
        if vals.size != b - a + 1:
            raise ValueError(f"expected {b - a + 1} values, got {vals.size}")
        if M is None:
            nz = vals[vals > 0]
            if nz.size == 0:
                raise ValueError("cannot infer M from an obstacle-free line; pass M")
            M = float(nz[0])
        return cls(a, vals, M)

    @classmethod
    def constant(cls, a: int, b: int, gamma: float) -> "Environment":
        """Every site in ``[a, b]`` carries ``gamma`` (the V = const case)."""
        return cls(a, np.full(b - a + 1, float(gamma)), float(gamma))


def _fmt(v: float) -> str:
    return repr(float(v)) if v else "0"


@dataclass(frozen=True)
class GapVector:
    """Successive distances ``(r_1, ..., r_n)`` between occupied sites on (0, y)."""

    gaps: tuple[int, ...]

    def __post_init__(self) -> None:
        gaps = tuple(int(r) for r in self.gaps)
        if not gaps:
            raise ValueError("a gap vector has at least one entry")
        if any(r < 1 for r in gaps):
            raise ValueError(f"gaps must be positive integers, got {gaps}")
        object.__setattr__(self, "gaps", gaps)

    @property
    def total(self) -> int:
        return sum(self.gaps)

    @property
    def n(self) -> int:
        return len(self.gaps)

    def __len__(self) -> int:
        return len(self.gaps)

    def __iter__(self):
        return iter(self.gaps)

    def __getitem__(self, i: int) -> int:
        return self.gaps[i]

    def sites(self) -> tuple[int, ...]:
        """Occupied interior sites x_1 < ... < x_{n-1} (partial sums)."""
        return tuple(int(s) for s in np.cumsum(self.gaps[:-1]))

    def sum_squares(self) -> int:
        return sum(r * r for r in self.gaps)

    def to_text(self, sep: str = ",") -> str:
        return sep.join(str(r) for r in self.gaps)

    @classmethod
    def from_text(cls, text: str, sep: str = ",") -> "GapVector":
        return cls(tuple(int(t) for t in text.strip().split(sep) if t.strip()))

    @classmethod
    def from_sites(cls, sites: Iterable[int], y: int) -> "GapVector":
        inner = sorted(int(s) for s in sites)
        if inner and not (0 < inner[0] and inner[-1] < y):
            raise ValueError("occupied sites must lie strictly inside (0, y)")
        points = [0, *inner, y]
        return cls(tuple(b - a for a, b in zip(points[:-1], points[1:])))


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def child_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """Split a master seed into ``n`` independent child seed sequences.

    Children come from :class:`numpy.random.SeedSequence` spawn keys, so a batch
    indexed ``k`` always receives the same stream regardless of how many
    workers process the batches.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=(*ss.spawn_key, k))
        for k in range(n)
    ]


def sample_environment(params: WalkParams, window: tuple[int, int], seed) -> Environment:
    """Independent Bernoulli(p) obstacles of height M on ``window = (a, b)``."""
    a, b = int(window[0]), int(window[1])
    if b < a:
        raise ValueError(f"empty window [{a}, {b}]")
    rng = make_rng(seed)
    occupied = rng.random(b - a + 1) < params.p
    return Environment(a, np.where(occupied, params.M, 0.0), params.M)


def to_gaps(env: Environment, y: int) -> GapVector:
    """Gap vector of the occupied sites of ``env`` inside ``(0, y)``.

    An empty interval gives the single gap ``(y,)``.
    """
    if y < 1:
        raise ValueError("y must be at least 1")
    if env.a > 1 or env.b < y - 1:
        raise ValueError(f"window {env.window} does not cover (0, {y})")
    occ = env.occupied()
    inner = occ[(occ > 0) & (occ < y)]
    return GapVector.from_sites(inner.tolist(), y)


def from_gaps(gaps: GapVector | Sequence[int], params: WalkParams | float,
              origin_occupied: bool = False) -> Environment:
    """Environment on ``[0, total]`` with obstacles at the interior partial sums.

    The endpoint ``y = total`` is left vacant; the crossing stops on arrival
    so its value never matters.
    """
    if not isinstance(gaps, GapVector):
        gaps = GapVector(tuple(gaps))
    M = params.M if isinstance(params, WalkParams) else float(params)
    vals = np.zeros(gaps.total + 1)
    for x in gaps.sites():
        vals[x] = M
    if origin_occupied:
        vals[0] = M
    return Environment(0, vals, M)
