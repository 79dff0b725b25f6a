"""Truncated concentration vectors, initial data and moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np


class Variant(str, Enum):
    ISOLATED = "isolated"
    NON_ISOLATED = "non-isolated"


@dataclass(frozen=True)
class ConcentrationState:
    """c_0 .. c_N at time ``time``.  The array is stored read-only."""

    values: np.ndarray
    time: float = 0.0
    variant: Variant = Variant.ISOLATED

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a state needs at least c_0 and c_1")
        if not np.all(np.isfinite(vals)):
            raise ValueError("state entries must be finite")
        if np.any(vals < 0):
            raise ValueError(f"state entries must be nonnegative, min is {vals.min()!r}")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def N(self) -> int:
        return self.values.size - 1


@dataclass(frozen=True)
class InitialSpec:
    """How to fill the t = 0 state.

    shape ``monodisperse`` puts ``amount`` at index ``size``; ``geometric``
    takes c_i proportional to ``ratio**i`` scaled to total mass ``amount``;
    ``explicit`` copies ``values`` (zero-padded up to N).
    """

    shape: str
    N: int
    size: int = 1
    amount: float = 1.0
    ratio: float = 0.5
    values: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        if self.shape not in ("monodisperse", "geometric", "explicit"):
            raise ValueError(f"unknown initial shape {self.shape!r}")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.amount < 0:
            raise ValueError("amount must be nonnegative")


def build_initial(spec: InitialSpec, variant: Variant | str = Variant.ISOLATED,
                  bath: float | None = None) -> ConcentrationState:
    variant = Variant(variant)
    N = spec.N
    c = np.zeros(N + 1)
    if spec.shape == "monodisperse":
        if not 1 <= spec.size <= N:
            raise ValueError(f"monodisperse size {spec.size} outside 1..{N}")
        c[spec.size] = spec.amount
    elif spec.shape == "geometric":
        if not spec.ratio > 0:
            raise ValueError("geometric ratio must be positive")
        c = spec.ratio ** np.arange(N + 1, dtype=float)
        c *= spec.amount / math.fsum(np.arange(N + 1) * c)
    else:
        vals = np.asarray(spec.values, dtype=float)
        if vals.size > N + 1:
            raise ValueError(f"explicit list has {vals.size} entries, more than N + 1 = {N + 1}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~(vals >= 0) | ~np.isfinite(vals))[0])
            raise ValueError(f"explicit entry c_{bad} = {vals[bad]!r} is not a finite nonnegative value")
        c[: vals.size] = vals
    if variant is Variant.NON_ISOLATED:
        if bath is None or bath < 0:
            raise ValueError("non-isolated runs need a bath concentration >= 0")
        c[0] = bath
    return ConcentrationState(c, 0.0, variant)


def _values(state) -> np.ndarray:
    return state.values if isinstance(state, ConcentrationState) else np.asarray(state, dtype=float)


def moment(state, r: float) -> float:
    """sum_i i^r c_i with 0^0 = 1, so r = 0 counts the void clusters too."""
    c = _values(state)
    w = np.power(np.arange(c.size, dtype=float), r)
    return math.fsum(w * c)


def sigma_moment(state, sigma: Callable) -> float:
    c = _values(state)
    return math.fsum(np.asarray(sigma(np.arange(c.size, dtype=float)), dtype=float) * c)


def norm_x01(state) -> float:
    """sum |c_i| + sum i |c_i|."""
    a = np.abs(_values(state))
    return math.fsum(a) + math.fsum(np.arange(a.size) * a)
