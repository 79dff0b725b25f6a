"""Time stepping for the truncated system.

Two methods: the Dormand-Prince 5(4) embedded pair with step-size control,
and classical fixed-step RK4.  Steps are clipped so that every sample time
is hit exactly.  A step that drives a component to ``-negativity_floor`` or
below is rejected and halved; smaller undershoots are clamped to 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fluxes import TruncatedSystem, system_for
from .kernels import RateKernel
from .state import ConcentrationState, Variant, moment, sigma_moment

log = logging.getLogger(__name__)

METHODS = ("dopri5", "rk4")

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite derivative."""


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri5"
    rtol: float = 1e-9
    atol: float = 1e-12
    h_init: float = 1e-3
    h_max: float = math.inf
    negativity_floor: float = 1e-14
    sample_times: tuple[float, ...] = (0.0, 1.0)
    max_steps: int = 10_000_000

    def __post_init__(self):
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.rtol >= 1e-14:
            raise ValueError("rtol must be >= 1e-14")
        if not self.atol > 0:
            raise ValueError("atol must be positive")
        if not (self.h_init > 0 and self.h_max > 0):
            raise ValueError("h_init and h_max must be positive")
        if self.negativity_floor < 0:
            raise ValueError("negativity_floor must be nonnegative")
        ts = self.sample_times
        if not ts:
            raise ValueError("sample_times must not be empty")
        if ts[0] < 0 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample_times must be strictly increasing and start at >= 0")

    def to_dict(self) -> dict:
        return {"method": self.method, "rtol": self.rtol, "atol": self.atol, "h_init": self.h_init,
                "h_max": None if math.isinf(self.h_max) else self.h_max,
                "negativity_floor": self.negativity_floor, "sample_times": list(self.sample_times)}


@dataclass(frozen=True)
class MomentReport:
    p0: float
    p1: float
    p2: float
    sigma: float | None = None
    lyapunov: float | None = None

    def to_dict(self) -> dict:
        d = {"p0": self.p0, "p1": self.p1, "p2": self.p2}
        if self.sigma is not None:
            d["sigma"] = self.sigma
        if self.lyapunov is not None:
            d["lyapunov"] = self.lyapunov
        return d


@dataclass(frozen=True)
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rejected_negative: int = 0
    min_step: float = math.inf
    max_step: float = 0.0
    rhs_evals: int = 0

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected,
                "rejected_negative": self.rejected_negative,
                "min_step": None if math.isinf(self.min_step) else self.min_step,
                "max_step": self.max_step, "rhs_evals": self.rhs_evals}


@dataclass(frozen=True)
class Sample:
    state: ConcentrationState
    moments: MomentReport


@dataclass(frozen=True)
class Trajectory:
    samples: tuple[Sample, ...]
    config: IntegratorConfig
    stats: StepStats = field(default_factory=StepStats)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.state.time for s in self.samples])

    @property
    def states(self) -> list[ConcentrationState]:
        return [s.state for s in self.samples]

    def values(self) -> np.ndarray:
        return np.array([s.state.values for s in self.samples])

    @property
    def final(self) -> ConcentrationState:
        return self.samples[-1].state


def moment_report(state: ConcentrationState, sigma: Callable | None = None,
                  lyapunov: Callable | None = None) -> MomentReport:
    return MomentReport(moment(state, 0), moment(state, 1), moment(state, 2),
                        None if sigma is None else sigma_moment(state, sigma),
                        None if lyapunov is None else lyapunov(state))


class _Stepper:
    def __init__(self, system: TruncatedSystem, config: IntegratorConfig):
        self.system = system
        self.cfg = config
        self.accepted = self.rejected = self.rejected_negative = self.evals = 0
        self.min_step, self.max_step = math.inf, 0.0

    def f(self, y):
        self.evals += 1
        d = self.system.rhs(y)
        if not np.all(np.isfinite(d)):
            raise IntegrationError("non-finite derivative encountered")
        return d

    def dopri(self, y, fy, h):
        ks = [fy]
        for s in range(1, 7):
            ys = y + h * sum(a * kk for a, kk in zip(_A[s], ks) if a != 0.0)
            ks.append(self.f(ys))
        K = np.array(ks)
        y5 = y + h * (_B5 @ K)
        err = h * (_E @ K)
        return y5, err, ks[6]

    def rk4(self, y, fy, h):
        k1 = fy
        k2 = self.f(y + 0.5 * h * k1)
        k3 = self.f(y + 0.5 * h * k2)
        k4 = self.f(y + h * k3)
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def accept(self, h):
        self.accepted += 1
        self.min_step = min(self.min_step, h)
        self.max_step = max(self.max_step, h)
        if self.accepted + self.rejected > self.cfg.max_steps:
            raise IntegrationError(f"exceeded max_steps = {self.cfg.max_steps}")

    def check_h(self, h):
        if h < 1e-12 * self.cfg.h_init:
            raise IntegrationError(f"step size underflow: h = {h!r} < 1e-12 * h_init")

    def screen(self, y_new):
        """Return the clamped state, or None when the step must be rejected."""
        floor = self.cfg.negativity_floor
        if np.any(y_new <= -floor) if floor > 0 else np.any(y_new < 0):
            return None
        return np.where(y_new < 0, 0.0, y_new)

    def advance_adaptive(self, t, y, fy, t_end, h):
        """Step from t to exactly t_end; returns (y, f(y), next proposed h)."""
        cfg = self.cfg
        while t < t_end:
            h = min(h, cfg.h_max)
            # stretch by up to 1% rather than leave a sliver before t_end
            last = 1.01 * h >= t_end - t
            h_try = t_end - t if last else h
            self.check_h(h_try)
            y_new, err, f_new = self.dopri(y, fy, h_try)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            en = math.sqrt(float(np.mean((err / scale) ** 2)))
            if not math.isfinite(en):
                raise IntegrationError("non-finite error estimate")
            if en > 1.0:
                self.rejected += 1
                h = h_try * max(0.2, 0.9 * en ** -0.2)
                continue
            clamped = self.screen(y_new)
            if clamped is None:
                self.rejected += 1
                self.rejected_negative += 1
                h = 0.5 * h_try
                continue
            if np.any(y_new < 0):
                f_new = self.f(clamped)
            self.accept(h_try)
            t = t_end if last else t + h_try
            y, fy = clamped, f_new
            grow = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
            # a step shortened to land on t_end says nothing about the next one
            h = max(h, h_try * grow) if last else h_try * grow
        return y, fy, h

    def advance_fixed(self, t, y, fy, t_end, h):
        span = t_end - t
        if span <= 0:
            return y, fy, h
        n = max(1, math.ceil(span / h - 1e-9))
        hs = span / n
        for step in range(n):
            t0 = t + step * hs
            t1 = t_end if step == n - 1 else t + (step + 1) * hs
            y, fy = self._fixed_substep(t0, y, fy, t1 - t0)
        return y, fy, h

    def _fixed_substep(self, t0, y, fy, h):
        y_new = self.rk4(y, fy, h)
        clamped = self.screen(y_new)
        if clamped is None:
            self.rejected += 1
            self.rejected_negative += 1
            half = 0.5 * h
            self.check_h(half)
            y, fy = self._fixed_substep(t0, y, fy, half)
            return self._fixed_substep(t0 + half, y, fy, half)
        self.accept(h)
        return clamped, self.f(clamped)


def integrate(kernel: RateKernel, state0: ConcentrationState, config: IntegratorConfig | None = None,
              sigma: Callable | None = None, lyapunov: Callable | None = None,
              system: TruncatedSystem | None = None) -> Trajectory:
    """Integrate from ``state0`` and sample at ``config.sample_times``.

    ``sigma`` and ``lyapunov`` add a sigma-moment and a V(c) column to every
    :class:`MomentReport`.  In the non-isolated variant c_0 stays pinned at
    its initial value.
    """
    config = config or IntegratorConfig()
    if system is None:
        system = system_for(kernel, state0.N, state0.variant)
    elif system.N != state0.N or system.variant is not state0.variant:
        raise ValueError("system does not match the state's truncation and variant")
    t0 = float(state0.time)
    if config.sample_times[0] < t0:
        raise ValueError(f"first sample time {config.sample_times[0]} precedes the initial time {t0}")

    stepper = _Stepper(system, config)
    y = np.array(state0.values, dtype=float)
    bath = y[0]
    fy = stepper.f(y)
    h = min(config.h_init, config.h_max)
    t = t0
    samples = []
    for ts in config.sample_times:
        if ts > t:
            if config.method == "dopri5":
                y, fy, h = stepper.advance_adaptive(t, y, fy, ts, h)
            else:
                y, fy, h = stepper.advance_fixed(t, y, fy, ts, config.h_init)
            t = ts
        if state0.variant is Variant.NON_ISOLATED:
            y[0] = bath
        st = ConcentrationState(y.copy(), t, state0.variant)
        samples.append(Sample(st, moment_report(st, sigma, lyapunov)))
    stats = StepStats(stepper.accepted, stepper.rejected, stepper.rejected_negative,
                      stepper.min_step, stepper.max_step, stepper.evals)
    log.debug("integrated to t=%g: %s", t, stats)
    return Trajectory(tuple(samples), config, stats)


def conservation_drift(trajectory: Trajectory) -> tuple[float, float]:
    """(max |P0(t) - P0(0)|, max |P1(t) - P1(0)|) over the samples."""
    if not trajectory.samples:
        raise ValueError("empty trajectory")
    m0 = trajectory.samples[0].moments
    d0 = max(abs(s.moments.p0 - m0.p0) for s in trajectory.samples)
    d1 = max(abs(s.moments.p1 - m0.p1) for s in trajectory.samples)
    return d0, d1

