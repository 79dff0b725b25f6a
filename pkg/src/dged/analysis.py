"""Sigma-moment toolkit, detailed-balance equilibria, the entropy functional
V(c) and truncation-convergence studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .fluxes import flux_breakdown, rhs
from .integrate import IntegrationError, IntegratorConfig, Trajectory, integrate
from .kernels import AuditReport, BoundCertificate, RateKernel, Violation, kernel_values
from .state import ConcentrationState, InitialSpec, Variant, build_initial

# ---------------------------------------------------------------------------
# sigma functions


@dataclass(frozen=True, eq=False)
class SigmaFunction:
    """Convex superlinear weight sigma with sigma(0) = 0.

    Powers x**p with 1 < p <= 2 are in the class whose derivative is concave
    (m_sigma = 2); powers p >= 2 are in the class with a doubling condition
    on sigma'.  For p > 2 the default m_sigma = 2**p - 2 is the value forced
    at i = j; :func:`sigma_inequality_audit` checks it on a grid.
    """

    family: str = "power"
    exponent: float | None = None
    func: Callable | None = None
    derivative: Callable | None = None
    m_sigma: float | None = None
    A_sigma: float | None = None

    def __post_init__(self):
        if self.family == "power":
            p = self.exponent
            if p is None or not p > 1:
                raise ValueError("power sigma needs an exponent > 1")
            if self.m_sigma is None:
                object.__setattr__(self, "m_sigma", 2.0 if p <= 2 else 2.0 ** p - 2.0)
            if self.A_sigma is None and p >= 2:
                object.__setattr__(self, "A_sigma", 2.0 ** (p - 1))
        elif self.family == "custom":
            if self.func is None or self.m_sigma is None:
                raise ValueError("custom sigma needs func and m_sigma")
        else:
            raise ValueError(f"unknown sigma family {self.family!r}")

    @property
    def sigma_class(self) -> str:
        if self.family == "power":
            return "E" if self.exponent <= 2 else "E1"
        return "E1" if self.A_sigma is not None else "E"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "power":
            return np.power(x, self.exponent)
        return np.asarray(self.func(x), dtype=float)

    def prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "power":
            return self.exponent * np.power(x, self.exponent - 1)
        if self.derivative is None:
            raise ValueError("custom sigma has no derivative")
        return np.asarray(self.derivative(x), dtype=float)

    def describe(self) -> dict:
        return {"family": self.family, "exponent": self.exponent, "m_sigma": self.m_sigma,
                "class": self.sigma_class}


def power_sigma(p: float) -> SigmaFunction:
    return SigmaFunction("power", exponent=p)


def audit_sigma(sigma: SigmaFunction, grid_max: float = 100.0, n: int = 2001) -> AuditReport:
    """Check sigma(0) = 0, nonnegativity and convexity on a uniform grid;
    sigma(r)/r nondecreasing for the concave-derivative class; the doubling
    condition sigma'(2x) <= A sigma'(x) when A_sigma is set."""
    x = np.linspace(0.0, grid_max, n)
    s = sigma(x)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(s))))
    out = []
    if abs(float(sigma(0.0))) > 0:
        out.append(Violation("sigma_zero", (0,), f"sigma(0) = {float(sigma(0.0))!r}"))
    for idx in np.flatnonzero(s < -tol):
        out.append(Violation("sigma_negative", (int(idx),), f"sigma({x[idx]}) = {s[idx]!r}"))
    second = s[2:] - 2 * s[1:-1] + s[:-2]
    for idx in np.flatnonzero(second < -tol):
        out.append(Violation("sigma_convexity", (int(idx) + 1,), f"at x = {x[idx + 1]}"))
    if sigma.sigma_class == "E":
        ratio = s[1:] / x[1:]
        for idx in np.flatnonzero(np.diff(ratio) < -tol):
            out.append(Violation("sigma_superlinear", (int(idx) + 1,), f"sigma(r)/r decreases at {x[idx + 1]}"))
    if sigma.A_sigma is not None:
        half = x[x <= grid_max / 2]
        lhs, rhs_ = sigma.prime(2 * half), sigma.A_sigma * sigma.prime(half)
        for idx in np.flatnonzero(lhs > rhs_ * (1 + 1e-12) + tol):
            out.append(Violation("sigma_doubling", (int(idx),), f"sigma'(2x) > A sigma'(x) at {half[idx]}"))
    return AuditReport("sigma", int(grid_max), tuple(out), checked=int(n))


def sigma_tilde(sigma: Callable, i, j, k):
    """sigma(j+k) + sigma(i-k) - sigma(j) - sigma(i): the change in the sigma-moment
    caused by one reaction (i, j, k)."""
    i, j, k = (np.asarray(v, dtype=float) for v in (i, j, k))
    out = sigma(j + k) + sigma(i - k) - sigma(j) - sigma(i)
    return float(out) if np.ndim(out) == 0 else out


def sigma_inequality_audit(sigma: SigmaFunction, i_max: int = 40, j_max: int = 40) -> AuditReport:
    """(j+k) sigma_tilde(i,j,k) <= m_sigma (j sigma(k) + k sigma(j)) for
    1 <= k <= i <= i_max and 0 <= j <= j_max."""
    I, J, K = np.meshgrid(np.arange(1, i_max + 1), np.arange(0, j_max + 1), np.arange(1, i_max + 1),
                          indexing="ij")
    m = K <= I
    I, J, K = I[m].astype(float), J[m].astype(float), K[m].astype(float)
    lhs = (J + K) * sigma_tilde(sigma, I, J, K)
    rhs_ = sigma.m_sigma * (J * sigma(K) + K * sigma(J))
    slack = 1e-12 * np.maximum(np.abs(lhs), np.abs(rhs_))
    bad = lhs > rhs_ + slack
    out = tuple(Violation("sigma_inequality", (int(I[x]), int(J[x]), int(K[x])),
                          f"{lhs[x]!r} > {rhs_[x]!r}") for x in np.flatnonzero(bad))
    worst = float(np.max(np.where(rhs_ > 0, lhs / np.where(rhs_ > 0, rhs_, 1), -np.inf)))
    return AuditReport("sigma_inequality", i_max, out, checked=int(I.size),
                       extra={"m_sigma": sigma.m_sigma, "max_lhs_over_rhs": worst})


def superadditivity_scan(sigma: SigmaFunction, eta: float = 0.5, p_max: int = 256) -> dict:
    """Smallest M0 with sigma(p) - sigma(p-k) - sigma(k) >= eta sigma(p-1)/(p-1)
    for every M0 <= p <= p_max and 1 <= k <= p - 1.

    M0 is ``None`` when even p = p_max fails.
    """
    ok = {}
    for p in range(2, p_max + 1):
        k = np.arange(1, p, dtype=float)
        gap = sigma(float(p)) - sigma(p - k) - sigma(k)
        need = eta * float(sigma(float(p - 1))) / (p - 1)
        ok[p] = bool(np.all(gap >= need * (1 - 1e-12)))
    M0 = None
    for p in range(p_max, 1, -1):
        if not ok[p]:
            break
        M0 = p
    return {"eta": eta, "M0": M0, "p_max": p_max, "holds_from_M0": M0 is not None}


@dataclass(frozen=True)
class MomentBoundReport:
    K: float
    T: float
    bound: float
    ratios: tuple[float, ...]
    max_ratio: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.bound * (1 + 1e-12)

    def to_dict(self) -> dict:
        return {"K": self.K, "T": self.T, "bound": self.bound, "max_ratio": self.max_ratio,
                "passed": self.passed}


def check_moment_bound(trajectory: Trajectory, sigma: SigmaFunction, cert: BoundCertificate) -> MomentBoundReport:
    """Compare sum sigma(i) c_i(t) / sum sigma(i) c_i(0) with exp(K T),
    K = 2 C Q m_sigma P1(0), at every sample.  One-sided: only an upper bound."""
    first = trajectory.samples[0].state
    if first.variant is not Variant.ISOLATED:
        raise ValueError("the sigma-moment bound is stated for isolated runs")
    i = np.arange(first.N + 1, dtype=float)
    w = sigma(i)
    s0 = math.fsum(w * first.values)
    p1 = math.fsum(i * first.values)
    K = 2.0 * cert.C * cert.Q * sigma.m_sigma * p1
    T = trajectory.samples[-1].state.time - first.time
    ratios = []
    for smp in trajectory.samples:
        st = math.fsum(w * smp.state.values)
        if s0 == 0:
            ratios.append(1.0 if st == 0 else math.inf)
        else:
            ratios.append(st / s0)
    return MomentBoundReport(K, T, math.exp(K * T), tuple(ratios), max(ratios))


# ---------------------------------------------------------------------------
# detailed balance and equilibria


class EquilibriumError(ValueError):
    """The mass constraint could not be bracketed."""


def _profile(O, N: int) -> np.ndarray:
    O = np.asarray(O, dtype=float)
    if O.shape != (N + 1,):
        raise ValueError(f"profile must have N + 1 = {N + 1} entries")
    if O[0] != 1.0:
        raise ValueError("profile must have O_0 = 1")
    if not np.all(O > 0) or not np.all(np.isfinite(O)):
        raise ValueError("profile entries must be finite and positive")
    return O


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    argmax: tuple[int, int, int] | None
    checked: int

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual,
                "argmax_qpk": None if self.argmax is None else list(self.argmax),
                "checked": self.checked}


def _pair_triples(N: int):
    """All (q, p, k) with 1 <= k <= q <= N and 0 <= p <= N - k."""
    Q, P, K = [], [], []
    for k in range(1, N + 1):
        q, p = np.meshgrid(np.arange(k, N + 1), np.arange(0, N - k + 1), indexing="ij")
        Q.append(q.ravel())
        P.append(p.ravel())
        K.append(np.full(q.size, k))
    return np.concatenate(Q), np.concatenate(P), np.concatenate(K)


def detailed_balance_residual(kernel: RateKernel, O, N: int) -> ResidualReport:
    """max |a(q,p;k) O_q O_p - a(p+k,q-k;k) O_{p+k} O_{q-k}| over the truncation.

    Ties keep the first triple in (k, q, p) order.
    """
    O = _profile(O, N)
    q, p, k = _pair_triples(N)
    fwd = kernel_values(kernel, q, p, k) * O[q] * O[p]
    bwd = kernel_values(kernel, p + k, q - k, k) * O[p + k] * O[q - k]
    res = np.abs(fwd - bwd)
    idx = int(np.argmax(res))
    return ResidualReport(float(res[idx]), (int(q[idx]), int(p[idx]), int(k[idx])), int(res.size))


@dataclass(frozen=True)
class EquilibriumSpec:
    O: np.ndarray
    z: float

    @property
    def N(self) -> int:
        return self.O.size - 1

    @property
    def values(self) -> np.ndarray:
        return self.O * self.z ** np.arange(self.O.size, dtype=float)

    @property
    def mass(self) -> float:
        return math.fsum(np.arange(self.O.size) * self.values)

    def state(self, variant: Variant | str = Variant.ISOLATED) -> ConcentrationState:
        return ConcentrationState(self.values, 0.0, variant)

    def to_dict(self) -> dict:
        return {"z": self.z, "mass": self.mass, "O": self.O.tolist(), "induced_state": self.values.tolist()}


def equilibrium_from_mass(O, N: int, rho: float) -> EquilibriumSpec:
    """Find the fugacity z > 0 with sum_{i>=1} i O_i z^i = rho by bisection."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    O = _profile(O, N)
    i = np.arange(N + 1, dtype=float)

    def mass(z):
        with np.errstate(over="ignore", invalid="ignore"):
            return math.fsum(i * O * z ** i)

    hi = 1.0
    while True:
        m = mass(hi)
        if not math.isfinite(m):
            raise EquilibriumError(f"mass {rho!r} cannot be bracketed: sum overflows at z = {hi!r}")
        if m >= rho:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(2200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mass(mid) < rho:
            lo = mid
        else:
            hi = mid
    z = min((lo, hi), key=lambda v: abs(mass(v) - rho))
    if z <= 0 or abs(mass(z) - rho) > 1e-12 * rho:
        raise EquilibriumError(f"bisection stalled at z = {z!r} with mass {mass(z)!r} for rho = {rho!r}")
    return EquilibriumSpec(O.copy(), z)


def stationarity(kernel: RateKernel, state: ConcentrationState) -> tuple[float, float]:
    """(max |dc/dt|, largest single flux-family term) at ``state``."""
    d = rhs(kernel, state)
    fb = flux_breakdown(kernel, state)
    scale = float(max(np.max(np.abs(x)) for x in (fb.q1, fb.q2, fb.q3, fb.q4)))
    return float(np.max(np.abs(d))), scale


# ---------------------------------------------------------------------------
# entropy functional


def lyapunov_v(state, O) -> float:
    """V(c) = sum c_i (log(c_i / O_i) - 1), with 0 log 0 = 0."""
    c = state.values if isinstance(state, ConcentrationState) else np.asarray(state, dtype=float)
    O = np.asarray(O, dtype=float)
    if O.shape != c.shape or not np.all(O > 0):
        raise ValueError("profile must be positive and match the state length")
    pos = c > 0
    return math.fsum(c[pos] * (np.log(c[pos] / O[pos]) - 1.0))


@dataclass(frozen=True)
class LyapunovRate:
    value: float
    finite: bool
    offending: tuple[int, int, int] | None = None


def lyapunov_rate(kernel: RateKernel, state: ConcentrationState, O) -> LyapunovRate:
    """Truncated dV/dt as a sum over reversible pairs:

        sum_{i,j,k} omega(i,j;k)(c) log(c_{j+k} O_j / (c_j O_{j+k})),

    1 <= k <= i <= N, 0 <= j <= N - k.  A zero concentration at an index that
    enters a log with a nonzero coefficient pair gives a flagged NaN result.
    """
    c = state.values
    N = state.N
    O = np.asarray(O, dtype=float)
    if O.shape != c.shape or not np.all(O > 0):
        raise ValueError("profile must be positive and match the state length")
    i, j, k = _pair_triples(N)
    a_f = kernel_values(kernel, i, j, k)
    a_b = kernel_values(kernel, j + k, i - k, k)
    live = (a_f != 0) | (a_b != 0)
    zero = live & ((c[j] == 0) | (c[j + k] == 0))
    if zero.any():
        x = int(np.argmax(zero))
        return LyapunovRate(math.nan, False, (int(i[x]), int(j[x]), int(k[x])))
    i, j, k, a_f, a_b = i[live], j[live], k[live], a_f[live], a_b[live]
    omega = a_f * c[i] * c[j] - a_b * c[j + k] * c[i - k]
    logs = np.log(c[j + k] * O[j] / (c[j] * O[j + k]))
    return LyapunovRate(math.fsum(omega * logs), True)


# ---------------------------------------------------------------------------
# truncation convergence


@dataclass
class ConvergenceTable:
    """Rows (i, t, N, c_i^N(t), |c_i^N(t) - c_i^{N_prev}(t)|)."""

    N_list: tuple[int, ...]
    times: tuple[float, ...]
    rows: list[tuple[int, float, int, float, float | None]] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)

    def deltas(self, i: int, t: float) -> list[float]:
        return [r[4] for r in self.rows if r[0] == i and r[1] == t and r[4] is not None]

    def value(self, i: int, t: float, N: int) -> float:
        for r in self.rows:
            if r[0] == i and r[1] == t and r[2] == N:
                return r[3]
        raise KeyError((i, t, N))


def _initial_for(init, N: int, variant: Variant, bath: float | None) -> ConcentrationState:
    if isinstance(init, InitialSpec):
        if init.shape == "explicit":
            init = replace(init, values=tuple(init.values)[: N + 1])
        return build_initial(replace(init, N=N), variant, bath)
    if callable(init):
        return init(N)
    vals = np.asarray(init, dtype=float)[: N + 1]
    return build_initial(InitialSpec("explicit", N, values=tuple(vals)), variant, bath)


def truncation_convergence(kernel: RateKernel, init, tspan: Sequence[float], N_list: Sequence[int],
                           variant: Variant | str = Variant.ISOLATED, bath: float | None = None,
                           config: IntegratorConfig | None = None) -> ConvergenceTable:
    """Integrate the same initial data at each truncation size and tabulate
    c_i^N(t) for i <= min(N_list) with differences to the previous size.

    ``init`` is an :class:`InitialSpec` (its N is replaced), a sequence of
    values (cut at each N), or a callable N -> ConcentrationState.  Integrator
    aborts are recorded in ``failures`` and the sweep continues.
    """
    N_list = tuple(int(n) for n in N_list)
    if not N_list or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be non-empty and strictly increasing")
    variant = Variant(variant)
    times = tuple(float(t) for t in tspan)
    config = replace(config or IntegratorConfig(), sample_times=times)
    n_min = N_list[0]
    table = ConvergenceTable(N_list, times)
    prev = None
    for N in N_list:
        try:
            traj = integrate(kernel, _initial_for(init, N, variant, bath), config)
        except IntegrationError as exc:
            table.failures[N] = str(exc)
            prev = None
            continue
        vals = traj.values()[:, : n_min + 1]
        for ti, t in enumerate(times):
            for i in range(n_min + 1):
                d = None if prev is None else abs(float(vals[ti, i]) - float(prev[ti, i]))
                table.rows.append((i, t, N, float(vals[ti, i]), d))
        prev = vals
    return table


def profile_from_spec(spec: Mapping | None, N: int) -> np.ndarray:
    """``{"type": "ones"}`` or ``{"values": [...]}``; default ones."""
    if spec is None or spec.get("type", "ones") == "ones" and "values" not in spec:
        return np.ones(N + 1)
    if "values" in spec:
        return _profile(spec["values"], N)
    if spec.get("type") == "geometric":
        return float(spec["ratio"]) ** np.arange(N + 1, dtype=float)
    raise ValueError(f"unknown profile spec {dict(spec)!r}")
