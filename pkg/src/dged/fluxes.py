"""Right-hand side of the N-truncated system and its bookkeeping identities.

Every truncated reaction <p> + <q> -> <p-k> + <q+k> has 1 <= k <= p <= N and
q + k <= N.  The four flux families collect, for each size i, the reactions
that create i from the donor side (Q1), destroy i as acceptor (Q2), create i
as acceptor (Q3) and destroy i as donor (Q4).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernels import RateKernel, evaluate, kernel_values, support
from .state import ConcentrationState, Variant

# reaction tables larger than this are regenerated on every call instead of cached
DEFAULT_MEMORY_BUDGET = 256 * 2**20
_BYTES_PER_REACTION = 32


@dataclass(frozen=True)
class FluxBreakdown:
    """Per-size flux families; each array has length N + 1."""

    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    q4: np.ndarray

    def total(self) -> np.ndarray:
        return self.q1 + self.q2 + self.q3 + self.q4

    def at(self, i: int) -> tuple[float, float, float, float]:
        return (float(self.q1[i]), float(self.q2[i]), float(self.q3[i]), float(self.q4[i]))

    def scale(self) -> np.ndarray:
        """|q1| + |q2| + |q3| + |q4| per size, the magnitude a cancellation is measured against."""
        return np.abs(self.q1) + np.abs(self.q2) + np.abs(self.q3) + np.abs(self.q4)


class TruncatedSystem:
    """Sparse reaction table for one kernel at one truncation size.

    Only triples in the kernel's structural support with a nonzero
    coefficient are kept, so delta-structured kernels cost O(N^2) per
    evaluation and general ones O(N^3).
    """

    def __init__(self, kernel: RateKernel, N: int, variant: Variant | str = Variant.ISOLATED,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.kernel = kernel
        self.N = N
        self.variant = Variant(variant)
        p, q, k = support(kernel, N)
        self.cached = p.size * _BYTES_PER_REACTION <= memory_budget
        if self.cached:
            self._table = self._build(p, q, k)
            self.n_reactions = self._table[0].size
        else:
            self._table = None
            self.n_reactions = p.size

    def _build(self, p, q, k):
        coef = kernel_values(self.kernel, p, q, k)
        keep = coef != 0
        return p[keep], q[keep], k[keep], coef[keep]

    def _blocks(self):
        if self._table is not None:
            yield self._table
            return
        # on-demand: one exchange size at a time
        p, q, k = support(self.kernel, self.N)
        for kk in np.unique(k):
            m = k == kk
            yield self._build(p[m], q[m], k[m])

    def breakdown(self, c) -> FluxBreakdown:
        c = np.asarray(c, dtype=float)
        if c.size != self.N + 1:
            raise ValueError(f"state has {c.size} entries, expected N + 1 = {self.N + 1}")
        n = self.N + 1
        q1, q2, q3, q4 = (np.zeros(n) for _ in range(4))
        for p, q, k, coef in self._blocks():
            rate = coef * c[p] * c[q]
            q1 += np.bincount(p - k, rate, minlength=n)
            q2 -= np.bincount(q, rate, minlength=n)
            q3 += np.bincount(q + k, rate, minlength=n)
            q4 -= np.bincount(p, rate, minlength=n)
        if self.variant is Variant.NON_ISOLATED:
            q1[0] = q2[0] = q3[0] = q4[0] = 0.0
        # -0.0 from the sign flips is harmless but noisy in output files
        return FluxBreakdown(q1, q2 + 0.0, q3, q4 + 0.0)

    def rhs(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        n = self.N + 1
        d = np.zeros(n)
        for p, q, k, coef in self._blocks():
            rate = coef * c[p] * c[q]
            d += np.bincount(p - k, rate, minlength=n) + np.bincount(q + k, rate, minlength=n)
            d -= np.bincount(p, rate, minlength=n) + np.bincount(q, rate, minlength=n)
        if self.variant is Variant.NON_ISOLATED:
            d[0] = 0.0
        return d


@lru_cache(maxsize=64)
def system_for(kernel: RateKernel, N: int, variant: Variant) -> TruncatedSystem:
    return TruncatedSystem(kernel, N, variant)


def _system(kernel: RateKernel, state: ConcentrationState) -> TruncatedSystem:
    return system_for(kernel, state.N, state.variant)


def flux_breakdown(kernel: RateKernel, state: ConcentrationState) -> FluxBreakdown:
    return _system(kernel, state).breakdown(state.values)


def rhs(kernel: RateKernel, state: ConcentrationState) -> np.ndarray:
    """dc/dt of the truncated system; c_0 is held fixed in the non-isolated variant."""
    return _system(kernel, state).rhs(state.values)


def rhs_enumeration_oracle(kernel: RateKernel, state: ConcentrationState) -> np.ndarray:
    """dc/dt by walking every reaction once and applying its stoichiometry.

    Deliberately scalar and independent of :class:`TruncatedSystem`.
    """
    c = [float(x) for x in state.values]
    N = len(c) - 1
    d = [0.0] * (N + 1)
    for k in range(1, N + 1):
        for i in range(k, N + 1):
            ci = c[i]
            for j in range(0, N - k + 1):
                r = evaluate(kernel, i, j, k) * ci * c[j]
                d[i] -= r
                d[j] -= r
                d[i - k] += r
                d[j + k] += r
    if state.variant is Variant.NON_ISOLATED:
        d[0] = 0.0
    return np.array(d)


def _triples(N: int, k_max: int):
    ks, is_, js = [], [], []
    for k in range(1, k_max + 1):
        I, J = np.meshgrid(np.arange(k, N + 1), np.arange(0, N - k + 1), indexing="ij")
        is_.append(I.ravel())
        js.append(J.ravel())
        ks.append(np.full(I.size, k))
    if not ks:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e
    return np.concatenate(is_), np.concatenate(js), np.concatenate(ks)


def weighted_moment_rate(kernel: RateKernel, state: ConcentrationState, g) -> float:
    """d/dt sum_i g_i c_i written as a single sum over reactions.

    Isolated:  sum_{k=1}^{N-1} sum_{i=k}^{N} sum_{j=0}^{N-k}
               (g_{j+k} + g_{i-k} - g_j - g_i) a(i, j; k) c_i c_j.
    Non-isolated subtracts g_0 times the c_0 production that the bath absorbs.
    """
    c = state.values
    N = state.N
    g = np.asarray(g, dtype=float)
    if g.shape != (N + 1,):
        raise ValueError(f"weight sequence must have length N + 1 = {N + 1}")
    I, J, K = _triples(N, N - 1)
    a = kernel_values(kernel, I, J, K)
    total = float(np.sum((g[J + K] + g[I - K] - g[J] - g[I]) * a * c[I] * c[J]))
    if state.variant is Variant.NON_ISOLATED and g[0] != 0:
        I, J, K = _triples(N, N)
        a = kernel_values(kernel, I, J, K)
        donors = I == K  # a(k, j; k) c_k c_j over j <= N - k
        made = float(np.sum(a[donors] * c[I[donors]] * c[J[donors]]))
        onto_void = J == 0  # a(i, 0; k) c_i c_0 over i >= k
        used = float(np.sum(a[onto_void] * c[I[onto_void]])) * c[0]
        total -= g[0] * (made - used)
    return total


def balanced_net_rate(kernel: RateKernel, state: ConcentrationState, q: int, p: int, k: int) -> float:
    """Net rate a(q,p;k) c_q c_p - a(p+k,q-k;k) c_{p+k} c_{q-k} of a reversible pair."""
    N = state.N
    if not (1 <= k <= q <= N and 0 <= p and p + k <= N):
        raise ValueError(f"(q, p, k) = ({q}, {p}, {k}) leaves the truncation 0..{N}")
    c = state.values
    return evaluate(kernel, q, p, k) * c[q] * c[p] - evaluate(kernel, p + k, q - k, k) * c[p + k] * c[q - k]
