"""Rate-coefficient families a(i, j; k) for the generalized exchange system.

A coefficient a(i, j; k) is the rate at which a chunk of size k leaves an
i-cluster and attaches to a j-cluster::

    <i> + <j>  ->  <i - k> + <j + k>,      1 <= k <= i,  j >= 0.

Kernels are immutable once built.  Every ``func`` stored on a kernel must
accept broadcastable integer arrays ``(i, j, k)`` inside the domain; scalar
evaluation goes through :func:`evaluate`, which adds the domain check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

FORMS = ("closed", "table", "delta_k1", "delta_ki", "coagfrag")


class KernelDomainError(ValueError):
    """Raised when a coefficient is requested outside 1 <= k <= i, j >= 0."""


@dataclass(frozen=True, eq=False)
class RateKernel:
    """A coefficient family plus the structural metadata the solvers use.

    ``form`` drives the sparsity dispatch in the flux layer: the delta forms
    and the coagulation-fragmentation form only ever touch O(N^2) triples.
    """

    form: str
    func: Callable
    max_exchange: int | None = None
    enforce_null: bool = True
    bath_concentration: float | None = None
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown kernel form {self.form!r}")
        if self.max_exchange is not None and self.max_exchange < 1:
            raise ValueError("max_exchange must be a positive integer or None")
        if self.bath_concentration is not None and self.bath_concentration < 0:
            raise ValueError("bath_concentration must be nonnegative")

    def __call__(self, i, j, k) -> float:
        return evaluate(self, i, j, k)

    def describe(self) -> dict:
        return {"name": self.name, "form": self.form, **dict(self.params)}


def _as_float_array(func, i, j, k):
    out = func(i, j, k)
    out = np.asarray(out, dtype=float)
    shape = np.broadcast_shapes(np.shape(i), np.shape(j), np.shape(k))
    if out.shape != shape:
        out = np.broadcast_to(out, shape).copy()
    return out


def kernel_values(kernel: RateKernel, i, j, k) -> np.ndarray:
    """Vectorized a(i, j; k) for index arrays already inside the domain.

    Applies the exchange cap and the null rule a(p, 0; p) = 0.
    """
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    try:
        vals = _as_float_array(kernel.func, i, j, k)
    except (TypeError, ValueError):
        # user callables written for scalars only
        vals = np.vectorize(lambda a, b, c: float(kernel.func(int(a), int(b), int(c))),
                            otypes=[float])(i, j, k)
    vals = np.array(vals, dtype=float)
    if kernel.max_exchange is not None:
        vals = np.where(k > kernel.max_exchange, 0.0, vals)
    if kernel.enforce_null:
        vals = np.where((j == 0) & (k == i), 0.0, vals)
    return vals


def evaluate(kernel: RateKernel, i: int, j: int, k: int) -> float:
    """Return a(i, j; k), rejecting triples outside 1 <= k <= i, j >= 0."""
    for name, v in (("i", i), ("j", j), ("k", k)):
        if int(v) != v:
            raise KernelDomainError(f"{name}={v!r} is not an integer")
    i, j, k = int(i), int(j), int(k)
    if k < 1 or k > i or j < 0:
        raise KernelDomainError(f"(i, j, k) = ({i}, {j}, {k}) outside 1 <= k <= i, j >= 0")
    if kernel.enforce_null and j == 0 and k == i:
        return 0.0
    if kernel.max_exchange is not None and k > kernel.max_exchange:
        return 0.0
    return float(kernel.func(i, j, k))


def support(kernel: RateKernel, N: int):
    """Candidate triples (p, q, k) of the N-truncated system for this kernel.

    Returns int arrays with 1 <= k <= p <= N and 0 <= q <= N - k, restricted
    to the structural support of the kernel's form.
    """
    kbar = N if kernel.max_exchange is None else min(N, kernel.max_exchange)
    form = kernel.form
    if form == "delta_k1":
        p = np.arange(1, N + 1)
        q = np.arange(0, N)
        P, Q = np.meshgrid(p, q, indexing="ij")
        P, Q = P.ravel(), Q.ravel()
        return P, Q, np.ones_like(P)
    if form in ("delta_ki", "coagfrag"):
        ps, qs, ks = [], [], []
        for p in range(1, kbar + 1):
            q = np.arange(1 if form == "coagfrag" else 0, N - p + 1)
            ps.append(np.full(q.size, p))
            qs.append(q)
            ks.append(np.full(q.size, p))
        if form == "coagfrag":
            for p in range(2, N + 1):
                k = np.arange(1, min(p - 1, kbar) + 1)
                ps.append(np.full(k.size, p))
                qs.append(np.zeros(k.size, dtype=np.int64))
                ks.append(k)
        return tuple(np.concatenate(a).astype(np.int64) for a in (ps, qs, ks))
    if form == "table":
        tab = kernel.table
        P, Q, K = np.nonzero(tab)
        keep = (P <= N) & (K <= kbar) & (Q + K <= N) & (K >= 1) & (K <= P)
        return P[keep].astype(np.int64), Q[keep].astype(np.int64), K[keep].astype(np.int64)
    ps, qs, ks = [], [], []
    for k in range(1, kbar + 1):
        P, Q = np.meshgrid(np.arange(k, N + 1), np.arange(0, N - k + 1), indexing="ij")
        ps.append(P.ravel())
        qs.append(Q.ravel())
        ks.append(np.full(P.size, k))
    if not ps:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return tuple(np.concatenate(a).astype(np.int64) for a in (ps, qs, ks))


# ---------------------------------------------------------------------------
# constructors


def constant_kernel(value: float = 1.0) -> RateKernel:
    if value < 0:
        raise ValueError("constant kernel value must be nonnegative")
    return RateKernel("closed", lambda i, j, k: value + 0.0 * (i + j + k),
                      name="constant", params={"value": value})


def unbounded_kernel() -> RateKernel:
    """(i - k + 1)(j + k + 1) / (1 + (i - k) k): positive, unbounded, symmetric."""

    def f(i, j, k):
        return (i - k + 1) * (j + k + 1) / (1.0 + (i - k) * k)

    return RateKernel("closed", f, name="unbounded")


def bounded_exchange_kernel(kbar: int, scale: float = 1.0) -> RateKernel:
    """Exchange of at most ``kbar`` particles, built to satisfy both symmetries.

    Interior entries are ``scale``; coagulation entries a(i, j; i) need
    both i, j <= kbar and fragmentation entries a(i, 0; k) need both
    k, i - k <= kbar.
    """
    if kbar < 1:
        raise ValueError("kbar must be >= 1")

    def f(i, j, k):
        coag = (k == i) & (j >= 1)
        frag = (j == 0) & (k < i)
        val = np.where(coag, j <= kbar, np.where(frag, (i - k) <= kbar, True))
        return scale * val.astype(float)

    return RateKernel("closed", f, max_exchange=kbar, name="bounded_exchange",
                      params={"kbar": kbar, "scale": scale})


def make_edg_kernel(K: Callable, name: str = "edg", params: Mapping | None = None) -> RateKernel:
    """Exchange-driven growth: only monomers move, a(i, j; k) = K(i, j) [k = 1]."""

    def f(i, j, k):
        return np.where(k == 1, K(i, j), 0.0)

    return RateKernel("delta_k1", f, max_exchange=1, name=name, params=params or {})


def edg_product_kernel(C0: float = 1.0) -> RateKernel:
    return make_edg_kernel(lambda i, j: C0 * i * j, name="edg_product", params={"C0": C0})


def edg_constant_kernel(value: float = 1.0) -> RateKernel:
    return make_edg_kernel(lambda i, j: value + 0.0 * (i + j), name="edg_constant",
                           params={"value": value})


def make_coagfrag_kernel(a_coag: Callable, b_frag: Callable, c00: float,
                         name: str = "coagfrag", params: Mapping | None = None) -> RateKernel:
    """Embed coagulation rates a_ij and binary fragmentation rates b_ij.

    a(i, j; i) = a_ij / 2 for j >= 1 and a(i, 0; k) = b_{i-k, k} / (2 c00)
    for 1 <= k <= i - 1; everything else vanishes.  Run it non-isolated with
    bath c00 to recover the classical coagulation-fragmentation equations.
    """
    if not c00 > 0:
        raise ValueError("bath concentration c00 must be positive")

    def f(i, j, k):
        coag = (k == i) & (j >= 1)
        frag = (j == 0) & (k < i)
        a = np.asarray(a_coag(i, j), dtype=float)
        b = np.asarray(b_frag(i - k, k), dtype=float) / (2.0 * c00)
        return np.where(coag, 0.5 * a, np.where(frag, b, 0.0))

    return RateKernel("coagfrag", f, bath_concentration=c00, name=name,
                      params={"c00": c00, **(params or {})})


def coag_only_kernel(a_coag: Callable, name: str = "coag") -> RateKernel:
    """Pure coagulation a(i, j; i) = a_ij / 2 (delta on k = i)."""

    def f(i, j, k):
        return np.where((k == i) & (j >= 1), 0.5 * np.asarray(a_coag(i, j), dtype=float), 0.0)

    return RateKernel("delta_ki", f, name=name)


def make_table_kernel(entries: Mapping[tuple[int, int, int], float],
                      enforce_null: bool = False, name: str = "table") -> RateKernel:
    """Kernel from explicit entries; unlisted triples are 0.

    The null rule is *not* enforced by default so that a table which lists a
    nonzero a(p, 0; p) is caught by :func:`audit_structure`.
    """
    imax = jmax = kmax = 0
    for (i, j, k), v in entries.items():
        if k < 1 or k > i or j < 0:
            raise KernelDomainError(f"table row ({i}, {j}, {k}) outside 1 <= k <= i, j >= 0")
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"table value at ({i}, {j}, {k}) must be finite and >= 0, got {v}")
        imax, jmax, kmax = max(imax, i), max(jmax, j), max(kmax, k)
    tab = np.zeros((imax + 1, jmax + 1, kmax + 1))
    for (i, j, k), v in entries.items():
        tab[i, j, k] = v
    tab.setflags(write=False)

    def f(i, j, k):
        i, j, k = np.broadcast_arrays(np.asarray(i), np.asarray(j), np.asarray(k))
        inside = (i < tab.shape[0]) & (j < tab.shape[1]) & (k < tab.shape[2])
        out = np.zeros(i.shape)
        out[inside] = tab[i[inside], j[inside], k[inside]]
        return out

    return RateKernel("table", f, enforce_null=enforce_null, name=name, table=tab)


def load_table_kernel(path: str | Path, enforce_null: bool = False) -> RateKernel:
    """Read a CSV with header ``i,j,k,value``."""
    entries: dict[tuple[int, int, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["i", "j", "k", "value"]:
            raise ValueError(f"{path}: expected header i,j,k,value, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (int(row["i"]), int(row["j"]), int(row["k"]))
                val = float(row["value"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row}") from exc
            if key[2] > key[0]:
                raise KernelDomainError(f"{path}:{lineno}: k > i in row {key}")
            entries[key] = entries.get(key, 0.0) + val
    return make_table_kernel(entries, enforce_null=enforce_null, name=f"table:{Path(path).name}")


COAG_RATES = {
    "constant": lambda i, j: 1.0 + 0.0 * (i + j),
    "additive": lambda i, j: 1.0 * (i + j),
    "product": lambda i, j: 1.0 * i * j,
}
FRAG_RATES = {
    "zero": lambda i, j: 0.0 * (i + j),
    "constant": lambda i, j: 1.0 + 0.0 * (i + j),
}


def coagfrag_kernel(coag: str = "constant", frag: str = "zero", coag_scale: float = 2.0,
                    frag_scale: float = 1.0, c00: float = 1.0) -> RateKernel:
    """Named coagulation-fragmentation kernels for configs and tests."""
    a, b = COAG_RATES[coag], FRAG_RATES[frag]
    return make_coagfrag_kernel(lambda i, j: coag_scale * a(i, j),
                                lambda i, j: frag_scale * b(i, j), c00,
                                name="coagfrag",
                                params={"coag": coag, "frag": frag, "coag_scale": coag_scale,
                                        "frag_scale": frag_scale})


BUILTIN_KERNELS: dict[str, Callable[..., RateKernel]] = {
    "constant": constant_kernel,
    "unbounded": unbounded_kernel,
    "bounded_exchange": bounded_exchange_kernel,
    "edg_product": edg_product_kernel,
    "edg_constant": edg_constant_kernel,
    "coagfrag": coagfrag_kernel,
}


def builtin_kernel(name: str, **params) -> RateKernel:
    try:
        factory = BUILTIN_KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(BUILTIN_KERNELS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# audits


@dataclass(frozen=True)
class Violation:
    kind: str
    triple: tuple[int, ...]
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "triple": list(self.triple), "detail": self.detail}


@dataclass(frozen=True)
class AuditReport:
    name: str
    cap: int
    violations: tuple[Violation, ...] = ()
    checked: int = 0
    extra: Mapping = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(v.kind == kind for v in self.violations)

    def to_dict(self) -> dict:
        return {"name": self.name, "cap": self.cap, "passed": self.passed,
                "checked": self.checked, "n_violations": len(self.violations),
                "violations": [v.to_dict() for v in self.violations], **dict(self.extra)}


def _domain_grid(cap: int, j_min: int = 0):
    I, J, K = np.meshgrid(np.arange(1, cap + 1), np.arange(j_min, cap + 1),
                          np.arange(1, cap + 1), indexing="ij")
    keep = K <= I
    return I[keep], J[keep], K[keep]


def audit_structure(kernel: RateKernel, cap: int) -> AuditReport:
    """Exhaustively check nonnegativity, the null rule and both symmetries.

    Indices run up to ``cap``.  A broken symmetry is reported once per pair,
    at the triple with the larger leading index.
    """
    if cap < 2:
        raise ValueError("cap must be >= 2")
    out: list[Violation] = []
    I, J, K = _domain_grid(cap)
    vals = kernel_values(kernel, I, J, K)
    for idx in np.flatnonzero(~(vals >= 0)):
        out.append(Violation("nonnegativity", (int(I[idx]), int(J[idx]), int(K[idx])),
                             f"a = {vals[idx]!r}"))

    p = np.arange(1, cap + 1)
    null = kernel_values(kernel, p, 0 * p, p)
    for idx in np.flatnonzero(null != 0):
        pp = int(p[idx])
        out.append(Violation("null_rule", (pp, 0, pp), f"a(p,0;p) = {null[idx]!r}"))

    # a(k, j; k) = a(j, k; j), compared for k > j >= 1
    kk, jj = np.meshgrid(p, p, indexing="ij")
    m = kk > jj
    kk, jj = kk[m], jj[m]
    lhs = kernel_values(kernel, kk, jj, kk)
    rhs = kernel_values(kernel, jj, kk, jj)
    for idx in np.flatnonzero(lhs != rhs):
        k_, j_ = int(kk[idx]), int(jj[idx])
        out.append(Violation("coagulation_symmetry", (k_, j_, k_),
                             f"a({k_},{j_};{k_}) = {lhs[idx]!r} != a({j_},{k_};{j_}) = {rhs[idx]!r}"))

    # a(i, 0; k) = a(i, 0; i - k), compared for k < i - k
    ii, ks = meshgrid_lower(cap)
    m = ks < ii - ks
    ii, ks = ii[m], ks[m]
    lhs = kernel_values(kernel, ii, 0 * ii, ks)
    rhs = kernel_values(kernel, ii, 0 * ii, ii - ks)
    for idx in np.flatnonzero(lhs != rhs):
        i_, k_ = int(ii[idx]), int(ks[idx])
        out.append(Violation("fragmentation_symmetry", (i_, 0, k_),
                             f"a({i_},0;{k_}) = {lhs[idx]!r} != a({i_},0;{i_ - k_}) = {rhs[idx]!r}"))
    return AuditReport("structure", cap, tuple(out), checked=int(I.size))


def meshgrid_lower(cap: int):
    """All (i, k) with 1 <= k <= i <= cap, flattened."""
    I, K = np.meshgrid(np.arange(1, cap + 1), np.arange(1, cap + 1), indexing="ij")
    m = K <= I
    return I[m], K[m]


@dataclass(frozen=True, eq=False)
class BoundCertificate:
    """Growth certificate (C, Q, q_{i,k}) and optional exponent alpha.

    ``q`` is vectorized over arrays (i, k) with 1 <= k <= i.
    """

    C: float
    Q: float
    q: Callable
    alpha: float | None = None
    name: str = "certificate"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.C < 1 or self.Q < 1:
            raise ValueError("certificate constants must satisfy C >= 1 and Q >= 1")
        if self.alpha is not None and not 0 <= self.alpha < 0.5:
            raise ValueError("alpha must lie in [0, 1/2)")

    def weights(self, i, k) -> np.ndarray:
        i, k = np.broadcast_arrays(np.asarray(i, dtype=np.int64), np.asarray(k, dtype=np.int64))
        return np.broadcast_to(np.asarray(self.q(i, k), dtype=float), i.shape)

    def describe(self) -> dict:
        return {"name": self.name, "C": self.C, "Q": self.Q, "alpha": self.alpha, **dict(self.params)}


def q_inverse_product(i, k):
    """q_{i,k} = 1 / ((i - k + 1) k), the weights that certify the constant kernel."""
    return 1.0 / ((i - k + 1) * k)


def q_delta_k1(i, k):
    return (k == 1).astype(float)


def q_delta_ki(i, k):
    return (k == i).astype(float)


def q_indicator(kbar: int):
    def q(i, k):
        return (k <= kbar).astype(float)
    return q


Q_RULES = {
    "inverse_product": lambda **_: q_inverse_product,
    "delta_k1": lambda **_: q_delta_k1,
    "delta_ki": lambda **_: q_delta_ki,
    "indicator": lambda kbar, **_: q_indicator(kbar),
}

# slack for the roundoff in products such as k (i-k+1) / ((i-k+1) k)
_CERT_RTOL = 1e-12


def certify_bound(kernel: RateKernel, cert: BoundCertificate, cap: int) -> AuditReport:
    """Verify a supplied growth certificate on all indices up to ``cap``.

    Checks sum_k k (i-k+1) q_{i,k} <= Q i for i <= cap and
    a(i, j; k) <= C (i-k+1)(j+k) q_{i,k} for j >= 1.  With ``cert.alpha``
    set, also a(i, j; k) <= C (i-k+1)^alpha (j^alpha + k^alpha) q_{i,k}
    including j = 0.  Fragmentation entries a(i, 0; k) are otherwise left
    unbounded.
    """
    if cap < 2:
        raise ValueError("cap must be >= 2")
    out: list[Violation] = []
    extra: dict = {"certificate": cert.describe()}

    Ii, Kk = meshgrid_lower(cap)
    qw = cert.weights(Ii, Kk)
    for idx in np.flatnonzero(qw < 0):
        out.append(Violation("q_negative", (int(Ii[idx]), int(Kk[idx])), f"q = {qw[idx]!r}"))
    qsum = np.bincount(Ii, weights=Kk * (Ii - Kk + 1) * qw, minlength=cap + 1)[1:]
    ii = np.arange(1, cap + 1)
    bad = qsum > cert.Q * ii * (1 + _CERT_RTOL)
    for idx in np.flatnonzero(bad):
        out.append(Violation("q_sum", (int(ii[idx]),),
                             f"sum_k k(i-k+1)q = {qsum[idx]!r} > Q*i = {cert.Q * ii[idx]!r}"))
    if bad.any():
        extra["first_q_sum_violation"] = int(ii[np.argmax(bad)])

    I, J, K = _domain_grid(cap, j_min=1)
    a = kernel_values(kernel, I, J, K)
    bound = cert.C * (I - K + 1) * (J + K) * cert.weights(I, K)
    bad = a > bound * (1 + _CERT_RTOL)
    for idx in np.flatnonzero(bad):
        out.append(Violation("growth_bound", (int(I[idx]), int(J[idx]), int(K[idx])),
                             f"a = {a[idx]!r} > {bound[idx]!r}"))
    if bad.any():
        extra["first_growth_violation"] = [int(I[np.argmax(bad)]), int(J[np.argmax(bad)]),
                                           int(K[np.argmax(bad)])]
    checked = int(I.size)

    if cert.alpha is not None:
        al = cert.alpha
        I, J, K = _domain_grid(cap, j_min=0)
        a = kernel_values(kernel, I, J, K)
        jpow = np.power(J.astype(float), al)  # 0**0 == 1
        bound = cert.C * np.power((I - K + 1).astype(float), al) * (jpow + np.power(K.astype(float), al)) \
            * cert.weights(I, K)
        bad = a > bound * (1 + _CERT_RTOL)
        for idx in np.flatnonzero(bad):
            out.append(Violation("alpha_bound", (int(I[idx]), int(J[idx]), int(K[idx])),
                                 f"a = {a[idx]!r} > {bound[idx]!r}"))
        if bad.any():
            extra["first_alpha_violation"] = [int(I[np.argmax(bad)]), int(J[np.argmax(bad)]),
                                              int(K[np.argmax(bad)])]
        checked += int(I.size)
    return AuditReport("certificate", cap, tuple(out), checked=checked, extra=extra)


def certificate_from_spec(spec: Mapping) -> BoundCertificate:
    """Build a certificate from ``{"C":..,"Q":..,"q":rule,"alpha":..,...}``."""
    rule = spec.get("q", "inverse_product")
    if rule not in Q_RULES:
        raise ValueError(f"unknown q rule {rule!r}; choose from {sorted(Q_RULES)}")
    extra = {k: v for k, v in spec.items() if k not in ("C", "Q", "q", "alpha")}
    return BoundCertificate(C=float(spec["C"]), Q=float(spec["Q"]), q=Q_RULES[rule](**extra),
                            alpha=spec.get("alpha"), name=rule, params={"q": rule, **extra})


def reference_certificates() -> list[tuple[RateKernel, BoundCertificate]]:
    """The three worked certificates: constant, EDG product, additive coagulation."""
    return [
        (constant_kernel(), BoundCertificate(2.0, 1.0, q_inverse_product, name="inverse_product")),
        (edg_product_kernel(1.0), BoundCertificate(1.0, 1.0, q_delta_k1, name="delta_k1")),
        (coagfrag_kernel("additive", "constant", coag_scale=1.0),
         BoundCertificate(1.0, 1.0, q_delta_ki, name="delta_ki")),
    ]


def iter_builtin_fixtures() -> Iterable[RateKernel]:
    """One instance of each built-in kernel family, used by the test grids."""
    yield constant_kernel()
    yield unbounded_kernel()
    yield bounded_exchange_kernel(2)
    yield edg_product_kernel()
    yield edg_constant_kernel()
    yield coagfrag_kernel("constant", "zero")
    yield coagfrag_kernel("additive", "constant", coag_scale=1.0, c00=2.0)
