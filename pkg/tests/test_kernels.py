import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dged.kernels import (BoundCertificate, KernelDomainError, audit_structure, bounded_exchange_kernel,
                          builtin_kernel, certificate_from_spec, certify_bound, coagfrag_kernel,
                          constant_kernel, edg_constant_kernel, edg_product_kernel, evaluate,
                          iter_builtin_fixtures, load_table_kernel, make_coagfrag_kernel, make_edg_kernel,
                          make_table_kernel, q_delta_k1, q_indicator, q_inverse_product,
                          reference_certificates, unbounded_kernel)

from conftest import BUILTINS


# --- evaluate -------------------------------------------------------------

def test_constant_kernel_value():
    assert evaluate(constant_kernel(), 5, 3, 2) == 1.0


def test_constant_kernel_null_rule():
    assert evaluate(constant_kernel(), 4, 0, 4) == 0.0


def test_unbounded_kernel_by_substitution():
    i, j, k = 3, 2, 1
    expected = (i - k + 1) * (j + k + 1) / (1 + (i - k) * k)
    assert expected == 4
    assert evaluate(unbounded_kernel(), i, j, k) == expected


@pytest.mark.parametrize("i,j,k", [(3, 0, 4), (2, 1, 0), (1, 1, -1)])
def test_evaluate_rejects_out_of_domain(i, j, k):
    with pytest.raises(KernelDomainError):
        evaluate(constant_kernel(), i, j, k)


def test_evaluate_rejects_negative_j():
    with pytest.raises(KernelDomainError):
        evaluate(constant_kernel(), 2, -1, 1)


# --- EDG ------------------------------------------------------------------

def test_edg_product_values():
    K = make_edg_kernel(lambda i, j: i * j)
    assert evaluate(K, 2, 3, 1) == 6
    assert evaluate(K, 2, 3, 2) == 0
    assert K.max_exchange == 1


def test_edg_kernels_break_coagulation_symmetry():
    # a(1,j;1) = K(1,j) while a(j,1;j) = 0 for j > 1, so the literal
    # delta-k kernel cannot satisfy a(k,j;k) = a(j,k;j)
    rep = audit_structure(edg_product_kernel(), 10)
    assert not rep.passed
    assert rep.count("coagulation_symmetry") == 9
    assert {v.kind for v in rep.violations} == {"coagulation_symmetry"}
    assert all(v.triple[0] > 1 and v.triple[2] == v.triple[0] and v.triple[1] == 1 for v in rep.violations)


def test_edg_constant_also_breaks_fragmentation_symmetry():
    rep = audit_structure(edg_constant_kernel(), 20)
    assert rep.count("coagulation_symmetry") == 19
    assert rep.count("fragmentation_symmetry") > 0
    assert rep.count("nonnegativity") == 0 and rep.count("null_rule") == 0


# --- coag-frag ------------------------------------------------------------

def test_coagfrag_mapping():
    K = make_coagfrag_kernel(lambda i, j: 2.0, lambda i, j: 0.0, 1.0)
    assert evaluate(K, 3, 4, 3) == 1.0
    assert evaluate(K, 3, 4, 1) == 0.0
    assert K.bath_concentration == 1.0


def test_coagfrag_fragmentation_entry():
    K = make_coagfrag_kernel(lambda i, j: 0.0, lambda i, j: 1.0, 2.0)
    assert evaluate(K, 5, 0, 2) == 0.25
    assert evaluate(K, 5, 0, 5) == 0.0


@pytest.mark.parametrize("c00", [0.0, -1.0])
def test_coagfrag_rejects_nonpositive_bath(c00):
    with pytest.raises(ValueError):
        make_coagfrag_kernel(lambda i, j: 1.0, lambda i, j: 1.0, c00)


# --- audit_structure -------------------------------------------------------

def test_constant_kernel_audit_clean():
    rep = audit_structure(constant_kernel(), 20)
    assert rep.passed and len(rep.violations) == 0


def test_constructed_symmetry_counterexample():
    K = make_table_kernel({(2, 1, 2): 1.0})
    rep = audit_structure(K, 3)
    assert len(rep.violations) == 1
    v = rep.violations[0]
    assert v.kind == "coagulation_symmetry" and v.triple == (2, 1, 2)


def test_table_null_rule_flagged():
    K = make_table_kernel({(3, 0, 3): 0.5})
    rep = audit_structure(K, 4)
    assert [(v.kind, v.triple) for v in rep.violations] == [("null_rule", (3, 0, 3))]


def test_negative_entry_flagged():
    from dged.kernels import RateKernel
    K = RateKernel("closed", lambda i, j, k: np.where((i == 2) & (j == 2) & (k == 1), -1.0, 0.0), name="neg")
    assert audit_structure(K, 3).count("nonnegativity") == 1


def test_table_rejects_negative_values():
    with pytest.raises(ValueError):
        make_table_kernel({(2, 2, 1): -1.0})


@pytest.mark.parametrize("kernel", [k for k in BUILTINS if not k.name.startswith("edg")], ids=lambda k: k.name)
def test_symmetric_builtins_pass_structure_audit_to_50(kernel):
    assert audit_structure(kernel, 50).passed


# --- table files -------------------------------------------------------------

def test_load_table_kernel(tmp_path):
    p = tmp_path / "k.csv"
    p.write_text("i,j,k,value\n2,1,1,0.5\n1,2,1,0.5\n")
    K = load_table_kernel(p)
    assert evaluate(K, 2, 1, 1) == 0.5
    assert evaluate(K, 3, 3, 1) == 0.0


def test_load_table_rejects_k_above_i(tmp_path):
    p = tmp_path / "k.csv"
    p.write_text("i,j,k,value\n1,1,2,1.0\n")
    with pytest.raises(ValueError):
        load_table_kernel(p)


def test_load_table_rejects_bad_header(tmp_path):
    p = tmp_path / "k.csv"
    p.write_text("a,b,c,d\n1,1,1,1.0\n")
    with pytest.raises(ValueError):
        load_table_kernel(p)


# --- certificates ------------------------------------------------------------

@pytest.mark.parametrize("pair", reference_certificates(), ids=lambda p: p[1].name)
def test_reference_certificates_pass(pair):
    kernel, cert = pair
    assert certify_bound(kernel, cert, 30).passed


def test_edg_product_certificate_with_constant():
    C0 = 3.5
    cert = BoundCertificate(C0, 1.0, q_delta_k1)
    assert certify_bound(edg_product_kernel(C0), cert, 30).passed


def test_constant_kernel_alpha_zero_fails():
    cert = BoundCertificate(2.0, 1.0, q_inverse_product, alpha=0.0)
    rep = certify_bound(constant_kernel(), cert, 30)
    assert not rep.passed
    assert rep.count("alpha_bound") > 0
    assert rep.extra["first_alpha_violation"] is not None


def test_q_sum_violation_records_first_i():
    # q = 1 everywhere: sum_k k(i-k+1) grows like i^3/6, exceeding Q*i from i = 2
    cert = BoundCertificate(1.0, 1.0, lambda i, k: np.ones_like(np.asarray(i, dtype=float)))
    rep = certify_bound(constant_kernel(), cert, 10)
    assert rep.count("q_sum") > 0
    assert rep.extra["first_q_sum_violation"] == 2


def test_certificate_rejects_bad_constants():
    with pytest.raises(ValueError):
        BoundCertificate(0.5, 1.0, q_inverse_product)
    with pytest.raises(ValueError):
        BoundCertificate(1.0, 1.0, q_inverse_product, alpha=0.5)


def test_certificate_from_spec_roundtrip():
    cert = certificate_from_spec({"C": 2, "Q": 1, "q": "inverse_product"})
    assert certify_bound(constant_kernel(), cert, 12).passed


@given(kbar=st.integers(1, 5), scale=st.floats(0.1, 4.0))
def test_bounded_exchange_certificate(kbar, scale):
    # a <= Cbar*i*j with k <= kbar implies the certificate C = kbar*Cbar, q = [k <= kbar]
    K = bounded_exchange_kernel(kbar, scale)
    cap = 14
    i, j, k = np.meshgrid(np.arange(1, cap + 1), np.arange(1, cap + 1), np.arange(1, cap + 1), indexing="ij")
    m = k <= i
    from dged.kernels import kernel_values
    vals = kernel_values(K, i[m], j[m], k[m])
    cbar = float(np.max(vals / (i[m] * j[m])))
    cert = BoundCertificate(max(1.0, kbar * cbar), 1.0, q_indicator(kbar))
    rep = certify_bound(K, cert, cap)
    assert rep.count("growth_bound") == 0


# --- purity / registry ---------------------------------------------------------

@given(i=st.integers(1, 40), j=st.integers(0, 40), k=st.integers(1, 40))
def test_evaluate_is_pure_and_nonnegative(i, j, k):
    if k > i:
        return
    for K in BUILTINS:
        a = evaluate(K, i, j, k)
        assert a >= 0
        assert math.copysign(1, a) == 1 or a == 0
        assert evaluate(K, i, j, k) == a


@given(p=st.integers(1, 60))
def test_null_rule_all_builtins(p):
    for K in BUILTINS:
        assert evaluate(K, p, 0, p) == 0.0


def test_builtin_registry_names():
    for name in ("constant", "unbounded", "edg_product", "edg_constant"):
        assert builtin_kernel(name).name
    K = builtin_kernel("coagfrag", coag="additive", frag="constant", c00=2.0)
    assert K.bath_concentration == 2.0
    with pytest.raises(ValueError):
        builtin_kernel("nope")


def test_fixture_list_has_every_form():
    forms = {K.form for K in iter_builtin_fixtures()}
    assert {"closed", "delta_k1", "coagfrag"} <= forms


def test_coagfrag_registry_mapping():
    K = coagfrag_kernel("product", "constant", coag_scale=2.0, frag_scale=1.0, c00=4.0)
    assert evaluate(K, 2, 3, 2) == pytest.approx(0.5 * 2.0 * 2 * 3)
    assert evaluate(K, 4, 0, 1) == pytest.approx(1.0 / 8.0)
