import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dged.analysis import (EquilibriumError, SigmaFunction, audit_sigma, check_moment_bound,
                           detailed_balance_residual, equilibrium_from_mass, lyapunov_rate, lyapunov_v,
                           power_sigma, profile_from_spec, sigma_inequality_audit, sigma_tilde, stationarity,
                           superadditivity_scan, truncation_convergence)
from dged.fluxes import rhs
from dged.integrate import IntegratorConfig, integrate
from dged.kernels import (BoundCertificate, constant_kernel, edg_constant_kernel, evaluate, q_inverse_product,
                          unbounded_kernel)
from dged.state import InitialSpec, Variant, build_initial

from conftest import state_of

CONST_CERT = BoundCertificate(2.0, 1.0, q_inverse_product)


# --- sigma ----------------------------------------------------------------------

def test_sigma_tilde_examples():
    sq = power_sigma(2.0)
    assert sigma_tilde(sq, 2, 0, 1) == -2.0
    for i in range(1, 8):
        assert sigma_tilde(power_sigma(1.5), i, 0, i) == 0.0


def test_sigma_tilde_inequality_point():
    s = power_sigma(1.5)
    i, j, k = 3, 2, 1
    assert (j + k) * sigma_tilde(s, i, j, k) <= s.m_sigma * (j * s(k) + k * s(j))
    assert s.m_sigma == 2.0


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_sigma_inequality_exhaustive(p):
    rep = sigma_inequality_audit(power_sigma(p), 40, 40)
    assert rep.passed, rep.violations[:3]


def test_sigma_inequality_detects_small_m():
    s = SigmaFunction("power", exponent=2.0, m_sigma=0.5)
    assert not sigma_inequality_audit(s, 10, 10).passed


@pytest.mark.parametrize("p", [2.5, 3.0])
def test_default_m_sigma_for_steeper_powers(p):
    s = power_sigma(p)
    assert s.sigma_class == "E1" and s.A_sigma == 2 ** (p - 1)
    assert sigma_inequality_audit(s, 30, 30).passed


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0, 3.0])
def test_audit_sigma_powers(p):
    assert audit_sigma(power_sigma(p)).passed


def test_audit_sigma_catches_concave():
    s = SigmaFunction("custom", func=np.sqrt, m_sigma=2.0)
    kinds = {v.kind for v in audit_sigma(s, 10.0, 101).violations}
    assert "sigma_convexity" in kinds and "sigma_superlinear" in kinds


def test_sigma_rejects_bad_input():
    with pytest.raises(ValueError):
        power_sigma(1.0)
    with pytest.raises(ValueError):
        SigmaFunction("custom", func=np.square)
    with pytest.raises(ValueError):
        SigmaFunction("nope", exponent=2)


def test_superadditivity_scan_three_halves():
    res = superadditivity_scan(power_sigma(1.5), eta=0.5, p_max=256)
    assert res["holds_from_M0"]
    assert res["M0"] <= 64


def brute_superadditive(p_val, eta, M0, p_max):
    s = lambda x: x ** p_val  # noqa: E731
    return all(s(p) - s(p - k) - s(k) >= eta * s(p - 1) / (p - 1) * (1 - 1e-12)
               for p in range(M0, p_max + 1) for k in range(1, p))


def test_superadditivity_scan_matches_brute_force():
    res = superadditivity_scan(power_sigma(1.5), eta=0.5, p_max=80)
    M0 = res["M0"]
    assert brute_superadditive(1.5, 0.5, M0, 80)
    if M0 > 2:
        assert not brute_superadditive(1.5, 0.5, M0 - 1, 80)


# --- moment bound -----------------------------------------------------------------

def mono(N, size=1):
    return build_initial(InitialSpec("monodisperse", N, size=size))


def test_moment_bound_constant_kernel():
    s = power_sigma(1.5)
    traj = integrate(constant_kernel(), mono(32), IntegratorConfig(sample_times=(0.0, 0.25, 0.5, 1.0)), sigma=s)
    rep = check_moment_bound(traj, s, CONST_CERT)
    assert rep.K == 8.0
    assert rep.passed and rep.max_ratio <= math.exp(8.0)


def test_moment_bound_at_t0_is_one():
    s = power_sigma(2.0)
    traj = integrate(constant_kernel(), mono(8), IntegratorConfig(sample_times=(0.0,)))
    rep = check_moment_bound(traj, s, CONST_CERT)
    assert rep.max_ratio == 1.0 and rep.T == 0.0


def test_moment_bound_zero_state_ratio_one():
    traj = integrate(constant_kernel(), state_of(np.zeros(5)), IntegratorConfig(sample_times=(0.0, 1.0)))
    assert check_moment_bound(traj, power_sigma(1.5), CONST_CERT).max_ratio == 1.0


def test_moment_bound_rejects_non_isolated():
    s0 = build_initial(InitialSpec("monodisperse", 4), Variant.NON_ISOLATED, bath=1.0)
    traj = integrate(constant_kernel(), s0, IntegratorConfig(sample_times=(0.0,)))
    with pytest.raises(ValueError):
        check_moment_bound(traj, power_sigma(1.5), CONST_CERT)


# --- detailed balance and equilibria ------------------------------------------------

def residual_oracle(kernel, O, N):
    best = 0.0
    for k in range(1, N + 1):
        for q in range(k, N + 1):
            for p in range(0, N - k + 1):
                r = abs(evaluate(kernel, q, p, k) * O[q] * O[p]
                        - evaluate(kernel, p + k, q - k, k) * O[p + k] * O[q - k])
                best = max(best, r)
    return best


def test_constant_kernel_detailed_balance():
    rep = detailed_balance_residual(constant_kernel(), np.ones(11), 10)
    assert rep.max_residual == 0.0


def test_edg_constant_residual_matches_enumeration():
    O = np.ones(5)
    rep = detailed_balance_residual(edg_constant_kernel(), O, 4)
    assert rep.max_residual == residual_oracle(edg_constant_kernel(), O, 4)
    # every k = 1 pair has both coefficients equal to 1, and k > 1 entries vanish
    assert rep.max_residual == 0.0
    assert rep.checked == sum((5 - k) * (5 - k) for k in range(1, 5))


def test_residual_matches_enumeration_unbounded():
    O = 0.7 ** np.arange(7)
    rep = detailed_balance_residual(unbounded_kernel(), O, 6)
    assert rep.max_residual == pytest.approx(residual_oracle(unbounded_kernel(), O, 6), rel=1e-14)


@pytest.mark.parametrize("N,rho,z", [(1, 0.5, 0.5), (2, 3.0, 1.0)])
def test_equilibrium_examples(N, rho, z):
    eq = equilibrium_from_mass(np.ones(N + 1), N, rho)
    assert eq.z == pytest.approx(z, rel=1e-14)


@given(rho=st.floats(1e-12, 1e3), N=st.integers(1, 40))
def test_equilibrium_mass_matches(rho, N):
    eq = equilibrium_from_mass(np.ones(N + 1), N, rho)
    assert eq.z > 0
    assert abs(eq.mass - rho) <= 1e-12 * rho


def test_equilibrium_tiny_mass_small_z():
    assert equilibrium_from_mass(np.ones(9), 8, 1e-10).z < 1e-9


def test_equilibrium_unbracketable():
    with pytest.raises(EquilibriumError):
        equilibrium_from_mass(np.ones(3), 2, 1e308)


def test_equilibrium_bad_profile():
    with pytest.raises(ValueError):
        equilibrium_from_mass(np.array([2.0, 1.0]), 1, 1.0)
    with pytest.raises(ValueError):
        equilibrium_from_mass(np.array([1.0, 0.0]), 1, 1.0)
    with pytest.raises(ValueError):
        equilibrium_from_mass(np.ones(2), 1, 0.0)


@pytest.mark.parametrize("rho", [0.1, 1.0, 7.0])
def test_equilibrium_is_stationary(rho):
    eq = equilibrium_from_mass(np.ones(11), 10, rho)
    r, scale = stationarity(constant_kernel(), eq.state())
    assert r <= 1e-12 * scale


# --- Lyapunov -------------------------------------------------------------------------

@pytest.mark.parametrize("c,O,expected", [
    ([1.0, 1.0], [1.0, 1.0], -2.0),
    ([0.0, 0.0], [1.0, 1.0], 0.0),
    ([1.0, math.e], [1.0, 1.0], -1.0),
])
def test_lyapunov_v_examples(c, O, expected):
    assert lyapunov_v(np.array(c), np.array(O)) == pytest.approx(expected, abs=1e-15)


def test_lyapunov_rate_zero_at_equilibrium():
    eq = equilibrium_from_mass(np.ones(9), 8, 1.3)
    r = lyapunov_rate(constant_kernel(), eq.state(), eq.O)
    assert r.finite and abs(r.value) <= 1e-12


positive = arrays(float, 9, elements=st.floats(1e-3, 5.0))


@given(positive)
def test_lyapunov_rate_nonpositive_constant_kernel(c):
    r = lyapunov_rate(constant_kernel(), state_of(c), np.ones(9))
    assert r.finite and r.value <= 1e-12 * (1 + abs(r.value))


@given(positive, arrays(float, 9, elements=st.floats(0.2, 3.0)))
def test_lyapunov_rate_equals_chain_rule(c, O):
    # isolated variant: dV/dt = sum_i c_i' log(c_i / O_i)
    s = state_of(c)
    for K in (constant_kernel(), unbounded_kernel()):
        r = lyapunov_rate(K, s, O)
        d = rhs(K, s)
        chain = math.fsum(d * np.log(c / O))
        scale = math.fsum(np.abs(d * np.log(c / O))) + 1e-300
        assert abs(r.value - chain) <= 1e-11 * scale


def test_lyapunov_rate_flags_zero():
    r = lyapunov_rate(constant_kernel(), state_of([1.0, 1.0, 0.0, 1.0]), np.ones(4))
    assert not r.finite and math.isnan(r.value) and r.offending is not None


def test_lyapunov_decreases_along_run():
    c0 = 0.5 ** np.arange(13) + 0.01
    s0 = state_of(c0)
    O = np.ones(13)
    traj = integrate(constant_kernel(), s0, IntegratorConfig(sample_times=tuple(np.linspace(0, 5, 26))),
                     lyapunov=lambda st_: lyapunov_v(st_, O))
    V = [s.moments.lyapunov for s in traj.samples]
    tol = 1e-8 * abs(V[0])
    assert all(b <= a + tol for a, b in zip(V, V[1:]))


# --- truncation sweeps ---------------------------------------------------------------

def test_sweep_single_N_has_no_deltas():
    tab = truncation_convergence(constant_kernel(), InitialSpec("monodisperse", 8), (1.0,), (8,))
    assert all(r[4] is None for r in tab.rows)
    assert len(tab.rows) == 9


def test_sweep_constant_kernel_converges():
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-15)
    tab = truncation_convergence(constant_kernel(), InitialSpec("monodisperse", 16), (1.0,), (16, 32, 64),
                                 config=cfg)
    for i in range(9):
        d = tab.deltas(i, 1.0)
        assert len(d) == 2 and d[1] < d[0]


def test_sweep_edg_constant_converges_at_t10():
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-15)
    tab = truncation_convergence(edg_constant_kernel(), InitialSpec("monodisperse", 16), (10.0,), (16, 32, 64),
                                 config=cfg)
    for i in range(9):
        d = tab.deltas(i, 10.0)
        assert d[1] < d[0]


def test_sweep_rejects_unsorted():
    with pytest.raises(ValueError):
        truncation_convergence(constant_kernel(), InitialSpec("monodisperse", 8), (1.0,), (16, 8))


def test_sweep_accepts_value_list_and_callable():
    vals = [0.0, 1.0, 0.5]
    a = truncation_convergence(constant_kernel(), vals, (0.5,), (4, 8))
    b = truncation_convergence(constant_kernel(),
                               lambda N: state_of(np.pad(vals, (0, N + 1 - len(vals)))), (0.5,), (4, 8))
    assert a.rows == b.rows


def test_profile_from_spec():
    assert profile_from_spec(None, 3).tolist() == [1, 1, 1, 1]
    assert profile_from_spec({"values": [1, 2, 3]}, 2).tolist() == [1, 2, 3]
    assert profile_from_spec({"type": "geometric", "ratio": 0.5}, 2).tolist() == [1, 0.5, 0.25]
