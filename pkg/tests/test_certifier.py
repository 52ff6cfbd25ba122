import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from heomcp.bloch import elementary_symmetric
from heomcp.certifier import (CERTIFIED, CertifierConfig, KernelConstraintError, NotAvailableError,
                              analytic_certificate, bound_eigenvalue_floor, certificate_from_matrix, certify,
                              certify_analytic, certify_model, classify, evaluate_conditions,
                              kernel_constraints, kernel_parametrization, short_time_gate, solve_lyapunov_sdp,
                              strict_decrease, taylor_coefficients, three_level_region, verify, violation_witness)
from heomcp.models import build_model, default_horizon, reduced_system
from heomcp.propagator import propagate

from models_catalog import case


def leaves(cert):
    if cert.parts:
        for p in cert.parts:
            yield from leaves(p)
    else:
        yield cert


def assert_sound(cert, model=None):
    """Independent eigenvalue checks of every leaf, plus a propagation check of e_h."""
    assert cert.certified
    for leaf in leaves(cert):
        L, R, S, a = leaf.L, 0.5 * (leaf.R + leaf.R.T), leaf.S, leaf.anchor
        Q = L.T @ R + R @ L
        assert np.linalg.eigvalsh(-Q)[0] >= -1e-8 * max(np.linalg.norm(Q, 2), 1e-300) - 1e-14
        assert np.linalg.eigvalsh(R - S)[0] >= -1e-8 * np.linalg.norm(R, 2)
        assert abs(a @ (R - S) @ a) <= 1e-8
    if model is not None and cert.mode == "from_zero":
        traj = propagate(model, default_horizon(model), default_horizon(model) / 2000)
        assert np.min(traj.esym[:, traj.h - 1]) >= -1e-8


def monotone_along(leaf, horizon, n=1000, tol=1e-9):
    """<x(t), R x(t)> never increases on a fine grid."""
    step = expm(leaf.L * horizon / n)
    x = leaf.anchor.astype(float)
    R = 0.5 * (leaf.R + leaf.R.T)
    vals = []
    for _ in range(n + 1):
        vals.append(x @ R @ x)
        x = step @ x
    vals = np.array(vals)
    return np.max(np.diff(vals)) <= tol * max(1.0, np.max(np.abs(vals)))


@pytest.mark.parametrize("key", ["jc_weak", "jc_strong", "rev2", "rev2_modified", "rev3", "bath"])
def test_builtin_certificates_are_sound(key):
    model = case(key)
    cert = certify_model(model)
    assert cert.status == CERTIFIED
    assert_sound(cert, model)
    for leaf in leaves(cert):
        assert monotone_along(leaf, default_horizon(model))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 20), st.floats(0.05, 5))
def test_random_jc_soundness(gamma, zeta):
    model = build_model("jaynes_cummings", dict(gamma=gamma, zeta=zeta))
    cert = certify_model(model)
    if cert.certified:
        assert_sound(cert, model)
        assert monotone_along(cert.parts[0] if cert.parts else cert, default_horizon(model))


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 2), st.floats(-1, 2), st.floats(-2, 3), st.sampled_from(["zero", "modified"]))
def test_random_reviving_soundness(g1, g2, alpha, init):
    model = build_model("reviving_2level", dict(gamma1=g1, gamma2=g2, alpha=alpha), init=init)
    cert = certify_model(model)
    if cert.certified:
        assert_sound(cert, model)
    else:
        assert cert.status == "uncertified"


def test_verify_reports_margins():
    red = reduced_system(case("jc_weak"))
    _, R = analytic_certificate(case("jc_weak"))
    v = verify(red.l, red.s_forms[0], red.lambda0, R)
    assert v["ok"] and v["v_m"] <= 1e-12
    v = verify(red.l, red.s_forms[0], red.lambda0, R * 0.5)
    assert not v["ok"] and v["dominance"] < 0


@pytest.mark.parametrize("seed", range(100))
def test_kernel_constraint_equivalence(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 6))
    s = r.standard_normal(n)
    S = np.outer(s, s)
    a = r.standard_normal(n)
    R0, B = kernel_parametrization(S, a)
    R = R0 + np.tensordot(r.standard_normal(B.shape[0]), B, axes=1)
    # adding the projector onto the anchor complement keeps every constraint
    P = np.eye(n) - np.outer(a, a) / (a @ a)
    K, norm = kernel_constraints(S, a)
    assert np.allclose(a @ R @ K, 0, atol=1e-9) and np.isclose(a @ R @ a, norm)
    c = 0.0
    while np.linalg.eigvalsh(R + c * P)[0] < 0:
        c = 2 * c + 1e-3
    R = R + (c + r.uniform(0, 1)) * P
    assert np.linalg.eigvalsh(R)[0] >= -1e-10
    assert np.linalg.eigvalsh(R - S)[0] >= -1e-9 * max(1, np.linalg.norm(R, 2))


def test_kernel_constraints_reject():
    with pytest.raises(KernelConstraintError):
        kernel_constraints(np.eye(2), np.array([1.0, 0.0]))
    with pytest.raises(KernelConstraintError):
        kernel_constraints(np.diag([1.0, 0.0]), np.array([0.0, 1.0]))


def sdp_certifies(model):
    red = reduced_system(model)
    S = red.s_forms[0]
    R, v, _, _ = solve_lyapunov_sdp(red.l, S, red.lambda0)
    return v <= 1e-9 and verify(red.l, S, red.lambda0, R)["ok"]


def printed_conditions(model):
    conds, _ = analytic_certificate(model)
    ev = evaluate_conditions(conds, model.parameters)
    return all(v for k, v in ev.items() if "short" not in k)


@pytest.mark.parametrize("name,init,sampler", [
    ("jaynes_cummings", "zero", lambda r: dict(gamma=r.uniform(-2, 4), zeta=r.uniform(-2, 4))),
    ("reviving_2level", "zero", lambda r: dict(gamma1=r.uniform(-1, 2), gamma2=r.uniform(-1, 2),
                                               alpha=r.uniform(-2, 3), omega=r.uniform(0.5, 2))),
    ("reviving_2level", "modified", lambda r: dict(gamma1=r.uniform(-1, 2), gamma2=r.uniform(-1, 2),
                                                   alpha=r.uniform(-2, 3), omega=r.uniform(0.5, 2))),
])
def test_sdp_matches_printed_conditions(name, init, sampler):
    r = np.random.default_rng(5)
    agree = []
    for _ in range(20):
        model = build_model(name, sampler(r), init=init)
        agree.append(sdp_certifies(model) == printed_conditions(model))
    assert all(agree)


@pytest.mark.parametrize("key", ["jc_weak", "jc_strong", "rev2", "rev2_modified", "rev3", "bath"])
def test_analytic_certificates(key):
    cert = certify_analytic(case(key))
    assert cert.status == CERTIFIED
    assert all(cert.conditions.values())
    assert_sound(cert)


def test_analytic_unavailable():
    with pytest.raises(NotAvailableError):
        analytic_certificate(case("spin_boson"))
    with pytest.raises(NotAvailableError):
        analytic_certificate(build_model("reviving_3level", dict(gamma1=1, gamma2=2, gamma3=1, alpha=1, beta=1)))


def test_jc_gate():
    red = reduced_system(case("jc_strong"))
    S = red.s_forms[0]
    assert short_time_gate(red.l, S, red.lambda0)["passed"]
    for g, z in [(0.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 0.0)]:
        red = reduced_system(build_model("jaynes_cummings", dict(gamma=g, zeta=z)))
        assert not short_time_gate(red.l, S, red.lambda0)["passed"]
        assert not certify_model(build_model("jaynes_cummings", dict(gamma=g, zeta=z))).certified


def test_taylor_coefficients_match_series():
    r = np.random.default_rng(0)
    L = r.standard_normal((3, 3))
    M = r.standard_normal((3, 3))
    M = M + M.T
    x0 = r.standard_normal(3)
    c = taylor_coefficients(L, x0, M, 8)
    t = 0.05
    x = expm(L * t) @ x0
    assert np.isclose(np.polyval(c[::-1], t), x @ M @ x, rtol=1e-10)


def test_strict_decrease_flags_constant_form():
    L = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert not strict_decrease(L, np.eye(2), np.array([1.0, 0.0]))["passed"]
    assert strict_decrease(-np.eye(2), np.eye(2), np.array([1.0, 0.0]))["passed"]


def test_certify_requires_anchor_for_tp_mode():
    red = reduced_system(case("rev2"))
    with pytest.raises(ValueError):
        certify(red, mode="from_tp")
    with pytest.raises(ValueError):
        certify(red, mode="sideways")


def test_certificate_from_matrix_rejects_bad_R():
    model = case("jc_weak")
    red = reduced_system(model)
    cert = certificate_from_matrix(red, np.diag([1.0, -1.0]) / 4)
    assert not cert.certified


def test_certificate_json():
    cert = certify_model(case("bath"))
    data = json.loads(cert.dumps())
    assert data["status"] == "certified" and len(data["parts"]) == 2


def test_three_level_region():
    assert three_level_region(-0.25, 0.0) == "a"
    assert three_level_region(1.0, -1.0) == "b"
    assert three_level_region(-0.25, -0.6) is None
    assert three_level_region(0.0, 1.0) is None


def test_classify_labels():
    assert classify(build_model("reviving_3level", dict(gamma=1.0, alpha=1.0, beta=1.0)))["label"] == "analytic"
    assert classify(build_model("reviving_3level", dict(gamma=1.0, alpha=-1.0, beta=-2.0)))["label"] == "violating"
    res = classify(case("spin_boson"))
    assert res["label"] == "violating" and not res["numeric"]


def test_violation_witness():
    assert not violation_witness(case("rev2"))["violating"]
    w = violation_witness(case("spin_boson"))
    assert w["violating"] and w["min_eig"] < -1e-8


def test_uncertified_spin_boson_from_zero():
    cert = certify_model(case("spin_boson"))
    assert not cert.certified


def test_floor_unproven_for_tiny_delta():
    cert = bound_eigenvalue_floor(case("spin_boson"), 1e-12)
    assert not cert.certified


def test_floor_rejects_bad_delta():
    with pytest.raises(ValueError):
        bound_eigenvalue_floor(case("spin_boson"), -1.0)


def test_floor_trivial_when_already_certified():
    cert = bound_eigenvalue_floor(case("rev2"), 1e-3)
    assert cert.certified


def test_config_is_serializable():
    assert json.dumps(CertifierConfig().to_json())


def test_eh_helper_consistency():
    model = case("rev3")
    red = reduced_system(model)
    lam = red.trajectory([0.7])[0]
    assert np.isclose(red.eh(lam), elementary_symmetric(red.chi(lam), red.h))
