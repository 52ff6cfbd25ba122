import json

import numpy as np
import pytest

from heomcp.models import build_model, dephasing
from heomcp.models import _T as sandwich_transfer
from heomcp.propagator import propagate
from heomcp.bloch import transfer_of_chi
from heomcp.synthesis import (PRESETS, SynthesisError, _next_level, assemble_model, chi_of_coefficients, constraint_residual,
                              generalized_target, jaynes_cummings_target, reviving_target, solve_generator_level,
                              synthesize_heom, target_from_callable, transfer_of_coefficients, verify_synthesis)

I4 = np.eye(4)
ZZ = sandwich_transfer((1, "sz", "sz"))


def derivative_table(target, order=10):
    return [[target.derivative(0.0, v) for v in range(order)]]


def extend(derivs, blocks, omega):
    derivs = [list(d) for d in derivs]
    for level in blocks:
        derivs.append(_next_level(derivs, level, omega))
    return derivs


def printed_reviving(gamma, omega):
    return [[0.5 * gamma * dephasing("sz")], [0.5 * omega * dephasing("sz"), gamma * ZZ]]


def printed_generalized(gamma, alpha, omega):
    return [[0.5 * gamma * dephasing("sz")], [alpha * omega * dephasing("sz"), gamma * ZZ],
            [np.zeros((4, 4)), omega * (1 - 2 * alpha) * ZZ, gamma * ZZ]]


def printed_jc(gamma, zeta):
    model = build_model("jaynes_cummings", dict(gamma=gamma, zeta=zeta))
    B = model.blocks
    zero = np.zeros((4, 4))
    return [[zero], [B[1][0], B[1][1]], [zero, B[2][1], B[2][2]]]


CASES = [
    ("reviving", reviving_target(0.5, 1.0), printed_reviving(0.5, 1.0)),
    ("reviving_fast", reviving_target(0.2, 3.0), printed_reviving(0.2, 3.0)),
    ("generalized", generalized_target(0.5, 0.3, 1.0), printed_generalized(0.5, 0.3, 1.0)),
    ("generalized_b", generalized_target(0.1, 2.0, 2.0), printed_generalized(0.1, 2.0, 2.0)),
    ("jc", jaynes_cummings_target(1.0, 1.0), printed_jc(1.0, 1.0)),
    ("jc_overdamped", jaynes_cummings_target(0.1, 1.0), printed_jc(0.1, 1.0)),
]


@pytest.mark.parametrize("name,target,printed", CASES, ids=[c[0] for c in CASES])
def test_printed_solutions_are_feasible(name, target, printed):
    derivs = derivative_table(target)
    derivs = extend(derivs, printed[:-1], target.omega)
    for k, level in enumerate(printed, start=1):
        scale = max(1.0, np.max(np.abs(derivs[0][k])))
        assert constraint_residual(derivs, k, level, n_conditions=k) <= 1e-10 * scale


@pytest.mark.parametrize("name,target,printed", CASES, ids=[c[0] for c in CASES])
def test_constraint_check_detects_perturbation(name, target, printed):
    derivs = extend(derivative_table(target), printed[:-1], target.omega)
    k = len(printed)
    bumped = [T.copy() for T in printed[-1]]
    bumped[0] = bumped[0] + 1e-2 * ZZ
    assert constraint_residual(derivs, k, bumped, n_conditions=k) > 1e-4


@pytest.mark.parametrize("name,target,printed", CASES, ids=[c[0] for c in CASES])
def test_synthesis_round_trip(name, target, printed):
    res = synthesize_heom(target)
    assert res.terminated and res.depth == len(printed)
    assert max(res.residuals) <= 1e-10
    assert verify_synthesis(res, target) <= 1e-8
    # the printed HEOM reproduces the same target
    model = assemble_model(printed, target.omega)
    assert max(np.max(np.abs(model.system_map(t) - target.transfer(t))) for t in np.linspace(0, 10, 41)) <= 1e-8


@pytest.mark.parametrize("name,target,printed", CASES, ids=[c[0] for c in CASES])
def test_derivative_conditions_of_synthesized_levels(name, target, printed):
    res = synthesize_heom(target)
    derivs = extend(derivative_table(target, 12), res.blocks, target.omega)
    for k in range(1, res.depth + 1):
        scale = max(1.0, np.max(np.abs(derivs[0][k])))
        # rho~_{k+1}^{(v)}(0) = 0 for v = 0 .. k-2 on all four basis inputs (columns)
        for v in range(max(k - 1, 0)):
            assert np.max(np.abs(derivs[k][v])) <= 1e-10 * scale


@pytest.mark.parametrize("name,target,printed", CASES, ids=[c[0] for c in CASES])
def test_triangular_convention(name, target, printed):
    res = synthesize_heom(target)
    L = res.model.generator
    n = res.depth
    for i in range(n):
        for j in range(n):
            B = L[4 * i:4 * i + 4, 4 * j:4 * j + 4]
            if j == i + 1:
                assert np.array_equal(B, target.omega * I4)
            elif j > i + 1:
                assert not B.any()


def test_preset_depths():
    args = {"reviving": (0.5, 1.0), "generalized": (0.5, 0.3, 1.0), "jaynes_cummings": (1.0, 1.0)}
    for name, (factory, depth) in PRESETS.items():
        assert synthesize_heom(factory(*args[name])).depth == depth


def test_reviving_blocks_chi_form():
    res = synthesize_heom(reviving_target(0.5, 2.0))
    chi21 = res.chi_blocks()[1][0]
    assert np.allclose(chi21, np.diag([-1.0, 0, 0, 1.0]), atol=1e-10)


def test_critical_jc_target():
    # zeta = 2 gamma makes the square root vanish; the amplitude gains a t exp(st) term
    target = jaynes_cummings_target(0.5, 1.0)
    assert any(p == 1 for _, _, p in target.terms)
    res = synthesize_heom(target)
    assert res.terminated and verify_synthesis(res, target) <= 1e-8


def test_jc_synthesis_reproduces_builtin_dynamics():
    target = jaynes_cummings_target(10.0, 1.0)
    res = synthesize_heom(target)
    ref = propagate(build_model("jaynes_cummings", dict(gamma=10.0, zeta=1.0)), 5.0, 0.05)
    got = propagate(res.model, 5.0, 0.05)
    assert np.max(np.abs(ref.transfer - got.transfer)) <= 1e-8


def test_callable_target():
    base = reviving_target(0.5, 1.0)
    target = target_from_callable(base.transfer, 1.0)
    res = synthesize_heom(target, max_depth=2, check_order=1, grid_points=20)
    assert res.depth >= 1
    assert np.allclose(target.derivative(0.3, 1), base.derivative(0.3, 1), atol=1e-7)
    with pytest.raises(ValueError):
        target.derivative(0.0, 5)


def test_inconsistent_level_raises():
    derivs = [[np.eye(4), np.zeros((4, 4)), np.eye(4)]]
    # A' = 0 but A'' != 0 cannot be matched by a single constant block
    with pytest.raises(SynthesisError):
        solve_generator_level(derivs, 1, n_conditions=2)


def test_coefficient_maps():
    c = np.arange(16, dtype=float)
    chi = chi_of_coefficients(c)
    assert np.allclose(chi, chi.conj().T)
    assert np.allclose(transfer_of_coefficients(c), transfer_of_chi(chi))


def test_result_json():
    res = synthesize_heom(reviving_target(0.5, 1.0))
    data = json.loads(res.dumps())
    assert data["synthesis"]["depth"] == 2 and data["levels"] == 2


def test_bad_depth():
    with pytest.raises(ValueError):
        synthesize_heom(reviving_target(0.5, 1.0), max_depth=0)
