import json

import numpy as np
import pytest

from heomcp.bloch import chi_of_transfer, elementary_symmetric
from heomcp.certifier import classify
from heomcp.models import (ModelError, build_model, chi_polys, default_horizon, eh_factorization,
                           krylov_reduction, model_from_json, reduced_system, reduction_residual,
                           reviving2_condition_consistent, reviving2_condition_printed)

from models_catalog import CASES, case


def random_times(model, n=100, seed=0):
    return np.sort(np.random.default_rng(seed).uniform(0, 0.5 * default_horizon(model), n))


@pytest.mark.parametrize("key", list(CASES))
def test_reduction_reproduces_full_model(key):
    model = case(key)
    red = reduced_system(model)
    assert reduction_residual(model, red, random_times(model, 25)) <= 1e-9


@pytest.mark.parametrize("key", list(CASES))
def test_factorization_matches_chi(key):
    model = case(key)
    red = reduced_system(model)
    fac = red.factorization
    worst = 0.0
    for t in random_times(model):
        chi = chi_of_transfer(model.system_map(t))
        lam = red.extract(model.extended_map(t))
        worst = max(worst, abs(elementary_symmetric(chi, red.h) - float(fac.product(lam))))
    assert worst <= 1e-9


def test_spin_boson_shifted_factorization():
    model = case("spin_boson")
    red = reduced_system(model)
    delta = 1e-2
    fac = eh_factorization(model, delta)
    for t in random_times(model, 30):
        chi = chi_of_transfer(model.system_map(t)) + delta * np.eye(4)
        lam = red.extract(model.extended_map(t))
        assert abs(np.linalg.det(chi).real - float(fac.product(lam))) <= 1e-9


@pytest.mark.parametrize("key", list(CASES))
def test_chi_structure_zeros_hold_along_trajectory(key):
    model = case(key)
    red = reduced_system(model)
    polys = chi_polys(red.transfer_poly)
    zeros = [(a, b) for a in range(4) for b in range(4) if polys[a][b].max_abs_coefficient() < 1e-14]
    assert zeros
    for t in random_times(model, 50):
        chi = chi_of_transfer(model.system_map(t))
        assert max(abs(chi[a, b]) for a, b in zeros) <= 1e-10


@pytest.mark.parametrize("alpha_t,beta_t", [(0.5, 1.0), (-0.3, 0.0), (-0.8, -1.5), (2.0, -1.5), (1.0, 2.5)])
@pytest.mark.parametrize("c", [0.5, 2.0])
def test_three_level_classification_is_scale_invariant(alpha_t, beta_t, c):
    gamma, omega = 0.7, 1.3
    alpha, beta = alpha_t * gamma ** 2 / omega ** 2, beta_t * gamma ** 2 / omega ** 2
    ref = classify(build_model("reviving_3level", dict(gamma=gamma, omega=omega, alpha=alpha, beta=beta)))
    scaled = classify(build_model("reviving_3level", dict(gamma=c * gamma, omega=c * omega, alpha=alpha, beta=beta)))
    assert ref["label"] == scaled["label"]


def test_build_model_errors():
    with pytest.raises(ModelError):
        build_model("nope", {})
    with pytest.raises(ModelError):
        build_model("jaynes_cummings", dict(gamma=1.0))
    with pytest.raises(ModelError):
        build_model("jaynes_cummings", dict(gamma=1.0, zeta=np.inf))
    with pytest.raises(ModelError):
        build_model("jaynes_cummings", dict(gamma=1.0, zeta=1.0), init="modified")


def test_modified_initial_condition_has_zero_initial_slope():
    model = case("rev2_modified")
    L = model.generator
    rate = (L @ model.initial_extended_map)[:4]
    assert np.allclose(rate, 0)


def test_json_round_trip():
    model = case("rev3")
    again = model_from_json(json.dumps(model.to_json()))
    assert np.allclose(again.generator, model.generator)
    assert np.allclose(again.initial_extended_map, model.initial_extended_map)


def test_json_terms_schema():
    data = {"levels": 1, "blocks": [{"i": 1, "j": 1, "terms": [
        {"coeff": 0.5, "left": "sz", "right": "sz"}, {"coeff": -0.5, "left": "id", "right": "id"}]}]}
    m = model_from_json(data)
    assert np.allclose(np.diag(m.generator), [0, -1, -1, 0])


@pytest.mark.parametrize("bad", ["{not json", {"levels": 1}, {"levels": 1, "blocks": [{"i": 3, "j": 1, "transfer": np.eye(4).tolist()}]},
                                 {"levels": 1, "blocks": [{"i": 1, "j": 1, "terms": [{"left": "sq", "right": "sx"}]}]}])
def test_json_rejects_malformed(bad):
    with pytest.raises(ModelError):
        model_from_json(bad)


def test_krylov_reduction_of_user_model():
    model = model_from_json(case("rev2").to_json())
    red = krylov_reduction(model)
    assert red.d <= 8
    assert reduction_residual(model, red, [0.3, 1.0, 4.0]) <= 1e-9
    assert red.h == 2


def test_reviving_condition_forms_agree_at_unit_frequency():
    for a in (-1.0, -0.1, 0.0, 2.0):
        assert reviving2_condition_printed(0.5, 0.5, a) == reviving2_condition_consistent(0.5, 0.5, a, 1.0)
    assert reviving2_condition_consistent(0.5, 0.5, -0.05, 2.0) != reviving2_condition_printed(0.5, 0.5, -0.05)
