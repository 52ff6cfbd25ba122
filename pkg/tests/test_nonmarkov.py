import json

import numpy as np
import pytest

from heomcp.bloch import density_of_bloch
from heomcp.models import build_model
from heomcp.nonmarkov import (BlpConfig, backflow, blp_analysis, blp_measure, bloch_blocks, extended_maps,
                              pair_trajectory, refine_extrema)

SB_STRONG = dict(gamma=3.0, delta=2.0, beta=0.8)
SB_WEAK = dict(gamma=1.0, delta=0.2, beta=0.2)


def trace_distance_oracle(model, times, r1, r2):
    """Half the trace norm of the evolved state difference, from density matrices."""
    out = []
    for X in extended_maps(model, times):
        T = X[:4]
        b1 = T @ np.concatenate([[1.0], r1])
        b2 = T @ np.concatenate([[1.0], r2])
        diff = density_of_bloch(b1) - density_of_bloch(b2)
        out.append(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))
    return np.array(out)


def test_fixed_pair_matches_density_oracle():
    model = build_model("spin_boson", SB_STRONG)
    times = np.linspace(0, 6, 301)
    n = np.array([0.3, -0.5, 0.8])
    n /= np.linalg.norm(n)
    pair = pair_trajectory(bloch_blocks(model, times), times, n)
    D = trace_distance_oracle(model, times, n, -n)
    assert np.allclose(pair.D, D, atol=1e-12)
    assert np.isclose(pair.backflow, np.sum(np.maximum(np.diff(D), 0)), atol=1e-12)
    assert np.allclose(pair.accumulated()[-1], pair.backflow)


def test_swap_symmetry():
    model = build_model("spin_boson", SB_STRONG)
    times = np.linspace(0, 6, 301)
    n = np.array([0.0, 0.6, 0.8])
    a = trace_distance_oracle(model, times, n, -n)
    b = trace_distance_oracle(model, times, -n, n)
    assert np.allclose(a, b, atol=1e-14)
    M = bloch_blocks(model, times)
    assert np.allclose(backflow(M, n[None]), backflow(M, -n[None]))


def test_refined_extrema_only_add_points():
    model = build_model("spin_boson", SB_STRONG)
    times = np.linspace(0, 6, 121)
    X = extended_maps(model, times)
    n = np.array([1.0, 0.0, 0.0])
    coarse = pair_trajectory(np.real(X[:, 1:4, 1:4]), times, n)
    fine = refine_extrema(model, times, X, n)
    assert len(fine.times) >= len(coarse.times)
    assert np.all(np.diff(fine.times) >= 0)
    assert fine.backflow >= coarse.backflow - 1e-12


@pytest.mark.parametrize("params", [SB_STRONG, SB_WEAK], ids=["strong", "weak"])
def test_grid_refinement_converges(params):
    model = build_model("spin_boson", params)
    base = blp_analysis(model, 40.0, BlpConfig(n_phi=12, n_theta=6))
    ev = np.max(np.abs(np.linalg.eigvals(model.generator)))
    finer = blp_analysis(model, 40.0, BlpConfig(n_phi=12, n_theta=6, steps_per_unit=40.0 * max(1.0, ev)))
    assert abs(base.value - finer.value) <= 1e-3


def test_markovian_dephasing_has_no_backflow():
    model = build_model("reviving_2level", dict(gamma1=0.5, gamma2=0.5, alpha=0.0))
    assert blp_measure(model) <= 1e-6


def test_result_export(tmp_path):
    res = blp_analysis(build_model("reviving_2level", dict(gamma1=0.5, gamma2=0.5, alpha=4.0)), 10.0)
    path = tmp_path / "n.csv"
    text = res.to_csv(path)
    rows = text.splitlines()
    assert rows[0] == "t,N" and path.read_text() == text
    last = float(rows[-1].split(",")[1])
    assert np.isclose(last, res.value)
    data = json.loads(json.dumps(res.to_json()))
    assert np.isclose(np.linalg.norm(data["direction"]), 1.0)


def test_reviving_model_is_non_markovian():
    res = blp_analysis(build_model("reviving_2level", dict(gamma1=0.5, gamma2=0.5, alpha=4.0)))
    assert res.value > 0.1
    # coherence revivals are carried by equatorial pairs
    assert abs(res.direction[2]) < 0.5


def test_bad_horizon():
    with pytest.raises(ValueError):
        blp_analysis(build_model("spin_boson", SB_STRONG), horizon=-1.0)


