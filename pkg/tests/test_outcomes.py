import itertools

import numpy as np
import pytest

from rollout_tte.design import crd_schedule
from rollout_tte.errors import CapacityError
from rollout_tte.graph import Graph, generate_configuration_model
from rollout_tte.outcomes import (
    CoefficientModel,
    expand_to_coefficients,
    load_model,
    observe,
    sample_parametric_model,
    save_model,
    true_tte,
)


def self_weights(model):
    """c_ii of each node, pulled out of the aligned weight tables."""
    g = model.graph
    return np.array(
        [model.ctilde[i][g.in_neighbors[i].index(i)] for i in range(g.n)]
    )


def test_r_zero_gives_sutva():
    g = generate_configuration_model(30, 2.5, 2)
    model = sample_parametric_model(g, 1, 0.0, 5)
    for i in range(g.n):
        for idx, j in enumerate(g.in_neighbors[i]):
            if j != i:
                assert model.ctilde[i][idx] == 0.0


def test_single_node_model():
    g = generate_configuration_model(1, 2.5, 0)
    model = sample_parametric_model(g, 1, 1.0, 3)
    assert len(model.ctilde[0]) == 1
    assert model.baseline.shape == (1,)


def test_sampling_determinism():
    g = generate_configuration_model(25, 2.5, 8)
    a = sample_parametric_model(g, 2, 1.5, 11)
    b = sample_parametric_model(g, 2, 1.5, 11)
    assert np.array_equal(a.baseline, b.baseline)
    for wa, wb in zip(a.ctilde, b.ctilde):
        assert np.array_equal(wa, wb)


def test_sampling_rejects_bad_parameters():
    g = generate_configuration_model(5, 2.5, 0)
    with pytest.raises(ValueError):
        sample_parametric_model(g, 0, 1.0, 0)
    with pytest.raises(ValueError):
        sample_parametric_model(g, 1, -0.5, 0)


def test_evaluate_all_control_is_baseline():
    g = generate_configuration_model(20, 2.5, 1)
    model = sample_parametric_model(g, 2, 1.0, 4)
    assert np.array_equal(model.evaluate(np.zeros(20)), model.baseline)


def test_evaluate_all_treated_closed_form():
    # at full treatment the normalized exposure ratio is 1, so each of the
    # beta-1 higher-order terms contributes exactly 1
    g = generate_configuration_model(20, 2.5, 1)
    for beta in (1, 2, 3):
        model = sample_parametric_model(g, beta, 1.0, 4)
        expected = model.baseline + np.array([w.sum() for w in model.ctilde]) + (beta - 1)
        np.testing.assert_allclose(model.evaluate(np.ones(20)), expected, rtol=0, atol=1e-12)


def test_evaluate_rejects_wrong_length():
    g = generate_configuration_model(5, 2.5, 0)
    model = sample_parametric_model(g, 1, 1.0, 0)
    with pytest.raises(ValueError):
        model.evaluate(np.zeros(4))


def test_coefficient_model_single_entry():
    g = Graph(n=2, in_neighbors=[[0], [1]])
    model = CoefficientModel(
        graph=g, beta=1, coefficients=[{(): 0.25, (0,): 2.0}, {(): 0.5}]
    )
    y = model.evaluate(np.array([1, 0]))
    assert y[0] == 0.25 + 2.0
    assert y[1] == 0.5


def test_true_tte_sutva_linear_is_mean_direct_effect():
    g = generate_configuration_model(40, 2.5, 6)
    model = sample_parametric_model(g, 1, 0.0, 9)
    np.testing.assert_allclose(true_tte(model), self_weights(model).mean(), atol=1e-12)


def test_true_tte_r_zero_quadratic_adds_one():
    g = generate_configuration_model(40, 2.5, 6)
    model = sample_parametric_model(g, 2, 0.0, 9)
    np.testing.assert_allclose(true_tte(model), self_weights(model).mean() + 1.0, atol=1e-12)


@pytest.mark.parametrize("n,beta,seed", [(4, 1, 0), (5, 2, 1), (6, 2, 2)])
def test_true_tte_two_computation_paths_agree(n, beta, seed):
    g = generate_configuration_model(n, 2.5, seed)
    model = expand_to_coefficients(sample_parametric_model(g, beta, 1.0, seed + 10))
    assert abs(true_tte(model) - model.coefficient_tte()) < 1e-12


def test_expand_linear_is_identity():
    g = generate_configuration_model(6, 2.5, 3)
    model = sample_parametric_model(g, 1, 1.0, 7)
    expanded = expand_to_coefficients(model)
    for i in range(g.n):
        assert expanded.coefficients[i][()] == model.baseline[i]
        for idx, j in enumerate(g.in_neighbors[i]):
            weight = model.ctilde[i][idx]
            if weight != 0.0:
                assert expanded.coefficients[i][(j,)] == pytest.approx(weight, abs=1e-15)


def test_expand_quadratic_pair_coefficient():
    # two-neighbor node, beta = 2: squaring the normalized exposure gives
    # the cross term 2 w_a w_b / (w_a + w_b)^2
    g = Graph(n=2, in_neighbors=[[0, 1], [1]])
    model_weights = [np.array([0.6, 0.3]), np.array([0.8])]
    from rollout_tte.outcomes import ParametricModel

    model = ParametricModel(
        graph=g, beta=2, baseline=np.array([0.1, 0.2]), ctilde=model_weights, r=1.0
    )
    expanded = expand_to_coefficients(model)
    total = 0.6 + 0.3
    assert expanded.coefficients[0][(0, 1)] == pytest.approx(
        2 * 0.6 * 0.3 / total**2, rel=1e-12
    )


@pytest.mark.parametrize("beta", [1, 2, 3])
def test_expand_matches_parametric_on_all_vectors(beta):
    g = generate_configuration_model(4, 2.5, 5)
    model = sample_parametric_model(g, beta, 1.3, 8)
    expanded = expand_to_coefficients(model)
    for bits in itertools.product([0, 1], repeat=4):
        z = np.array(bits)
        np.testing.assert_allclose(expanded.evaluate(z), model.evaluate(z), atol=1e-10)


def test_expand_capacity_guard():
    n = 23
    in_neighbors = [sorted({i} | (set(range(n)) if i == 0 else set())) for i in range(n)]
    g = Graph(n=n, in_neighbors=in_neighbors)
    model = sample_parametric_model(g, 2, 1.0, 0)
    with pytest.raises(CapacityError):
        expand_to_coefficients(model)


def test_boundedness_by_y_max():
    g = generate_configuration_model(5, 2.5, 12)
    model = expand_to_coefficients(sample_parametric_model(g, 2, 1.0, 3))
    y_max = model.y_max()
    for bits in itertools.product([0, 1], repeat=5):
        assert np.all(np.abs(model.evaluate(np.array(bits))) <= y_max + 1e-12)


def test_parametric_outcomes_monotone_in_treatment():
    g = generate_configuration_model(5, 2.5, 4)
    model = sample_parametric_model(g, 2, 1.0, 6)
    for bits in itertools.product([0, 1], repeat=5):
        z = np.array(bits)
        y = model.evaluate(z)
        for i in range(5):
            if z[i] == 0:
                bumped = z.copy()
                bumped[i] = 1
                assert np.all(model.evaluate(bumped) >= y - 1e-12)


def test_true_tte_invariant_to_insertion_order():
    g = Graph(n=3, in_neighbors=[[0, 1, 2], [1], [0, 2]])
    entries = [
        ((), 0.3),
        ((0,), 0.11),
        ((1,), 0.22),
        ((2,), 0.05),
        ((0, 1), 0.017),
        ((1, 2), 0.013),
    ]
    forward = CoefficientModel(
        graph=g, beta=2, coefficients=[dict(entries), {(): 0.1, (1,): 0.2}, {(): 0.0, (0, 2): 0.4}]
    )
    backward = CoefficientModel(
        graph=g,
        beta=2,
        coefficients=[dict(reversed(entries)), {(1,): 0.2, (): 0.1}, {(0, 2): 0.4, (): 0.0}],
    )
    assert true_tte(forward) == true_tte(backward)
    assert forward.coefficient_tte() == backward.coefficient_tte()


def test_observe_noiseless_matches_evaluate():
    g = generate_configuration_model(12, 2.5, 3)
    model = sample_parametric_model(g, 1, 1.0, 5)
    schedule = crd_schedule([0, 4, 8], 12, 17)
    obs = observe(model, schedule, seed=123)
    expected = np.stack([model.evaluate(z) for z in schedule.treatments])
    assert np.array_equal(obs.matrix, expected)
    assert obs.sigma == 0.0


def test_observe_noise_moments():
    g = generate_configuration_model(2, 2.5, 0)
    model = sample_parametric_model(g, 1, 1.0, 1, sigma=1.0)
    schedule = crd_schedule([0, 1], 2, 5)
    clean = model.evaluate(schedule.treatments[1])[0]
    draws = np.array(
        [observe(model, schedule, seed=s).matrix[1, 0] for s in range(100_000)]
    )
    assert abs(draws.mean() - clean) < 0.02
    assert abs(draws.var() - 1.0) < 0.05


def test_observe_determinism_and_dimension_error():
    g = generate_configuration_model(8, 2.5, 2)
    model = sample_parametric_model(g, 1, 1.0, 3, sigma=0.7)
    schedule = crd_schedule([0, 3], 8, 21)
    a = observe(model, schedule, seed=99)
    b = observe(model, schedule, seed=99)
    assert np.array_equal(a.matrix, b.matrix)
    other = crd_schedule([0, 3], 9, 21)
    with pytest.raises(ValueError):
        observe(model, other, seed=0)


def test_stage_means_invariant():
    g = generate_configuration_model(10, 2.5, 1)
    model = sample_parametric_model(g, 1, 1.0, 2)
    schedule = crd_schedule([0, 5], 10, 3)
    obs = observe(model, schedule, seed=0)
    np.testing.assert_allclose(obs.stage_means, obs.matrix.mean(axis=1), atol=1e-13)


def test_parametric_model_round_trip(tmp_path):
    g = generate_configuration_model(14, 2.5, 4)
    model = sample_parametric_model(g, 2, 1.2, 6, sigma=0.3)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.graph == model.graph
    assert loaded.beta == model.beta
    assert loaded.r == model.r
    assert loaded.sigma == model.sigma
    assert np.array_equal(loaded.baseline, model.baseline)
    for wa, wb in zip(loaded.ctilde, model.ctilde):
        assert np.array_equal(wa, wb)


def test_coefficient_model_round_trip(tmp_path):
    g = generate_configuration_model(5, 2.5, 9)
    model = expand_to_coefficients(sample_parametric_model(g, 2, 0.8, 10))
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.graph == model.graph
    assert loaded.coefficients == model.coefficients


def test_coefficient_model_validates_subsets():
    g = Graph(n=2, in_neighbors=[[0], [1]])
    with pytest.raises(ValueError):
        CoefficientModel(graph=g, beta=1, coefficients=[{(1,): 0.5}, {}])  # not a neighbor
    with pytest.raises(ValueError):
        CoefficientModel(graph=g, beta=1, coefficients=[{(0, 1): 0.5}, {}])  # too big
