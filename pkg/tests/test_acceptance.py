"""Acceptance suite: one test per headline criterion, each printing a
PASS/FAIL line with the quantity that was checked and its tolerance."""

import json
import time

import numpy as np
import pytest

from rollout_tte.cli import main
from rollout_tte.design import brd_target_ladder
from rollout_tte.estimators import lagrange_basis, lagrange_weights
from rollout_tte.graph import generate_configuration_model
from rollout_tte.harness import ExperimentConfig, aggregate, run_experiment
from rollout_tte.oracle import (
    bracket_ratio_check,
    exact_moments_brd,
    exact_moments_crd,
    inverse_binomial_moment,
    optimal_weights,
)
from rollout_tte.outcomes import expand_to_coefficients, sample_parametric_model, true_tte
from rollout_tte import verification


def report(name: str, passed: bool, detail: str) -> None:
    print(f"{'PASS' if passed else 'FAIL'} {name} {detail}")
    assert passed, f"{name}: {detail}"


def random_expanded(rng, n_max, beta):
    n = int(rng.integers(2, n_max + 1))
    g = generate_configuration_model(n, 2.5, int(rng.integers(0, 2**31)))
    return expand_to_coefficients(
        sample_parametric_model(g, beta, float(rng.uniform(0.0, 2.0)), int(rng.integers(0, 2**31)))
    )


def test_thm1_unbiasedness_brd():
    # >= 20 random instances, n <= 6, beta in {1, 2}, T = beta, tol 1e-9
    start = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for index in range(20):
        beta = 1 + index % 2
        model = random_expanded(rng, 6, beta)
        p = brd_target_ladder(float(rng.uniform(0.4, 0.9)), beta)
        rep = exact_moments_brd(model, p)
        worst = max(worst, abs(rep.expectation - true_tte(model)))
    elapsed = time.time() - start
    report(
        "thm1_unbiasedness_brd",
        worst <= 1e-9 and elapsed < 30,
        f"max|E-TTE|={worst:.3e} tol=1e-09 elapsed={elapsed:.1f}s<30s",
    )


def test_thm2_unbiasedness_crd():
    start = time.time()
    rng = np.random.default_rng(202)
    worst = 0.0
    for index in range(20):
        beta = 1 + index % 2
        model = random_expanded(rng, 5, beta)
        n = model.graph.n
        counts = sorted(rng.choice(np.arange(1, n + 1), size=beta, replace=False))
        rep = exact_moments_crd(model, [0] + [int(c) for c in counts])
        worst = max(worst, abs(rep.expectation - true_tte(model)))
    elapsed = time.time() - start
    report(
        "thm2_unbiasedness_crd",
        worst <= 1e-9 and elapsed < 60,
        f"max|E-TTE|={worst:.3e} tol=1e-09 elapsed={elapsed:.1f}s<60s",
    )


def test_cor1_variance_bounds():
    rng = np.random.default_rng(303)
    margins = verification._cor1_margins(rng, instances=15)
    worst_violation = max(0.0, -min(margins))
    strict = sum(1 for m in margins if m > 1e-12) / len(margins)
    report(
        "cor1_variance_bounds",
        worst_violation <= 1e-12 and strict >= 0.9,
        f"violation={worst_violation:.3e} strict_fraction={strict:.3f}>=0.9",
    )


def test_thm3_realized_count_bias_identity():
    rng = np.random.default_rng(404)
    worst = 0.0
    for n in range(3, 9):
        for p in (0.3, 0.5):
            g = generate_configuration_model(n, 2.5, int(rng.integers(0, 2**31)))
            model = expand_to_coefficients(
                sample_parametric_model(g, 1, 1.0, int(rng.integers(0, 2**31)))
            )
            tte = true_tte(model)
            rep = exact_moments_brd(model, [0.0, p], weights_mode="realized")
            worst = max(worst, abs((rep.expectation - tte) + (1 - p) ** n * tte))
    report("thm3_realized_bias_identity", worst <= 1e-12, f"max_dev={worst:.3e} tol=1e-12")


def test_thm4_optimal_weights():
    rng = np.random.default_rng(505)
    worst = 0.0
    worst_scale = 0.0
    for _ in range(50):
        T = int(rng.integers(1, 7))
        gaps = rng.uniform(0.05, 0.14, T)
        p = rng.uniform(0, 1 - gaps.sum()) + np.concatenate([[0], np.cumsum(gaps)])
        solution = optimal_weights(p)
        endpoint = 1.0 / (p[-1] - p[0])
        worst = max(worst, abs(solution.alphas[0] + endpoint), abs(solution.alphas[-1] - endpoint))
        if T > 1:
            worst = max(worst, float(np.abs(solution.alphas[1:-1]).max()))
        for factor in (0.5, 40.0):
            scaled = optimal_weights(p, network_factor=factor)
            worst_scale = max(worst_scale, float(np.abs(scaled.alphas - solution.alphas).max()))
    report(
        "thm4_optimal_weights",
        worst <= 1e-8 and worst_scale <= 1e-8,
        f"max_alpha_dev={worst:.3e} max_scaling_dev={worst_scale:.3e} tol=1e-08",
    )


def test_lagrange_properties():
    rng = np.random.default_rng(606)
    worst_unity = 0.0
    worst_exact = 0.0
    bound_ok = True
    for _ in range(200):
        T = int(rng.integers(1, 7))
        gaps = rng.uniform(0.1, 0.15, T)
        x = rng.uniform(0, 1 - gaps.sum()) + np.concatenate([[0], np.cumsum(gaps)])
        weights = lagrange_weights(x)
        for c in rng.uniform(0.0, 2.0, 5):
            worst_unity = max(worst_unity, abs(lagrange_basis(x, float(c)).sum() - 1.0))
        coeffs = rng.uniform(-1.0, 1.0, T + 1)
        lhs = float(np.dot(weights.gammas, np.polyval(coeffs, x)))
        rhs = float(np.polyval(coeffs, 1.0) - np.polyval(coeffs, 0.0))
        worst_exact = max(worst_exact, abs(lhs - rhs))
        if np.abs(weights.gammas).max() > 2.0 * weights.delta ** (-T) * (1 + 1e-12):
            bound_ok = False
    report(
        "lagrange_properties",
        worst_unity <= 1e-9 and worst_exact <= 1e-9 and bound_ok,
        f"unity={worst_unity:.3e} exactness={worst_exact:.3e} tol=1e-09 weight_bound_held={bound_ok}",
    )


def test_design_marginals():
    rng = np.random.default_rng(707)
    brd = verification.check_design_marginals_brd(rng)
    crd = verification.check_design_marginals_crd(rng)
    report(
        "design_marginals",
        brd.passed and crd.passed and brd.tolerance == 1e-12 and crd.tolerance == 1e-12,
        f"brd_dev={brd.value:.3e} crd_dev={crd.value:.3e} tol=1e-12",
    )


def test_lemma_a4_and_a3():
    ratios = [inverse_binomial_moment(2000, 0.1, b) * (2000 * 0.1) ** b for b in (1, 2)]
    in_range = all(1.0 <= ratio <= 1.1 for ratio in ratios)
    coarse = bracket_ratio_check(100, 0.5, 1, 2)
    fine = bracket_ratio_check(1000, 0.5, 1, 2)
    report(
        "lemma_a4_and_a3",
        in_range and fine < coarse,
        f"ratios={ratios[0]:.4f},{ratios[1]:.4f} in [1,1.1]; decay {coarse:.3e}->{fine:.3e}",
    )


def test_fig1_qualitative_reproduction():
    start = time.time()
    cfg = ExperimentConfig(
        design="crd",
        beta=1,
        n=1000,
        r=1.25,
        budget=0.5,
        sigma=0.0,
        sweep_param="r",
        sweep_values=[0.0, 1.25],
        G=5,
        N=50,
        estimators=["pi_crd_k", "dm", "dm_thresh", "ls_num", "ls_prop"],
        master_seed=42,
    )
    rows = aggregate(run_experiment(cfg), "r")
    elapsed = time.time() - start
    ratio = {}
    for row in rows:
        se = row.std_rel_bias / np.sqrt(row.n_ok)
        ratio[(row.sweep_value, row.estimator)] = abs(row.mean_rel_bias) / se
    pi_unbiased = ratio[(1.25, "pi_crd_k")] < 3
    dm_biased = ratio[(1.25, "dm")] > 3
    ls_biased = ratio[(1.25, "ls_prop")] > 3
    control_ok = all(value < 3 for (r, _), value in ratio.items() if r == 0.0)
    report(
        "fig1_qualitative",
        pi_unbiased and dm_biased and ls_biased and control_ok and elapsed < 300,
        (
            f"pi@r1.25={ratio[(1.25, 'pi_crd_k')]:.2f}<3 dm@r1.25={ratio[(1.25, 'dm')]:.1f}>3 "
            f"ls_prop@r1.25={ratio[(1.25, 'ls_prop')]:.1f}>3 max@r0={max(v for (r, _), v in ratio.items() if r == 0.0):.2f}<3 "
            f"elapsed={elapsed:.0f}s<300s"
        ),
    )


def test_fig2_realized_count_variance_reduction():
    cfg = ExperimentConfig(
        design="brd",
        beta=1,
        n=1000,
        r=1.25,
        budget=0.3,
        sigma=0.0,
        sweep_param="budget",
        sweep_values=[0.3],
        G=5,
        N=100,
        estimators=["pi_brd_p", "pi_brd_khat"],
        master_seed=42,
    )
    rows = aggregate(run_experiment(cfg), "budget")
    stds = {row.estimator: row.std_rel_bias for row in rows}
    report(
        "fig2_variance_ordering",
        stds["pi_brd_khat"] <= stds["pi_brd_p"],
        f"std_khat={stds['pi_brd_khat']:.4f} <= std_p={stds['pi_brd_p']:.4f}",
    )


def test_cli_byte_determinism(tmp_path):
    cfg = {
        "design": "crd",
        "beta": 1,
        "n": 80,
        "r": 1.0,
        "budget": 0.5,
        "sweep_param": "r",
        "sweep_values": [0.0, 1.0],
        "G": 2,
        "N": 5,
        "estimators": ["pi_crd_k", "dm", "two_point"],
        "master_seed": 9,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    blobs = []
    for name, workers in (("a.csv", "1"), ("b.csv", "1"), ("c.csv", "3")):
        out = tmp_path / name
        code = main(["run", "--config", str(cfg_path), "--out", str(out), "--workers", workers])
        assert code == 0
        blobs.append(out.read_bytes() + (tmp_path / name.replace(".csv", ".summary.csv")).read_bytes())
    graphs = []
    for name in ("g1.txt", "g2.txt"):
        assert main(["gen-graph", "--n", "150", "--seed", "6", "--out", str(tmp_path / name)]) == 0
        graphs.append((tmp_path / name).read_bytes())
    report(
        "cli_byte_determinism",
        blobs[0] == blobs[1] == blobs[2] and graphs[0] == graphs[1],
        "records+summary identical across reruns and worker counts; edge lists identical",
    )


def test_verify_subcommand_all_pass(capsys):
    code = main(["verify"])
    out = capsys.readouterr().out
    lines = [line for line in out.splitlines() if line.startswith(("PASS", "FAIL"))]
    with capsys.disabled():
        report(
            "verify_subcommand",
            code == 0 and lines and all(line.startswith("PASS") for line in lines),
            f"exit={code} checks={len(lines)} all PASS",
        )
