"""Self-contained verification suite.

Each check pits a sampled or closed-form quantity against an exact oracle
(exhaustive enumeration, analytic moments, or a brute-force solve) and
reports a PASS/FAIL line with the observed value and its tolerance. The
CLI `verify` subcommand runs the whole list.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .design import (
    bracket,
    brd_schedule,
    brd_target_ladder,
    crd_schedule,
)
from .estimators import lagrange_basis, lagrange_weights, tte_pi
from .graph import generate_configuration_model
from .oracle import (
    bracket_ratio_check,
    enumerate_brd_rollouts,
    enumerate_crd_rollouts,
    exact_moments_brd,
    exact_moments_crd,
    inverse_binomial_moment,
    linear_variance_bound,
    optimal_weights,
)
from .outcomes import (
    CoefficientModel,
    expand_to_coefficients,
    observe,
    sample_parametric_model,
    true_tte,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} {self.value:.6e} {self.tolerance:.6e}"


def _random_expanded_model(rng: np.random.Generator, n_max: int, beta: int) -> CoefficientModel:
    n = int(rng.integers(2, n_max + 1))
    graph = generate_configuration_model(n, 2.5, int(rng.integers(0, 2**31)))
    parametric = sample_parametric_model(
        graph, beta, float(rng.uniform(0.0, 2.0)), int(rng.integers(0, 2**31))
    )
    return expand_to_coefficients(parametric)


def _random_grid(rng: np.random.Generator, num_stages: int, min_gap: float, max_gap: float) -> np.ndarray:
    gaps = rng.uniform(min_gap, max_gap, num_stages - 1)
    start = rng.uniform(0.0, 1.0 - gaps.sum())
    return start + np.concatenate([[0.0], np.cumsum(gaps)])


def check_thm1_unbiasedness_brd(rng: np.random.Generator, instances: int = 20) -> CheckResult:
    worst = 0.0
    for index in range(instances):
        beta = 1 + index % 2
        model = _random_expanded_model(rng, 6, beta)
        budget = float(rng.uniform(0.4, 0.9))
        p = brd_target_ladder(budget, beta)
        report = exact_moments_brd(model, p, weights_mode="targets")
        worst = max(worst, abs(report.expectation - true_tte(model)))
    return CheckResult("thm1_unbiasedness_brd", worst <= 1e-9, worst, 1e-9)


def check_thm2_unbiasedness_crd(rng: np.random.Generator, instances: int = 20) -> CheckResult:
    worst = 0.0
    for index in range(instances):
        beta = 1 + index % 2
        model = _random_expanded_model(rng, 5, beta)
        n = model.graph.n
        counts = sorted(rng.choice(np.arange(1, n + 1), size=beta, replace=False))
        k = [0] + [int(v) for v in counts]
        report = exact_moments_crd(model, k)
        worst = max(worst, abs(report.expectation - true_tte(model)))
    return CheckResult("thm2_unbiasedness_crd", worst <= 1e-9, worst, 1e-9)


def check_thm3_realized_bias(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for n in range(3, 9):
        for p in (0.3, 0.5):
            graph = generate_configuration_model(n, 2.5, int(rng.integers(0, 2**31)))
            model = expand_to_coefficients(
                sample_parametric_model(graph, 1, 1.0, int(rng.integers(0, 2**31)))
            )
            tte = true_tte(model)
            report = exact_moments_brd(model, [0.0, p], weights_mode="realized")
            bias = report.expectation - tte
            predicted = -((1.0 - p) ** n) * tte
            worst = max(worst, abs(bias - predicted))
    return CheckResult("thm3_realized_bias_identity", worst <= 1e-12, worst, 1e-12)


def _cor1_margins(rng: np.random.Generator, instances: int = 15) -> list[float]:
    """bound - total variance for linear instances, both designs, sigma in {0, 0.5}.

    Treated counts stay below n: full treatment makes both sides of the
    CRD bound identically zero, which is checked separately.
    """
    margins = []
    for _ in range(instances):
        model = _random_expanded_model(rng, 6, 1)
        n = model.graph.n
        p = float(rng.uniform(0.3, 0.9))
        k = int(rng.integers(1, n))
        brd_report = exact_moments_brd(model, [0.0, p], weights_mode="targets")
        crd_report = exact_moments_crd(model, [0, k])
        for sigma in (0.0, 0.5):
            noise_brd = sigma**2 / n * float(np.sum(lagrange_weights([0.0, p]).gammas ** 2))
            noise_crd = sigma**2 / n * float(np.sum(lagrange_weights([0.0, k / n]).gammas ** 2))
            margins.append(
                linear_variance_bound(model, "brd", p, sigma) - (brd_report.variance + noise_brd)
            )
            if n >= 2:
                margins.append(
                    linear_variance_bound(model, "crd", k, sigma) - (crd_report.variance + noise_crd)
                )
    return margins


def check_cor1_bound_holds(rng: np.random.Generator) -> CheckResult:
    margins = _cor1_margins(rng)
    worst_violation = max(0.0, -min(margins))
    return CheckResult("cor1_variance_bound_holds", worst_violation <= 1e-12, worst_violation, 1e-12)


def check_cor1_bound_strict(rng: np.random.Generator) -> CheckResult:
    margins = _cor1_margins(rng)
    strict = sum(1 for margin in margins if margin > 1e-12) / len(margins)
    return CheckResult("cor1_variance_bound_strict", strict >= 0.9, strict, 0.9)


def check_thm4_endpoint_weights(rng: np.random.Generator, grids: int = 50) -> CheckResult:
    worst = 0.0
    for _ in range(grids):
        T = int(rng.integers(1, 7))
        p = _random_grid(rng, T + 1, 0.05, 0.14)
        solution = optimal_weights(p)
        endpoint = 1.0 / (p[-1] - p[0])
        worst = max(worst, abs(solution.alphas[0] + endpoint))
        worst = max(worst, abs(solution.alphas[-1] - endpoint))
        if T > 1:
            worst = max(worst, float(np.abs(solution.alphas[1:-1]).max()))
    return CheckResult("thm4_endpoint_weights", worst <= 1e-8, worst, 1e-8)


def check_thm4_scaling_invariance(rng: np.random.Generator, grids: int = 10) -> CheckResult:
    worst = 0.0
    for _ in range(grids):
        T = int(rng.integers(1, 7))
        p = _random_grid(rng, T + 1, 0.05, 0.14)
        base = optimal_weights(p, network_factor=1.0).alphas
        for factor in (0.25, 3.0, 117.0):
            scaled = optimal_weights(p, network_factor=factor).alphas
            worst = max(worst, float(np.abs(scaled - base).max()))
    return CheckResult("thm4_scaling_invariance", worst <= 1e-8, worst, 1e-8)


def check_lagrange_partition_of_unity(rng: np.random.Generator, grids: int = 200) -> CheckResult:
    worst = 0.0
    for _ in range(grids):
        T = int(rng.integers(1, 7))
        x = _random_grid(rng, T + 1, 0.1, 0.15)
        for c in rng.uniform(0.0, 2.0, 50):
            worst = max(worst, abs(lagrange_basis(x, float(c)).sum() - 1.0))
    return CheckResult("lagrange_partition_of_unity", worst <= 1e-9, worst, 1e-9)


def check_lagrange_interpolation_exactness(rng: np.random.Generator, grids: int = 200) -> CheckResult:
    worst = 0.0
    for _ in range(grids):
        T = int(rng.integers(1, 7))
        x = _random_grid(rng, T + 1, 0.1, 0.15)
        gammas = lagrange_weights(x).gammas
        coeffs = rng.uniform(-1.0, 1.0, T + 1)
        extrapolated = float(np.dot(gammas, np.polyval(coeffs, x)))
        direct = float(np.polyval(coeffs, 1.0) - np.polyval(coeffs, 0.0))
        worst = max(worst, abs(extrapolated - direct))
    return CheckResult("lagrange_interpolation_exactness", worst <= 1e-9, worst, 1e-9)


def check_lagrange_weight_bound(rng: np.random.Generator, grids: int = 200) -> CheckResult:
    worst = 0.0
    for _ in range(grids):
        T = int(rng.integers(1, 7))
        x = _random_grid(rng, T + 1, 0.02, 0.15)
        weights = lagrange_weights(x)
        scaled = float(np.abs(weights.gammas).max() * weights.delta**T)
        worst = max(worst, scaled)
    return CheckResult("lagrange_weight_bound", worst <= 2.0, worst, 2.0)


def check_design_marginals_brd(rng: np.random.Generator) -> CheckResult:
    """Exact subset moments of the threshold construction vs p^|S| and the
    independent cross-stage product formula."""
    worst = 0.0
    for n, p in ((4, [0.0, 0.3, 0.7]), (5, [0.2, 0.5])):
        p = np.asarray(p)
        T = len(p) - 1
        rollouts = list(enumerate_brd_rollouts(p, n))
        subsets = [
            tuple(s)
            for size in range(0, 3)
            for s in itertools.combinations(range(n), size)
        ]
        for t in range(T + 1):
            for subset in subsets:
                moment = math.fsum(
                    prob for Z, prob in rollouts if all(Z[t, j] for j in subset)
                )
                worst = max(worst, abs(moment - float(p[t]) ** len(subset)))
        # cross-stage: membership of each individual is independent across i
        for t in range(T + 1):
            for t2 in range(T + 1):
                for s1 in subsets[:6]:
                    for s2 in subsets[:6]:
                        moment = math.fsum(
                            prob
                            for Z, prob in rollouts
                            if all(Z[t, j] for j in s1) and all(Z[t2, j] for j in s2)
                        )
                        shared = set(s1) & set(s2)
                        only1 = set(s1) - shared
                        only2 = set(s2) - shared
                        analytic = (
                            float(min(p[t], p[t2])) ** len(shared)
                            * float(p[t]) ** len(only1)
                            * float(p[t2]) ** len(only2)
                        )
                        worst = max(worst, abs(moment - analytic))
    return CheckResult("design_marginals_brd", worst <= 1e-12, worst, 1e-12)


def check_design_marginals_crd(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for n, k in ((4, [0, 2]), (5, [0, 1, 3])):
        rollouts = list(enumerate_crd_rollouts(k, n))
        for t, kt in enumerate(k):
            for size in range(0, 4):
                for subset in itertools.combinations(range(n), size):
                    moment = math.fsum(
                        prob for Z, prob in rollouts if all(Z[t, j] for j in subset)
                    )
                    worst = max(worst, abs(moment - bracket(kt, n, size)))
    return CheckResult("design_marginals_crd", worst <= 1e-12, worst, 1e-12)


def check_lemma_a4_inverse_moment(rng: np.random.Generator) -> CheckResult:
    ratios = [
        inverse_binomial_moment(2000, 0.1, beta) * (2000 * 0.1) ** beta for beta in (1, 2)
    ]
    in_range = all(1.0 <= ratio <= 1.1 for ratio in ratios)
    return CheckResult("lemma_a4_inverse_moment", in_range, max(ratios), 1.1)


def check_lemma_a3_ratio_decay(rng: np.random.Generator) -> CheckResult:
    coarse = bracket_ratio_check(100, 0.5, 1, 2)
    fine = bracket_ratio_check(1000, 0.5, 1, 2)
    return CheckResult("lemma_a3_ratio_decay", fine < coarse, fine - coarse, 0.0)


def _linear_summary(model: CoefficientModel) -> tuple[float, np.ndarray]:
    """Intercept and per-node weight of the population-mean outcome."""
    n = model.graph.n
    intercept = math.fsum(cmap.get((), 0.0) for cmap in model.coefficients) / n
    weights = np.zeros(n)
    for cmap in model.coefficients:
        for subset, value in cmap.items():
            if len(subset) == 1:
                weights[subset[0]] += value / n
    return intercept, weights


def check_mc_cross_validation_brd(rng: np.random.Generator, draws: int = 10**6) -> CheckResult:
    model = _random_expanded_model(rng, 5, 1)
    n = model.graph.n
    p = np.array([0.0, 0.45])
    exact = exact_moments_brd(model, p, weights_mode="targets")
    _, weights = _linear_summary(model)
    u = rng.random((draws, n))
    z1 = u < p[1]
    estimates = (z1 @ weights) / p[1]
    dev_mean = abs(estimates.mean() - exact.expectation) / (estimates.std() / math.sqrt(draws))
    sample_var = estimates.var()
    fourth = np.mean((estimates - estimates.mean()) ** 4)
    var_se = math.sqrt(max(fourth - sample_var**2, 1e-30) / draws)
    dev_var = abs(sample_var - exact.variance) / var_se
    worst = max(dev_mean, dev_var)
    return CheckResult("mc_cross_validation_brd", worst <= 4.0, worst, 4.0)


def check_mc_cross_validation_crd(rng: np.random.Generator, draws: int = 10**6) -> CheckResult:
    model = _random_expanded_model(rng, 5, 1)
    n = model.graph.n
    k = [0, max(1, n // 2)]
    exact = exact_moments_crd(model, k)
    _, weights = _linear_summary(model)
    ranks = np.argsort(rng.random((draws, n)), axis=1).argsort(axis=1)
    z1 = ranks < k[1]
    estimates = (z1 @ weights) * n / k[1]
    dev_mean = abs(estimates.mean() - exact.expectation) / (estimates.std() / math.sqrt(draws))
    sample_var = estimates.var()
    fourth = np.mean((estimates - estimates.mean()) ** 4)
    var_se = math.sqrt(max(fourth - sample_var**2, 1e-30) / draws)
    dev_var = abs(sample_var - exact.variance) / var_se
    worst = max(dev_mean, dev_var)
    return CheckResult("mc_cross_validation_crd", worst <= 4.0, worst, 4.0)


def check_sampler_agreement(rng: np.random.Generator, draws: int = 20000) -> CheckResult:
    """Production schedule samplers + estimator vs exact enumeration."""
    model = _random_expanded_model(rng, 5, 1)
    n = model.graph.n
    p = np.array([0.0, 0.5])
    k = [0, max(1, n // 2)]
    exact_b = exact_moments_brd(model, p, weights_mode="targets")
    exact_c = exact_moments_crd(model, k)
    worst = 0.0
    for exact, make in (
        (exact_b, lambda s: brd_schedule(p, n, s)),
        (exact_c, lambda s: crd_schedule(k, n, s)),
    ):
        values = np.empty(draws)
        for i in range(draws):
            schedule = make(int(rng.integers(0, 2**63)))
            obs = observe(model, schedule, seed=0, sigma=0.0)
            values[i] = tte_pi(obs, schedule.x_targets).value
        dev = abs(values.mean() - exact.expectation) / (values.std() / math.sqrt(draws))
        worst = max(worst, dev)
    return CheckResult("sampler_agreement", worst <= 4.0, worst, 4.0)


ALL_CHECKS = (
    check_thm1_unbiasedness_brd,
    check_thm2_unbiasedness_crd,
    check_thm3_realized_bias,
    check_cor1_bound_holds,
    check_cor1_bound_strict,
    check_thm4_endpoint_weights,
    check_thm4_scaling_invariance,
    check_lagrange_partition_of_unity,
    check_lagrange_interpolation_exactness,
    check_lagrange_weight_bound,
    check_design_marginals_brd,
    check_design_marginals_crd,
    check_lemma_a4_inverse_moment,
    check_lemma_a3_ratio_decay,
    check_mc_cross_validation_brd,
    check_mc_cross_validation_crd,
    check_sampler_agreement,
)


def run_verification(seed: int = 20240801) -> list[CheckResult]:
    """Run every check with seeds derived from one master seed."""
    results = []
    for index, check in enumerate(ALL_CHECKS):
        rng = np.random.default_rng(seed + index)
        results.append(check(rng))
    return results
