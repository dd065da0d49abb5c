"""Exact verification oracles.

Everything here computes expectations, variances, or bounds by exhaustive
enumeration or closed form on small instances, providing an independent
check of the sampled estimators: unbiasedness of the interpolation
estimator under both designs, the linear-model variance bounds, the
optimal endpoint weights, and the numeric lemmas driving the variance
analysis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .design import bracket
from .errors import CapacityError
from .estimators import tte_pi
from .outcomes import CoefficientModel, ObservationSet

BRD_MAX_N = 8
BRD_MAX_STAGES = 4
CRD_MAX_N = 7
CRD_MAX_SEQUENCES = 10**6
INVERSE_MOMENT_MAX_N = 10**4


@dataclass
class EnumerationReport:
    """Exact first and second moments of an estimator over a design."""

    expectation: float
    variance: float
    n: int
    design: str
    targets: tuple
    enumeration_size: int


@dataclass
class WeightSolution:
    """Stationary point of the variance quadratic under unbiasedness."""

    alphas: np.ndarray
    lam: float
    mu: float
    objective: float


def brd_bucket_distribution(p) -> list[tuple[int, float]]:
    """Buckets of the uniform-threshold rollout construction.

    Each individual's uniform draw lands it in a bucket labeled by its
    first treated stage (len(p) meaning never treated). Returns the
    positive-probability buckets as (first_stage, probability) pairs:
    (p_0, p_1 - p_0, ..., p_T - p_{T-1}, 1 - p_T).
    """
    p = np.asarray(p, dtype=np.float64)
    T = len(p) - 1
    buckets = [(0, float(p[0]))]
    buckets += [(t, float(p[t] - p[t - 1])) for t in range(1, T + 1)]
    buckets.append((T + 1, float(1.0 - p[T])))
    return [(stage, prob) for stage, prob in buckets if prob > 0.0]


def enumerate_brd_rollouts(p, n: int):
    """Yield (Z, probability) over all bucket assignments of n individuals.

    Z is the (T+1) x n treatment matrix implied by the assignment; the
    probabilities sum to one exactly (up to float rounding of products).
    """
    p = np.asarray(p, dtype=np.float64)
    T = len(p) - 1
    buckets = brd_bucket_distribution(p)
    stage_grid = np.arange(T + 1)
    for profile in itertools.product(buckets, repeat=n):
        first_stages = np.array([stage for stage, _ in profile])
        prob = math.prod(weight for _, weight in profile)
        Z = (first_stages[None, :] <= stage_grid[:, None]).astype(np.int8)
        yield Z, prob


def crd_enumeration_size(k, n: int) -> int:
    size = 1
    prev = 0
    for kt in k:
        size *= math.comb(n - prev, int(kt) - prev)
        prev = int(kt)
    return size


def enumerate_crd_rollouts(k, n: int):
    """Yield (Z, probability) over all nested subset sequences of CRD(k).

    Every sequence is equiprobable, so probability = 1 / (product of the
    per-stage binomial counts).
    """
    k = [int(v) for v in k]
    T = len(k) - 1
    prob = 1.0 / crd_enumeration_size(k, n)

    def grow(stage: int, treated: tuple[int, ...], pool: tuple[int, ...], Z_rows):
        if stage > T:
            yield np.array(Z_rows, dtype=np.int8), prob
            return
        need = k[stage] - len(treated)
        for extra in itertools.combinations(pool, need):
            now = treated + extra
            row = np.zeros(n, dtype=np.int8)
            row[list(now)] = 1
            rest = tuple(x for x in pool if x not in extra)
            yield from grow(stage + 1, now, rest, Z_rows + [row])

    yield from grow(0, (), tuple(range(n)), [])


def _moments(values_and_probs) -> tuple[float, float]:
    pairs = list(values_and_probs)
    expectation = math.fsum(prob * value for value, prob in pairs)
    variance = math.fsum(prob * (value - expectation) ** 2 for value, prob in pairs)
    return expectation, variance


def _noiseless_observations(model: CoefficientModel, Z: np.ndarray, cache: dict) -> ObservationSet:
    rows = []
    for row in Z:
        key = row.tobytes()
        if key not in cache:
            cache[key] = model.evaluate(row)
        rows.append(cache[key])
    matrix = np.stack(rows)
    return ObservationSet(matrix=matrix, stage_means=matrix.mean(axis=1), sigma=0.0)


def exact_moments_brd(
    model: CoefficientModel, p, weights_mode: str = "targets"
) -> EnumerationReport:
    """Exact moments of the interpolation estimator under a Bernoulli rollout.

    Enumerates every bucket assignment, evaluates the noiseless estimator
    on it, and accumulates exact expectation and variance. weights_mode
    selects interpolation at the stage targets p or at the realized
    treated fractions.
    """
    if weights_mode not in ("targets", "realized"):
        raise ValueError(f"weights_mode must be 'targets' or 'realized', got {weights_mode!r}")
    p = np.asarray(p, dtype=np.float64)
    n = model.graph.n
    if n > BRD_MAX_N:
        raise CapacityError(f"enumeration limited to n <= {BRD_MAX_N}, got {n}")
    if len(p) > BRD_MAX_STAGES:
        raise CapacityError(f"enumeration limited to {BRD_MAX_STAGES} stages, got {len(p)}")

    cache: dict = {}

    def stream():
        for Z, prob in enumerate_brd_rollouts(p, n):
            obs = _noiseless_observations(model, Z, cache)
            x = p if weights_mode == "targets" else Z.sum(axis=1) / n
            yield tte_pi(obs, x).value, prob

    expectation, variance = _moments(stream())
    size = len(brd_bucket_distribution(p)) ** n
    return EnumerationReport(
        expectation=expectation,
        variance=variance,
        n=n,
        design=f"brd[{weights_mode}]",
        targets=tuple(float(v) for v in p),
        enumeration_size=size,
    )


def exact_moments_crd(model: CoefficientModel, k) -> EnumerationReport:
    """Exact moments of the interpolation estimator under a CRD rollout."""
    k = [int(v) for v in k]
    n = model.graph.n
    if n > CRD_MAX_N:
        raise CapacityError(f"enumeration limited to n <= {CRD_MAX_N}, got {n}")
    size = crd_enumeration_size(k, n)
    if size > CRD_MAX_SEQUENCES:
        raise CapacityError(f"{size} rollout sequences exceed cap {CRD_MAX_SEQUENCES}")

    x = np.array(k, dtype=np.float64) / n
    cache: dict = {}

    def stream():
        for Z, prob in enumerate_crd_rollouts(k, n):
            obs = _noiseless_observations(model, Z, cache)
            yield tte_pi(obs, x).value, prob

    expectation, variance = _moments(stream())
    return EnumerationReport(
        expectation=expectation,
        variance=variance,
        n=n,
        design="crd",
        targets=tuple(k),
        enumeration_size=size,
    )


def linear_variance_bound(
    model: CoefficientModel, design: str, budget: float, sigma: float = 0.0
) -> float:
    """Closed-form variance bound for linear models on two-stage rollouts.

    For a rollout starting from zero treatment, the interpolation
    estimator's variance is at most
    (1-p)/(np) * L_max^2 + 2 sigma^2/(n p^2) under Bernoulli(0, p), and
    (n-k)/((n-1)k) * L_max^2 + 2 sigma^2 n/k^2 under CRD(0, k).
    """
    if model.beta != 1:
        raise ValueError(f"bound only applies to linear models, got beta={model.beta}")
    n = model.graph.n
    l_max = model.l_max()
    if design == "brd":
        p = float(budget)
        if not 0 < p <= 1:
            raise ValueError(f"probability must lie in (0, 1], got {p}")
        return (1 - p) / (n * p) * l_max**2 + 2 * sigma**2 / (n * p**2)
    if design == "crd":
        k = int(budget)
        if not 1 <= k <= n:
            raise ValueError(f"count must lie in [1, {n}], got {k}")
        if n < 2:
            raise ValueError("CRD bound needs n >= 2")
        return (n - k) / ((n - 1) * k) * l_max**2 + 2 * sigma**2 * n / k**2
    raise ValueError(f"design must be 'brd' or 'crd', got {design!r}")


def optimal_weights(p, network_factor: float = 1.0) -> WeightSolution:
    """Variance-minimizing stage weights under the unbiasedness constraints.

    Minimizes network_factor * sum_{t,t'} a_t a_{t'} (p_min(t,t') - p_t p_t')
    subject to sum_t a_t = 0 and sum_t a_t p_t = 1, by solving the dense
    KKT linear system. The optimum puts all weight on the endpoints; the
    scale factor moves the multipliers but never the minimizer.
    """
    p = np.asarray(p, dtype=np.float64)
    if len(p) < 2:
        raise ValueError("need at least two stage probabilities")
    if np.any(np.diff(p) <= 0):
        raise ValueError(f"stage probabilities must be strictly increasing, got {p}")
    if network_factor <= 0:
        raise ValueError(f"network factor must be positive, got {network_factor}")

    m = len(p)
    tt = np.minimum.outer(np.arange(m), np.arange(m))
    Q = p[tt] - np.outer(p, p)
    system = np.zeros((m + 2, m + 2))
    system[:m, :m] = 2.0 * network_factor * Q
    system[:m, m] = 1.0
    system[:m, m + 1] = -p
    system[m, :m] = 1.0
    system[m + 1, :m] = p
    rhs = np.zeros(m + 2)
    rhs[m + 1] = 1.0
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        raise ValueError("singular stationarity system; probabilities must be distinct")
    alphas = solution[:m]
    objective = float(network_factor * alphas @ Q @ alphas)
    return WeightSolution(
        alphas=alphas, lam=float(solution[m]), mu=float(solution[m + 1]), objective=objective
    )


def bracket_ratio_check(n: int, p: float, a: int, b: int) -> float:
    """Deviation of the shifted subset-treatment probability ratio from 1.

    Evaluates |bracket(pn - a, n - a, b) / bracket(pn, n, b) - 1|, the
    quantity whose O(ab/pn) decay drives the cross-subset covariance
    bound. Requires pn > a + b so both products stay positive.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if n < 1 or a < 0 or b < 0:
        raise ValueError("need n >= 1 and a, b >= 0")
    if p * n <= a + b:
        raise ValueError(f"need p*n > a + b, got p*n = {p * n} with a={a}, b={b}")
    shifted = bracket(p * n - a, n - a, b)
    base = bracket(p * n, n, b)
    return abs(shifted / base - 1.0)


def inverse_binomial_moment(n: int, p: float, beta: int) -> float:
    """E[X^(-beta); X > 0] for X ~ Binomial(n, p), by exact pmf summation.

    The pmf is evaluated in log space before exponentiating, so the sum is
    overflow-safe for n up to the enumeration cap.
    """
    if beta < 1:
        raise ValueError(f"beta must be >= 1, got {beta}")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > INVERSE_MOMENT_MAX_N:
        raise CapacityError(f"exact summation limited to n <= {INVERSE_MOMENT_MAX_N}, got {n}")
    support = np.arange(1, n + 1)
    log_pmf = stats.binom.logpmf(support, n, p)
    return float(math.fsum(np.exp(log_pmf) / support.astype(np.float64) ** beta))
