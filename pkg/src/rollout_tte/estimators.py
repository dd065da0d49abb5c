"""Total-treatment-effect estimators.

The headline estimator extrapolates the stage-mean outcomes of a staggered
rollout to full treatment and full control via Lagrange interpolation in
the treatment fraction. Difference-in-means and least-squares baselines
consume only the final stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import DEGENERATE_GAP
from .errors import DegenerateGroupError
from .graph import Graph
from .outcomes import ObservationSet


@dataclass
class InterpolationWeights:
    """Extrapolation weights gamma_t = l_t(1) - l_t(0) for targets x."""

    targets: np.ndarray
    gammas: np.ndarray
    degenerate: bool
    delta: float


@dataclass
class Estimate:
    """A named estimator output with provenance metadata."""

    name: str
    value: float
    metadata: dict = field(default_factory=dict)


def lagrange_basis(x, c: float) -> np.ndarray:
    """Evaluate each Lagrange basis polynomial l_t at the point c."""
    x = np.asarray(x, dtype=np.float64)
    values = np.empty(len(x))
    for t in range(len(x)):
        prod = 1.0
        for s in range(len(x)):
            if s != t:
                prod *= (c - x[s]) / (x[t] - x[s])
        values[t] = prod
    return values


def lagrange_weights(x) -> InterpolationWeights:
    """Extrapolation weights for nondecreasing targets x in [0, 1].

    If any consecutive targets coincide (gap below 1e-12) the interpolant
    is undefined; all weights are zero and the degenerate flag is set.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < 1:
        raise ValueError("targets must be a nonempty vector")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"targets must lie in [0, 1], got {x}")
    gaps = np.diff(x)
    if np.any(gaps < 0):
        raise ValueError(f"targets must be nondecreasing, got {x}")
    delta = float(gaps.min()) if len(gaps) else math.inf
    if len(gaps) and delta < DEGENERATE_GAP:
        return InterpolationWeights(
            targets=x, gammas=np.zeros(len(x)), degenerate=True, delta=delta
        )
    gammas = lagrange_basis(x, 1.0) - lagrange_basis(x, 0.0)
    return InterpolationWeights(targets=x, gammas=gammas, degenerate=False, delta=delta)


def tte_pi(obs: ObservationSet, x, name: str = "pi") -> Estimate:
    """Polynomial-interpolation TTE estimate from stage means.

    Returns sum_t gamma_t * ybar_t for targets x; returns 0 when the
    targets are degenerate (coinciding stages).
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) != obs.num_stages:
        raise ValueError(
            f"{len(x)} targets do not match {obs.num_stages} observation stages"
        )
    weights = lagrange_weights(x)
    if weights.degenerate:
        return Estimate(name=name, value=0.0, metadata={"targets": x, "degenerate": True})
    value = float(np.dot(weights.gammas, obs.stage_means))
    return Estimate(name=name, value=value, metadata={"targets": x, "degenerate": False})


def dm(z, Y, name: str = "dm") -> Estimate:
    """Difference in means: treated average minus control average."""
    z = np.asarray(z)
    Y = np.asarray(Y, dtype=np.float64)
    if z.shape != Y.shape:
        raise ValueError(f"treatment shape {z.shape} does not match outcomes {Y.shape}")
    treated = z == 1
    if treated.all() or not treated.any():
        raise DegenerateGroupError("difference in means needs both groups nonempty")
    value = float(Y[treated].mean() - Y[~treated].mean())
    return Estimate(name=name, value=value)


def neighbor_treatment_counts(z, g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Per node: number of treated non-self in-neighbors and the count of
    non-self in-neighbors."""
    z = np.asarray(z, dtype=np.int64)
    treated = np.empty(g.n, dtype=np.int64)
    sizes = np.empty(g.n, dtype=np.int64)
    for i, neigh in enumerate(g.in_neighbors):
        treated[i] = int(z[neigh].sum()) - int(z[i])
        sizes[i] = len(neigh) - 1
    return treated, sizes


def dm_threshold(z, Y, g: Graph, lam: float, name: str = "dm_thresh") -> Estimate:
    """Difference in means over sufficiently exposed individuals.

    A treated individual counts only if at least a fraction lam of its
    non-self in-neighbors is treated; a control individual only if at least
    lam of them is untreated. Individuals with no non-self neighbors always
    qualify. lam = 0 reduces to plain difference in means.
    """
    if not 0 <= lam <= 1:
        raise ValueError(f"exposure tolerance must lie in [0, 1], got {lam}")
    z = np.asarray(z)
    Y = np.asarray(Y, dtype=np.float64)
    if z.shape != Y.shape:
        raise ValueError(f"treatment shape {z.shape} does not match outcomes {Y.shape}")
    treated_neighbors, sizes = neighbor_treatment_counts(z, g)
    isolated = sizes == 0
    safe_sizes = np.maximum(sizes, 1)
    treated_frac = treated_neighbors / safe_sizes
    control_frac = (sizes - treated_neighbors) / safe_sizes

    in_treated = (z == 1) & (isolated | (treated_frac >= lam))
    in_control = (z == 0) & (isolated | (control_frac >= lam))
    if not in_treated.any() or not in_control.any():
        raise DegenerateGroupError("no qualifying individuals in one exposure group")
    value = float(Y[in_treated].mean() - Y[in_control].mean())
    return Estimate(
        name=name,
        value=value,
        metadata={"lambda": lam, "n_treated": int(in_treated.sum()), "n_control": int(in_control.sum())},
    )


def _ls_features(z, x_cov, beta: int) -> np.ndarray:
    """Design matrix columns (1, X, ..., X^beta, z, z X, ..., z X^(beta-1))."""
    cols = [np.ones(len(z))]
    for power in range(1, beta + 1):
        cols.append(x_cov**power)
    cols.append(z.astype(np.float64))
    for power in range(1, beta):
        cols.append(z * x_cov**power)
    return np.column_stack(cols)


def ls_estimate(z, Y, g: Graph, beta: int, covariate: str, name: str | None = None) -> Estimate:
    """Regression-adjusted TTE from a polynomial fit of degree beta.

    Fits the 2*beta+1 coefficients of
    g(z_i, X_i) = rho + sum_k gamma_k X_i^k + z_i (rho~ + sum_k gamma~_k X_i^k)
    by minimum-norm least squares, where X_i counts treated non-self
    in-neighbors ("count") or their treated fraction ("fraction", defined
    as 0 for nodes with no non-self neighbors). The estimate plugs in full
    treatment: mean_i g(1, X_i^full) - g(0, 0) with X_i^full the full
    neighborhood count, or 1 for the fraction variant.
    """
    if covariate not in ("count", "fraction"):
        raise ValueError(f"covariate must be 'count' or 'fraction', got {covariate!r}")
    z = np.asarray(z)
    Y = np.asarray(Y, dtype=np.float64)
    n = g.n
    if z.shape != (n,) or Y.shape != (n,):
        raise ValueError("treatment/outcome vectors do not match the graph size")
    n_params = 2 * beta + 1
    if n < n_params:
        raise ValueError(f"need at least {n_params} individuals to fit degree {beta}, got {n}")

    treated_neighbors, sizes = neighbor_treatment_counts(z, g)
    if covariate == "count":
        x_cov = treated_neighbors.astype(np.float64)
        x_full = sizes.astype(np.float64)
    else:
        x_cov = np.where(sizes > 0, treated_neighbors / np.maximum(sizes, 1), 0.0)
        x_full = np.ones(n)

    design = _ls_features(z, x_cov, beta)
    coef, *_ = np.linalg.lstsq(design, Y, rcond=1e-10)

    def fitted(z_i: float, x_i: np.ndarray) -> np.ndarray:
        acc = np.full(len(np.atleast_1d(x_i)), coef[0])
        x_i = np.atleast_1d(x_i)
        for power in range(1, beta + 1):
            acc = acc + coef[power] * x_i**power
        acc = acc + z_i * coef[beta + 1]
        for power in range(1, beta):
            acc = acc + z_i * coef[beta + 1 + power] * x_i**power
        return acc

    value = float((fitted(1.0, x_full) - fitted(0.0, np.zeros(n))).mean())
    tag = name or ("ls_num" if covariate == "count" else "ls_prop")
    return Estimate(name=tag, value=value, metadata={"coefficients": coef, "covariate": covariate})


def two_point_linear(obs: ObservationSet, x0: float, xT: float, name: str = "two_point") -> Estimate:
    """Endpoint-only linear extrapolation (ybar_T - ybar_0) / (xT - x0).

    Identical to the degree-1 interpolation estimator on the two-stage
    sub-schedule (x0, xT); these endpoint weights minimize variance among
    unbiased linear-combination estimators for linear outcome models.
    """
    if xT <= x0:
        raise ValueError(f"need xT > x0, got x0={x0}, xT={xT}")
    value = float((obs.stage_means[-1] - obs.stage_means[0]) / (xT - x0))
    return Estimate(name=name, value=value, metadata={"x0": x0, "xT": xT})
