"""Potential-outcomes models and observation sampling.

Two model families are supported. The parametric family draws per-node
baselines and influence weights and adds higher-order network terms through
a normalized saturation ratio raised to powers 2..beta. The generic
coefficient family stores an explicit map from treated neighbor subsets to
effect coefficients and is the form used by the exact verification oracles.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .graph import Graph

MAX_EXPANSION_NEIGHBORHOOD = 20


@dataclass
class ParametricModel:
    """Outcome model with baseline, pairwise influence, and ratio terms.

    For treatment vector z, node i's outcome is::

        baseline[i] + sum_j ctilde[i][j] * z_j
                    + sum_{l=2..beta} (sum_j ctilde[i][j] * z_j / sum_j ctilde[i][j]) ** l

    where j ranges over i's in-neighbors. ``ctilde[i]`` is aligned with
    ``graph.in_neighbors[i]``.
    """

    graph: Graph
    beta: int
    baseline: np.ndarray
    ctilde: list[np.ndarray]
    r: float
    sigma: float = 0.0
    _indptr: np.ndarray = field(init=False, repr=False)
    _indices: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)
    _weight_sums: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.graph.n
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if len(self.baseline) != n or len(self.ctilde) != n:
            raise ValueError("coefficient tables do not match population size")
        lengths = [len(neigh) for neigh in self.graph.in_neighbors]
        for i, weights in enumerate(self.ctilde):
            if len(weights) != lengths[i]:
                raise ValueError(f"ctilde[{i}] does not match neighborhood size")
        self._indptr = np.concatenate([[0], np.cumsum(lengths)])
        self._indices = np.concatenate(
            [np.asarray(neigh, dtype=np.int64) for neigh in self.graph.in_neighbors]
        )
        self._weights = np.concatenate([np.asarray(w, dtype=np.float64) for w in self.ctilde])
        self._weight_sums = np.add.reduceat(self._weights, self._indptr[:-1])
        if np.any(self._weight_sums <= 0):
            raise ValueError("every node needs a positive total influence weight")

    def evaluate(self, z) -> np.ndarray:
        """Outcomes Y_i(z) for a binary treatment vector z."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.graph.n,):
            raise ValueError(f"treatment vector has shape {z.shape}, expected ({self.graph.n},)")
        exposure = np.add.reduceat(self._weights * z[self._indices], self._indptr[:-1])
        y = self.baseline + exposure
        if self.beta >= 2:
            ratio = exposure / self._weight_sums
            for power in range(2, self.beta + 1):
                y = y + ratio**power
        return y


@dataclass
class CoefficientModel:
    """Generic low-degree polynomial outcome model.

    ``coefficients[i]`` maps a sorted tuple of node indices S (a subset of
    i's in-neighborhood, |S| <= beta) to the effect of treating all of S on
    i's outcome; the empty tuple keys the baseline. Maps are stored in
    canonical sorted-key order so iteration, and therefore every derived
    sum, is deterministic.
    """

    graph: Graph
    beta: int
    coefficients: list[dict[tuple[int, ...], float]]

    def __post_init__(self) -> None:
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if len(self.coefficients) != self.graph.n:
            raise ValueError("coefficient table does not match population size")
        canonical: list[dict[tuple[int, ...], float]] = []
        for i, cmap in enumerate(self.coefficients):
            neigh = set(self.graph.in_neighbors[i])
            fixed: dict[tuple[int, ...], float] = {}
            for subset, value in sorted(
                ((tuple(sorted(s)), float(v)) for s, v in cmap.items())
            ):
                if len(subset) > self.beta:
                    raise ValueError(f"subset {subset} for node {i} exceeds degree {self.beta}")
                if len(set(subset)) != len(subset):
                    raise ValueError(f"subset {subset} for node {i} has repeated indices")
                if not set(subset) <= neigh:
                    raise ValueError(f"subset {subset} is not inside node {i}'s neighborhood")
                fixed[subset] = value
            canonical.append(fixed)
        self.coefficients = canonical

    def evaluate(self, z) -> np.ndarray:
        """Outcomes Y_i(z) = sum_S c_{i,S} * prod_{j in S} z_j."""
        z = np.asarray(z)
        if z.shape != (self.graph.n,):
            raise ValueError(f"treatment vector has shape {z.shape}, expected ({self.graph.n},)")
        out = np.empty(self.graph.n)
        for i, cmap in enumerate(self.coefficients):
            out[i] = math.fsum(
                value for subset, value in cmap.items() if all(z[j] for j in subset)
            )
        return out

    def coefficient_tte(self) -> float:
        """Average of all non-empty subset coefficients (closed-form TTE)."""
        return (
            math.fsum(
                value
                for cmap in self.coefficients
                for subset, value in cmap.items()
                if subset
            )
            / self.graph.n
        )

    def y_max(self) -> float:
        """Largest per-node sum of absolute coefficients; bounds |Y_i(z)|."""
        return max(
            math.fsum(abs(v) for v in cmap.values()) for cmap in self.coefficients
        )

    def influences(self) -> np.ndarray:
        """Total absolute influence L_j of each node on the population."""
        influence = np.zeros(self.graph.n)
        for cmap in self.coefficients:
            for subset, value in cmap.items():
                for j in subset:
                    influence[j] += abs(value)
        return influence

    def l_max(self) -> float:
        return float(self.influences().max())


@dataclass
class ObservationSet:
    """Observed (possibly noisy) outcomes for each rollout stage."""

    matrix: np.ndarray  # (T+1, n)
    stage_means: np.ndarray  # (T+1,)
    sigma: float

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.stage_means = np.asarray(self.stage_means, dtype=np.float64)
        n = self.matrix.shape[1]
        if not np.all(np.abs(self.matrix.mean(axis=1) - self.stage_means) <= 1e-12 * n):
            raise ValueError("stage means are inconsistent with the outcome matrix")

    @property
    def num_stages(self) -> int:
        return self.matrix.shape[0]


def sample_parametric_model(
    g: Graph, beta: int, r: float, seed: int, sigma: float = 0.0
) -> ParametricModel:
    """Draw a random parametric outcome model on graph g.

    Baselines and self-weights are U[0,1] (self-weights redrawn if exactly
    zero, keeping every total weight positive). Each node j draws an
    influence magnitude v_j ~ U[0, r] that is shared among the nodes it
    points to proportional to their in-neighborhood sizes:
    ctilde[i][j] = v_j * |N_i| / sum_{k: j in N_k} |N_k| for j != i.

    Deterministic for a fixed seed.
    """
    if beta < 1:
        raise ValueError(f"beta must be >= 1, got {beta}")
    if r < 0:
        raise ValueError(f"network/direct ratio must be >= 0, got {r}")
    if sigma < 0:
        raise ValueError(f"noise level must be >= 0, got {sigma}")

    rng = np.random.default_rng(seed)
    n = g.n
    baseline = rng.random(n)
    self_weight = rng.random(n)
    while np.any(self_weight == 0.0):
        mask = self_weight == 0.0
        self_weight[mask] = rng.random(int(mask.sum()))
    magnitude = rng.uniform(0.0, r, n) if r > 0 else np.zeros(n)

    # Total in-neighborhood size over each node's out-neighbors.
    share_denominator = np.zeros(n)
    for k in range(n):
        size_k = len(g.in_neighbors[k])
        for j in g.in_neighbors[k]:
            share_denominator[j] += size_k

    ctilde = []
    for i in range(n):
        neigh = g.in_neighbors[i]
        size_i = len(neigh)
        weights = np.empty(size_i)
        for idx, j in enumerate(neigh):
            if j == i:
                weights[idx] = self_weight[i]
            else:
                weights[idx] = magnitude[j] * size_i / share_denominator[j]
        ctilde.append(weights)

    return ParametricModel(
        graph=g, beta=beta, baseline=baseline, ctilde=ctilde, r=r, sigma=sigma
    )


def true_tte(model) -> float:
    """Ground-truth total treatment effect via two full evaluations."""
    n = model.graph.n
    all_treated = model.evaluate(np.ones(n, dtype=np.int8))
    all_control = model.evaluate(np.zeros(n, dtype=np.int8))
    return float((all_treated - all_control).mean())


def expand_to_coefficients(model: ParametricModel) -> CoefficientModel:
    """Exact multilinear expansion of a parametric model.

    Because treatments are binary, the ratio powers expand into subset
    coefficients of order at most beta: the coefficient of a subset S is
    the inclusion-exclusion sum over R in S of (-1)^(|S|-|R|) g(W_R) with
    W_R the total normalized weight of R and g(x) = x^2 + ... + x^beta.

    Raises:
        CapacityError: If any in-neighborhood exceeds 20 nodes (the subset
            expansion grows combinatorially).
    """
    g = model.graph
    widest = max(len(neigh) for neigh in g.in_neighbors)
    if widest > MAX_EXPANSION_NEIGHBORHOOD:
        raise CapacityError(
            f"neighborhood size {widest} exceeds expansion cap {MAX_EXPANSION_NEIGHBORHOOD}"
        )

    def ratio_powers(x: float) -> float:
        return math.fsum(x**power for power in range(2, model.beta + 1))

    coefficients: list[dict[tuple[int, ...], float]] = []
    for i in range(g.n):
        neigh = g.in_neighbors[i]
        weights = model.ctilde[i]
        normalized = weights / weights.sum()
        cmap: dict[tuple[int, ...], float] = {(): float(model.baseline[i])}
        for size in range(1, model.beta + 1):
            if size > len(neigh):
                break
            for positions in itertools.combinations(range(len(neigh)), size):
                value = math.fsum(
                    (-1) ** (size - len(chosen)) * ratio_powers(normalized[list(chosen)].sum())
                    for count in range(size + 1)
                    for chosen in itertools.combinations(positions, count)
                )
                if size == 1:
                    value += float(weights[positions[0]])
                if value != 0.0:
                    cmap[tuple(neigh[p] for p in positions)] = value
        coefficients.append(cmap)

    return CoefficientModel(graph=g, beta=model.beta, coefficients=coefficients)


def observe(model, schedule, seed: int, sigma: float | None = None) -> ObservationSet:
    """Observe stage outcomes for a rollout, with iid Gaussian noise.

    sigma defaults to the model's own noise level; zero noise reproduces
    the evaluate output exactly (no RNG draws are consumed).
    """
    n = model.graph.n
    if schedule.n != n:
        raise ValueError(f"schedule width {schedule.n} does not match population {n}")
    noise = model.sigma if sigma is None else sigma
    matrix = np.stack([model.evaluate(row) for row in schedule.treatments])
    if noise > 0:
        rng = np.random.default_rng(seed)
        matrix = matrix + rng.normal(0.0, noise, matrix.shape)
    return ObservationSet(matrix=matrix, stage_means=matrix.mean(axis=1), sigma=noise)


def save_model(model, destination: str | os.PathLike) -> None:
    """Serialize a model to JSON (schema depends on the model family)."""
    if isinstance(model, ParametricModel):
        payload = {
            "kind": "parametric",
            "n": model.graph.n,
            "beta": model.beta,
            "r": model.r,
            "sigma": model.sigma,
            "baseline": [float(b) for b in model.baseline],
            "ctilde": [
                [[int(j), float(w)] for j, w in zip(neigh, weights)]
                for neigh, weights in zip(model.graph.in_neighbors, model.ctilde)
            ],
        }
    elif isinstance(model, CoefficientModel):
        payload = {
            "kind": "coefficient",
            "n": model.graph.n,
            "beta": model.beta,
            "in_neighbors": [list(neigh) for neigh in model.graph.in_neighbors],
            "coefficients": [
                [[list(subset), value] for subset, value in cmap.items()]
                for cmap in model.coefficients
            ],
        }
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    with open(destination, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(source: str | os.PathLike):
    """Load a model written by save_model."""
    with open(source, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "parametric":
        in_neighbors = [sorted(j for j, _ in row) for row in payload["ctilde"]]
        g = Graph(n=payload["n"], in_neighbors=in_neighbors)
        ctilde = []
        for i, row in enumerate(payload["ctilde"]):
            table = dict((int(j), float(w)) for j, w in row)
            ctilde.append(np.array([table[j] for j in g.in_neighbors[i]]))
        return ParametricModel(
            graph=g,
            beta=payload["beta"],
            baseline=np.array(payload["baseline"], dtype=np.float64),
            ctilde=ctilde,
            r=payload["r"],
            sigma=payload["sigma"],
        )
    if kind == "coefficient":
        g = Graph(n=payload["n"], in_neighbors=[sorted(x) for x in payload["in_neighbors"]])
        coefficients = [
            {tuple(subset): float(value) for subset, value in row}
            for row in payload["coefficients"]
        ]
        return CoefficientModel(graph=g, beta=payload["beta"], coefficients=coefficients)
    raise ValueError(f"unknown model kind {kind!r}")
