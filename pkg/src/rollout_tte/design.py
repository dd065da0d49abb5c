"""Staggered rollout treatment schedules.

Both designs produce a (T+1) x n binary matrix of monotone treatment
assignments: once treated, an individual stays treated. Bernoulli rollouts
threshold a single uniform draw per individual against the stage
probabilities; completely randomized rollouts treat growing prefixes of a
uniform random permutation, which makes every stage an exact uniform
k_t-subset and the realized counts equal to the targets.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

DEGENERATE_GAP = 1e-12


@dataclass
class TreatmentSchedule:
    """A realized monotone rollout.

    Attributes:
        kind: "brd" or "crd".
        targets: Stage probabilities p_t (brd) or treated counts k_t (crd).
        treatments: (T+1) x n binary matrix, row t = assignment z^t.
    """

    kind: str
    targets: np.ndarray
    treatments: np.ndarray
    realized_counts: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.treatments = np.asarray(self.treatments, dtype=np.int8)
        self.realized_counts = self.treatments.sum(axis=1).astype(np.int64)

    @property
    def n(self) -> int:
        return self.treatments.shape[1]

    @property
    def num_stages(self) -> int:
        return self.treatments.shape[0]

    @property
    def x_targets(self) -> np.ndarray:
        """Targets on the treated-fraction scale: p for brd, k/n for crd."""
        if self.kind == "brd":
            return np.asarray(self.targets, dtype=np.float64)
        return np.asarray(self.targets, dtype=np.float64) / self.n

    @property
    def realized_fractions(self) -> np.ndarray:
        return self.realized_counts / self.n

    @property
    def delta(self) -> float:
        """Minimum consecutive gap of the fraction-scale targets."""
        x = self.x_targets
        if len(x) < 2:
            return math.inf
        return float(np.diff(x).min())


def brd_schedule(p, n: int, seed: int) -> TreatmentSchedule:
    """Sample a Bernoulli staggered rollout.

    Each individual draws u_i ~ U[0,1) once and is treated at stage t iff
    u_i < p_t, so the stage-t marginal is iid Bernoulli(p_t) and
    monotonicity holds by construction.

    Args:
        p: Nondecreasing stage probabilities in [0, 1].
        n: Population size.
        seed: RNG seed.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or len(p) < 1:
        raise ValueError("probability targets must be a nonempty vector")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"probability targets must lie in [0, 1], got {p}")
    if np.any(np.diff(p) < 0):
        raise ValueError(f"probability targets must be nondecreasing, got {p}")
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")

    u = np.random.default_rng(seed).random(n)
    treatments = (u[None, :] < p[:, None]).astype(np.int8)
    return TreatmentSchedule(kind="brd", targets=p, treatments=treatments)


def crd_schedule(k, n: int, seed: int) -> TreatmentSchedule:
    """Sample a completely randomized staggered rollout.

    Stage t treats the first k_t entries of one uniform random permutation
    (a seeded Fisher-Yates shuffle), which is distributionally identical to
    topping up a uniform (k_t - k_{t-1})-subset of the untreated pool at
    each stage. Realized counts equal the targets exactly.

    Args:
        k: Nondecreasing integer treated counts in [0, n].
        n: Population size.
        seed: RNG seed.
    """
    k = np.asarray(k)
    if k.ndim != 1 or len(k) < 1:
        raise ValueError("count targets must be a nonempty vector")
    if not np.issubdtype(k.dtype, np.integer):
        if not np.all(k == np.floor(k)):
            raise ValueError(f"count targets must be integers, got {k}")
        k = k.astype(np.int64)
    k = k.astype(np.int64)
    if np.any(k < 0) or np.any(k > n):
        raise ValueError(f"count targets must lie in [0, {n}], got {k}")
    if np.any(np.diff(k) < 0):
        raise ValueError(f"count targets must be nondecreasing, got {k}")
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")

    order = np.random.default_rng(seed).permutation(n)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    treatments = (rank[None, :] < k[:, None]).astype(np.int8)
    return TreatmentSchedule(kind="crd", targets=k, treatments=treatments)


def bracket(k: float, n: int, s: int) -> float:
    """Probability that s specific individuals are all treated under CRD(k).

    Evaluates prod_{i=0}^{s-1} (k - i) / (n - i). Returns 1 for s = 0 and 0
    for s > k. Fractional k is accepted (the product form extends to real
    arguments, which the asymptotic ratio checks rely on).
    """
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    if s < 0:
        raise ValueError(f"subset size must be >= 0, got {s}")
    if s > n:
        raise ValueError(f"subset size {s} exceeds population {n}")
    if s == 0:
        return 1.0
    if s > k:
        return 0.0
    value = 1.0
    for i in range(s):
        value *= (k - i) / (n - i)
    return value


def round_half_up(x: float) -> int:
    """Round to the nearest integer with ties going up."""
    return int(math.floor(x + 0.5))


def brd_target_ladder(budget: float, beta: int) -> np.ndarray:
    """Evenly spaced probabilities p_t = t * budget / beta, t = 0..beta."""
    if not 0 < budget <= 1:
        raise ValueError(f"budget must lie in (0, 1], got {budget}")
    return np.array([t * budget / beta for t in range(beta + 1)])


def crd_target_ladder(budget: float, n: int, beta: int) -> np.ndarray:
    """Counts k_t = round(t * budget * n / beta) with ties rounded up."""
    if not 0 < budget <= 1:
        raise ValueError(f"budget must lie in (0, 1], got {budget}")
    return np.array([round_half_up(t * budget * n / beta) for t in range(beta + 1)], dtype=np.int64)


def save_schedule(schedule: TreatmentSchedule, destination: str | os.PathLike) -> None:
    """Write a schedule as text: header, target line, then bitstring rows."""
    T = schedule.num_stages - 1
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write(f"design {schedule.kind} {T} {schedule.n}\n")
        if schedule.kind == "brd":
            fh.write(" ".join(repr(float(x)) for x in schedule.targets) + "\n")
        else:
            fh.write(" ".join(str(int(x)) for x in schedule.targets) + "\n")
        for row in schedule.treatments:
            fh.write("".join("1" if v else "0" for v in row) + "\n")


def load_schedule(source: str | os.PathLike) -> TreatmentSchedule:
    """Read a schedule written by save_schedule."""
    with open(source, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("line 1: empty schedule file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "design" or header[1] not in ("brd", "crd"):
        raise ParseError(f"line 1: expected 'design brd|crd T n', got {lines[0]!r}")
    kind = header[1]
    try:
        T, n = int(header[2]), int(header[3])
    except ValueError:
        raise ParseError(f"line 1: non-integer dimensions in {lines[0]!r}")
    if len(lines) < T + 3:
        raise ParseError(f"expected {T + 3} lines, found {len(lines)}")
    try:
        if kind == "brd":
            targets = np.array([float(x) for x in lines[1].split()])
        else:
            targets = np.array([int(x) for x in lines[1].split()], dtype=np.int64)
    except ValueError:
        raise ParseError(f"line 2: malformed target vector {lines[1]!r}")
    if len(targets) != T + 1:
        raise ParseError(f"line 2: expected {T + 1} targets, got {len(targets)}")
    rows = []
    for t in range(T + 1):
        line = lines[2 + t]
        if len(line) != n or any(ch not in "01" for ch in line):
            raise ParseError(f"line {3 + t}: expected {n}-character bitstring")
        rows.append([1 if ch == "1" else 0 for ch in line])
    return TreatmentSchedule(kind=kind, targets=targets, treatments=np.array(rows, dtype=np.int8))
