"""Config-driven Monte-Carlo experiment runner.

For every value of the swept parameter the runner samples G interference
networks, draws an outcome model on each, rolls out N schedules per
network, evaluates every configured estimator, and emits one record per
evaluation. Seeds are derived by stable hashing, so the record stream is
byte-for-byte reproducible regardless of worker count.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .design import brd_schedule, brd_target_ladder, crd_schedule, crd_target_ladder
from .errors import ConfigError, DegenerateGroupError
from .estimators import dm, dm_threshold, ls_estimate, tte_pi, two_point_linear
from .graph import generate_configuration_model
from .outcomes import observe, sample_parametric_model, true_tte

ESTIMATOR_TAGS = (
    "pi_brd_p",
    "pi_crd_k",
    "pi_brd_khat",
    "dm",
    "dm_thresh",
    "ls_num",
    "ls_prop",
    "two_point",
)
BRD_ONLY = {"pi_brd_p", "pi_brd_khat"}
CRD_ONLY = {"pi_crd_k"}
SWEEPABLE = ("n", "r", "budget", "beta")

RECORD_FIELDS = (
    "design",
    "estimator",
    "n",
    "beta",
    "r",
    "budget",
    "graph_seed",
    "schedule_seed",
    "tte_true",
    "tte_est",
    "status",
)
SUMMARY_FIELDS = (
    "sweep_param",
    "sweep_value",
    "estimator",
    "mean_rel_bias",
    "std_rel_bias",
    "n_ok",
    "n_skipped",
)


@dataclass
class ExperimentConfig:
    """One experiment: a parameter sweep evaluated by several estimators."""

    design: str
    beta: int
    n: int
    r: float
    budget: float
    sweep_param: str
    sweep_values: list
    G: int
    N: int
    estimators: list
    master_seed: int
    sigma: float = 0.0
    lam: float = 0.75
    exponent: float = 2.5
    out: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.design not in ("brd", "crd"):
            raise ConfigError(f"design must be 'brd' or 'crd', got {self.design!r}")
        if self.sweep_param not in SWEEPABLE:
            raise ConfigError(f"sweep_param must be one of {SWEEPABLE}, got {self.sweep_param!r}")
        if not self.sweep_values:
            raise ConfigError("sweep_values must be nonempty")
        if self.G < 1 or self.N < 1:
            raise ConfigError(f"G and N must be >= 1, got G={self.G}, N={self.N}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.estimators:
            raise ConfigError("estimator list must be nonempty")
        for tag in self.estimators:
            if tag not in ESTIMATOR_TAGS:
                raise ConfigError(f"unknown estimator tag {tag!r}; known: {ESTIMATOR_TAGS}")
            if tag in BRD_ONLY and self.design != "brd":
                raise ConfigError(f"estimator {tag!r} requires the brd design")
            if tag in CRD_ONLY and self.design != "crd":
                raise ConfigError(f"estimator {tag!r} requires the crd design")
        for index in range(len(self.sweep_values)):
            point = self.resolve(index)
            if point["n"] < 1 or point["n"] != int(point["n"]):
                raise ConfigError(f"population size must be a positive integer, got {point['n']}")
            if point["beta"] < 1 or point["beta"] != int(point["beta"]):
                raise ConfigError(f"beta must be a positive integer, got {point['beta']}")
            if point["r"] < 0:
                raise ConfigError(f"effect ratio must be >= 0, got {point['r']}")
            if not 0 < point["budget"] <= 1:
                raise ConfigError(f"budget must lie in (0, 1], got {point['budget']}")
            needs_ls = any(tag.startswith("ls_") for tag in self.estimators)
            if needs_ls and point["n"] < 2 * point["beta"] + 1:
                raise ConfigError(
                    f"least squares needs n >= 2*beta+1, got n={point['n']}, beta={point['beta']}"
                )

    def resolve(self, sweep_index: int):
        """Fixed parameters with the swept one replaced by its sweep value."""
        point = {"n": self.n, "beta": self.beta, "r": self.r, "budget": self.budget}
        point[self.sweep_param] = self.sweep_values[sweep_index]
        point["n"] = int(point["n"])
        point["beta"] = int(point["beta"])
        return point

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        data = dict(payload)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        extra = set(data) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return data


@dataclass
class ExperimentRecord:
    """One (graph, schedule, estimator) evaluation."""

    design: str
    estimator: str
    n: int
    beta: int
    r: float
    budget: float
    graph_seed: int
    schedule_seed: int
    tte_true: float
    tte_est: float
    status: str
    sweep_index: int = field(default=0, compare=False)
    graph_index: int = field(default=0, compare=False)
    schedule_index: int = field(default=0, compare=False)


@dataclass
class SummaryRow:
    sweep_param: str
    sweep_value: float
    estimator: str
    mean_rel_bias: float | None
    std_rel_bias: float | None
    n_ok: int
    n_skipped: int


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit child seed from the master seed and a role path."""
    text = ":".join(str(part) for part in (master_seed, *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _estimate_one(tag: str, graph, schedule, obs, beta: int, lam: float) -> float:
    if tag == "pi_brd_p":
        return tte_pi(obs, schedule.x_targets, name=tag).value
    if tag == "pi_crd_k":
        return tte_pi(obs, schedule.x_targets, name=tag).value
    if tag == "pi_brd_khat":
        return tte_pi(obs, schedule.realized_fractions, name=tag).value
    if tag == "two_point":
        x = schedule.x_targets
        return two_point_linear(obs, float(x[0]), float(x[-1]), name=tag).value
    z = schedule.treatments[-1]
    y = obs.matrix[-1]
    if tag == "dm":
        return dm(z, y).value
    if tag == "dm_thresh":
        return dm_threshold(z, y, graph, lam).value
    if tag == "ls_num":
        return ls_estimate(z, y, graph, beta, "count", name=tag).value
    if tag == "ls_prop":
        return ls_estimate(z, y, graph, beta, "fraction", name=tag).value
    raise ConfigError(f"unknown estimator tag {tag!r}")


def _run_graph_block(cfg: ExperimentConfig, sweep_index: int, graph_index: int) -> list:
    point = cfg.resolve(sweep_index)
    n, beta, r, budget = point["n"], point["beta"], point["r"], point["budget"]
    graph_seed = derive_seed(cfg.master_seed, "graph", sweep_index, graph_index)
    model_seed = derive_seed(cfg.master_seed, "model", sweep_index, graph_index)
    graph = generate_configuration_model(n, cfg.exponent, graph_seed)
    model = sample_parametric_model(graph, beta, r, model_seed, sigma=cfg.sigma)
    tte = true_tte(model)
    if abs(tte) < 1e-12:
        raise ConfigError("true TTE is numerically zero; relative bias undefined")

    records = []
    for schedule_index in range(cfg.N):
        schedule_seed = derive_seed(cfg.master_seed, "schedule", sweep_index, graph_index, schedule_index)
        noise_seed = derive_seed(cfg.master_seed, "noise", sweep_index, graph_index, schedule_index)
        if cfg.design == "brd":
            schedule = brd_schedule(brd_target_ladder(budget, beta), n, schedule_seed)
        else:
            schedule = crd_schedule(crd_target_ladder(budget, n, beta), n, schedule_seed)
        obs = observe(model, schedule, noise_seed)
        for tag in cfg.estimators:
            try:
                value = _estimate_one(tag, graph, schedule, obs, beta, cfg.lam)
                status = "ok"
            except DegenerateGroupError:
                value = math.nan
                status = "skipped"
            records.append(
                ExperimentRecord(
                    design=cfg.design,
                    estimator=tag,
                    n=n,
                    beta=beta,
                    r=float(r),
                    budget=float(budget),
                    graph_seed=graph_seed,
                    schedule_seed=schedule_seed,
                    tte_true=tte,
                    tte_est=value,
                    status=status,
                    sweep_index=sweep_index,
                    graph_index=graph_index,
                    schedule_index=schedule_index,
                )
            )
    return records


def _record_key(record: ExperimentRecord):
    return (record.sweep_index, record.graph_index, record.schedule_index, record.estimator)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[ExperimentRecord]:
    """Run the full sweep and return records in canonical sorted order.

    The result is identical for any worker count: every replicate derives
    its seeds from (master_seed, indices) alone, and records are sorted on
    (sweep value, graph, schedule, estimator) before returning.
    """
    workers = cfg.workers if workers is None else workers
    tasks = [
        (sweep_index, graph_index)
        for sweep_index in range(len(cfg.sweep_values))
        for graph_index in range(cfg.G)
    ]
    if workers <= 1:
        blocks = [_run_graph_block(cfg, si, gi) for si, gi in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_graph_block, cfg, si, gi) for si, gi in tasks]
            blocks = [future.result() for future in futures]
    records = [record for block in blocks for record in block]
    records.sort(key=_record_key)
    return records


def relative_bias(record: ExperimentRecord) -> float:
    return (record.tte_est - record.tte_true) / record.tte_true


def aggregate(records: list[ExperimentRecord], sweep_param: str) -> list[SummaryRow]:
    """Per (sweep value, estimator) mean and population std of relative bias.

    Skipped records are counted but excluded from the statistics; a group
    with no ok records is emitted with count 0 and null statistics.
    """
    if not records:
        raise ValueError("cannot aggregate an empty record set")
    groups: dict[tuple, dict] = {}
    for record in records:
        key = (float(getattr(record, sweep_param)), record.estimator)
        bucket = groups.setdefault(key, {"ok": [], "skipped": 0})
        if record.status == "ok":
            bucket["ok"].append(relative_bias(record))
        else:
            bucket["skipped"] += 1
    rows = []
    for (value, estimator) in sorted(groups):
        bucket = groups[(value, estimator)]
        ok = bucket["ok"]
        rows.append(
            SummaryRow(
                sweep_param=sweep_param,
                sweep_value=value,
                estimator=estimator,
                mean_rel_bias=float(np.mean(ok)) if ok else None,
                std_rel_bias=float(np.std(ok)) if ok else None,
                n_ok=len(ok),
                n_skipped=bucket["skipped"],
            )
        )
    return rows


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: list[ExperimentRecord], destination: str | os.PathLike) -> None:
    with open(destination, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(RECORD_FIELDS) + "\n")
        for record in records:
            fh.write(",".join(_format_cell(getattr(record, name)) for name in RECORD_FIELDS) + "\n")


def read_records_csv(source: str | os.PathLike) -> list[ExperimentRecord]:
    with open(source, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != ",".join(RECORD_FIELDS):
        raise ValueError(f"unexpected record CSV header; expected {','.join(RECORD_FIELDS)}")
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        records.append(
            ExperimentRecord(
                design=cells[0],
                estimator=cells[1],
                n=int(cells[2]),
                beta=int(cells[3]),
                r=float(cells[4]),
                budget=float(cells[5]),
                graph_seed=int(cells[6]),
                schedule_seed=int(cells[7]),
                tte_true=float(cells[8]),
                tte_est=float(cells[9]),
                status=cells[10],
            )
        )
    return records


def write_summary_csv(rows: list[SummaryRow], destination: str | os.PathLike) -> None:
    with open(destination, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(getattr(row, name)) for name in SUMMARY_FIELDS) + "\n")
