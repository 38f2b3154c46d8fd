"""Reverse engineering: search topologies, train, crystallize, prune, extract.

Networks have ``hidden_layers`` layers of neurons counting the single
output unit, so the default of three gives ``m -> w -> w -> 1``.  Widths
follow a schedule; each width gets a fixed number of fresh random tries
before the next, larger width is attempted.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .dataset import Dataset
from .extract import ExtractionReport, extract_formula
from .logic import variables
from .network import Network
from .training import (
    TrainConfig,
    crisp_crystallize,
    init_network,
    lm_train,
    mse,
    obs_prune,
)

log = logging.getLogger(__name__)

# training counts as bad when it stalls or ends above this multiple of the target
BAD_TRAINING_FACTOR = 10.0
# retraining a crisp network that misses some cases runs down to this mse
POLISH_TARGET = 1e-12


@dataclass
class PipelineConfig:
    hidden_layers: int = 3
    width_schedule: list[int] | None = None  # None: [m, ceil(3m/2), 2m, 3m]
    tries_per_topology: int | None = None  # None: 5 + m
    train: TrainConfig = field(default_factory=TrainConfig)
    crystallization_mse_slack: float | None = None  # None: 2 * mse target
    grain: int | None = None
    prune: bool = True

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.width_schedule is not None:
            ws = list(self.width_schedule)
            if not ws or any(w < 1 for w in ws):
                raise ValueError("width_schedule must be a nonempty list of positive widths")
            if any(b < a for a, b in zip(ws, ws[1:])):
                raise ValueError("width_schedule must be nondecreasing")
            self.width_schedule = ws
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)

    def widths(self, m: int) -> list[int]:
        if self.width_schedule is not None:
            return list(self.width_schedule)
        return [m, math.ceil(3 * m / 2), 2 * m, 3 * m]

    def tries(self, m: int) -> int:
        if self.tries_per_topology is not None:
            return self.tries_per_topology
        return self.train.retries(m)

    @property
    def slack(self) -> float:
        if self.crystallization_mse_slack is None:
            return 2.0 * self.train.mse_target
        return self.crystallization_mse_slack

    @property
    def gate(self) -> float:
        """Largest crisp-network mse accepted by the crystallization gate."""
        return self.train.mse_target + self.slack

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown pipeline config keys: {sorted(unknown)}")
        data = dict(data)
        if "train" in data:
            train = data["train"]
            tknown = {f.name for f in fields(TrainConfig)}
            bad = set(train) - tknown
            if bad:
                raise ValueError(f"unknown train config keys: {sorted(bad)}")
            data["train"] = TrainConfig(**train)
        return cls(**data)


def load_pipeline_config(path) -> PipelineConfig:
    with open(path) as fh:
        return PipelineConfig.from_dict(json.load(fh))


@dataclass
class Attempt:
    width: int
    try_index: int
    outcome: str  # bad_training | crystallization_failed | within_slack | success
    train_mse: float
    crisp_mse: float | None
    iterations: int
    seconds: float

    @property
    def topology(self) -> str:
        return f"{self.width}"


@dataclass
class PipelineResult:
    report: ExtractionReport | None
    network: Network | None
    attempts_log: list[Attempt]
    total_time: float

    @property
    def success(self) -> bool:
        return self.report is not None

    @property
    def equivalent(self) -> bool:
        """The extracted formula reproduces every training target."""
        return bool(self.report is not None and self.report.equivalent)

    def attempts_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            # wall-clock times stay out so the file is reproducible byte for byte
            w.writerow(["width", "try", "outcome", "train_mse", "crisp_mse", "iterations"])
            for a in self.attempts_log:
                w.writerow([
                    a.width, a.try_index, a.outcome, repr(a.train_mse),
                    "" if a.crisp_mse is None else repr(a.crisp_mse),
                    a.iterations,
                ])


def _hidden(cfg: PipelineConfig, width: int) -> list[int]:
    return [width] * (cfg.hidden_layers - 1)


# fresh networks are redrawn while some unit is saturated on every case
MAX_REDRAWS = 100


def _all_units_active(net: Network, x: np.ndarray) -> bool:
    a = x
    for layer in net.layers:
        z = a @ layer.weights.T + layer.biases
        if not ((z > 0) & (z < 1)).any(axis=0).all():
            return False
        a = np.clip(z, 0.0, 1.0)
    return True


def fresh_network(data: Dataset, hidden: list[int], rng: np.random.Generator) -> Network:
    """Uniform random network, redrawn while a unit has zero gradient on all cases.

    A unit whose pre-activation is outside (0, 1) for every case never
    receives an update, so such draws are wasted tries.  After
    ``MAX_REDRAWS`` the last draw is used as is.
    """
    for _ in range(MAX_REDRAWS):
        net = init_network(data.column_names, hidden, rng)
        if _all_units_active(net, data.inputs):
            break
    return net


def _refine(net: Network, data: Dataset, cfg: PipelineConfig) -> Network:
    """Prune a crisp network, keeping the result only if it fits no worse."""
    before = mse(net, data)
    budget = replace(cfg.train, mse_target=max(before, 1e-12))
    try:
        pruned, _ = obs_prune(net.copy(crystallized=False), data, budget)
    except np.linalg.LinAlgError:
        return net
    pruned = crisp_crystallize(pruned)
    if mse(pruned, data) <= before:
        return pruned
    return net


def reverse_engineer(data: Dataset, cfg: PipelineConfig | None = None) -> PipelineResult:
    """Find a crisp network for ``data`` and read a formula off it.

    Tries run in schedule order with seeds derived from ``cfg.train.seed``,
    the topology index and the try index, so results are reproducible.
    A crisp network inside the gate but above the mse target is only kept
    as a fallback; the search goes on for one that meets the target and
    the fallback is returned if the schedule runs out.
    """
    if cfg is None:
        cfg = PipelineConfig()
    if len(data) == 0:
        raise ValueError("reverse engineering needs a nonempty dataset")
    m = data.n_inputs
    target = cfg.train.mse_target
    start = time.perf_counter()
    attempts: list[Attempt] = []
    fallback: tuple[Network, float] | None = None
    for ti, width in enumerate(cfg.widths(m)):
        for k in range(cfg.tries(m)):
            t0 = time.perf_counter()
            rng = np.random.default_rng([cfg.train.seed, ti, k])
            net = fresh_network(data, _hidden(cfg, width), rng)
            res = lm_train(net, data, cfg.train)
            iters = res.iterations
            if res.stalled or res.mse > BAD_TRAINING_FACTOR * target:
                attempts.append(Attempt(width, k, "bad_training", res.mse, None, iters,
                                        time.perf_counter() - t0))
                log.debug("width %d try %d: bad training (mse %.4g)", width, k, res.mse)
                continue
            crisp = crisp_crystallize(res.network)
            crisp_mse = mse(crisp, data)
            if crisp_mse > 0.0:
                # back to the learning phase from the crisp network, aiming at an exact fit
                polish = replace(cfg.train, mse_target=POLISH_TARGET)
                again = lm_train(crisp.copy(crystallized=False), data, polish)
                iters += again.iterations
                crisp2 = crisp_crystallize(again.network)
                mse2 = mse(crisp2, data)
                if mse2 < crisp_mse:
                    crisp, crisp_mse = crisp2, mse2
            if crisp_mse > cfg.gate:
                attempts.append(Attempt(width, k, "crystallization_failed", res.mse, crisp_mse,
                                        iters, time.perf_counter() - t0))
                log.debug("width %d try %d: crisp mse %.4g above gate", width, k, crisp_mse)
                continue
            if cfg.prune:
                crisp = _refine(crisp, data, cfg)
            crisp.grain = cfg.grain
            final_mse = mse(crisp, data)
            if final_mse > target:
                # inside the slack only: keep as a fallback and look for a closer fit
                attempts.append(Attempt(width, k, "within_slack", res.mse, final_mse, iters,
                                        time.perf_counter() - t0))
                if fallback is None or final_mse < fallback[1]:
                    fallback = (crisp, final_mse)
                continue
            report = extract_formula(crisp, data.inputs, data.targets)
            attempts.append(Attempt(width, k, "success", res.mse, final_mse, iters,
                                    time.perf_counter() - t0))
            log.info("width %d try %d: extracted %s", width, k, report.formula_text)
            return PipelineResult(report, crisp, attempts, time.perf_counter() - start)
    if fallback is not None:
        crisp = fallback[0]
        report = extract_formula(crisp, data.inputs, data.targets)
        log.info("schedule exhausted; best network within slack gives %s", report.formula_text)
        return PipelineResult(report, crisp, attempts, time.perf_counter() - start)
    return PipelineResult(None, None, attempts, time.perf_counter() - start)


class PipelineError(RuntimeError):
    pass


def select_attributes(data: Dataset, cfg: PipelineConfig | None = None) -> tuple[str, ...]:
    """Input columns the extracted model depends on, in dataset order.

    Meant to run with a weak mse target on wide binary data.
    """
    result = reverse_engineer(data, cfg)
    if result.report is None:
        raise PipelineError("no network passed the crystallization gate")
    used = set(variables(result.report.formula))
    return tuple(c for c in data.column_names if c in used)
