"""Federation round loop and cross-strategy comparison harness.

One round = broadcast the global parameters, train every client locally,
evaluate each client's freshly trained model on its own test set, then fold
the updates into the next global model with the configured strategy.

Per-round accuracy is deliberately measured on the local models *before*
aggregation (metrics travel with the updates); the aggregated model's own
test accuracy is logged alongside for transparency.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .data import ClientShard
from .exceptions import ConfigError, NumericError
from .models import ModelSpec, TrainConfig, evaluate, init_params, sgd_train
from .nelder_mead import SimplexConfig
from .params import ParamVector
from .strategies import (
    STRATEGIES,
    Aggregator,
    AlphaSolution,
    ClientUpdate,
    StrategyHyperparams,
    default_hyperparams,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FederationConfig:
    model: ModelSpec
    train: TrainConfig
    strategy: str = "fedavg"
    strategy_hp: StrategyHyperparams | None = None
    simplex: SimplexConfig = SimplexConfig()
    rounds: int = 10
    min_clients: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.min_clients < 1:
            raise ConfigError("min_clients must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    def resolved_hyperparams(self) -> StrategyHyperparams:
        if self.strategy_hp is not None:
            return self.strategy_hp
        return default_hyperparams(self.strategy)


@dataclass(frozen=True)
class ClientRoundMetrics:
    client_id: str
    num_test_examples: int
    accuracy: float
    loss: float


@dataclass(frozen=True)
class RoundReport:
    """Outcome of one round.  ``aggregated_accuracy`` is the test-count
    weighted mean of the local models' accuracies; ``global_accuracy`` is the
    same weighting applied to the newly aggregated model."""

    round: int
    per_client: tuple[ClientRoundMetrics, ...]
    aggregated_accuracy: float
    global_accuracy: float
    alpha: AlphaSolution | None = None


def weighted_accuracy(entries: Sequence[tuple[int, float]]) -> float:
    """Count-weighted mean accuracy: sum(n_i * acc_i) / sum(n_i)."""
    if len(entries) == 0:
        raise ValueError("entries must be nonempty")
    for count, _ in entries:
        if count < 1:
            raise ValueError("counts must be >= 1")
    total = float(sum(count for count, _ in entries))
    return sum(count * acc for count, acc in entries) / total


def run_federation(
    config: FederationConfig, shards: Sequence[ClientShard]
) -> list[RoundReport]:
    """Run the configured number of rounds over the given clients.

    Deterministic: the global model starts from ``init_params(model, seed)``
    and client ``i`` always trains with seed ``config.seed + i``, so a fixed
    (config, shards) pair reproduces the same reports bit for bit.
    """
    if len(shards) < config.min_clients:
        raise ConfigError(
            f"need at least {config.min_clients} clients, got {len(shards)}"
        )
    for shard in shards:
        if len(shard.train) == 0 or len(shard.test) == 0:
            raise ConfigError(f"{shard.client_id}: empty train or test split")

    global_params = init_params(config.model, config.seed)
    aggregator = Aggregator(
        config.strategy, config.resolved_hyperparams(), config.simplex
    )
    reports: list[RoundReport] = []
    for round_idx in range(1, config.rounds + 1):
        updates: list[ClientUpdate] = []
        per_client: list[ClientRoundMetrics] = []
        for i, shard in enumerate(shards):
            train_cfg = dataclasses.replace(config.train, seed=config.seed + i)
            local = sgd_train(global_params, config.model, shard.train, train_cfg)
            metrics = evaluate(local, config.model, shard.test)
            per_client.append(
                ClientRoundMetrics(
                    client_id=shard.client_id,
                    num_test_examples=len(shard.test),
                    accuracy=metrics["accuracy"],
                    loss=metrics["loss"],
                )
            )
            updates.append(
                ClientUpdate(
                    client_id=shard.client_id,
                    num_examples=len(shard.train),
                    params=local,
                    local_metrics=metrics,
                )
            )
        aggregated_accuracy = weighted_accuracy(
            [(m.num_test_examples, m.accuracy) for m in per_client]
        )
        try:
            global_params = aggregator.aggregate(updates, global_params)
        except NumericError as exc:
            raise NumericError(
                f"{config.strategy}: aggregation failed in round {round_idx}: {exc}"
            ) from exc
        global_accuracy = weighted_accuracy(
            [
                (len(s.test), evaluate(global_params, config.model, s.test)["accuracy"])
                for s in shards
            ]
        )
        reports.append(
            RoundReport(
                round=round_idx,
                per_client=tuple(per_client),
                aggregated_accuracy=aggregated_accuracy,
                global_accuracy=global_accuracy,
                alpha=aggregator.last_alpha,
            )
        )
        logger.debug(
            "%s round %d: aggregated_accuracy=%.4f global_accuracy=%.4f",
            config.strategy,
            round_idx,
            aggregated_accuracy,
            global_accuracy,
        )
    return reports


@dataclass(frozen=True)
class StrategyRun:
    """All rounds of one (strategy, seed) federation."""

    strategy: str
    seed: int
    reports: tuple[RoundReport, ...]

    @property
    def round_accuracies(self) -> list[float]:
        return [r.aggregated_accuracy for r in self.reports]

    @property
    def mean_accuracy(self) -> float:
        return sum(self.round_accuracies) / len(self.reports)


@dataclass(frozen=True)
class ComparisonResult:
    """Per-(strategy, seed) curves plus the summary means."""

    runs: tuple[StrategyRun, ...]

    @property
    def strategies(self) -> list[str]:
        seen: list[str] = []
        for run in self.runs:
            if run.strategy not in seen:
                seen.append(run.strategy)
        return seen

    @property
    def seeds(self) -> list[int]:
        seen: list[int] = []
        for run in self.runs:
            if run.seed not in seen:
                seen.append(run.seed)
        return seen

    def runs_for(self, strategy: str) -> list[StrategyRun]:
        return [run for run in self.runs if run.strategy == strategy]

    def mean_accuracy(self, strategy: str) -> float:
        """Mean over seeds of the mean-over-rounds aggregated accuracy."""
        per_seed = [run.mean_accuracy for run in self.runs_for(strategy)]
        if not per_seed:
            raise ValueError(f"no runs recorded for strategy {strategy!r}")
        return sum(per_seed) / len(per_seed)


def compare_strategies(
    base_config: FederationConfig,
    strategies: Sequence[str],
    seeds: Sequence[int],
    shard_factory: Callable[[int], Sequence[ClientShard]],
    hyperparams: Mapping[str, StrategyHyperparams] | None = None,
) -> ComparisonResult:
    """Run every strategy on identical shards and identical initial weights.

    For each seed, ``shard_factory(seed)`` builds the client shards once and
    every strategy reuses them; the shared seed also fixes w0, so curves
    differ only through the aggregation rule.  ``hyperparams`` overrides the
    per-strategy defaults where present.
    """
    if len(strategies) == 0:
        raise ValueError("need at least one strategy")
    if len(seeds) == 0:
        raise ValueError("need at least one seed")
    overrides = dict(hyperparams) if hyperparams is not None else {}
    runs: list[StrategyRun] = []
    for seed in seeds:
        shards = shard_factory(seed)
        for strategy in strategies:
            config = dataclasses.replace(
                base_config,
                strategy=strategy,
                strategy_hp=overrides.get(strategy, default_hyperparams(strategy)),
                seed=seed,
            )
            logger.info("running strategy=%s seed=%d", strategy, seed)
            reports = run_federation(config, shards)
            runs.append(
                StrategyRun(strategy=strategy, seed=seed, reports=tuple(reports))
            )
    return ComparisonResult(runs=tuple(runs))
