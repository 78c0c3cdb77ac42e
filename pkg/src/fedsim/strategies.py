"""Server-side aggregation strategies.

All six strategies share one shape of contract: given this round's client
updates (and, for the stateful ones, the previous global model plus carried
state), produce the next global parameter vector.

* ``fedavg``     -- data-count weighted mean of client parameters.
* ``fedavgm``    -- fedavg plus a server-side momentum recursion on the
                    pseudo-gradient (previous global minus the fedavg mean).
* ``fedmedian``  -- coordinate-wise median step, robust to outlying clients.
* ``fedopt``     -- the averaged client delta drives a server optimizer
                    (plain sgd / adagrad / adam / yogi second-moment rules).
* ``fedyogi``    -- fedopt preset with the yogi second-moment rule.
* ``fedavgopt``  -- weighted mean with one scaling coefficient per client,
                    chosen each round by Nelder-Mead to minimize the summed
                    normalized distance between the candidate aggregate and
                    every client's parameters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import NumericError
from .nelder_mead import MinimizeResult, SimplexConfig, minimize
from .params import (
    ParamVector,
    coordinate_median,
    full_like,
    l2_distance,
    l2_norm_sum,
    linear_combination,
    zeros_like,
)

STRATEGIES = ("fedavg", "fedavgm", "fedmedian", "fedopt", "fedyogi", "fedavgopt")
SERVER_OPTIMIZERS = ("sgd", "adagrad", "adam", "yogi")

#: Floor applied to the objective denominators so candidate aggregates that
#: nearly cancel a client's parameters stay finite for the solver.
DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class ClientUpdate:
    """One client's round output: trained parameters, its data count, and
    whatever local metrics accompanied them (test accuracy included)."""

    client_id: str
    num_examples: int
    params: ParamVector
    local_metrics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.num_examples < 1:
            raise ValueError("num_examples must be >= 1")


@dataclass(frozen=True)
class StrategyState:
    """Cross-round server state.

    ``momentum`` is carried only by fedavgm; ``first_moment``/``second_moment``
    only by the fedopt family.  ``round`` counts completed aggregations.
    """

    round: int = 0
    momentum: ParamVector | None = None
    first_moment: ParamVector | None = None
    second_moment: ParamVector | None = None


@dataclass(frozen=True)
class StrategyHyperparams:
    server_lr: float = 1.0
    momentum_beta: float = 0.0
    tau: float = 1e-9
    beta1: float = 0.0
    beta2: float = 0.0
    server_optimizer: str = "sgd"

    def __post_init__(self) -> None:
        # server_lr = 0 is permitted: the zero-step behavior is part of the
        # fedmedian contract.
        if not self.server_lr >= 0:
            raise ValueError("server_lr must be >= 0")
        if not 0 <= self.momentum_beta < 1:
            raise ValueError("momentum_beta must be in [0, 1)")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not 0 <= self.beta1 < 1:
            raise ValueError("beta1 must be in [0, 1)")
        if not 0 <= self.beta2 < 1:
            raise ValueError("beta2 must be in [0, 1)")
        if self.server_optimizer not in SERVER_OPTIMIZERS:
            raise ValueError(f"server_optimizer must be one of {SERVER_OPTIMIZERS}")


def default_hyperparams(strategy: str) -> StrategyHyperparams:
    """Out-of-the-box hyperparameters for each strategy name."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy == "fedavgm":
        return StrategyHyperparams(server_lr=1.0, momentum_beta=0.5)
    if strategy == "fedmedian":
        return StrategyHyperparams(server_lr=1.0)
    if strategy == "fedopt":
        return StrategyHyperparams(
            server_lr=0.1, tau=1e-9, beta1=0.0, beta2=0.0, server_optimizer="sgd"
        )
    if strategy == "fedyogi":
        return StrategyHyperparams(
            server_lr=0.01, tau=1e-3, beta1=0.9, beta2=0.99, server_optimizer="yogi"
        )
    return StrategyHyperparams()


@dataclass(frozen=True)
class AlphaSolution:
    """Per-round diagnostic of the coefficient solve."""

    alpha: np.ndarray
    objective_at_alpha: float
    objective_at_ones: float
    converged: bool

    def __post_init__(self) -> None:
        arr = np.asarray(self.alpha, dtype=np.float64).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)


def _params_and_counts(updates: Sequence[ClientUpdate]) -> tuple[list[ParamVector], list[int]]:
    if len(updates) == 0:
        raise ValueError("need at least one client update")
    return [u.params for u in updates], [u.num_examples for u in updates]


def aggregate_fedavg(updates: Sequence[ClientUpdate]) -> ParamVector:
    """Weighted mean of client parameters, weights = client data counts."""
    params, counts = _params_and_counts(updates)
    total = float(sum(counts))
    return linear_combination(params, [n / total for n in counts])


def aggregate_fedavgm(
    updates: Sequence[ClientUpdate],
    previous_global: ParamVector,
    state: StrategyState,
    hp: StrategyHyperparams,
) -> tuple[ParamVector, StrategyState]:
    """Server momentum over the pseudo-gradient previous - fedavg.

    v <- beta * v + (previous - fedavg);  next = previous - lr * v.
    With beta = 0 and lr = 1 this collapses to plain fedavg.
    """
    average = aggregate_fedavg(updates)
    delta = linear_combination([previous_global, average], [1.0, -1.0])
    momentum = state.momentum if state.momentum is not None else zeros_like(previous_global)
    velocity = linear_combination([momentum, delta], [hp.momentum_beta, 1.0])
    new_global = linear_combination([previous_global, velocity], [1.0, -hp.server_lr])
    new_state = dataclasses.replace(state, momentum=velocity, round=state.round + 1)
    return new_global, new_state


def aggregate_fedmedian(
    updates: Sequence[ClientUpdate],
    previous_global: ParamVector,
    hp: StrategyHyperparams,
) -> ParamVector:
    """Step from the previous global along the coordinate-median
    pseudo-gradient; at lr = 1 this is exactly the coordinate median of the
    client parameters (translation equivariance)."""
    params, _ = _params_and_counts(updates)
    median = coordinate_median(params)
    if hp.server_lr == 1.0:
        return median
    gradient = linear_combination([previous_global, median], [1.0, -1.0])
    return linear_combination([previous_global, gradient], [1.0, -hp.server_lr])


def aggregate_fedopt(
    updates: Sequence[ClientUpdate],
    previous_global: ParamVector,
    state: StrategyState,
    hp: StrategyHyperparams,
) -> tuple[ParamVector, StrategyState]:
    """Adaptive server step driven by the averaged client delta.

    delta = fedavg - previous;  m <- beta1 * m + (1 - beta1) * delta, and the
    second moment follows the configured rule (adagrad accumulates, adam
    decays, yogi moves toward delta^2 by sign).  The step is
    lr * m / (sqrt(v) + tau), or just lr * m for the sgd variant.  The second
    moment starts at tau^2 so the first division is well conditioned.
    """
    average = aggregate_fedavg(updates)
    delta = linear_combination([average, previous_global], [1.0, -1.0])
    if not np.isfinite(delta.values).all():  # defensive; construction enforces it
        raise NumericError("non-finite averaged delta")

    m_prev = state.first_moment if state.first_moment is not None else zeros_like(previous_global)
    v_prev = (
        state.second_moment
        if state.second_moment is not None
        else full_like(previous_global, hp.tau**2)
    )
    m = linear_combination([m_prev, delta], [hp.beta1, 1.0 - hp.beta1])

    d2 = delta.values**2
    if hp.server_optimizer == "sgd":
        v = v_prev
        step = hp.server_lr * m.values
    else:
        if hp.server_optimizer == "adagrad":
            v_values = v_prev.values + d2
        elif hp.server_optimizer == "adam":
            v_values = hp.beta2 * v_prev.values + (1.0 - hp.beta2) * d2
        else:  # yogi
            v_values = v_prev.values - (1.0 - hp.beta2) * d2 * np.sign(v_prev.values - d2)
        v = previous_global.with_values(v_values)
        step = hp.server_lr * m.values / (np.sqrt(v.values) + hp.tau)

    new_global = previous_global.with_values(previous_global.values + step)
    new_state = dataclasses.replace(
        state, first_moment=m, second_moment=v, round=state.round + 1
    )
    return new_global, new_state


def candidate_aggregate(
    client_params: Sequence[ParamVector],
    counts: Sequence[int],
    x: Sequence[float],
) -> ParamVector:
    """Candidate global model for coefficient vector ``x``:
    sum_i params_i * n_i * x_i / sum_i n_i.

    At x = 1 this is bit-identical to :func:`aggregate_fedavg`.  The
    denominator deliberately excludes the coefficients, so the aggregate may
    be globally rescaled rather than remaining a convex combination.
    """
    total = float(sum(counts))
    coeffs = [n * float(xi) / total for n, xi in zip(counts, x)]
    return linear_combination(list(client_params), coeffs)


def objective_f(
    x: Sequence[float],
    client_params: Sequence[ParamVector],
    counts: Sequence[int],
) -> float:
    """Sum over clients of ||w(x) - w_j|| / ||w(x) + w_j|| for the candidate
    aggregate w(x), with the denominator floored to stay finite."""
    xs = np.asarray(x, dtype=np.float64).reshape(-1)
    if not (len(xs) == len(client_params) == len(counts)) or len(xs) < 1:
        raise ValueError(
            "x, client_params, and counts must have equal nonzero length"
        )
    candidate = candidate_aggregate(client_params, counts, xs)
    return sum(
        l2_distance(candidate, w) / max(l2_norm_sum(candidate, w), DENOMINATOR_FLOOR)
        for w in client_params
    )


def aggregate_fedavgopt(
    updates: Sequence[ClientUpdate],
    config: SimplexConfig = SimplexConfig(),
) -> tuple[ParamVector, AlphaSolution]:
    """Solve for per-client scaling coefficients starting from all-ones, then
    aggregate with them.

    Because the start point is a vertex of the initial simplex, the solved
    coefficients never score worse than plain fedavg under the objective.
    """
    params, counts = _params_and_counts(updates)
    x0 = np.ones(len(updates))

    def solver_objective(x: np.ndarray) -> float:
        try:
            return objective_f(x, params, counts)
        except NumericError:
            # Overflowing candidates are rejected vertices, not run failures.
            return float("inf")

    result: MinimizeResult = minimize(solver_objective, x0, config)
    aggregate = candidate_aggregate(params, counts, result.x_star)
    solution = AlphaSolution(
        alpha=result.x_star,
        objective_at_alpha=result.f_star,
        objective_at_ones=objective_f(x0, params, counts),
        converged=result.converged,
    )
    return aggregate, solution


class Aggregator:
    """Uniform stateful wrapper the federation loop drives.

    Holds the strategy's cross-round state and dispatches each round's
    updates to the matching aggregate function.
    """

    def __init__(
        self,
        strategy: str,
        hyperparams: StrategyHyperparams | None = None,
        simplex: SimplexConfig | None = None,
    ) -> None:
        if strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {strategy!r}; expected one of {STRATEGIES}"
            )
        self.strategy = strategy
        self.hyperparams = hyperparams if hyperparams is not None else default_hyperparams(strategy)
        self.simplex = simplex if simplex is not None else SimplexConfig()
        self.state = StrategyState()
        self.last_alpha: AlphaSolution | None = None

    def aggregate(
        self, updates: Sequence[ClientUpdate], previous_global: ParamVector
    ) -> ParamVector:
        self.last_alpha = None
        if self.strategy == "fedavg":
            new_global = aggregate_fedavg(updates)
            self.state = dataclasses.replace(self.state, round=self.state.round + 1)
        elif self.strategy == "fedavgm":
            new_global, self.state = aggregate_fedavgm(
                updates, previous_global, self.state, self.hyperparams
            )
        elif self.strategy == "fedmedian":
            new_global = aggregate_fedmedian(updates, previous_global, self.hyperparams)
            self.state = dataclasses.replace(self.state, round=self.state.round + 1)
        elif self.strategy in ("fedopt", "fedyogi"):
            new_global, self.state = aggregate_fedopt(
                updates, previous_global, self.state, self.hyperparams
            )
        else:  # fedavgopt
            new_global, self.last_alpha = aggregate_fedavgopt(updates, self.simplex)
            self.state = dataclasses.replace(self.state, round=self.state.round + 1)
        return new_global
