"""Scripted baselines and a derivative-free learner for desk-scale runs.

Policies map one observation vector to one Action. The cross-entropy
trainer searches the parameters of a shared linear policy, evaluating each
candidate on full episodes; population evaluation order and all episode
seeds derive from the trainer seed, so runs are reproducible.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .env import OBS_SIZE, Action, LemEnv

log = logging.getLogger(__name__)

Policy = Callable[[np.ndarray], Action]

# observation indices used by the scripted policies
_OBS_NET_IMPORT = 10
_OBS_DSO_BUY_PRICE = 11
_OBS_DSO_SELL_PRICE = 12
_OBS_GEN = 16
_OBS_DEM = 17
_OBS_AVAIL_CHARGE = 28
_OBS_AVAIL_DISCHARGE = 29

_SURPLUS_EPS = 1e-9

# Shading much beyond a third of the flexible volume overshoots the book's
# crossing point and flips which side spills to the DSO, so the penalty
# response saturates here.
DSO_AVERSION_CEILING = 1.0 / 3.0


def aversion_from_penalty(dso_penalty_coeff: float) -> float:
    """Map a DSO penalty coefficient to a bounded greedy shading level."""
    if dso_penalty_coeff < 0:
        raise ValueError("dso_penalty_coeff must be >= 0")
    return DSO_AVERSION_CEILING * dso_penalty_coeff / (1.0 + dso_penalty_coeff)


class ZiPolicy:
    """Zero-intelligence baseline: uniform price and quantity signals."""

    def __init__(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def __call__(self, observation: np.ndarray) -> Action:
        return Action(price_signal=float(self._rng.uniform(0.0, 1.0)),
                      quantity_signal=float(self._rng.uniform(-1.0, 1.0)))


def zi_policy(observation: np.ndarray, rng: np.random.Generator) -> Action:
    return ZiPolicy(rng)(observation)


class GreedyPolicy:
    """Tariff-band heuristic: sell just above feed-in, buy just below utility.

    With zero dso_aversion the quantity claims the full flexibility (need
    plus battery band) on the agent's natural side. A positive aversion is
    the rational response to an announced DSO penalty -- a scripted policy
    cannot feel the penalty through the env -- and reads the broadcast net
    grid import: when the agent's side of the book spilled to the DSO last
    hour it shades its offer toward what its battery can absorb or cover;
    when its side is short it keeps padding fully from the battery.
    """

    def __init__(self,
                 dso_aversion: float = 0.0,
                 price_margin: float = 0.1,
                 price_floor: float = 20.0,
                 price_ceiling: float = 600.0,
                 max_order_kwh: float = 180.0) -> None:
        if not 0.0 <= dso_aversion <= 1.0:
            raise ValueError("dso_aversion must be in [0, 1]")
        if not 0.0 < price_margin < 0.5:
            raise ValueError("price_margin must be in (0, 0.5)")
        self._aversion = dso_aversion
        self._margin = price_margin
        self._floor = price_floor
        self._band = price_ceiling - price_floor
        self._qmax = max_order_kwh

    def _price_signal(self, price: float) -> float:
        return min(1.0, max(0.0, (price - self._floor) / self._band))

    def _order(self, sign: float, price: float, target: float, cap: float) -> Action:
        cap = min(self._qmax, cap)
        target = min(cap, target)
        if cap <= 0.0 or target <= 0.0:
            return Action(0.0, 0.0)
        return Action(price_signal=self._price_signal(price),
                      quantity_signal=sign * target / cap)

    def __call__(self, observation: np.ndarray) -> Action:
        gen = observation[_OBS_GEN] * self._qmax
        dem = observation[_OBS_DEM] * self._qmax
        charge_room = observation[_OBS_AVAIL_CHARGE] * self._qmax
        discharge_room = observation[_OBS_AVAIL_DISCHARGE] * self._qmax
        fit = self._floor + observation[_OBS_DSO_BUY_PRICE] * self._band
        util = self._floor + observation[_OBS_DSO_SELL_PRICE] * self._band
        margin = self._margin * (util - fit)
        net_import = observation[_OBS_NET_IMPORT]
        a = self._aversion

        surplus = gen - dem
        if surplus > _SURPLUS_EPS:
            # last hour's residual sells spilled to the DSO: sell side long
            if net_import < 0.0:
                target = (surplus - min(a * surplus, charge_room)
                          + (1.0 - a) * discharge_room)
            else:
                target = surplus + discharge_room
            return self._order(-1.0, fit + margin, target,
                               cap=surplus + discharge_room)
        if surplus < -_SURPLUS_EPS:
            deficit = -surplus
            # last hour's residual buys spilled to the DSO: buy side long
            if net_import > 0.0:
                target = (deficit - min(a * deficit, discharge_room)
                          + (1.0 - a) * charge_room)
            else:
                target = deficit + charge_room
            return self._order(1.0, util - margin, target,
                               cap=deficit + charge_room)
        return Action(0.0, 0.0)


def greedy_policy(observation: np.ndarray) -> Action:
    return GreedyPolicy()(observation)


class LinearPolicy:
    """Affine map from the 42-entry observation to squashed action signals."""

    N_PARAMS = 2 * OBS_SIZE + 2

    def __init__(self, weights: np.ndarray, bias: np.ndarray) -> None:
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.shape != (2, OBS_SIZE) or bias.shape != (2,):
            raise ValueError("expected weights (2, 42) and bias (2,)")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ValueError("parameters must be finite")
        self.weights = weights
        self.bias = bias

    def __call__(self, observation: np.ndarray) -> Action:
        z = self.weights @ np.asarray(observation, dtype=np.float64) + self.bias
        # stable sigmoid for the price head, tanh for the signed quantity
        price = 0.5 * (math.tanh(0.5 * float(z[0])) + 1.0)
        quantity = math.tanh(float(z[1]))
        return Action(price_signal=price, quantity_signal=quantity)

    @classmethod
    def from_flat(cls, theta: np.ndarray) -> "LinearPolicy":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (cls.N_PARAMS,):
            raise ValueError(f"expected {cls.N_PARAMS} parameters")
        return cls(theta[:2 * OBS_SIZE].reshape(2, OBS_SIZE), theta[2 * OBS_SIZE:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    def save(self, path: str | Path, meta: Optional[dict] = None) -> None:
        payload = {"params": self.flat().tolist()}
        payload.update(meta or {})
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> tuple["LinearPolicy", dict]:
        payload = json.loads(Path(path).read_text())
        policy = cls.from_flat(np.array(payload["params"], dtype=np.float64))
        meta = {k: v for k, v in payload.items() if k != "params"}
        return policy, meta


@dataclass(frozen=True)
class CemConfig:
    population_size: int = 32
    elite_frac: float = 0.2
    iterations: int = 30
    initial_spread: float = 0.5
    seed: int = 0
    episodes_per_eval: int = 1
    # None optimizes the social sum; an agent id optimizes that agent alone
    fitness_agent: Optional[str] = None

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0.0 < self.elite_frac <= 1.0:
            raise ValueError("elite_frac must be in (0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.initial_spread < 0:
            raise ValueError("initial_spread must be >= 0")
        if self.episodes_per_eval < 1:
            raise ValueError("episodes_per_eval must be >= 1")


@dataclass(frozen=True)
class CemIteration:
    iteration: int
    population_mean: float
    elite_mean: float
    best_fitness: float


@dataclass
class EpisodeResult:
    total_rewards: dict[str, float]
    action_volume_series: list[float]

    @property
    def social_total(self) -> float:
        return sum(self.total_rewards.values())


def run_episode(env: LemEnv,
                policies: Mapping[str, Policy] | Policy,
                seed: Optional[int] = None) -> EpisodeResult:
    """Roll one full episode; a single policy object is shared by all agents."""
    obs = env.reset(seed)
    shared = policies if callable(policies) else None
    totals = {aid: 0.0 for aid in env.agent_ids}
    volume_series: list[float] = []
    while not env.done:
        actions = {}
        volume = 0.0
        for aid in env.agent_ids:
            policy = shared if shared is not None else policies[aid]
            action = policy(obs[aid])
            actions[aid] = action
            if math.isfinite(action.quantity_signal):
                volume += abs(action.quantity_signal)
        obs, rewards, _, _ = env.step(actions)
        volume_series.append(volume)
        for aid, r in rewards.items():
            totals[aid] += r
    return EpisodeResult(total_rewards=totals, action_volume_series=volume_series)


def _episode_seed(base_seed: int, episode: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(episode,))
    return int(ss.generate_state(1)[0])


def evaluate_policy(env_factory: Callable[[], LemEnv],
                    policy: Policy,
                    seeds: Sequence[int],
                    fitness_agent: Optional[str] = None) -> float:
    """Mean fitness over episodes; fitness is the social reward sum by default."""
    total = 0.0
    for seed in seeds:
        env = env_factory()
        result = run_episode(env, policy, seed=seed)
        if fitness_agent is not None:
            total += result.total_rewards[fitness_agent]
        else:
            total += result.social_total
    return total / len(seeds)


def cem_train(env_factory: Callable[[], LemEnv],
              cem: CemConfig,
              initial_mean: Optional[np.ndarray] = None,
              initial_std: Optional[np.ndarray] = None,
              ) -> tuple[LinearPolicy, list[CemIteration]]:
    """Cross-entropy search over shared linear-policy parameters.

    Each iteration samples a Gaussian population, evaluates every candidate
    on a fixed per-run set of episode seeds (common random numbers, so
    fitness differences come from parameters rather than episode noise),
    refits mean and std on the elite set and tracks the best candidate ever
    seen. Candidates with non-finite returns are discarded with a warning.
    Deterministic under CemConfig.seed.
    """
    dim = LinearPolicy.N_PARAMS
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cem.seed)))
    mean = (np.zeros(dim) if initial_mean is None
            else np.asarray(initial_mean, dtype=np.float64).copy())
    std = (np.full(dim, float(cem.initial_spread)) if initial_std is None
           else np.asarray(initial_std, dtype=np.float64).copy())
    if mean.shape != (dim,) or std.shape != (dim,):
        raise ValueError(f"initial mean/std must have shape ({dim},)")

    n_elite = max(1, int(round(cem.population_size * cem.elite_frac)))
    best_theta: Optional[np.ndarray] = None
    best_fit = -math.inf
    curve: list[CemIteration] = []
    eval_seeds = [_episode_seed(cem.seed, e)
                  for e in range(cem.episodes_per_eval)]

    for it in range(cem.iterations):
        thetas = mean + std * rng.standard_normal((cem.population_size, dim))
        fits = np.empty(cem.population_size)
        for k in range(cem.population_size):
            policy = LinearPolicy.from_flat(thetas[k])
            fit = evaluate_policy(env_factory, policy, eval_seeds,
                                  cem.fitness_agent)
            if not math.isfinite(fit):
                log.warning("iteration %d candidate %d returned non-finite "
                            "fitness; discarded", it, k)
                fit = -math.inf
            fits[k] = fit

        finite = np.isfinite(fits)
        if not finite.any():
            raise RuntimeError(f"iteration {it}: every candidate was non-finite")
        order = np.argsort(-fits, kind="stable")
        elite_idx = order[:n_elite]
        elite = thetas[elite_idx]
        mean = elite.mean(axis=0)
        std = elite.std(axis=0)

        top = int(order[0])
        if fits[top] > best_fit:
            best_fit = float(fits[top])
            best_theta = thetas[top].copy()
        curve.append(CemIteration(
            iteration=it,
            population_mean=float(fits[finite].mean()),
            elite_mean=float(fits[elite_idx][np.isfinite(fits[elite_idx])].mean()),
            best_fitness=best_fit,
        ))

    assert best_theta is not None
    return LinearPolicy.from_flat(best_theta), curve
