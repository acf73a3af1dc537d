"""Gymnasium-style multi-agent adapter around the lemsim engine.

`make_env(config_path)` opens a handle with per-agent dict semantics:
`reset(seed)` returns {agent_id: float64[42]}, `step(actions)` returns
(observations, rewards, done, info). Observation arrays are fresh copies --
nothing aliases engine memory -- and numeric results are bit-identical to
driving the engine directly, so trainers can checkpoint against native
logs. Space metadata is exposed as plain Box descriptors to avoid a hard
gymnasium dependency; the shapes and bounds match its Box convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from lemsim import Action, LemEnv, OBS_SIZE, load_config
from lemsim.config import Scenario

__version__ = "0.1.0"

__all__ = ["BoxSpace", "EnvHandle", "make_env", "adapter_reset",
           "adapter_step", "OBS_SIZE"]


@dataclass(frozen=True)
class BoxSpace:
    """Minimal Box descriptor: bounds, shape, dtype name."""

    low: tuple[float, ...]
    high: tuple[float, ...]
    shape: tuple[int, ...]
    dtype: str = "float64"


OBSERVATION_SPACE = BoxSpace(
    low=tuple([-math.inf] * OBS_SIZE),
    high=tuple([math.inf] * OBS_SIZE),
    shape=(OBS_SIZE,),
)

ACTION_SPACE = BoxSpace(low=(0.0, -1.0), high=(1.0, 1.0), shape=(2,))


class ClosedHandleError(RuntimeError):
    """Raised when reset/step is called on a closed handle."""


class EnvHandle:
    """One engine instance plus its space metadata; single-threaded."""

    def __init__(self, scenario: Scenario) -> None:
        self._env: Optional[LemEnv] = LemEnv(scenario)
        self.agent_ids: tuple[str, ...] = self._env.agent_ids
        self.observation_space = OBSERVATION_SPACE
        self.action_space = ACTION_SPACE

    @property
    def env(self) -> LemEnv:
        if self._env is None:
            raise ClosedHandleError("environment handle is closed")
        return self._env

    @property
    def closed(self) -> bool:
        return self._env is None

    def reset(self, seed: Optional[int] = None) -> dict[str, np.ndarray]:
        obs = self.env.reset(seed)
        return {aid: np.array(v, dtype=np.float64, copy=True)
                for aid, v in obs.items()}

    def step(self, actions: Mapping[str, Sequence[float]]
             ) -> tuple[dict[str, np.ndarray], dict[str, float], bool, dict]:
        decoded: dict[str, Action] = {}
        for aid, raw in actions.items():
            if isinstance(raw, Action):
                price, quantity = raw.price_signal, raw.quantity_signal
            else:
                arr = np.asarray(raw, dtype=np.float64)
                if arr.shape != (2,):
                    raise ValueError(
                        f"action for {aid} must have shape (2,), got {arr.shape}")
                price, quantity = float(arr[0]), float(arr[1])
            if not (math.isfinite(price) and math.isfinite(quantity)):
                raise ValueError(f"non-finite action component for {aid}")
            decoded[aid] = Action(price_signal=price, quantity_signal=quantity)

        obs, rewards, done, native_info = self.env.step(decoded)
        kpis = native_info["kpis"]
        info = {
            "step": native_info["ledger"].step,
            "kpis": {name: getattr(kpis, name) for name in kpis.field_names()},
        }
        observations = {aid: np.array(v, dtype=np.float64, copy=True)
                        for aid, v in obs.items()}
        return observations, dict(rewards), done, info

    def close(self) -> None:
        self._env = None


def make_env(config_path: Optional[str] = None) -> EnvHandle:
    """Open a handle on the scenario at config_path (packaged default if None)."""
    return EnvHandle(load_config(config_path))


def adapter_reset(handle: EnvHandle, seed: Optional[int] = None
                  ) -> dict[str, np.ndarray]:
    return handle.reset(seed)


def adapter_step(handle: EnvHandle, actions: Mapping[str, Sequence[float]]
                 ) -> tuple[dict[str, np.ndarray], dict[str, float], bool, dict]:
    return handle.step(actions)
