"""Prosumer assets: generation/demand profiles, forecast noise, battery dynamics.

All state transitions are value-semantic: battery operations return a new
state instead of mutating, so an asset can be shared read-only across
threads and snapshotted for counterfactual checks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

PROFILE_HOURS = 24

SOC_MIN = 0.05
SOC_MAX = 0.95
BATTERY_EFFICIENCY = 0.95
FORECAST_MAX_ERROR = 0.3


@dataclass(frozen=True)
class AgentConfig:
    """Static description of one prosumer.

    battery_capacity_kwh is derived as capacity_kw * battery_ratio and both
    profiles hold one non-negative kW value per hour of the 24 h horizon.
    """

    agent_id: str
    node_id: str
    capacity_kw: float
    battery_ratio: float
    generation_profile: tuple[float, ...]
    demand_profile: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.capacity_kw <= 0:
            raise ValueError(f"{self.agent_id}: capacity_kw must be > 0")
        if not 0.0 <= self.battery_ratio <= 1.0:
            raise ValueError(f"{self.agent_id}: battery_ratio must be in [0, 1]")
        for name, profile in (("generation", self.generation_profile),
                              ("demand", self.demand_profile)):
            if len(profile) != PROFILE_HOURS:
                raise ValueError(
                    f"{self.agent_id}: {name} profile must have {PROFILE_HOURS} "
                    f"values, got {len(profile)}")
            if any(v < 0 for v in profile):
                raise ValueError(f"{self.agent_id}: {name} profile has negative values")

    @property
    def battery_capacity_kwh(self) -> float:
        return self.capacity_kw * self.battery_ratio


@dataclass(frozen=True)
class BatteryState:
    """Lossy battery with a usable SoC band and monotone throughput counters."""

    energy_kwh: float
    capacity_kwh: float
    soc_min: float = SOC_MIN
    soc_max: float = SOC_MAX
    efficiency: float = BATTERY_EFFICIENCY
    cumulative_charge_kwh: float = 0.0
    cumulative_discharge_kwh: float = 0.0

    def __post_init__(self) -> None:
        if self.capacity_kwh < 0:
            raise ValueError("capacity_kwh must be >= 0")
        lo = self.soc_min * self.capacity_kwh
        hi = self.soc_max * self.capacity_kwh
        # tiny slack only for float round-off at the band edges
        if not (lo - 1e-9 <= self.energy_kwh <= hi + 1e-9):
            raise ValueError(
                f"energy {self.energy_kwh} outside usable band [{lo}, {hi}]")

    @property
    def soc(self) -> float:
        return self.energy_kwh / self.capacity_kwh if self.capacity_kwh > 0 else 0.0

    @property
    def headroom_kwh(self) -> float:
        """Stored-energy room left below the soc_max bound."""
        return max(0.0, self.soc_max * self.capacity_kwh - self.energy_kwh)

    @property
    def drainable_kwh(self) -> float:
        """Stored energy available above the soc_min bound."""
        return max(0.0, self.energy_kwh - self.soc_min * self.capacity_kwh)

    @property
    def max_charge_kwh(self) -> float:
        """Largest bus-side request that can be fully accepted."""
        return self.headroom_kwh / self.efficiency

    @property
    def max_discharge_kwh(self) -> float:
        """Largest bus-side delivery possible from the usable band."""
        return self.drainable_kwh * self.efficiency

    @classmethod
    def at_mid_band(cls, capacity_kwh: float) -> "BatteryState":
        mid = 0.5 * (SOC_MIN + SOC_MAX)
        return cls(energy_kwh=mid * capacity_kwh, capacity_kwh=capacity_kwh)


@dataclass(frozen=True)
class ForecastPair:
    """An hour-ahead point forecast with its realized value."""

    actual_kw: float
    forecast_kw: float
    max_error: float = FORECAST_MAX_ERROR

    def __post_init__(self) -> None:
        if abs(self.forecast_kw - self.actual_kw) > self.max_error * self.actual_kw + 1e-12:
            raise ValueError("forecast violates the relative error band")


def realized_profile(agent: AgentConfig, step: int) -> tuple[float, float]:
    """Deterministic (generation_kw, demand_kw) for the given hour.

    Raises IndexError when step is outside [0, 24).
    """
    if not 0 <= step < PROFILE_HOURS:
        raise IndexError(f"step {step} outside profile horizon [0, {PROFILE_HOURS})")
    return agent.generation_profile[step], agent.demand_profile[step]


def make_forecast(actual_kw: float,
                  rng: np.random.Generator,
                  max_error: float = FORECAST_MAX_ERROR) -> ForecastPair:
    """Multiplicative uniform noise: forecast = actual * (1 + eps), eps ~ U[-m, m].

    A zero actual therefore forecasts exactly zero. One uniform draw is
    consumed per call, so identical generator states give identical pairs.
    """
    if actual_kw < 0:
        raise ValueError("actual_kw must be >= 0")
    eps = rng.uniform(-max_error, max_error)
    return ForecastPair(actual_kw=actual_kw,
                        forecast_kw=actual_kw * (1.0 + eps),
                        max_error=max_error)


def battery_charge(state: BatteryState, request_kwh: float) -> tuple[BatteryState, float]:
    """Charge from the bus; returns (new_state, accepted_kwh).

    accepted is the bus-side energy drawn, of which efficiency * accepted is
    stored; acceptance is capped so SoC never exceeds soc_max.
    """
    if request_kwh < 0:
        raise ValueError("charge request must be >= 0")
    accepted = min(request_kwh, state.max_charge_kwh)
    if accepted <= 0.0:
        return state, 0.0
    new = replace(
        state,
        energy_kwh=state.energy_kwh + accepted * state.efficiency,
        cumulative_charge_kwh=state.cumulative_charge_kwh + accepted,
    )
    return new, accepted


def battery_discharge(state: BatteryState, request_kwh: float) -> tuple[BatteryState, float]:
    """Discharge to the bus; returns (new_state, delivered_kwh).

    delivered is the bus-side energy, drawing delivered / efficiency from
    storage; delivery is capped so SoC never drops below soc_min.
    """
    if request_kwh < 0:
        raise ValueError("discharge request must be >= 0")
    delivered = min(request_kwh, state.max_discharge_kwh)
    if delivered <= 0.0:
        return state, 0.0
    new = replace(
        state,
        energy_kwh=state.energy_kwh - delivered / state.efficiency,
        cumulative_discharge_kwh=state.cumulative_discharge_kwh + delivered,
    )
    return new, delivered


def available_flex(state: BatteryState, gen_kw: float, dem_kw: float) -> tuple[float, float]:
    """(sellable_kwh, buyable_kwh) for one hourly step.

    sellable = generation surplus plus deliverable battery energy;
    buyable = demand deficit plus bus-side charge acceptance.
    """
    if gen_kw < 0 or dem_kw < 0:
        raise ValueError("generation and demand must be >= 0")
    sellable = max(gen_kw - dem_kw, 0.0) + state.max_discharge_kwh
    buyable = max(dem_kw - gen_kw, 0.0) + state.max_charge_kwh
    return sellable, buyable


def load_profile_csv(path: str | Path) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Read a `hour,generation_kw,demand_kw` file into two 24-value tuples."""
    path = Path(path)
    gen: list[float] = [0.0] * PROFILE_HOURS
    dem: list[float] = [0.0] * PROFILE_HOURS
    seen: set[int] = set()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"hour", "generation_kw", "demand_kw"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected header hour,generation_kw,demand_kw")
        for row in reader:
            hour = int(row["hour"])
            if not 0 <= hour < PROFILE_HOURS or hour in seen:
                raise ValueError(f"{path}: bad or duplicate hour {hour}")
            seen.add(hour)
            gen[hour] = float(row["generation_kw"])
            dem[hour] = float(row["demand_kw"])
    if len(seen) != PROFILE_HOURS:
        raise ValueError(f"{path}: expected {PROFILE_HOURS} rows, got {len(seen)}")
    return tuple(gen), tuple(dem)


def agent_from_row(agent_id: str,
                   node_id: str,
                   capacity_kw: float,
                   battery_ratio: float,
                   profiles: tuple[Sequence[float], Sequence[float]]) -> AgentConfig:
    gen, dem = profiles
    return AgentConfig(
        agent_id=agent_id,
        node_id=node_id,
        capacity_kw=capacity_kw,
        battery_ratio=battery_ratio,
        generation_profile=tuple(float(v) for v in gen),
        demand_profile=tuple(float(v) for v in dem),
    )
