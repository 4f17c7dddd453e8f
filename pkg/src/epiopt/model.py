"""Shared domain types: policies, epidemic parameters, control-to-rate maps.

Two age groups (adults "a", children "c") and two controls: u_s is the
fraction of schools closed, u_w the fraction of work done from home.
Controls are piecewise constant on a time grid and right-continuous: the
value attached to a grid point belongs to the interval starting there.

Infection rates come in two scales related by the reference population
N_0 = 1091: the population-independent "abm" scale (used as propensity
numerator r/N and as the coefficients of the fraction-valued mean-field
ODE) and the "ode" scale, which is the abm scale divided by N_0.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Tuple

import numpy as np

REFERENCE_POPULATION = 1091

ABM_SCALE = "abm"
ODE_SCALE = "ode"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PolicySchedule:
    """Piecewise-constant pair of controls (u_s, u_w) on a time grid.

    grid: strictly increasing times t_0=0 < ... < t_m=T in hours.
    values: array of shape (m, 2), row i = (u_s, u_w) on [t_{i-1}, t_i).
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _readonly(self.grid)
        values = _readonly(self.values)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid needs at least 2 points")
        if grid[0] != 0.0:
            raise ValueError("grid must start at t=0")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if values.shape != (grid.size - 1, 2):
            raise ValueError(
                f"values shape {values.shape} does not match {grid.size - 1} intervals"
            )
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("control values must lie in [0, 1]")

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0]

    @property
    def n_controls(self) -> int:
        """Dimension of the flattened control vector, n_u = 2m."""
        return 2 * self.n_intervals

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def interval_lengths(self) -> np.ndarray:
        return np.diff(self.grid)

    def flatten(self) -> np.ndarray:
        """Flatten to [u_s_1, u_w_1, ..., u_s_m, u_w_m]."""
        return self.values.reshape(-1).copy()

    def with_values(self, flat: Sequence[float]) -> "PolicySchedule":
        """Same grid, controls taken from a flattened vector."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_controls,):
            raise ValueError(f"expected {self.n_controls} entries, got {flat.shape}")
        return PolicySchedule(self.grid, flat.reshape(self.n_intervals, 2))

    @staticmethod
    def constant(horizon: float, u_s: float = 0.0, u_w: float = 0.0) -> "PolicySchedule":
        return PolicySchedule(np.array([0.0, horizon]), np.array([[u_s, u_w]]))

    @staticmethod
    def uniform(horizon: float, m: int, flat: Sequence[float] | None = None) -> "PolicySchedule":
        """m equal-length intervals over [0, horizon]."""
        grid = np.linspace(0.0, horizon, m + 1)
        if flat is None:
            values = np.zeros((m, 2))
        else:
            values = np.asarray(flat, dtype=np.float64).reshape(m, 2)
        return PolicySchedule(grid, values)

    def interval_index(self, t: float) -> int:
        """Index of the interval containing t; t=T maps to the last interval."""
        if t < self.grid[0] or t > self.grid[-1]:
            raise ValueError(f"t={t} outside [0, {self.grid[-1]}]")
        i = int(np.searchsorted(self.grid, t, side="right")) - 1
        return min(i, self.n_intervals - 1)


def eval_policy_at(schedule: PolicySchedule, t: float) -> Tuple[float, float]:
    """Control pair (u_s, u_w) in force at time t (right-continuous lookup)."""
    i = schedule.interval_index(t)
    return float(schedule.values[i, 0]), float(schedule.values[i, 1])


@dataclass(frozen=True)
class EpidemicParams:
    """Rates, population, and objective constants of the two-group SIRS system.

    r_aa, r_ac, r_cc: control-independent infection rates in the scale
    declared by ``rate_scale``; r_a, r_c: recovery rates (per hour);
    mu in [0, 1): immunity-loss factor (0 turns off R->S and the model
    reduces to SIR); i_max is the infection threshold in agents (defaults
    to 0.005*N); a_s, a_w weight the school/work cost terms.

    frac_adults is the adult population share; the source material never
    states the Gangelt split, so the 0.8 default is a non-paper choice.
    """

    r_aa: float
    r_ac: float
    r_cc: float
    r_a: float
    r_c: float
    mu: float = 0.0
    n_agents: int = REFERENCE_POPULATION
    frac_adults: float = 0.8
    i_max: float | None = None
    u_w_max: float = 0.81
    a_s: float = 1.0
    a_w: float = 1.0
    i0_adults: int = 5
    i0_children: int = 0
    rate_scale: str = ABM_SCALE
    reference_population: int = REFERENCE_POPULATION

    def __post_init__(self):
        if self.rate_scale not in (ABM_SCALE, ODE_SCALE):
            raise ValueError(f"unknown rate scale {self.rate_scale!r}")
        for name in ("r_aa", "r_ac", "r_cc", "r_a", "r_c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must lie in [0, 1)")
        if not 0.0 < self.frac_adults < 1.0:
            raise ValueError("frac_adults must lie in (0, 1)")
        if not 0.0 < self.u_w_max < 1.0:
            raise ValueError("u_w_max must lie in (0, 1)")
        if self.a_s < 0 or self.a_w < 0:
            raise ValueError("objective weights must be >= 0")
        if self.n_agents < 1:
            raise ValueError("n_agents must be positive")
        if self.i_max is None:
            object.__setattr__(self, "i_max", 0.005 * self.n_agents)
        if self.i_max <= 0:
            raise ValueError("i_max must be positive")
        if self.i0_adults < 0 or self.i0_children < 0:
            raise ValueError("initial infected counts must be >= 0")
        if self.i0_adults + self.i0_children > self.n_agents:
            raise ValueError("more initially infected than agents")
        n_adults = round(self.frac_adults * self.n_agents)
        if self.i0_adults > n_adults:
            raise ValueError("more initially infected adults than adults")
        if self.i0_children > self.n_agents - n_adults:
            raise ValueError("more initially infected children than children")

    @property
    def i_max_fraction(self) -> float:
        return self.i_max / self.n_agents

    def to_abm_scale(self) -> "EpidemicParams":
        """Population-independent infection rates (Remark-1 conversion)."""
        if self.rate_scale == ABM_SCALE:
            return self
        n0 = self.reference_population
        return replace(
            self,
            r_aa=self.r_aa * n0,
            r_ac=self.r_ac * n0,
            r_cc=self.r_cc * n0,
            rate_scale=ABM_SCALE,
        )

    def to_ode_scale(self) -> "EpidemicParams":
        """Transmission rates at the reference population N_0."""
        if self.rate_scale == ODE_SCALE:
            return self
        n0 = self.reference_population
        return replace(
            self,
            r_aa=self.r_aa / n0,
            r_ac=self.r_ac / n0,
            r_cc=self.r_cc / n0,
            rate_scale=ODE_SCALE,
        )

    def initial_counts(self) -> np.ndarray:
        """(S_a, S_c, I_a, I_c, R_a, R_c) agent counts at t=0."""
        n_adults = round(self.frac_adults * self.n_agents)
        n_children = self.n_agents - n_adults
        return np.array(
            [
                n_adults - self.i0_adults,
                n_children - self.i0_children,
                self.i0_adults,
                self.i0_children,
                0,
                0,
            ],
            dtype=np.int64,
        )

    def initial_fractions(self) -> np.ndarray:
        """(S_a, S_c, I_a, I_c) population fractions at t=0."""
        counts = self.initial_counts().astype(np.float64) / self.n_agents
        return counts[:4]


@dataclass(frozen=True)
class EffectiveRates:
    """Control-modulated infection rates plus the unmodulated recovery rates.

    r_a_to_c doubles as r_c_to_a (the cross-group rate is symmetric).
    """

    r_a_to_a: float
    r_c_to_c: float
    r_a_to_c: float
    r_a: float
    r_c: float

    def __post_init__(self):
        for name in ("r_a_to_a", "r_c_to_c", "r_a_to_c", "r_a", "r_c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def policy_to_rates(params: EpidemicParams, u_s: float, u_w: float) -> EffectiveRates:
    """Effective infection rates under controls (u_s, u_w).

    Within-group rates scale quadratically with the fraction still
    meeting; the cross-group rate scales with half-impact per control.
    Rates are returned in the same scale the params are stored in.
    """
    if not 0.0 <= u_s <= 1.0 or not 0.0 <= u_w <= 1.0:
        raise ValueError(f"controls must lie in [0, 1], got u_s={u_s}, u_w={u_w}")
    return EffectiveRates(
        r_a_to_a=params.r_aa * (1.0 - u_w) ** 2,
        r_c_to_c=params.r_cc * (1.0 - u_s) ** 2,
        r_a_to_c=params.r_ac * (1.0 - 0.5 * u_w) * (1.0 - 0.5 * u_s),
        r_a=params.r_a,
        r_c=params.r_c,
    )


def table1_params(model: str = "habm", **overrides) -> EpidemicParams:
    """Baseline parameter sets used throughout (seven-week horizon, N=1091).

    model="habm": population-independent rates with immunity loss mu=0.2;
    model="ode": the same physical system with rates stored in ode scale
    and mu=0.
    """
    if model == "habm":
        base = dict(
            r_aa=1.1185e-9,
            r_ac=5.3246e-1,
            r_cc=6.7077e-10,
            r_a=4.2148e-2,
            r_c=4.3427e-2,
            mu=0.2,
            rate_scale=ABM_SCALE,
        )
    elif model == "ode":
        base = dict(
            r_aa=1.0252e-12,
            r_ac=4.8804e-4,
            r_cc=6.1482e-13,
            r_a=4.2148e-2,
            r_c=4.3427e-2,
            mu=0.0,
            rate_scale=ODE_SCALE,
        )
    else:
        raise ValueError(f"unknown model {model!r}")
    base.update(overrides)
    return EpidemicParams(**base)


HORIZON_HOURS = 1176.0
