"""Deterministic two-age-group SIR model: integration, objective, adjoint.

The state (S_a, S_c, I_a, I_c) holds population fractions; recovered
compartments are recovered as R = N_group - S - I.  The stored infection
rates of the supplied parameters are used directly as the coefficients
of the fraction-valued system; use ``EpidemicParams.to_abm_scale()`` when
the ODE should be the mean-field limit of the agent model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, InfeasiblePolicyError
from .model import EffectiveRates, EpidemicParams, PolicySchedule, policy_to_rates


class OdeState(NamedTuple):
    s_a: float
    s_c: float
    i_a: float
    i_c: float


@dataclass(frozen=True)
class OdeTrajectory:
    """Trajectory on a uniform grid with step dt covering [0, T]."""

    times: np.ndarray
    states: np.ndarray  # shape (n_nodes, 4): S_a, S_c, I_a, I_c
    n_adult_fraction: float
    n_child_fraction: float

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def infected(self) -> np.ndarray:
        return self.states[:, 2] + self.states[:, 3]

    def recovered(self) -> np.ndarray:
        """R_a, R_c columns derived from group conservation."""
        r_a = self.n_adult_fraction - self.states[:, 0] - self.states[:, 2]
        r_c = self.n_child_fraction - self.states[:, 1] - self.states[:, 3]
        return np.column_stack([r_a, r_c])

    def state_at(self, j: int) -> OdeState:
        return OdeState(*self.states[j])

    def full_table(self) -> np.ndarray:
        """Columns t, S_a, S_c, I_a, I_c, R_a, R_c."""
        return np.column_stack([self.times, self.states, self.recovered()])


def ode_rhs(state: Sequence[float], rates: EffectiveRates) -> np.ndarray:
    """Time derivative of (S_a, S_c, I_a, I_c) under the given rates."""
    s_a, s_c, i_a, i_c = (float(x) for x in state)
    force_a = rates.r_a_to_a * i_a + rates.r_a_to_c * i_c
    force_c = rates.r_c_to_c * i_c + rates.r_a_to_c * i_a
    return np.array(
        [
            -s_a * force_a,
            -s_c * force_c,
            s_a * force_a - rates.r_a * i_a,
            s_c * force_c - rates.r_c * i_c,
        ]
    )


def _effective_table(params: EpidemicParams, schedule: PolicySchedule) -> np.ndarray:
    """Per-interval rows (R_aa, R_cc, R_ac, r_a, r_c)."""
    rows = np.empty((schedule.n_intervals, 5))
    for i, (u_s, u_w) in enumerate(schedule.values):
        eff = policy_to_rates(params, float(u_s), float(u_w))
        rows[i] = (eff.r_a_to_a, eff.r_c_to_c, eff.r_a_to_c, eff.r_a, eff.r_c)
    return rows


def _step_layout(schedule: PolicySchedule, dt: float):
    """(n_steps, seg_of_step, node_index_of_boundary) for an aligned grid."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    lengths = schedule.interval_lengths
    steps = np.rint(lengths / dt).astype(np.int64)
    if np.any(steps < 1) or not np.allclose(steps * dt, lengths, rtol=0.0, atol=1e-9):
        raise ConfigError(
            f"dt={dt} does not divide every control interval of the schedule"
        )
    seg_of_step = np.repeat(np.arange(schedule.n_intervals, dtype=np.int64), steps)
    boundaries = np.concatenate([[0], np.cumsum(steps)])
    return int(steps.sum()), seg_of_step, boundaries


def integrate_ode(
    params: EpidemicParams, schedule: PolicySchedule, dt: float = 1.0
) -> OdeTrajectory:
    """Integrate the controlled system with classical RK4 at fixed step dt.

    dt must divide every control interval so rate discontinuities sit on
    step boundaries; the control value of a step is taken at its left
    endpoint.
    """
    n_steps, seg_of_step, _ = _step_layout(schedule, dt)
    eff = _effective_table(params, schedule)
    y0 = params.initial_fractions()
    states = kernels.rk4_forward(y0, float(dt), seg_of_step, eff)
    times = np.arange(n_steps + 1, dtype=np.float64) * dt
    frac0 = params.initial_fractions()
    return OdeTrajectory(
        times=times,
        states=states,
        n_adult_fraction=float(frac0[0] + frac0[2]),
        n_child_fraction=float(frac0[1] + frac0[3]),
    )


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Health, school, and work cost terms; total = c_h + a_s c_s + a_w c_w."""

    c_h: float
    c_s: float
    c_w: float
    a_s: float
    a_w: float

    @property
    def total(self) -> float:
        return self.c_h + self.a_s * self.c_s + self.a_w * self.c_w


def control_costs(schedule: PolicySchedule, params: EpidemicParams):
    """Exact integrals of the school and home-office cost terms.

    Both integrands are constant per control interval, so closed-form
    sums are exact.  Raises InfeasiblePolicyError when u_w >= u_w_max
    anywhere (the log barrier diverges).
    """
    lengths = schedule.interval_lengths
    u_s = schedule.values[:, 0]
    u_w = schedule.values[:, 1]
    if np.any(u_w >= params.u_w_max):
        raise InfeasiblePolicyError(
            f"u_w must stay below u_w_max={params.u_w_max}; got max {u_w.max()}"
        )
    c_s = float(np.sum(u_s * u_s * lengths))
    c_w = float(-np.sum(np.log(params.u_w_max - u_w) * lengths))
    return c_s, c_w


def _check_cover(trajectory: OdeTrajectory, schedule: PolicySchedule) -> None:
    if abs(float(trajectory.times[-1]) - schedule.horizon) > 1e-6:
        raise ConfigError("trajectory and schedule cover different horizons")


def objective_ode(
    trajectory: OdeTrajectory, schedule: PolicySchedule, params: EpidemicParams
) -> ObjectiveBreakdown:
    """Objective value on a stored trajectory.

    c_h is the trapezoidal quadrature of I + exp(10 (I - i_max)) on the
    integration grid (fractions; the population is normalized to one
    inside c_h), the control costs are exact.
    """
    _check_cover(trajectory, schedule)
    c_s, c_w = control_costs(schedule, params)
    i_tot = trajectory.infected
    g = i_tot + np.exp(10.0 * (i_tot - params.i_max_fraction))
    c_h = float(np.trapz(g, dx=trajectory.dt))
    return ObjectiveBreakdown(c_h=c_h, c_s=c_s, c_w=c_w, a_s=params.a_s, a_w=params.a_w)


def evaluate_objective(
    params: EpidemicParams, schedule: PolicySchedule, dt: float = 1.0
) -> ObjectiveBreakdown:
    """Convenience wrapper: integrate then evaluate."""
    return objective_ode(integrate_ode(params, schedule, dt), schedule, params)


def adjoint_gradient(
    params: EpidemicParams,
    schedule: PolicySchedule,
    dt: float = 0.25,
    trajectory: OdeTrajectory | None = None,
) -> np.ndarray:
    """Gradient of the ODE objective with respect to the flattened controls.

    Solves the adjoint terminal-value problem backwards over the stored
    forward trajectory with the same RK4 scheme reversed, then integrates
    f_u(y,u)^T lambda per control interval with the trapezoidal rule and
    adds the analytic derivatives of the direct control costs.  Layout
    matches ``PolicySchedule.flatten()``: (u_s_i, u_w_i) per interval.
    """
    n_steps, seg_of_step, boundaries = _step_layout(schedule, dt)
    eff = _effective_table(params, schedule)
    if trajectory is None:
        trajectory = integrate_ode(params, schedule, dt)
    elif trajectory.states.shape[0] != n_steps + 1:
        raise ConfigError("supplied trajectory does not match dt")
    # feasibility of the direct costs (and their derivatives)
    control_costs(schedule, params)

    lam = kernels.rk4_adjoint(
        trajectory.states, float(dt), seg_of_step, eff, params.i_max_fraction
    )

    y = trajectory.states
    s_a = y[:, 0]
    s_c = y[:, 1]
    i_a = y[:, 2]
    i_c = y[:, 3]
    d20 = lam[:, 2] - lam[:, 0]
    d31 = lam[:, 3] - lam[:, 1]

    lengths = schedule.interval_lengths
    grad = np.empty(schedule.n_controls)
    for i in range(schedule.n_intervals):
        u_s = float(schedule.values[i, 0])
        u_w = float(schedule.values[i, 1])
        d_raa_dw = -2.0 * params.r_aa * (1.0 - u_w)
        d_rcc_ds = -2.0 * params.r_cc * (1.0 - u_s)
        d_rac_ds = -0.5 * params.r_ac * (1.0 - 0.5 * u_w)
        d_rac_dw = -0.5 * params.r_ac * (1.0 - 0.5 * u_s)

        lo, hi = boundaries[i], boundaries[i + 1]
        sl = slice(lo, hi + 1)
        ws = s_a[sl] * (d_rac_ds * i_c[sl]) * d20[sl] + s_c[sl] * (
            d_rcc_ds * i_c[sl] + d_rac_ds * i_a[sl]
        ) * d31[sl]
        ww = s_a[sl] * (d_raa_dw * i_a[sl] + d_rac_dw * i_c[sl]) * d20[sl] + s_c[
            sl
        ] * (d_rac_dw * i_a[sl]) * d31[sl]

        dt_i = float(lengths[i])
        grad[2 * i] = params.a_s * 2.0 * u_s * dt_i + float(np.trapz(ws, dx=dt))
        grad[2 * i + 1] = params.a_w * dt_i / (params.u_w_max - u_w) + float(
            np.trapz(ww, dx=dt)
        )
    return grad


def write_trajectory_csv(trajectory: OdeTrajectory, path) -> None:
    """CSV with columns t, S_a, S_c, I_a, I_c, R_a, R_c."""
    table = trajectory.full_table()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,S_a,S_c,I_a,I_c,R_a,R_c\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
