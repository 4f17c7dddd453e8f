"""Weighted least-squares fit of the ODE rates to mean agent-model output.

The five rates (r_aa, r_ac, r_cc, r_a, r_c) are fitted so that the ODE
infected curves match target mean curves in the variance-weighted
discrete L2 sense

    R(theta) = sum_t dt [ V_a(t)^-1 (I_a^ODE - I_a)^2
                        + V_c(t)^-1 (I_c^ODE - I_c)^2 ],

with the pointwise sample variances of the targets as weights.  A damped
Gauss-Newton (Levenberg-Marquardt) loop with forward-difference
Jacobians and nonnegativity clamping does the minimization.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientDataError
from .model import ABM_SCALE, EpidemicParams, PolicySchedule
from .ode import integrate_ode

VARIANCE_FLOOR = 1e-8  # fractions^2; avoids infinite weights at coinciding samples


@dataclass(frozen=True)
class FitProblem:
    """Targets (infected fractions per age group) with variance weights."""

    times: np.ndarray
    target_i_a: np.ndarray
    target_i_c: np.ndarray
    var_i_a: np.ndarray
    var_i_c: np.ndarray
    initial: EpidemicParams

    def __post_init__(self):
        n = self.times.shape[0]
        for name in ("target_i_a", "target_i_c", "var_i_a", "var_i_c"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} does not match the time grid")
        if np.any(self.var_i_a <= 0) or np.any(self.var_i_c <= 0):
            raise ValueError("variances must be positive (flooring upstream)")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class FitResult:
    params: EpidemicParams
    residual: float
    iterations: int
    converged: bool
    residual_history: tuple


def build_fit_problem(
    hourly_counts, params: EpidemicParams, variance_floor: float = VARIANCE_FLOOR
) -> FitProblem:
    """Pointwise mean/variance of infected fractions from sample paths.

    ``hourly_counts``: array (n_samples, n_hours, 6) of agent counts on
    the hourly grid (see ``AbmTrajectory.hourly_view``).
    """
    counts = np.asarray(hourly_counts)
    if counts.ndim != 3 or counts.shape[0] < 2:
        raise InsufficientDataError("need at least 2 sample trajectories")
    n = float(params.n_agents)
    i_a = counts[:, :, 2] / n
    i_c = counts[:, :, 3] / n
    hours = np.arange(counts.shape[1], dtype=np.float64)
    return FitProblem(
        times=hours,
        target_i_a=i_a.mean(axis=0),
        target_i_c=i_c.mean(axis=0),
        var_i_a=np.maximum(i_a.var(axis=0, ddof=1), variance_floor),
        var_i_c=np.maximum(i_c.var(axis=0, ddof=1), variance_floor),
        initial=params,
    )


_RATE_NAMES = ("r_aa", "r_ac", "r_cc", "r_a", "r_c")


def _params_with_rates(base: EpidemicParams, theta: np.ndarray) -> EpidemicParams:
    return replace(
        base,
        r_aa=float(theta[0]),
        r_ac=float(theta[1]),
        r_cc=float(theta[2]),
        r_a=float(theta[3]),
        r_c=float(theta[4]),
        rate_scale=ABM_SCALE,
    )


def _residual_vector(problem: FitProblem, theta: np.ndarray, dt_ode: float) -> np.ndarray:
    """Weighted residuals; sum of squares equals the discrete objective."""
    base = problem.initial.to_abm_scale()
    params = _params_with_rates(base, theta)
    horizon = float(problem.times[-1])
    traj = integrate_ode(params, PolicySchedule.constant(horizon), dt=dt_ode)
    stride = int(round(1.0 / dt_ode))
    states = traj.states[::stride] if stride > 1 else traj.states
    w_a = np.sqrt(problem.dt / problem.var_i_a)
    w_c = np.sqrt(problem.dt / problem.var_i_c)
    return np.concatenate(
        [
            w_a * (states[:, 2] - problem.target_i_a),
            w_c * (states[:, 3] - problem.target_i_c),
        ]
    )


def fit_ode_parameters(
    problem: FitProblem,
    max_iterations: int = 500,
    dt_ode: float = 1.0,
    gradient_tol: float = 1e-12,
    step_tol: float = 1e-14,
) -> FitResult:
    """Damped least-squares minimization of the weighted residual.

    Jacobian columns come from forward finite differences on the
    parameters; trial parameters are clamped nonnegative.  Returns the
    best point found with a convergence flag (False after
    ``max_iterations`` without meeting the tolerances).
    """
    base = problem.initial.to_abm_scale()
    theta = np.array([getattr(base, name) for name in _RATE_NAMES], dtype=np.float64)
    theta = np.maximum(theta, 0.0)

    r = _residual_vector(problem, theta, dt_ode)
    cost = float(r @ r)
    history = [cost]
    damping = 1e-3
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        jac = np.empty((r.size, theta.size))
        for j in range(theta.size):
            h = 1e-6 * abs(theta[j]) + 1e-10
            tp = theta.copy()
            tp[j] += h
            jac[:, j] = (_residual_vector(problem, tp, dt_ode) - r) / h
        grad = jac.T @ r
        if np.linalg.norm(grad, np.inf) <= gradient_tol * max(1.0, cost):
            converged = True
            break
        jtj = jac.T @ jac
        improved = False
        for _ in range(40):
            lhs = jtj + damping * np.diag(np.maximum(np.diag(jtj), 1e-30))
            try:
                delta = np.linalg.solve(lhs, -grad)
            except np.linalg.LinAlgError:
                damping *= 3.0
                continue
            trial = np.maximum(theta + delta, 0.0)
            r_trial = _residual_vector(problem, trial, dt_ode)
            cost_trial = float(r_trial @ r_trial)
            if cost_trial < cost:
                step = float(np.linalg.norm(trial - theta))
                theta, r, cost = trial, r_trial, cost_trial
                damping = max(damping * 0.3, 1e-12)
                improved = True
                history.append(cost)
                if step <= step_tol * max(1.0, float(np.linalg.norm(theta))):
                    converged = True
                break
            damping *= 3.0
        if converged:
            break
        if not improved:
            # damping exhausted without descent; success only at zero residual
            converged = cost <= 1e-16
            break

    return FitResult(
        params=_params_with_rates(base, theta),
        residual=cost,
        iterations=iterations,
        converged=converged,
        residual_history=tuple(history),
    )


def relative_l2_error(problem: FitProblem, params: EpidemicParams,
                      dt_ode: float = 1.0) -> float:
    """|| I^ODE - target ||_2 / || target ||_2 over both infected curves."""
    horizon = float(problem.times[-1])
    traj = integrate_ode(
        params.to_abm_scale(), PolicySchedule.constant(horizon), dt=dt_ode
    )
    stride = int(round(1.0 / dt_ode))
    states = traj.states[::stride] if stride > 1 else traj.states
    diff = np.concatenate(
        [states[:, 2] - problem.target_i_a, states[:, 3] - problem.target_i_c]
    )
    ref = np.concatenate([problem.target_i_a, problem.target_i_c])
    return float(np.linalg.norm(diff) / np.linalg.norm(ref))
