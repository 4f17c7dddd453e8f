"""Policy optimizers: projected gradient, inexact gradient, multilevel, KW.

All four work on the flattened control vector in U = [0,1]^{n_u} with a
fixed schedule grid.  Iterates are clamped back into U after every
arithmetic update.  Objective evaluations at policies whose u_w crosses
the log-barrier are treated as +inf by the line searches and acceptance
tests, so such trial steps are rejected and halved rather than raised.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExhaustedError, InfeasiblePolicyError
from .estimation import (
    INITIAL_SAMPLES,
    SAMPLE_CAP,
    AbmObjectiveSampler,
    GradientEstimate,
    SamplePool,
    adaptive_gradient,
    fd_gradient,
)
from .model import EpidemicParams, PolicySchedule
from .ode import adjoint_gradient, evaluate_objective
from .seeding import derive_seed

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_BUDGET_EXHAUSTED = "budget_exhausted"
STATUS_STAGNATED = "stagnated"


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm constants; defaults follow the baseline parameter table."""

    c1: float = 0.1
    alpha0: float = 1.0
    rho0: float = 0.5
    epsilon: float = 0.25
    h_max: float = 0.1
    max_iterations: int = 15
    sample_cap: int = SAMPLE_CAP
    n0: int = INITIAL_SAMPLES
    step_tol: float = 1e-6
    alpha_min: float = 1e-8
    rho_min: float = 1e-6
    inner_max_iterations: int = 200
    inner_step_tol: float = 1e-6
    objective_tol: float = 1e-11
    ode_dt: float = 1.0
    gradient_dt: float = 0.25
    crn: bool = True
    kw_batch: int = 10

    def __post_init__(self):
        if not 0.0 < self.c1 < 1.0:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.alpha0 <= 0 or self.rho0 <= 0 or self.h_max <= 0:
            raise ValueError("alpha0, rho0, h_max must be positive")


@dataclass
class IterationRecord:
    iteration: int
    iterate: list
    direction: list | None = None
    trial_step: list | None = None
    step_size: float | None = None
    objective_mean: float | None = None
    objective_sem: float | None = None
    objective_n: int | None = None
    base_objective_mean: float | None = None
    base_objective_sem: float | None = None
    gradient_norm: float | None = None
    gradient_sigma: float | None = None
    gradient_n: int | None = None
    step_dot_direction: float | None = None
    accepted: bool = True
    rejected_trials: int = 0
    simulations: int = 0
    cumulative_simulations: int = 0
    note: str = ""


@dataclass
class RunLog:
    """Per-iteration optimizer record plus run-level outcome."""

    algorithm: str
    initial_iterate: list
    grid: list
    records: list = field(default_factory=list)
    status: str = STATUS_MAX_ITERATIONS
    final_iterate: list = field(default_factory=list)
    total_simulations: int = 0

    def add(self, record: IterationRecord) -> None:
        self.records.append(record)

    def iterates(self) -> np.ndarray:
        """Initial iterate followed by every accepted iterate."""
        rows = [self.initial_iterate]
        rows += [r.iterate for r in self.records if r.accepted]
        return np.asarray(rows)

    def objective_trace(self) -> list:
        return [r.objective_mean for r in self.records if r.objective_mean is not None]

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "status": self.status,
            "iterations": len(self.records),
            "final_iterate": list(self.final_iterate),
            "final_objective": (
                self.records[-1].objective_mean if self.records else None
            ),
            "total_simulations": self.total_simulations,
        }

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")

    def write_convergence_csv(self, path) -> None:
        """iteration, objective, sigma, cumulative simulations."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,objective,sigma,cumulative_simulations\n")
            for rec in self.records:
                obj = "" if rec.objective_mean is None else repr(rec.objective_mean)
                sig = "" if rec.objective_sem is None else repr(rec.objective_sem)
                fh.write(f"{rec.iteration},{obj},{sig},{rec.cumulative_simulations}\n")


def project_direction(x, y, lower=0.0, upper=1.0) -> np.ndarray:
    """Zero the components of x pointing out of the box at y.

    Component i is zeroed iff (y_i at lower and x_i < 0) or (y_i at
    upper and x_i > 0); everything else is copied.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = x.copy()
    out[(y <= lower) & (x < 0.0)] = 0.0
    out[(y >= upper) & (x > 0.0)] = 0.0
    return out


def max_feasible_step(u, s, lower=0.0, upper=1.0) -> float:
    """Largest a with u + a*s inside the box (inf when s == 0)."""
    u = np.asarray(u, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), u.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), u.shape)
    alpha = math.inf
    for i in range(u.size):
        if s[i] > 0.0:
            alpha = min(alpha, (upper[i] - u[i]) / s[i])
        elif s[i] < 0.0:
            alpha = min(alpha, (lower[i] - u[i]) / s[i])
    return max(alpha, 0.0)


def minimize_box(
    value: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    x0,
    lower,
    upper,
    c1: float = 0.1,
    alpha0: float = 1.0,
    max_iterations: int = 200,
    step_tol: float = 1e-6,
    alpha_min: float = 1e-8,
    objective_tol: float = 1e-11,
):
    """Projected steepest descent with Armijo backtracking on a box.

    ``value`` may return +inf for infeasible points (such trials are
    rejected by the Armijo test).  Accepted steps whose decrease falls
    below ``objective_tol`` relative resolution end the run as
    converged.  Returns (x, info) where info holds iterations, status,
    and the objective trace.
    """
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), np.shape(x0)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), np.shape(x0)).copy()
    x = np.clip(np.asarray(x0, dtype=np.float64), lower, upper)
    trace = []
    status = STATUS_MAX_ITERATIONS
    iterations = 0
    for _ in range(max_iterations):
        g = np.asarray(gradient(x), dtype=np.float64)
        s = project_direction(-g, x, lower, upper)
        ns = float(np.linalg.norm(s))
        if ns <= step_tol:
            status = STATUS_CONVERGED
            break
        j0 = value(x)
        gs = float(g @ s)
        alpha = min(alpha0, max_feasible_step(x, s, lower, upper))
        accepted = False
        while alpha >= alpha_min:
            trial = np.clip(x + alpha * s, lower, upper)
            j_trial = value(trial)
            if j_trial <= j0 + alpha * c1 * gs:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            status = STATUS_STAGNATED
            break
        if j0 - j_trial <= objective_tol * max(1.0, abs(j0)):
            status = STATUS_CONVERGED
            break
        x = trial
        iterations += 1
        trace.append(j_trial)
    return x, {"iterations": iterations, "status": status, "trace": trace}


def _ode_problem(params: EpidemicParams, template: PolicySchedule,
                 config: OptimizerConfig):
    """(value, gradient) callables of the deterministic objective."""

    def value(u: np.ndarray) -> float:
        try:
            return evaluate_objective(
                params, template.with_values(np.clip(u, 0.0, 1.0)), config.ode_dt
            ).total
        except InfeasiblePolicyError:
            return math.inf

    def gradient(u: np.ndarray) -> np.ndarray:
        return adjoint_gradient(
            params, template.with_values(np.clip(u, 0.0, 1.0)), config.gradient_dt
        )

    return value, gradient


def steepest_descent_ode(
    params: EpidemicParams,
    u0: PolicySchedule,
    config: OptimizerConfig = OptimizerConfig(),
):
    """Projected steepest descent on the deterministic objective (exact
    adjoint gradients, Armijo backtracking)."""
    template = u0
    value, gradient = _ode_problem(params, template, config)
    log = RunLog(
        algorithm="ode-gd",
        initial_iterate=list(map(float, u0.flatten())),
        grid=list(map(float, u0.grid)),
    )
    u = u0.flatten()
    status = STATUS_MAX_ITERATIONS
    for k in range(config.max_iterations):
        g = gradient(u)
        s = project_direction(-g, u)
        ns = float(np.linalg.norm(s))
        if ns <= config.step_tol:
            status = STATUS_CONVERGED
            break
        j0 = value(u)
        gs = float(g @ s)
        alpha = min(config.alpha0, max_feasible_step(u, s))
        rejected = 0
        accepted = False
        while alpha >= config.alpha_min:
            trial = np.clip(u + alpha * s, 0.0, 1.0)
            j_trial = value(trial)
            if j_trial <= j0 + alpha * config.c1 * gs:
                accepted = True
                break
            alpha *= 0.5
            rejected += 1
        if not accepted:
            status = STATUS_STAGNATED
            break
        if j0 - j_trial <= config.objective_tol * max(1.0, abs(j0)):
            status = STATUS_CONVERGED
            break
        u = trial
        log.add(
            IterationRecord(
                iteration=k,
                iterate=list(map(float, u)),
                direction=list(map(float, s)),
                step_size=alpha,
                objective_mean=j_trial,
                objective_sem=0.0,
                gradient_norm=float(np.linalg.norm(g)),
                gradient_sigma=0.0,
                rejected_trials=rejected,
            )
        )
    log.status = status
    log.final_iterate = list(map(float, u))
    return template.with_values(u), log


def _acceptance_step(
    sampler,
    template: PolicySchedule,
    u: np.ndarray,
    s: np.ndarray,
    config: OptimizerConfig,
    seed: int,
    base_pool: SamplePool,
):
    """Backtracking line search with the stochastic acceptance test.

    Halves alpha until E_n[J(u+alpha*s)] - E_n[J(u)] <= -(1+3 eps) c1
    alpha ||s||^2, with both estimates refined to sem <= (eps c1 alpha
    ||s||^2)/2.  Returns (trial_vector, trial_estimate, base_estimate,
    alpha, rejected) or None on stagnation.  BudgetExhaustedError
    propagates to the caller.
    """
    ns2 = float(s @ s)
    alpha = min(config.alpha0, max_feasible_step(u, s))
    rejected = 0
    trial_idx = 0
    while alpha >= config.alpha_min:
        bound = config.epsilon * config.c1 * alpha * ns2
        target = 0.5 * bound
        rhs = -(1.0 + 3.0 * config.epsilon) * config.c1 * alpha * ns2
        trial = np.clip(u + alpha * s, 0.0, 1.0)
        trial_sched = template.with_values(trial)
        try:
            est_base = base_pool.refine(target)
            trial_pool = SamplePool(
                sampler, trial_sched, derive_seed(seed, 3, trial_idx),
                n0=config.n0, cap=config.sample_cap,
            )
            est_trial = trial_pool.refine(target)
        except InfeasiblePolicyError:
            est_trial = None  # barrier crossed: reject and halve
        if est_trial is not None and est_trial.mean - est_base.mean <= rhs:
            return trial, est_trial, est_base, alpha, rejected
        alpha *= 0.5
        rejected += 1
        trial_idx += 1
    return None


def inexact_gradient_descent(
    params: EpidemicParams,
    u0: PolicySchedule,
    config: OptimizerConfig = OptimizerConfig(),
    seed: int = 0,
    workers: int = 1,
    sampler=None,
):
    """Stochastic projected descent on finite-difference gradient estimates.

    The search direction is the projected negative adaptive gradient
    estimate (relative accuracy epsilon); trial steps must pass the
    high-confidence sufficient-decrease test before being applied.
    """
    if sampler is None:
        sampler = AbmObjectiveSampler(params, workers)
    template = u0
    log = RunLog(
        algorithm="igd",
        initial_iterate=list(map(float, u0.flatten())),
        grid=list(map(float, u0.grid)),
    )
    u = u0.flatten()
    status = STATUS_MAX_ITERATIONS
    sims_before = sampler.simulations
    for k in range(config.max_iterations):
        it_sims0 = sampler.simulations
        try:
            gest = adaptive_gradient(
                sampler,
                template.with_values(u),
                config.epsilon,
                config.h_max,
                seed=derive_seed(seed, k, 1),
                n0=config.n0,
                cap=config.sample_cap,
                crn=config.crn,
            )
        except BudgetExhaustedError:
            status = STATUS_BUDGET_EXHAUSTED
            break
        s = project_direction(-gest.vector, u)
        ns = float(np.linalg.norm(s))
        if ns <= config.step_tol:
            status = STATUS_CONVERGED
            break
        base_pool = SamplePool(
            sampler, template.with_values(u), derive_seed(seed, k, 2),
            n0=config.n0, cap=config.sample_cap,
        )
        try:
            result = _acceptance_step(
                sampler, template, u, s, config, derive_seed(seed, k), base_pool
            )
        except BudgetExhaustedError:
            status = STATUS_BUDGET_EXHAUSTED
            break
        if result is None:
            status = STATUS_STAGNATED
            break
        trial, est_trial, est_base, alpha, rejected = result
        step = trial - u
        u = trial
        log.add(
            IterationRecord(
                iteration=k,
                iterate=list(map(float, u)),
                direction=list(map(float, s)),
                step_size=alpha,
                objective_mean=est_trial.mean,
                objective_sem=est_trial.sem,
                objective_n=est_trial.n,
                base_objective_mean=est_base.mean,
                base_objective_sem=est_base.sem,
                gradient_norm=gest.norm,
                gradient_sigma=gest.sigma,
                gradient_n=gest.n,
                step_dot_direction=float(step @ s),
                rejected_trials=rejected,
                simulations=sampler.simulations - it_sims0,
                cumulative_simulations=sampler.simulations - sims_before,
            )
        )
    log.status = status
    log.final_iterate = list(map(float, u))
    log.total_simulations = sampler.simulations - sims_before
    return template.with_values(u), log


def multilevel_optimize(
    params_fine: EpidemicParams,
    u0: PolicySchedule,
    config: OptimizerConfig = OptimizerConfig(),
    seed: int = 0,
    workers: int = 1,
    params_coarse: EpidemicParams | None = None,
    sampler=None,
):
    """Two-level trust-region scheme: ODE trial steps, fine acceptance.

    Each outer iteration estimates the fine gradient, builds the
    first-order-consistent corrected coarse objective
    J_ode(u_k + du) - (s_k + grad J_ode(u_k))^T du, minimizes it inside
    the l-inf trust region of radius rho intersected with U (projected
    steepest descent), and halves rho until the fine acceptance test
    passes.  rho resets to rho0 every outer iteration; below rho_min the
    iteration falls back to one inexact-gradient step.
    """
    if sampler is None:
        sampler = AbmObjectiveSampler(params_fine, workers)
    if params_coarse is None:
        params_coarse = params_fine.to_abm_scale()
    template = u0
    coarse_value, coarse_gradient = _ode_problem(params_coarse, template, config)
    log = RunLog(
        algorithm="mlo",
        initial_iterate=list(map(float, u0.flatten())),
        grid=list(map(float, u0.grid)),
    )
    u = u0.flatten()
    status = STATUS_MAX_ITERATIONS
    sims_before = sampler.simulations
    for k in range(config.max_iterations):
        it_sims0 = sampler.simulations
        try:
            gest = adaptive_gradient(
                sampler,
                template.with_values(u),
                config.epsilon,
                config.h_max,
                seed=derive_seed(seed, k, 1),
                n0=config.n0,
                cap=config.sample_cap,
                crn=config.crn,
            )
        except BudgetExhaustedError:
            status = STATUS_BUDGET_EXHAUSTED
            break
        s = project_direction(-gest.vector, u)
        ns = float(np.linalg.norm(s))
        if ns <= config.step_tol:
            status = STATUS_CONVERGED
            break
        correction = s + coarse_gradient(u)

        def model_value(du, _u=u, _corr=correction):
            return coarse_value(_u + du) - float(_corr @ du)

        def model_gradient(du, _u=u, _corr=correction):
            return coarse_gradient(_u + du) - _corr

        base_pool = SamplePool(
            sampler, template.with_values(u), derive_seed(seed, k, 2),
            n0=config.n0, cap=config.sample_cap,
        )
        rho = config.rho0
        accepted = None
        rejected = 0
        trial_idx = 0
        exhausted = False
        while rho >= config.rho_min:
            lower = np.maximum(-u, -rho)
            upper = np.minimum(1.0 - u, rho)
            du, inner_info = minimize_box(
                model_value,
                model_gradient,
                np.zeros_like(u),
                lower,
                upper,
                c1=config.c1,
                alpha0=config.alpha0,
                max_iterations=config.inner_max_iterations,
                step_tol=config.inner_step_tol,
                alpha_min=config.alpha_min,
                objective_tol=config.objective_tol,
            )
            dus = float(du @ s)
            if float(np.linalg.norm(du)) > 0.0 and dus > 0.0:
                bound = config.epsilon * config.c1 * dus
                target = 0.5 * bound
                rhs = -(1.0 + 3.0 * config.epsilon) * config.c1 * dus
                trial = np.clip(u + du, 0.0, 1.0)
                try:
                    est_base = base_pool.refine(target)
                    trial_pool = SamplePool(
                        sampler,
                        template.with_values(trial),
                        derive_seed(seed, k, 3, trial_idx),
                        n0=config.n0,
                        cap=config.sample_cap,
                    )
                    est_trial = trial_pool.refine(target)
                except BudgetExhaustedError:
                    exhausted = True
                    break
                except InfeasiblePolicyError:
                    est_trial = None
                if est_trial is not None and est_trial.mean - est_base.mean <= rhs:
                    accepted = (trial, du, dus, est_trial, est_base, rho, inner_info)
                    break
            rho *= 0.5
            rejected += 1
            trial_idx += 1
        if exhausted:
            status = STATUS_BUDGET_EXHAUSTED
            break
        if accepted is None:
            # trust region collapsed: one inexact-gradient step on s_k
            try:
                result = _acceptance_step(
                    sampler, template, u, s, config, derive_seed(seed, k, 4),
                    base_pool,
                )
            except BudgetExhaustedError:
                status = STATUS_BUDGET_EXHAUSTED
                break
            if result is None:
                status = STATUS_STAGNATED
                break
            trial, est_trial, est_base, alpha, rej2 = result
            step = trial - u
            u = trial
            log.add(
                IterationRecord(
                    iteration=k,
                    iterate=list(map(float, u)),
                    direction=list(map(float, s)),
                    trial_step=list(map(float, step)),
                    step_size=alpha,
                    objective_mean=est_trial.mean,
                    objective_sem=est_trial.sem,
                    objective_n=est_trial.n,
                    base_objective_mean=est_base.mean,
                    base_objective_sem=est_base.sem,
                    gradient_norm=gest.norm,
                    gradient_sigma=gest.sigma,
                    gradient_n=gest.n,
                    step_dot_direction=float(step @ s),
                    rejected_trials=rejected + rej2,
                    simulations=sampler.simulations - it_sims0,
                    cumulative_simulations=sampler.simulations - sims_before,
                    note="trust region collapsed; inexact gradient fallback",
                )
            )
            continue
        trial, du, dus, est_trial, est_base, rho_acc, inner_info = accepted
        u = trial
        log.add(
            IterationRecord(
                iteration=k,
                iterate=list(map(float, u)),
                direction=list(map(float, s)),
                trial_step=list(map(float, du)),
                step_size=rho_acc,
                objective_mean=est_trial.mean,
                objective_sem=est_trial.sem,
                objective_n=est_trial.n,
                base_objective_mean=est_base.mean,
                base_objective_sem=est_base.sem,
                gradient_norm=gest.norm,
                gradient_sigma=gest.sigma,
                gradient_n=gest.n,
                step_dot_direction=dus,
                rejected_trials=rejected,
                simulations=sampler.simulations - it_sims0,
                cumulative_simulations=sampler.simulations - sims_before,
                note=f"inner iterations {inner_info['iterations']}",
            )
        )
    log.status = status
    log.final_iterate = list(map(float, u))
    log.total_simulations = sampler.simulations - sims_before
    return template.with_values(u), log


def kiefer_wolfowitz(
    params: EpidemicParams,
    u0: PolicySchedule,
    config: OptimizerConfig = OptimizerConfig(),
    c: float = 0.5,
    p: float = -1.0 / 6.0,
    h0: float = 0.1,
    seed: int = 0,
    workers: int = 1,
    sampler=None,
):
    """Mini-batch Kiefer-Wolfowitz iteration with iterate averaging.

    u_k = clip(u_{k-1} - (c/k) grad_{h_k} E_n[J(u_{k-1})]) with
    h_k = k^p h0; returns the average of u_1..u_K.  p = -1/6 balances
    differencing bias against sampling noise (O(k^{-1/3}) error decay).
    An aggressive c can push iterates against the u_w log-barrier, in
    which case sampler errors propagate.
    """
    if c <= 0 or p >= 0 or h0 <= 0:
        raise ValueError("need c > 0, p < 0, h0 > 0")
    if sampler is None:
        sampler = AbmObjectiveSampler(params, workers)
    template = u0
    log = RunLog(
        algorithm="kw",
        initial_iterate=list(map(float, u0.flatten())),
        grid=list(map(float, u0.grid)),
    )
    u = u0.flatten()
    total = np.zeros_like(u)
    k_max = config.max_iterations
    sims_before = sampler.simulations
    for k in range(1, k_max + 1):
        it_sims0 = sampler.simulations
        h_k = (float(k) ** p) * h0
        gest = fd_gradient(
            sampler,
            template.with_values(u),
            h=h_k,
            n=config.kw_batch,
            crn=config.crn,
            seed=derive_seed(seed, k),
        )
        u = np.clip(u - (c / k) * gest.vector, 0.0, 1.0)
        total += u
        log.add(
            IterationRecord(
                iteration=k - 1,
                iterate=list(map(float, u)),
                step_size=c / k,
                gradient_norm=gest.norm,
                gradient_sigma=gest.sigma,
                gradient_n=gest.n,
                simulations=sampler.simulations - it_sims0,
                cumulative_simulations=sampler.simulations - sims_before,
            )
        )
    if k_max > 0:
        u_out = total / k_max
    else:
        u_out = u
    log.status = STATUS_MAX_ITERATIONS if k_max > 0 else STATUS_CONVERGED
    log.final_iterate = list(map(float, u_out))
    log.total_simulations = sampler.simulations - sims_before
    return template.with_values(u_out), log
