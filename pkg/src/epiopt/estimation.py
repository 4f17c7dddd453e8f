"""Monte Carlo estimation of the stochastic objective and its gradient.

Estimates are plain sample means with the sample standard deviation of
the mean as accuracy measure.  Gradients come from central finite
differences per coordinate; with correlated sampling (the default) the
plus and minus evaluations of sample i share one random stream, which
cancels most of the path-to-path variance of the difference.

Sample i of an evaluation always uses the stream (evaluation seed, i),
so pooled estimates are independent of batch sizes and worker counts,
and re-runs are bit-identical.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass

import numpy as np

from . import abm, kernels
from ._parallel import indexed_map
from .errors import BudgetExhaustedError, InsufficientDataError
from .model import EpidemicParams, PolicySchedule
from .ode import control_costs
from .seeding import SimSeed, derive_seed

log = logging.getLogger(__name__)

SAMPLE_CAP = 1_000_000
INITIAL_SAMPLES = 100
H_FLOOR = 1e-6


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard deviation sem = sigma_n / sqrt(n)."""

    mean: float
    sem: float
    n: int
    samples: np.ndarray | None = None

    @staticmethod
    def from_samples(values: np.ndarray, keep_samples: bool = False) -> "McEstimate":
        n = values.size
        if n < 2:
            raise InsufficientDataError("need at least 2 samples")
        mean = float(np.mean(values))
        sem = float(np.std(values, ddof=1) / math.sqrt(n))
        return McEstimate(mean, sem, n, values.copy() if keep_samples else None)


@dataclass(frozen=True)
class GradientEstimate:
    """Finite-difference gradient with sample covariance error estimate.

    sigma = sqrt(||V_n||_2 / n) bounds the standard deviation of the
    estimated gradient vector (spectral norm of the sample covariance).
    """

    vector: np.ndarray
    covariance: np.ndarray | None
    sigma: float
    n: int
    h: np.ndarray
    one_sided: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    @property
    def relative_half_width(self) -> float:
        """2 sigma / ||vector||, the quantity tested against epsilon."""
        nrm = self.norm
        return math.inf if nrm == 0.0 else 2.0 * self.sigma / nrm


class AbmObjectiveSampler:
    """Draws i.i.d. objective samples of the agent model.

    Sample i of an evaluation uses the Philox stream keyed by
    (seed, start + i); evaluation is embarrassingly parallel with
    index-ordered reduction, so results do not depend on the worker
    count.  ``simulations`` counts every SSA invocation.
    """

    def __init__(self, params: EpidemicParams, workers: int = 1):
        self.params = params.to_abm_scale()
        self.workers = max(1, int(workers))
        self.simulations = 0
        self._lock = threading.Lock()

    def sample_range(
        self, schedule: PolicySchedule, seed: int, start: int, count: int
    ) -> np.ndarray:
        p = self.params
        c_s, c_w = control_costs(schedule, p)  # raises on infeasible u_w
        const = p.a_s * c_s + p.a_w * c_w
        grid = np.ascontiguousarray(schedule.grid, dtype=np.float64)
        coef = abm._coef_table(p, schedule)
        state0 = p.initial_counts()
        n_d = float(p.n_agents)
        i_max = float(p.i_max)
        out = np.empty(count)

        def work(i: int) -> None:
            bg = SimSeed(seed, start + i).bit_generator()
            c_h, _, _ = kernels.ssa_objective(
                state0, grid, coef, p.r_a, p.r_c, p.mu, n_d, i_max, bg
            )
            out[i] = c_h + const

        indexed_map(work, count, self.workers)
        with self._lock:
            self.simulations += count
        return out

    def upper_bounds(self, schedule: PolicySchedule) -> np.ndarray:
        """Componentwise upper limits for finite-difference perturbations.

        u_w coordinates stop short of the log-barrier at u_w_max so that
        difference stencils never sample a divergent objective.
        """
        ub = np.ones(schedule.n_controls)
        ub[1::2] = min(1.0, self.params.u_w_max - H_FLOOR)
        return ub


class CallableSampler:
    """Test/synthetic sampler: sample i evaluates fn(u, rng_i).

    fn receives the flattened controls and a numpy Generator seeded by
    (seed, i), mirroring the CRN semantics of the agent sampler.
    """

    def __init__(self, fn):
        self.fn = fn
        self.simulations = 0
        self._lock = threading.Lock()

    def sample_range(self, schedule, seed, start, count):
        u = schedule.flatten()
        out = np.empty(count)
        for i in range(count):
            rng = np.random.Generator(SimSeed(seed, start + i).bit_generator())
            out[i] = self.fn(u, rng)
        with self._lock:
            self.simulations += count
        return out

    def upper_bounds(self, schedule):
        return np.ones(schedule.n_controls)


class SamplePool:
    """Growing pool of objective samples at one evaluation point.

    Samples are reused across accuracy refinements (doubling schedule);
    pooling is valid because samples are i.i.d. with index-fixed streams.
    """

    def __init__(self, sampler, schedule: PolicySchedule, seed: int,
                 n0: int = INITIAL_SAMPLES, cap: int = SAMPLE_CAP):
        self.sampler = sampler
        self.schedule = schedule
        self.seed = seed
        self.n0 = n0
        self.cap = cap
        self.values = np.empty(0)

    def extend_to(self, n: int) -> None:
        have = self.values.size
        if n > have:
            new = self.sampler.sample_range(self.schedule, self.seed, have, n - have)
            self.values = np.concatenate([self.values, new])

    def estimate(self, keep_samples: bool = False) -> McEstimate:
        return McEstimate.from_samples(self.values, keep_samples)

    def refine(self, target_sem: float) -> McEstimate:
        """Double the sample count until sem <= target_sem or the cap."""
        n = max(self.n0, self.values.size, 2)
        while True:
            self.extend_to(n)
            est = self.estimate()
            if est.sem <= target_sem:
                return est
            if n >= self.cap:
                raise BudgetExhaustedError(
                    f"sem {est.sem:.3g} > target {target_sem:.3g} at cap n={n}",
                    estimate=est,
                    achieved=est.sem,
                )
            n = min(2 * n, self.cap)


def estimate_objective(
    sampler,
    schedule: PolicySchedule,
    seed: int,
    n: int | None = None,
    target_sem: float | None = None,
    n0: int = INITIAL_SAMPLES,
    cap: int = SAMPLE_CAP,
    keep_samples: bool = False,
) -> McEstimate:
    """Mean objective at a policy, with fixed n or adaptive target accuracy.

    In target mode the sample count starts at ``n0`` and doubles (reusing
    earlier samples) until sem <= target_sem; hitting the cap raises
    BudgetExhaustedError carrying the best estimate.
    """
    if (n is None) == (target_sem is None):
        raise ValueError("specify exactly one of n and target_sem")
    pool = SamplePool(sampler, schedule, seed, n0=n0, cap=cap)
    if n is not None:
        if n < 2:
            raise InsufficientDataError("need n >= 2")
        pool.extend_to(n)
        return pool.estimate(keep_samples)
    if target_sem <= 0:
        raise ValueError("target_sem must be positive")
    est = pool.refine(target_sem)
    if keep_samples:
        est = McEstimate(est.mean, est.sem, est.n, pool.values.copy())
    return est


class _FdStencil:
    """Per-coordinate finite-difference plan and sample management.

    Central differences where the box (and the u_w barrier) leaves room;
    coordinates squeezed below ``H_FLOOR`` switch to one-sided stencils
    with a logged warning.  With crn=True every evaluation point shares
    the per-sample streams (seed, i); otherwise each point gets its own
    derived seed.
    """

    def __init__(self, sampler, schedule: PolicySchedule, h: float,
                 crn: bool, seed: int):
        self.sampler = sampler
        self.schedule = schedule
        self.crn = crn
        self.seed = seed
        u = schedule.flatten()
        n_u = u.size
        upper = sampler.upper_bounds(schedule)
        self.h = np.empty(n_u)
        self.one_sided = np.zeros(n_u, dtype=bool)
        self.side = np.ones(n_u)
        points = []  # (vector, point_tag)
        self.plus_idx = np.empty(n_u, dtype=np.int64)
        self.minus_idx = np.empty(n_u, dtype=np.int64)
        base_idx = None
        for k in range(n_u):
            room_up = upper[k] - u[k]
            room_dn = u[k] - 0.0
            hc = min(h, room_up, room_dn)
            if hc >= H_FLOOR:
                self.h[k] = hc
                up = u.copy()
                up[k] += hc
                dn = u.copy()
                dn[k] -= hc
                self.plus_idx[k] = len(points)
                points.append(up)
                self.minus_idx[k] = len(points)
                points.append(dn)
            else:
                self.one_sided[k] = True
                if room_up >= room_dn:
                    sign, room = 1.0, room_up
                else:
                    sign, room = -1.0, room_dn
                hk = min(h, room)
                if hk < H_FLOOR:
                    raise ValueError(
                        f"coordinate {k} has no room for differencing"
                    )
                log.warning(
                    "finite differences: coordinate %d squeezed below %g, "
                    "using one-sided step %g", k, H_FLOOR, hk,
                )
                self.h[k] = hk
                self.side[k] = sign
                pert = u.copy()
                pert[k] += sign * hk
                if base_idx is None:
                    base_idx = len(points)
                    points.append(u.copy())
                if sign > 0:
                    self.plus_idx[k] = len(points)
                    points.append(pert)
                    self.minus_idx[k] = base_idx
                else:
                    self.plus_idx[k] = base_idx
                    self.minus_idx[k] = len(points)
                    points.append(pert)
        self.points = points
        self.samples = [np.empty(0) for _ in points]

    def extend_to(self, n: int) -> None:
        for j, point in enumerate(self.points):
            have = self.samples[j].size
            if n > have:
                seed = self.seed if self.crn else derive_seed(self.seed, j)
                sched = self.schedule.with_values(point)
                new = self.sampler.sample_range(sched, seed, have, n - have)
                self.samples[j] = np.concatenate([self.samples[j], new])

    def estimate(self, n: int) -> GradientEstimate:
        self.extend_to(n)
        n_u = self.h.size
        d = np.empty((n, n_u))
        for k in range(n_u):
            plus = self.samples[self.plus_idx[k]][:n]
            minus = self.samples[self.minus_idx[k]][:n]
            denom = 2.0 * self.h[k] if not self.one_sided[k] else self.h[k]
            d[:, k] = (plus - minus) / denom
        vector = d.mean(axis=0)
        if n >= 2:
            cov = np.atleast_2d(np.cov(d, rowvar=False, ddof=1))
            sigma = float(math.sqrt(max(0.0, np.linalg.norm(cov, 2)) / n))
        else:
            cov = None
            sigma = float("nan")
        return GradientEstimate(
            vector=vector, covariance=cov, sigma=sigma, n=n,
            h=self.h.copy(), one_sided=self.one_sided.copy(),
        )


def fd_gradient(
    sampler,
    schedule: PolicySchedule,
    h: float,
    n: int,
    crn: bool = True,
    seed: int = 0,
) -> GradientEstimate:
    """Central-difference gradient estimate from n samples per point."""
    if h <= 0:
        raise ValueError("h must be positive")
    return _FdStencil(sampler, schedule, h, crn, seed).estimate(n)


def adaptive_gradient(
    sampler,
    schedule: PolicySchedule,
    epsilon: float,
    h_max: float,
    seed: int = 0,
    n0: int = INITIAL_SAMPLES,
    cap: int = SAMPLE_CAP,
    crn: bool = True,
) -> GradientEstimate:
    """Gradient estimate at relative accuracy epsilon (with high probability).

    Doubles the sample count until 2 sigma <= epsilon ||gradient||; the
    differencing step is h_max shrunk to keep the stencil feasible.
    Raises BudgetExhaustedError (with the last estimate and the achieved
    relative half-width attached) if the cap is reached first.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    stencil = _FdStencil(sampler, schedule, h_max, crn, seed)
    n = max(2, n0)
    while True:
        est = stencil.estimate(n)
        if 2.0 * est.sigma <= epsilon * est.norm:
            return est
        if n >= cap:
            raise BudgetExhaustedError(
                f"gradient accuracy {est.relative_half_width:.3g} > {epsilon} at cap n={n}",
                estimate=est,
                achieved=est.relative_half_width,
            )
        n = min(2 * n, cap)


def recommended_sample_size(h: float, sigma: float, crn: bool = True) -> int:
    """Order-of-magnitude n balancing differencing bias and sampling noise.

    The gradient error is O(h^2 + sigma/(h sqrt(n))) for independent
    samples, giving n = O(h^-6); correlated sampling removes the 1/h
    noise amplification and needs only n = O(h^-4).
    """
    if h <= 0 or sigma < 0:
        raise ValueError("h must be positive and sigma nonnegative")
    power = 4 if crn else 6
    return max(1, math.ceil(sigma * sigma / h**power))
