"""Iteration drivers: fixed-step descent and the non-monotone line search
with alternating Barzilai-Borwein trial steps, plus convergence diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .directions import EXACT_GRAD, SearchDirection, compute_direction
from .errors import NumericalError
from .frames import Frame, GridSpec, inner_h, norm_h, random_frame
from .geometry import POLAR, retract, retract_qr_mgs
from .models import EnergyModel, energy, eigenvalues_at, residual
from .models import a0_norm
from .solvers import SolveConfig

TERMINATION_RESIDUAL = "residual_tol"
TERMINATION_MAX_ITER = "max_iter"
TERMINATION_LINE_SEARCH = "line_search_failure"
TERMINATION_DEGENERATE = "degenerate_frame"

# BB denominators below this relative floor fall back to the largest
# admissible trial step.
BB_DENOMINATOR_FLOOR = 1e-14


@dataclass
class LineSearchParams:
    alpha: float = 0.95
    beta: float = 1e-4
    delta: float = 0.5
    gamma_min: float = 1e-4
    gamma_max: float = 1.0
    gamma0: float = 1e-2
    max_backtracks: int = 25

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.gamma_min < self.gamma_max:
            raise ValueError("need 0 < gamma_min < gamma_max")
        if self.gamma0 <= 0.0:
            raise ValueError("gamma0 must be positive")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be non-negative")


@dataclass
class IterationRecord:
    n: int
    energy: float
    residual_h_norm: float
    grad_a_norm: float
    step_size: float
    backtracks: int
    inner_iterations: int
    c_n: float
    q_n: float
    wall_time_s: float


@dataclass
class RunResult:
    final_frame: Frame
    eigenvalues: np.ndarray
    history: List[IterationRecord]
    converged: bool
    termination: str
    frames: Optional[List[Frame]] = None
    directions: Optional[List[Frame]] = None

    @property
    def iterations(self) -> int:
        return len(self.history) - 1

    @property
    def final_energy(self) -> float:
        return self.history[-1].energy

    @property
    def total_inner_iterations(self) -> int:
        return int(sum(rec.inner_iterations for rec in self.history))


def initial_frame(grid: GridSpec, n_orbitals: int, seed: int) -> Frame:
    """Seeded Gaussian frame orthonormalized by modified Gram-Schmidt."""
    rng = np.random.default_rng(seed)
    q, _ = retract_qr_mgs(random_frame(grid, n_orbitals, rng))
    return q


def nonmonotone_update(c: float, q: float, alpha: float, energy_new: float) -> Tuple[float, float]:
    """Advance the averaged-energy reference pair (c, q) after a step."""
    q_next = alpha * q + 1.0
    c_next = (1.0 - 1.0 / q_next) * c + energy_new / q_next
    return c_next, q_next


def bb_trial_step(n: int, s: Frame, y: Frame, params: LineSearchParams) -> float:
    """Alternating Barzilai-Borwein trial step from the last iterate/direction
    differences, clamped to [gamma_min, gamma_max]."""
    ss = inner_h(s, s)
    sy = abs(inner_h(s, y))
    floor = BB_DENOMINATOR_FLOOR * max(1.0, ss)
    if n % 2 == 1:
        gamma = ss / sy if sy >= floor else params.gamma_max
    else:
        yy = inner_h(y, y)
        gamma = sy / yy if yy >= floor else params.gamma_max
    return max(params.gamma_min, min(gamma, params.gamma_max))


def _finalize(
    model: EnergyModel,
    phi: Frame,
    history: List[IterationRecord],
    converged: bool,
    termination: str,
    frames: Optional[List[Frame]],
    directions: Optional[List[Frame]] = None,
) -> RunResult:
    return RunResult(
        final_frame=phi,
        eigenvalues=eigenvalues_at(model, phi),
        history=history,
        converged=converged,
        termination=termination,
        frames=frames,
        directions=directions,
    )


def rgd_fixed_step(
    model: EnergyModel,
    phi0: Frame,
    tau: float,
    retraction: str = POLAR,
    tol: float = 1e-6,
    max_iter: int = 1000,
    solver_config: Optional[SolveConfig] = None,
    log_frames: bool = False,
) -> RunResult:
    """Riemannian gradient descent with a constant step size."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    config = solver_config if solver_config is not None else SolveConfig()
    phi = phi0
    history: List[IterationRecord] = []
    frames: Optional[List[Frame]] = [] if log_frames else None
    t0 = time.perf_counter()

    for n in range(max_iter + 1):
        e = energy(model, phi)
        r, _ = residual(model, phi)
        res_norm = norm_h(r)
        try:
            sd = compute_direction(model, phi, EXACT_GRAD, config)
        except NumericalError:
            history.append(
                IterationRecord(n, e, res_norm, float("inf"), 0.0, 0, 0, e, 1.0,
                                time.perf_counter() - t0)
            )
            if frames is not None:
                frames.append(phi)
            return _finalize(model, phi, history, False, TERMINATION_DEGENERATE, frames)
        grad_norm = float(np.sqrt(max(sd.gram_of_direction, 0.0)))
        converged = res_norm <= tol
        step = 0.0 if (converged or n == max_iter) else tau
        history.append(
            IterationRecord(n, e, res_norm, grad_norm, step, 0, sd.inner_effort,
                            e, 1.0, time.perf_counter() - t0)
        )
        if frames is not None:
            frames.append(phi)
        if converged:
            return _finalize(model, phi, history, True, TERMINATION_RESIDUAL, frames)
        if n == max_iter:
            return _finalize(model, phi, history, False, TERMINATION_MAX_ITER, frames)
        phi = retract(phi, tau * sd.direction, retraction)

    raise AssertionError("unreachable")


def rgd_line_search(
    model: EnergyModel,
    phi0: Frame,
    params: Optional[LineSearchParams] = None,
    direction_kind: str = EXACT_GRAD,
    retraction: str = POLAR,
    tol: float = 1e-6,
    max_iter: int = 1000,
    solver_config: Optional[SolveConfig] = None,
    fixed_iters: int = 3,
    log_frames: bool = False,
) -> RunResult:
    """Descent with the non-monotone line search and alternating BB steps.

    Each accepted step satisfies
    E(R(phi, tau eta)) <= c_n - beta tau a_phi(eta, eta)
    against the decaying weighted energy average c_n; the trial step is the
    alternating BB formula from the latest iterate/direction differences.
    """
    params = params if params is not None else LineSearchParams()
    config = solver_config if solver_config is not None else SolveConfig()
    phi = phi0
    history: List[IterationRecord] = []
    frames: Optional[List[Frame]] = [] if log_frames else None
    directions: Optional[List[Frame]] = [] if log_frames else None
    prev_phi: Optional[Frame] = None
    prev_eta: Optional[SearchDirection] = None
    c = energy(model, phi)
    q = 1.0
    t0 = time.perf_counter()

    for n in range(max_iter + 1):
        e = energy(model, phi)
        r, _ = residual(model, phi)
        res_norm = norm_h(r)
        try:
            sd = compute_direction(model, phi, direction_kind, config, fixed_iters)
        except NumericalError:
            history.append(
                IterationRecord(n, e, res_norm, float("inf"), 0.0, 0, 0, c, q,
                                time.perf_counter() - t0)
            )
            if frames is not None:
                frames.append(phi)
            return _finalize(model, phi, history, False, TERMINATION_DEGENERATE,
                             frames, directions)
        grad_norm = float(np.sqrt(max(sd.gram_of_direction, 0.0)))
        if frames is not None:
            frames.append(phi)
            directions.append(sd.direction)

        converged = res_norm <= tol
        if converged or n == max_iter:
            history.append(
                IterationRecord(n, e, res_norm, grad_norm, 0.0, 0, sd.inner_effort,
                                c, q, time.perf_counter() - t0)
            )
            termination = TERMINATION_RESIDUAL if converged else TERMINATION_MAX_ITER
            return _finalize(model, phi, history, converged, termination,
                             frames, directions)

        if n == 0:
            gamma = max(params.gamma_min, min(params.gamma0, params.gamma_max))
        else:
            s = phi - prev_phi
            y = prev_eta.direction - sd.direction
            gamma = bb_trial_step(n, s, y, params)

        accepted = None
        backtracks = 0
        tau = gamma
        for k in range(params.max_backtracks + 1):
            tau = gamma * params.delta**k
            candidate = retract(phi, tau * sd.direction, retraction)
            if energy(model, candidate) <= c - params.beta * tau * sd.gram_of_direction:
                accepted = candidate
                backtracks = k
                break
        history.append(
            IterationRecord(n, e, res_norm, grad_norm,
                            tau if accepted is not None else 0.0,
                            backtracks if accepted is not None else params.max_backtracks,
                            sd.inner_effort, c, q, time.perf_counter() - t0)
        )
        if accepted is None:
            return _finalize(model, phi, history, False, TERMINATION_LINE_SEARCH,
                             frames, directions)

        prev_phi, prev_eta = phi, sd
        phi = accepted
        c, q = nonmonotone_update(c, q, params.alpha, energy(model, phi))

    raise AssertionError("unreachable")


def diagnostics_a2_a3(model: EnergyModel, result: RunResult) -> Tuple[np.ndarray, np.ndarray]:
    """Per-step descent and step-size ratios from a run with stored frames.

    r2(n) = (E_n - E_{n+1}) / (g_n * d_n) and r3(n) = d_n / g_n, with g_n the
    metric gradient norm and d_n the quadratic-form norm of the iterate
    difference. Steps with a vanishing gradient norm report NaN.
    """
    if result.frames is None or len(result.frames) != len(result.history):
        raise ValueError("diagnostics require a run recorded with log_frames=True")
    steps = len(result.history) - 1
    r2 = np.full(steps, np.nan)
    r3 = np.full(steps, np.nan)
    grad_floor = 100.0 * np.finfo(np.float64).eps
    for n in range(steps):
        g = result.history[n].grad_a_norm
        if not np.isfinite(g) or g <= grad_floor:
            continue
        d = a0_norm(model, result.frames[n + 1] - result.frames[n])
        decay = result.history[n].energy - result.history[n + 1].energy
        if d > 0.0:
            r2[n] = decay / (g * d)
        r3[n] = d / g
    return r2, r3
