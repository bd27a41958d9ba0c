"""Mild solutions of u_t = Δ_G u + λ|u|^{ρ-1}u, u(0) = u0.

The solution is the fixed point of

    Λ(u)(t) = S(t)u0 + ∫_0^t S(t-s) F(u(s)) ds.

:func:`picard_solve` iterates Λ on a time mesh graded towards t = 0.  The
Duhamel integral is computed in modal coordinates, where S(t) is diagonal,
with the product rule that integrates exp((t-s)λ) exactly against the
piecewise-linear interpolant of F; the recursion

    I(t_n) = exp(Δ_n λ) I(t_{n-1}) + ∫_{t_{n-1}}^{t_n} exp((t_n - s)λ) F(s) ds

makes one sweep cost O(steps).  :func:`step_evolve` is the exponential Euler
cross-check u_{n+1} = S(Δt)(u_n + Δt F(u_n)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .core import (Field, Grid, HypothesisError, ModelParams, NumericalError, Regime, lp_norm,
                   nonlinearity, regime_classify)
from .semigroup import get_propagator

logger = logging.getLogger(__name__)

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blowup"
STATUS_NO_CONVERGENCE = "no-convergence"


@dataclass(frozen=True)
class SolverConfig:
    """Time horizon, step and stopping rules.

    ``grading=None`` grades the Picard mesh as t_j = T (j/n)^{1/(1-αρ)};
    ``grading=1`` gives a uniform mesh.  ``max_splits`` bounds the number of
    times a window may be halved after the fixed-point iteration fails.
    """

    T: float = 0.5
    dt: float = 0.01
    picard_tol: float = 1e-10
    picard_max_iter: int = 200
    blowup_threshold: float = 1e6
    grading: Optional[float] = None
    max_splits: int = 10

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("T and dt must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")

    def as_dict(self) -> dict:
        return {"T": self.T, "dt": self.dt, "picard_tol": self.picard_tol,
                "picard_max_iter": self.picard_max_iter, "blowup_threshold": self.blowup_threshold,
                "grading": self.grading, "max_splits": self.max_splits}


@dataclass
class SolveReport:
    times: np.ndarray
    lp_norm_traj: np.ndarray
    lrhop_norm_traj: np.ndarray
    weighted_traj: np.ndarray
    picard_residuals: List[float] = field(default_factory=list)
    blowup: bool = False
    blowup_time: Optional[float] = None
    status: str = STATUS_COMPLETED
    alpha: float = 0.0
    method: str = "picard"
    windows: int = 1

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "method": self.method,
            "alpha": self.alpha,
            "blowup": self.blowup,
            "blowup_time": self.blowup_time,
            "windows": self.windows,
            "final_time": float(self.times[-1]),
            "final_lp_norm": float(self.lp_norm_traj[-1]),
            "final_lrhop_norm": float(self.lrhop_norm_traj[-1]),
            "max_lrhop_norm": float(np.max(self.lrhop_norm_traj)),
            "picard_iterations": len(self.picard_residuals),
            "picard_residuals": [float(r) for r in self.picard_residuals],
        }

    def rows(self):
        """(t, lp_norm, lrhop_norm, weighted_norm, residual) per time; residual is the final Picard one."""
        res = self.picard_residuals[-1] if self.picard_residuals else float("nan")
        for i, t in enumerate(self.times):
            yield (float(t), float(self.lp_norm_traj[i]), float(self.lrhop_norm_traj[i]),
                   float(self.weighted_traj[i]), float(res))


TRAJECTORY_COLUMNS = ("t", "lp_norm", "lrhop_norm", "weighted_norm", "residual")


def phi1(z):
    """(e^z - 1)/z."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(zs) / zs)


def phi2(z):
    """(e^z - 1 - z)/z²."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    series = 0.5 + z / 6.0 + z ** 2 / 24.0 + z ** 3 / 120.0 + z ** 4 / 720.0
    return np.where(small, series, (np.expm1(zs) - zs) / zs ** 2)


def check_hypotheses(params: ModelParams):
    rep = regime_classify(params)
    if rep.regime == Regime.VIOLATED:
        raise HypothesisError(rep.message)
    return rep


def time_mesh(T: float, n: int, grading: float) -> np.ndarray:
    return T * (np.arange(n + 1) / n) ** grading


def _mesh_for(params: ModelParams, config: SolverConfig, T: float, alpha_rho: float) -> np.ndarray:
    n = max(2, int(math.ceil(T / config.dt - 1e-9)))
    grading = config.grading
    if grading is None:
        grading = 1.0 / (1.0 - alpha_rho) if alpha_rho < 1 else 1.0
    return time_mesh(T, n, grading)


class _Norms:
    def __init__(self, params: ModelParams, grid: Grid, alpha: float, threshold: float):
        self.grid = grid
        self.p = params.p
        self.r = params.monitor_index
        self.rhop = params.rho * params.p
        self.alpha = alpha
        self.threshold = threshold

    def __call__(self, v, q) -> float:
        return lp_norm(v if isinstance(v, Field) else Field(self.grid, v), q)

    def trajectories(self, times, fields):
        lp = np.array([lp_norm(f, self.p) for f in fields])
        lr = np.array([lp_norm(f, self.rhop) for f in fields])
        if self.r == self.rhop:
            lw = lr
        else:
            lw = np.array([lp_norm(f, self.r) for f in fields])
        return lp, lr, np.asarray(times) ** self.alpha * lw


def picard_solve(params: ModelParams, grid: Grid, config: SolverConfig, u0: Field,
                 t_offset: float = 0.0, _depth: int = 0) -> Tuple[SolveReport, List[Field]]:
    """Fixed point of the Duhamel map on [0, T] by Picard iteration.

    Stops when sup_n t_n^α‖u^{m+1}(t_n) - u^m(t_n)‖_r + sup_n‖·‖_p <= picard_tol.
    When the iteration does not contract, the window is halved and the
    halves are glued with :func:`continue_solution` (up to ``max_splits``).
    Returns the report and the solution on the mesh.
    """
    rep = check_hypotheses(params)
    alpha = rep.alpha
    report, states = _picard_window(params, grid, config, u0, config.T, alpha, rep.alpha_rho)
    if report.status == STATUS_NO_CONVERGENCE and _depth < config.max_splits:
        half = replace(config, T=config.T / 2)
        logger.info("Picard did not converge on a window of length %g; halving", config.T)
        first, s1 = picard_solve(params, grid, half, u0, 0.0, _depth + 1)
        if first.status != STATUS_COMPLETED:
            report, states = first, s1
        else:
            second, s2 = continue_solution(params, grid, half, s1[-1], half.T, t_offset=half.T,
                                           _depth=_depth + 1)
            report = _glue(first, second)
            states = s1 + s2[1:]
    report.times = report.times + t_offset
    if report.blowup_time is not None:
        report.blowup_time += t_offset
    return report, states


def _picard_window(params, grid, config, u0, T, alpha, alpha_rho):
    prop = get_propagator(params, grid)
    norms = _Norms(params, grid, alpha, config.blowup_threshold)
    t = _mesh_for(params, config, T, alpha_rho)
    n = t.size - 1
    eig = prop.modal_eigenvalues
    U0 = prop.to_modal(u0.values)

    # per-step propagation factor and product-rule weights
    steps = []
    for j in range(1, n + 1):
        d = t[j] - t[j - 1]
        z = d * eig
        p2 = phi2(z)
        steps.append((np.exp(z), d * (phi1(z) - p2), d * p2))

    lin = [U0]
    for j in range(1, n + 1):
        lin.append(steps[j - 1][0] * lin[-1])
    u = [prop.from_modal(c) for c in lin]

    residuals: List[float] = []
    status = STATUS_NO_CONVERGENCE
    rho, lam = params.rho, params.lam
    w_t = t ** alpha
    for it in range(config.picard_max_iter):
        F = [prop.to_modal(nonlinearity(v, rho, lam)) for v in u]
        acc = np.zeros_like(U0)
        new = [u[0]]
        for j in range(1, n + 1):
            e, wp, wc = steps[j - 1]
            acc = e * acc + wp * F[j - 1] + wc * F[j]
            new.append(prop.from_modal(lin[j] + acc))
        if not all(np.all(np.isfinite(v)) for v in new):
            residuals.append(float("inf"))
            break
        res_r = max(w_t[j] * norms(new[j] - u[j], norms.r) for j in range(n + 1))
        res_p = max(norms(new[j] - u[j], norms.p) for j in range(n + 1))
        residuals.append(float(res_r + res_p))
        u = new
        if residuals[-1] <= config.picard_tol:
            status = STATUS_COMPLETED
            break
        if max(norms(v, norms.rhop) for v in u) > 1e3 * config.blowup_threshold:
            break
        if len(residuals) > 3 and residuals[-1] > residuals[-2] > residuals[-3] > residuals[0]:
            break

    fields = [Field(grid, v) for v in u] if status == STATUS_COMPLETED else [u0]
    times = t if status == STATUS_COMPLETED else t[:1]
    lp, lr, lw = norms.trajectories(times, fields)
    report = SolveReport(times.copy(), lp, lr, lw, residuals, status=status, alpha=alpha, method="picard")
    if status == STATUS_COMPLETED:
        _flag_blowup(report, config.blowup_threshold)
    return report, fields


def _flag_blowup(report: SolveReport, threshold: float):
    over = np.nonzero(report.lrhop_norm_traj > threshold)[0]
    if over.size:
        report.blowup = True
        report.status = STATUS_BLOWUP
        report.blowup_time = float(report.times[over[0]])


def _glue(first: SolveReport, second: SolveReport) -> SolveReport:
    out = SolveReport(
        np.concatenate([first.times, second.times[1:]]),
        np.concatenate([first.lp_norm_traj, second.lp_norm_traj[1:]]),
        np.concatenate([first.lrhop_norm_traj, second.lrhop_norm_traj[1:]]),
        np.concatenate([first.weighted_traj, second.weighted_traj[1:]]),
        first.picard_residuals + second.picard_residuals,
        second.blowup, second.blowup_time, second.status, first.alpha, first.method,
        first.windows + second.windows,
    )
    return out


def step_evolve(params: ModelParams, grid: Grid, config: SolverConfig, u0: Field,
                record_every: int = 1, t_offset: float = 0.0) -> Tuple[SolveReport, Field]:
    """Exponential Euler u_{n+1} = S(Δt)u_n + Δt S(Δt)F(u_n) up to T.

    Halts when ‖u‖_{ρp} crosses ``blowup_threshold`` or the field stops
    being finite; the report then has status ``blowup``.
    """
    rep = check_hypotheses(params)
    prop = get_propagator(params, grid)
    norms = _Norms(params, grid, rep.alpha, config.blowup_threshold)
    n = max(1, int(round(config.T / config.dt)))
    dt = config.T / n
    e = prop.decay(dt)
    rho, lam = params.rho, params.lam

    times, lp, lr, lw = [], [], [], []

    def record(tt, v):
        times.append(tt)
        lp.append(norms(v, norms.p))
        lr.append(norms(v, norms.rhop))
        lw.append(tt ** rep.alpha * (lr[-1] if norms.r == norms.rhop else norms(v, norms.r)))

    u = np.array(u0.values, dtype=float)
    c = prop.to_modal(u)
    record(0.0, u)
    status, t_blow = STATUS_COMPLETED, None
    for j in range(1, n + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            f = nonlinearity(u, rho, lam)
            c_new = e * (c + dt * prop.to_modal(f)) if lam != 0 else e * c
            u_new = prop.from_modal(c_new)
        tt = j * dt
        if not np.all(np.isfinite(u_new)):
            status, t_blow = STATUS_BLOWUP, times[-1]
            break
        u, c = u_new, c_new
        if j % record_every == 0 or j == n:
            record(tt, u)
        if norms(u, norms.rhop) > config.blowup_threshold:
            if times[-1] != tt:
                record(tt, u)
            status, t_blow = STATUS_BLOWUP, tt
            break

    report = SolveReport(np.array(times) + t_offset, np.array(lp), np.array(lr), np.array(lw),
                         status=status, alpha=rep.alpha, method="exponential-euler")
    if status == STATUS_BLOWUP:
        report.blowup = True
        report.blowup_time = float(t_blow + t_offset)
    return report, Field(grid, u)


def continue_solution(params: ModelParams, grid: Grid, config: SolverConfig, segment_end_state: Field,
                      extra_T: float, method: str = "picard", t_offset: float = 0.0, _depth: int = 0):
    """Restart the solver from the end state of a previous segment for ``extra_T`` more time.

    Times in the returned report are shifted by ``t_offset`` (the end time of
    the previous segment).  Returns (report, states) for Picard and
    (report, final field) for the stepper.
    """
    cfg = replace(config, T=extra_T)
    if method == "picard":
        return picard_solve(params, grid, cfg, segment_end_state, t_offset=t_offset, _depth=_depth)
    if method == "step":
        return step_evolve(params, grid, cfg, segment_end_state, t_offset=t_offset)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class BlowupVerdict:
    blowup: bool
    t_max: Optional[float]
    crossing_time: Optional[float]
    growth_exponent: Optional[float] = None

    def as_dict(self) -> dict:
        return {"blowup": self.blowup, "t_max": self.t_max, "crossing_time": self.crossing_time,
                "growth_exponent": self.growth_exponent}


def detect_blowup(report: SolveReport, rho: float, threshold: Optional[float] = None) -> BlowupVerdict:
    """Blow-up verdict from a norm trajectory.

    Blow-up is declared when ‖u‖_{ρp} crossed the threshold (or the run ended
    non-finite) and, over the last decade of growth, ‖u‖^{-(ρ-1)} decreases
    linearly in t as for the ODE profile (T - t)^{-1/(ρ-1)}.  The zero of
    that linear fit estimates T_max.
    """
    t = np.asarray(report.times, dtype=float)
    y = np.asarray(report.lrhop_norm_traj, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples to judge blow-up")
    crossed = report.blowup or (threshold is not None and np.any(y > threshold))
    if not crossed:
        return BlowupVerdict(False, None, None)
    crossing = report.blowup_time
    if crossing is None:
        crossing = float(t[np.nonzero(y > threshold)[0][0]])
    top = y.max()
    sel = (y >= top / 10.0) & (y > 0)
    if sel.sum() < 3:
        sel = np.zeros_like(sel)
        sel[-3:] = True
    tt, yy = t[sel], y[sel]
    g = yy ** (-(rho - 1.0))
    slope, icpt = np.polyfit(tt, g, 1)
    if slope >= 0:
        return BlowupVerdict(False, None, crossing)
    t_max = -icpt / slope
    # growth exponent from log-log fit against the estimated T_max
    dist = t_max - tt
    ok = dist > 0
    expo = None
    if ok.sum() >= 2:
        expo = float(-np.polyfit(np.log(dist[ok]), np.log(yy[ok]), 1)[0])
    return BlowupVerdict(True, float(t_max), float(crossing), expo)


def confirm_blowup(params: ModelParams, grid: Grid, config: SolverConfig, u0: Field,
                   rel_tol: float = 0.1):
    """Rerun the stepper with Δt/2 and require the threshold crossing to move by < rel_tol.

    Returns (verdict at Δt, verdict at Δt/2, confirmed).
    """
    r1, _ = step_evolve(params, grid, config, u0)
    r2, _ = step_evolve(params, grid, replace(config, dt=config.dt / 2), u0)
    v1 = detect_blowup(r1, params.rho, config.blowup_threshold)
    v2 = detect_blowup(r2, params.rho, config.blowup_threshold)
    ok = (v1.blowup and v2.blowup
          and abs(v1.crossing_time - v2.crossing_time) <= rel_tol * v2.crossing_time)
    return v1, v2, bool(ok)


def continuous_dependence_probe(params: ModelParams, grid: Grid, config: SolverConfig, u0: Field,
                                v0: Field, method: str = "picard") -> float:
    """sup_t ‖u(t) - v(t)‖_p / ‖u0 - v0‖_p over the shared mesh (0 when u0 = v0)."""
    den = lp_norm(u0 - v0, params.p)
    if den == 0:
        return 0.0
    if method == "picard":
        _, us = picard_solve(params, grid, config, u0)
        _, vs = picard_solve(params, grid, config, v0)
        if len(us) != len(vs):
            raise NumericalError("the two solves ended on different meshes")
        num = max(lp_norm(a - b, params.p) for a, b in zip(us, vs))
    else:
        num = _stepper_sup_diff(params, grid, config, u0, v0)
    return float(num / den)


def _stepper_sup_diff(params, grid, config, u0, v0):
    prop = get_propagator(params, grid)
    n = max(1, int(round(config.T / config.dt)))
    dt = config.T / n
    e = prop.decay(dt)
    u, v = u0.values, v0.values
    cu, cv = prop.to_modal(u), prop.to_modal(v)
    best = lp_norm(Field(grid, u - v), params.p)
    for _ in range(n):
        cu = e * (cu + dt * prop.to_modal(nonlinearity(u, params.rho, params.lam)))
        cv = e * (cv + dt * prop.to_modal(nonlinearity(v, params.rho, params.lam)))
        u, v = prop.from_modal(cu), prop.from_modal(cv)
        best = max(best, lp_norm(Field(grid, u - v), params.p))
    return best


def eventually_nonincreasing(report: SolveReport, transient: float, rel_slack: float = 1e-12) -> bool:
    """True when ‖u(t)‖_{ρp} never increases (beyond rel_slack) for t >= transient."""
    sel = report.times >= transient
    y = report.lrhop_norm_traj[sel]
    if y.size < 2:
        return True
    return bool(np.all(np.diff(y) <= rel_slack * y[:-1]))


def calibrate_small_data(params: ModelParams, grid: Grid, config: SolverConfig, profile: Field,
                         amplitudes, transient: float = 1.0):
    """Largest amplitude from ``amplitudes`` whose run to T stays bounded and decays after ``transient``.

    Returns (amplitude, ‖amplitude * profile‖_p, {amplitude: verdict}); the
    amplitude is None when every candidate fails.
    """
    verdicts = {}
    best = None
    for amp in sorted(amplitudes, reverse=True):
        rep, _ = step_evolve(params, grid, config, amp * profile)
        ok = rep.status == STATUS_COMPLETED and eventually_nonincreasing(rep, transient)
        verdicts[float(amp)] = ok
        if ok:
            best = float(amp)
            break
    delta = None if best is None else lp_norm(best * profile, params.p)
    return best, delta, verdicts
