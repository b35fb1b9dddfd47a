"""Strang split-step time integration with blowup detection.

The equation i u_t = Lap(u) + 2 u h'(rho) Lap(h(rho)) + F(rho) u, rho = |u|^2,
splits into two exactly solvable subflows.  Linear: Fourier modes rotate as
u_hat_k(t + tau) = exp(+i |k|^2 tau) u_hat_k(t); the + sign follows from the
i u_t = +Lap(u) convention (the complex conjugate of the textbook equation).
Nonlinear: the generator is the real multiplier 2 h'(rho) Lap(h(rho)) + F(rho),
so rho is frozen along the subflow and the substep is an exact pointwise
phase rotation.  Both substeps preserve the discrete L^2 norm, so mass is
conserved to roundoff for any step sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .diagnostics import DiagnosticSample, sample
from .grid import Field, laplacian_of_real, tail_fraction_from_hat
from .nonlinearity import NonlinearityModel

ENERGY_JUMP_MAX = 1e-3  # relative per-step energy jump that triggers refinement
RELAX_FACTOR = 10.0  # both triggers this far below threshold allow dt growth
GROWTH_FLOOR = 10.0  # minimal gradient growth that still counts as blowup-like


class RunStatus(str, Enum):
    COMPLETED = "Completed"
    BLOWUP_DETECTED = "BlowupDetected"
    RESOLUTION_EXCEEDED = "ResolutionExceeded"


class StepError(RuntimeError):
    """A substep failed; carries the offending sample value when known."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


@dataclass(frozen=True)
class SolverConfig:
    dt0: float
    t_end: float
    dt_min: float | None = None
    adapt: bool = False
    tail_max: float = 0.1
    grad_blowup_factor: float = 1e3
    energy_jump_max: float = ENERGY_JUMP_MAX

    def __post_init__(self):
        if not (self.dt0 > 0 and math.isfinite(self.dt0)):
            raise ValueError("dt0 must be positive and finite")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.dt_min is None:
            object.__setattr__(self, "dt_min", self.dt0 * 2.0**-20)
        if not 0 < self.dt_min <= self.dt0:
            raise ValueError("need 0 < dt_min <= dt0")
        if not 0 < self.tail_max < 1:
            raise ValueError("tail_max must lie in (0, 1)")


@dataclass(frozen=True)
class StepperState:
    t: float
    field: Field
    dt: float
    steps: int = 0


@dataclass(frozen=True)
class BlowupVerdict:
    status: RunStatus
    t_estimate: float | None = None
    reason: str = ""


def linear_half_step(f: Field, tau: float) -> Field:
    """Exact free flow over tau: every |u_hat_k| is preserved per mode."""
    if tau == 0.0:
        return f
    hat = np.fft.fftn(f.values)
    hat *= np.exp(1j * f.grid.k_squared * tau)
    return f.copy_with(np.fft.ifftn(hat))


def nonlinear_phase_step(f: Field, model: NonlinearityModel, tau: float) -> Field:
    """Exact phase rotation by the frozen real multiplier.

    Computes rho = |f|^2, Lap(h(rho)) once spectrally, then multiplies by
    exp(-i tau [2 h'(rho) Lap(h(rho)) + F(rho)]) pointwise.  |f| is
    preserved pointwise to roundoff.
    """
    if tau == 0.0:
        return f
    rho = f.values.real**2 + f.values.imag**2
    try:
        if model.is_trivial_h:
            phase = model.f(rho)
        else:
            lam = laplacian_of_real(f.grid, model.h(rho))
            phase = 2.0 * model.h_prime(rho) * lam + model.f(rho)
    except OverflowError as exc:
        raise StepError(
            f"nonlinearity overflow: {exc}", offending=float(np.max(rho))
        ) from exc
    if not np.all(np.isfinite(phase)):
        bad = rho.ravel()[int(np.argmax(~np.isfinite(phase).ravel()))]
        raise StepError(
            f"non-finite phase multiplier at |u|^2 = {bad}", offending=float(bad)
        )
    return f.copy_with(f.values * np.exp(-1j * tau * phase))


def strang_step(state: StepperState, model: NonlinearityModel,
                tau: float) -> StepperState:
    """linear(tau/2) then nonlinear(tau) then linear(tau/2)."""
    f = linear_half_step(state.field, 0.5 * tau)
    f = nonlinear_phase_step(f, model, tau)
    f = linear_half_step(f, 0.5 * tau)
    return StepperState(t=state.t + tau, field=f, dt=state.dt,
                        steps=state.steps + 1)


def _grad_norm_sq_from_hat(grid, hat) -> float:
    total = np.sum(grid.k_squared * (hat.real**2 + hat.imag**2))
    return float(total * grid.weight / grid.size)


def _step_monitor(model: NonlinearityModel, f: Field):
    """(tail fraction, energy, grad2) with one shared forward transform."""
    hat = np.fft.fftn(f.values)
    tail = tail_fraction_from_hat(f.grid, hat)
    grad2 = _grad_norm_sq_from_hat(f.grid, hat)
    rho = f.values.real**2 + f.values.imag**2
    pot = float(np.sum(model.g(rho)) * f.grid.weight)
    if model.is_trivial_h:
        gradh2 = 0.0
    else:
        hhat = np.fft.fftn(model.h(rho))
        gradh2 = _grad_norm_sq_from_hat(f.grid, hhat)
    return tail, 0.5 * (grad2 + gradh2 - pot), grad2


def integrate(
    u0: Field,
    model: NonlinearityModel,
    cfg: SolverConfig,
    sample_every: int = 10,
    lp_list: tuple = (),
) -> tuple[list[DiagnosticSample], BlowupVerdict, StepperState]:
    """March to t_end or a blowup trigger, sampling diagnostics on the way.

    Adaptive runs halve dt whenever the one-step spectral tail fraction
    exceeds tail_max or the relative energy jump exceeds the configured
    bound (the offending step is rejected and retried), and double dt back
    toward dt0 once both sit a factor of ten below their triggers.  The
    stepping itself never raises on blowup; abnormal termination is encoded
    in the verdict.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    state = StepperState(t=0.0, field=u0, dt=cfg.dt0)
    series: list[DiagnosticSample] = [
        sample(u0, model, 0.0, lp_list=lp_list, dt=cfg.dt0)
    ]
    tail0, energy, grad2 = _step_monitor(model, u0)
    grad2_init = grad2
    grad2_cap = cfg.grad_blowup_factor**2 * max(grad2_init, 1e-300)
    stop_reason = ""
    since_sample = 0

    while state.t < cfg.t_end - 1e-14 * max(1.0, cfg.t_end):
        tau = min(state.dt, cfg.t_end - state.t)
        try:
            trial = strang_step(state, model, tau)
        except StepError as exc:
            if cfg.adapt and state.dt > cfg.dt_min:
                state = replace(state, dt=max(cfg.dt_min, 0.5 * state.dt))
                continue
            stop_reason = f"step failed: {exc}"
            break
        if not trial.field.is_finite():
            if cfg.adapt and state.dt > cfg.dt_min:
                state = replace(state, dt=max(cfg.dt_min, 0.5 * state.dt))
                continue
            stop_reason = "state became non-finite"
            break

        if cfg.adapt:
            tail, new_energy, new_grad2 = _step_monitor(model, trial.field)
            scale = max(abs(energy), 1e-12)
            jump = abs(new_energy - energy) / scale
            if (tail > cfg.tail_max or jump > cfg.energy_jump_max) and (
                state.dt > cfg.dt_min
            ):
                state = replace(state, dt=max(cfg.dt_min, 0.5 * state.dt))
                continue
            accepted_dt = state.dt
            if (
                tail < cfg.tail_max / RELAX_FACTOR
                and jump < cfg.energy_jump_max / RELAX_FACTOR
            ):
                accepted_dt = min(cfg.dt0, 2.0 * state.dt)
            state = StepperState(trial.t, trial.field, accepted_dt, trial.steps)
            energy, grad2 = new_energy, new_grad2
            tail_hit = tail > cfg.tail_max
        else:
            state = StepperState(trial.t, trial.field, state.dt, trial.steps)
            tail_hit = False

        since_sample += 1
        due = since_sample >= sample_every
        if due or cfg.adapt:
            if not cfg.adapt:
                tail, energy, grad2 = _step_monitor(model, state.field)
            if due:
                series.append(
                    sample(state.field, model, state.t, lp_list=lp_list,
                           dt=state.dt)
                )
                since_sample = 0
            if grad2 >= grad2_cap:
                stop_reason = "gradient growth trigger"
                break
            if cfg.adapt and tail_hit and state.dt <= cfg.dt_min * (1 + 1e-9):
                stop_reason = "time step floor with active spectral tail"
                break

    if since_sample > 0 or len(series) == 1 and cfg.t_end > 0:
        series.append(
            sample(state.field, model, state.t, lp_list=lp_list, dt=state.dt)
        )
    try:
        verdict = detect_blowup(series, cfg)
    except ValueError:
        verdict = BlowupVerdict(RunStatus.COMPLETED, reason="short series")
    if stop_reason and verdict.status == RunStatus.COMPLETED:
        verdict = BlowupVerdict(
            RunStatus.RESOLUTION_EXCEEDED, reason=stop_reason
        )
    return series, verdict, state


def _fit_blowup_time(ts, grads):
    """Least-squares zero crossing of 1/grad over the last decade of growth.

    The reciprocal gradient is asymptotically linear in t under the
    C / (T - t) lower-bound shape, so its extrapolated root estimates T.
    """
    g_max = np.max(grads)
    mask = grads >= 0.1 * g_max
    if np.sum(mask) < 2:
        return None
    x = ts[mask]
    y = 1.0 / grads[mask]
    if x[-1] == x[0]:
        return None
    slope, intercept = np.polyfit(x, y, 1)
    if slope >= 0:
        return None
    t_hat = -intercept / slope
    if not math.isfinite(t_hat) or t_hat <= ts[-1]:
        return None
    return float(t_hat)


def detect_blowup(series, cfg: SolverConfig) -> BlowupVerdict:
    """Classify a diagnostic series per the blowup triggers.

    BlowupDetected when the gradient norm exceeded grad_blowup_factor times
    its initial value, or when dt hit dt_min while the spectral-tail trigger
    was active and the gradient showed real growth; the blowup time estimate
    comes from the reciprocal-gradient fit.  ResolutionExceeded when the
    tail trigger fired without usable gradient growth.
    """
    usable = [s for s in series if s.valid and math.isfinite(s.grad2)]
    if len(usable) < 4:
        raise ValueError("need at least 4 valid samples to classify a run")
    ts = np.array([s.t for s in usable])
    grads = np.sqrt(np.array([s.grad2 for s in usable]))
    tails = np.array([s.tail for s in usable])
    dts = np.array([s.dt for s in usable])
    g0 = grads[0] if grads[0] > 0 else max(np.min(grads[grads > 0], initial=1.0), 1e-300)
    growth = np.max(grads) / g0
    tail_active = tails > cfg.tail_max
    grad_trigger = growth >= cfg.grad_blowup_factor
    floor_trigger = bool(
        np.any(tail_active & (dts <= cfg.dt_min * (1 + 1e-9)))
    )
    if grad_trigger or (floor_trigger and growth >= GROWTH_FLOOR):
        t_hat = _fit_blowup_time(ts, grads)
        if t_hat is not None:
            reason = (
                "gradient norm grew by "
                f"{growth:.3g}x"
                if grad_trigger
                else "dt floor reached with active spectral tail"
            )
            return BlowupVerdict(RunStatus.BLOWUP_DETECTED, t_hat, reason)
        return BlowupVerdict(
            RunStatus.RESOLUTION_EXCEEDED,
            reason="blowup triggers fired but no usable reciprocal-gradient fit",
        )
    if bool(np.any(tail_active)):
        return BlowupVerdict(
            RunStatus.RESOLUTION_EXCEEDED,
            reason="spectral tail trigger fired without gradient growth",
        )
    return BlowupVerdict(RunStatus.COMPLETED)
