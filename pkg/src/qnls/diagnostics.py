"""Monitored functionals and the identities they satisfy.

Tracked per sample: mass M = int |u|^2, energy
E = 1/2 int [|grad u|^2 + |grad h(|u|^2)|^2 - G(|u|^2)], the variance
J = int |x|^2 |u|^2, the dilation momentum y = Im int conj(u) (x . grad u),
the virial functional Q with J'' = 4 Q, the conformal density theta and the
quantity P = int |(x - 2 i t grad) u|^2 + 4 t^2 (int |grad h|^2 - int G)
obeying P' = 4 t theta.  The exact relations J' = -4 y and y' = -Q become
residuals measured by centered differences on the sample grid.

All |x|^2-weighted identities silently break once mass reaches the torus
boundary; every consumer should honor the boundary-mass validity flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .grid import (
    Field,
    boundary_mass_fraction,
    tail_fraction_from_hat,
)
from .nonlinearity import (
    GrowthConstants,
    NonlinearityModel,
    blowup_growth_constants,
    watershed_exponent,
)

BOUNDARY_VALIDITY_LIMIT = 1e-6


@dataclass(frozen=True)
class DiagnosticSample:
    t: float
    mass: float = math.nan
    energy: float = math.nan
    grad2: float = math.nan
    gradh2: float = math.nan
    variance: float = math.nan
    y: float = math.nan
    q: float = math.nan
    theta: float = math.nan
    p: float = math.nan
    linf: float = math.nan
    tail: float = math.nan
    boundary_mass: float = math.nan
    dt: float = math.nan
    lp_norms: dict = field(default_factory=dict)
    valid: bool = True
    reason: str = ""

    @property
    def variance_valid(self) -> bool:
        return self.valid and self.boundary_mass <= BOUNDARY_VALIDITY_LIMIT


CSV_COLUMNS = (
    "t", "mass", "energy", "grad2", "gradh2", "variance", "y", "Q",
    "theta", "P", "linf", "tail", "boundary_mass", "dt",
)


def csv_row(s: DiagnosticSample, lp_list=()) -> list:
    row = [s.t, s.mass, s.energy, s.grad2, s.gradh2, s.variance, s.y, s.q,
           s.theta, s.p, s.linf, s.tail, s.boundary_mass, s.dt]
    for p in lp_list:
        row.append(s.lp_norms.get(float(p), math.nan))
    return row


def sample(
    f: Field,
    model: NonlinearityModel,
    t: float,
    lp_list: tuple = (),
    dt: float = math.nan,
) -> DiagnosticSample:
    """Evaluate every monitored functional at one time.

    The pointwise tables h'(rho), h''(rho) and the gradient density are
    computed once and shared between E, Q and theta; they dominate the cost.
    A model overflow yields an invalid sample carrying the reason instead of
    raising.
    """
    g = f.grid
    w = g.weight
    values = f.values
    density = values.real**2 + values.imag**2
    mass = float(np.sum(density) * w)
    variance = float(np.sum(g.radius_squared * density) * w)
    linf = float(np.sqrt(np.max(density)))
    bmass = boundary_mass_fraction(f)

    hat = np.fft.fftn(values)
    tail = tail_fraction_from_hat(g, hat)
    grads = [np.fft.ifftn(1j * k * hat) for k in g.wavenumbers]
    grad_density = np.zeros_like(density)
    for gaxis in grads:
        grad_density += gaxis.real**2 + gaxis.imag**2
    grad2 = float(np.sum(grad_density) * w)

    x_dot_grad = np.zeros_like(values)
    for x, gaxis in zip(g.coords, grads):
        x_dot_grad += x * gaxis
    y = float(np.sum((np.conj(values) * x_dot_grad).imag) * w)

    rho = density
    try:
        g_table = model.g(rho)
        f_table = model.f(rho)
        if model.is_trivial_h:
            gradh2 = 0.0
            hh_cross = 0.0
            theta_kin = 0.0
        else:
            hp = model.h_prime(rho)
            hpp = model.h_second(rho)
            h_table = model.h(rho)
            hhat = np.fft.fftn(h_table)
            gradh_sq = np.sum(
                g.k_squared * (hhat.real**2 + hhat.imag**2)
            ) * w / g.size
            gradh2 = float(gradh_sq)
            hh_cross = float(
                np.sum(hpp * hp * rho * rho * grad_density) * w
            )
            theta_kin = float(
                np.sum((2.0 * hpp * hp * rho + hp * hp) * rho * grad_density) * w
            )
    except OverflowError as exc:
        return DiagnosticSample(
            t=t, mass=mass, variance=variance, linf=linf,
            boundary_mass=bmass, tail=tail, dt=dt,
            valid=False, reason=str(exc),
        )

    pot = float(np.sum(g_table) * w)
    sf = float(np.sum(rho * f_table) * w)
    n = g.dim
    energy = 0.5 * (grad2 + gradh2 - pot)
    q = 2.0 * grad2 + (n + 2.0) * gradh2 + 8.0 * n * hh_cross - n * (sf - pot)
    theta = -4.0 * n * theta_kin + (n * sf - (n + 2.0) * pot)
    p = variance + 4.0 * t * y + 4.0 * t * t * (grad2 + gradh2 - pot)

    lp_norms = {}
    for expo in lp_list:
        expo = float(expo)
        lp_norms[expo] = float(np.sum(density ** (expo / 2.0)) * w)

    out = DiagnosticSample(
        t=t, mass=mass, energy=energy, grad2=grad2, gradh2=gradh2,
        variance=variance, y=y, q=q, theta=theta, p=p, linf=linf,
        tail=tail, boundary_mass=bmass, dt=dt, lp_norms=lp_norms,
    )
    core = (mass, energy, grad2, gradh2, variance, y, q, theta, p)
    if not all(math.isfinite(v) for v in core):
        return DiagnosticSample(
            t=t, mass=mass, variance=variance, linf=linf, boundary_mass=bmass,
            tail=tail, dt=dt, valid=False, reason="non-finite functional",
        )
    return out


def blowup_conformal_quantity(
    f: Field, model: NonlinearityModel, t: float, t_blowup: float
) -> float:
    """int |(x + 2 i (T - t) grad) u|^2 + 4 (T-t)^2 (int |grad h|^2 - int G).

    Expanded as J - 4 (T-t) y + 4 (T-t)^2 (grad2 + gradh2 - int G); requires
    T > t.
    """
    if not t_blowup > t:
        raise ValueError(f"need T > t, got T = {t_blowup}, t = {t}")
    s = sample(f, model, t)
    if not s.valid:
        raise ValueError(f"invalid sample: {s.reason}")
    dt = t_blowup - t
    # grad2 + gradh2 - int G is exactly twice the energy
    return s.variance - 4.0 * dt * s.y + 8.0 * dt * dt * s.energy


@dataclass(frozen=True)
class IdentityResiduals:
    r_mass: float
    r_energy: float
    r_variance: float  # max |J' + 4 y|
    r_momentum: float  # max |y' + Q|, doubles as the J'' = 4 Q check
    r_conformal: float  # max |P' - 4 t theta|
    max_abs_y: float
    max_abs_q: float
    max_abs_theta: float
    sample_spacing: float
    window_valid: bool
    flags: tuple = ()  # per-interior-sample variance validity


def identity_residuals(series) -> IdentityResiduals:
    """Centered-difference residuals of the conservation and virial laws.

    Needs at least 5 uniformly spaced valid samples; endpoint one-sided
    differences are excluded from the max norms.
    """
    usable = [s for s in series if s.valid]
    if len(usable) < 5:
        raise ValueError("need at least 5 valid samples")
    ts = np.array([s.t for s in usable])
    spacings = np.diff(ts)
    h = float(np.mean(spacings))
    if h <= 0 or np.max(np.abs(spacings - h)) > 1e-9 * max(abs(h), 1.0):
        raise ValueError("samples are not uniformly spaced")

    mass = np.array([s.mass for s in usable])
    energy = np.array([s.energy for s in usable])
    variance = np.array([s.variance for s in usable])
    y = np.array([s.y for s in usable])
    q = np.array([s.q for s in usable])
    p = np.array([s.p for s in usable])
    theta = np.array([s.theta for s in usable])

    r_mass = float(np.max(np.abs(mass - mass[0])) / abs(mass[0]))
    e_scale = max(abs(energy[0]), 1e-30)
    r_energy = float(np.max(np.abs(energy - energy[0])) / e_scale)

    def centered(series_vals):
        return (series_vals[2:] - series_vals[:-2]) / (2.0 * h)

    mid = slice(1, -1)
    r_var = float(np.max(np.abs(centered(variance) + 4.0 * y[mid])))
    r_mom = float(np.max(np.abs(centered(y) + q[mid])))
    r_conf = float(np.max(np.abs(centered(p) - 4.0 * ts[mid] * theta[mid])))

    flags = tuple(s.variance_valid for s in usable[1:-1])
    return IdentityResiduals(
        r_mass=r_mass,
        r_energy=r_energy,
        r_variance=r_var,
        r_momentum=r_mom,
        r_conformal=r_conf,
        max_abs_y=float(np.max(np.abs(y))),
        max_abs_q=float(np.max(np.abs(q))),
        max_abs_theta=float(np.max(np.abs(theta))),
        sample_spacing=h,
        window_valid=all(flags),
        flags=flags,
    )


@dataclass(frozen=True)
class BlowupTimeBound:
    """Upper bound T0 = d0^2 / (y(0) c(k, N)) on the blowup time, or the
    name of the hypothesis that failed."""

    t0: float | None
    c_kn: float | None = None
    constants: GrowthConstants | None = None
    failed: str = ""

    def __bool__(self):
        return self.t0 is not None


def blowup_time_upper_bound(
    s0: DiagnosticSample, model: NonlinearityModel, dim: int
) -> BlowupTimeBound:
    """Evaluate the blowup-time bound hypotheses on the initial sample.

    Requires certified growth constants with c_N above the watershed,
    y(0) > 0, finite initial variance d0^2, and the energy smallness
    condition matched to the sign of k + 1/2.  The rate constant is
    c(k, N) = max(N (c_N - 1) - 2, (2k + 1) N).
    """
    constants = blowup_growth_constants(model, dim)
    if constants is None:
        return BlowupTimeBound(None, failed="no certified growth constants")
    shed = watershed_exponent(model, dim)
    if not constants.c_n > shed + 1:
        return BlowupTimeBound(
            None, constants=constants,
            failed="c_N not above the watershed",
        )
    if not s0.valid or not math.isfinite(s0.variance):
        return BlowupTimeBound(None, constants=constants,
                               failed="initial variance not available")
    if not s0.y > 0:
        return BlowupTimeBound(None, constants=constants,
                               failed="y(0) must be positive")
    k, c_n, c_m = constants.k, constants.c_n, constants.c_m
    if k <= Fraction(-1, 2):
        energy_ok = 2.0 * (float(c_n) - 1.0) * s0.energy + c_m * s0.mass <= 0
    else:
        energy_ok = (
            2.0 * ((2.0 * float(k) + 1.0) * dim + 2.0) * s0.energy
            + c_m * s0.mass
            <= 0
        )
    if not energy_ok:
        return BlowupTimeBound(None, constants=constants,
                               failed="energy condition fails")
    c_kn = max(dim * (float(c_n) - 1.0) - 2.0, (2.0 * float(k) + 1.0) * dim)
    return BlowupTimeBound(
        t0=s0.variance / (s0.y * c_kn), c_kn=c_kn, constants=constants
    )
