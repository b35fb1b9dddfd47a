"""Stationary radial profiles, threshold levels, and dichotomy certificates.

Profiles solve  -Lap(w) - 2 w h'(w^2) Lap(h(w^2)) + omega w = F(w^2) w  on a
uniform radial grid with the regularity condition w'(0) = 0 and far-field
Dirichlet decay.  The solve is a preconditioned, renormalized gradient flow
of the discrete action  omega/2 ||w||^2 + E(w):  each step descends the
action, renormalizes the amplitude so the focusing potential integral holds
a fixed level, and a scalar outer iteration moves that level until the
stationary multiplier equals one.  Pinning the potential (rather than the
mass) keeps the descent well posed for supercritical focusing powers, where
the energy is unbounded below on mass spheres and a mass-renormalized flow
collapses to a spike.

The threshold level reported by `estimate_threshold_level` is the minimum of
omega/2 ||.||^2 + E over the dilation/amplitude family of the profile
restricted to the zero set of the virial functional Q: an upper bound for
the true infimum, tight when the profile has converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .diagnostics import sample as diag_sample
from .grid import Field
from .nonlinearity import AuditEntry, NonlinearityModel, threshold_exponent_window

SURFACE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

DECAY_LIMIT = 1e-8
RESIDUAL_TOL = 1e-6


class GroundStateError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class RadialConfig:
    r_max: float | None = None  # default 20 / sqrt(omega)
    nodes: int = 4096
    max_iterations: int = 200000
    tol: float = RESIDUAL_TOL
    multiplier_tol: float = 1e-8


@dataclass(frozen=True)
class RadialGrid:
    dim: int
    nodes: int
    r_max: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.nodes < 16:
            raise ValueError("need at least 16 radial nodes")
        dr = self.r_max / self.nodes
        j = np.arange(self.nodes)
        r = j * dr
        surface = SURFACE[self.dim]
        # exact cell integrals of r^(N-1); cell 0 is [0, dr/2]
        lo = np.maximum(r - 0.5 * dr, 0.0)
        hi = r + 0.5 * dr
        nu = surface * (hi**self.dim - lo**self.dim) / self.dim
        # edge weights at midpoints; edge j couples node j to node j+1,
        # the last edge reaches the Dirichlet boundary value 0 at r_max
        mid = r + 0.5 * dr
        mu = surface * mid ** (self.dim - 1) * dr
        object.__setattr__(self, "dr", dr)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "node_weights", nu)
        object.__setattr__(self, "edge_weights", mu)


@dataclass(frozen=True)
class RadialProfile:
    omega: float
    grid: RadialGrid
    values: np.ndarray
    residual: float

    @property
    def r(self):
        return self.grid.r

    @property
    def mass(self) -> float:
        return float(np.sum(self.grid.node_weights * self.values**2))

    def peak(self) -> float:
        return float(np.max(self.values))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("r,w\n")
            for r, w in zip(self.grid.r, self.values):
                fh.write(f"{r!r},{w!r}\n")


def _edge_diffs(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Forward differences across edges, final edge against the boundary 0."""
    out = np.empty_like(values)
    out[:-1] = values[1:] - values[:-1]
    out[-1] = -values[-1]
    return out


def discrete_action(model, omega, grid: RadialGrid, w: np.ndarray) -> float:
    """omega/2 ||w||^2 + E(w) on the radial grid."""
    nu, mu, dr = grid.node_weights, grid.edge_weights, grid.dr
    dw = _edge_diffs(grid, w) / dr
    dh = _edge_diffs(grid, model.h(w**2)) / dr
    quad = 0.5 * np.sum(mu * (dw**2 + dh**2))
    local = np.sum(nu * (0.5 * omega * w**2 - 0.5 * model.g(w**2)))
    return float(quad + local)


def action_gradient(model, omega, grid: RadialGrid, w: np.ndarray) -> np.ndarray:
    """Exact gradient of the discrete action in the weighted L^2 metric.

    Differentiating the same discrete action used by the flow keeps the
    descent direction consistent with finite differences of the action.
    """
    nu, mu, dr = grid.node_weights, grid.edge_weights, grid.dr
    s = w**2
    dw = _edge_diffs(grid, w) / dr
    dh = _edge_diffs(grid, model.h(s)) / dr
    flux_w = mu * dw / dr
    flux_h = mu * dh / dr
    grad = nu * (omega * w - model.f(s) * w)
    grad -= flux_w
    grad[1:] += flux_w[:-1]
    chain = 2.0 * w * model.h_prime(s)
    grad -= flux_h * chain
    grad[1:] += flux_h[:-1] * chain[1:]
    return grad / nu


def _linear_operator(omega, grid: RadialGrid):
    """Sparse (-Lap_r + omega), self-adjoint in the node-weight metric."""
    nu, mu, dr = grid.node_weights, grid.edge_weights, grid.dr
    m = grid.nodes
    main = omega + mu / (nu * dr**2)
    main[1:] += mu[:-1] / (nu[1:] * dr**2)
    lower = -mu[:-1] / (nu[1:] * dr**2)
    upper = -mu[:-1] / (nu[:-1] * dr**2)
    return diags([lower, main, upper], [-1, 0, 1], format="csc")


def _potential(model, grid, w):
    return float(np.sum(grid.node_weights * model.g(w**2)))


def _renormalize(model, grid, w, level):
    """Scale amplitude c so the focusing potential integral hits `level`."""
    def psi(c):
        return _potential(model, grid, c * w) - level

    c = 1.0
    val = psi(c)
    if val == 0.0:
        return w
    # bracket the root by doubling/halving
    lo, hi = c, c
    for _ in range(200):
        if val < 0:
            hi *= 2.0
            if psi(hi) > 0:
                lo = hi / 2.0
                break
        else:
            lo *= 0.5
            if psi(lo) < 0:
                hi = lo * 2.0
                break
    else:
        raise GroundStateError("amplitude renormalization failed to bracket")
    for _ in range(200):
        c = math.sqrt(lo * hi)
        v = psi(c)
        if abs(v) <= 1e-13 * max(level, 1.0):
            break
        if v < 0:
            lo = c
        else:
            hi = c
    return c * w


def _constrained_descent(model, omega, grid, w, level, lin_solve, nu,
                         max_iters, gtol):
    """Descend the action on the fixed-potential surface.

    Returns (w, multiplier, iterations).  The multiplier lam satisfies
    grad_quad = lam F(w^2) w at stationarity; lam = 1 means the full
    stationary equation holds.
    """
    w = _renormalize(model, grid, w, level)
    phi = discrete_action(model, omega, grid, w)
    lam = math.inf
    scale0 = math.sqrt(float(np.sum(nu * (omega * w) ** 2)))
    for it in range(max_iters):
        g = action_gradient(model, omega, grid, w)
        c = 2.0 * model.f(w**2) * w
        cc = float(np.sum(nu * c * c))
        if cc <= 0:
            raise GroundStateError("flow collapsed to the zero profile")
        beta = float(np.sum(nu * g * c)) / cc
        lam = 1.0 + 2.0 * beta
        g_t = g - beta * c
        gnorm = math.sqrt(float(np.sum(nu * g_t * g_t)))
        if gnorm <= gtol * max(scale0, 1e-300):
            return w, lam, it
        d = lin_solve(g_t)
        eta = 1.0
        for _ in range(40):
            trial = _renormalize(model, grid, w - eta * d, level)
            phi_trial = discrete_action(model, omega, grid, trial)
            if phi_trial <= phi + 1e-14 * abs(phi):
                break
            eta *= 0.5
        else:
            return w, lam, it  # no descent left at this level
        w, phi = trial, phi_trial
        scale0 = math.sqrt(float(np.sum(nu * (omega * w) ** 2)))
    return w, lam, max_iters


def solve_stationary(
    model: NonlinearityModel,
    omega: float,
    cfg: RadialConfig = RadialConfig(),
    dim: int = 1,
) -> RadialProfile:
    """Ground-state profile at the given omega.

    Raises GroundStateError when the model has no focusing part (the flow
    collapses to zero) or when the residual tolerance is not reached.
    """
    if model.has_defocusing_part:
        raise ValueError("stationary solve requires a purely focusing model")
    if not omega > 0:
        raise ValueError("omega must be positive")
    r_max = cfg.r_max if cfg.r_max is not None else 20.0 / math.sqrt(omega)
    grid = RadialGrid(dim, cfg.nodes, r_max)
    nu = grid.node_weights

    w = 1.5 * np.exp(-0.25 * omega * grid.r**2)
    level = _potential(model, grid, w)
    if not level > 0:
        raise GroundStateError(
            "focusing potential vanishes: flow collapses to the zero profile"
        )

    lu = splu(_linear_operator(omega, grid))
    lin_solve = lu.solve

    inner_budget = max(200, cfg.max_iterations // 100)
    history = []  # (log level, log lam)
    log_level = math.log(level)
    lam = math.inf
    for outer in range(60):
        w, lam, _ = _constrained_descent(
            model, omega, grid, w, math.exp(log_level), lin_solve, nu,
            inner_budget, gtol=cfg.tol * 0.1,
        )
        if not math.isfinite(lam) or lam <= 0:
            raise GroundStateError(
                f"stationary multiplier became invalid ({lam})"
            )
        if abs(lam - 1.0) <= cfg.multiplier_tol:
            break
        history.append((log_level, math.log(lam)))
        if len(history) >= 2 and history[-1][1] != history[-2][1]:
            (x0, y0), (x1, y1) = history[-2], history[-1]
            step = -y1 * (x1 - x0) / (y1 - y0)
            step = max(-5.0, min(5.0, step))
            log_level = x1 + step
        else:
            # lam decreases with the level; push in the right direction
            log_level += 1.5 * math.log(lam)
    else:
        raise GroundStateError(
            f"multiplier iteration stalled at lam = {lam}", residual=abs(lam - 1)
        )

    g = action_gradient(model, omega, grid, w)
    res = math.sqrt(float(np.sum(nu * g * g)))
    scale = math.sqrt(float(np.sum(nu * (omega * w) ** 2)))
    rel = res / max(scale, 1e-300)
    if rel > cfg.tol:
        raise GroundStateError(
            f"stationary residual {rel:.3e} above tolerance {cfg.tol:.1e}",
            residual=rel,
        )
    peak = float(np.max(np.abs(w)))
    if peak <= 0 or np.min(w) < -1e-6 * peak:
        raise GroundStateError("profile failed positivity")
    w = np.maximum(w, 0.0)
    if w[-1] > DECAY_LIMIT * peak:
        raise GroundStateError(
            f"profile has not decayed at r_max ({w[-1] / peak:.2e} of peak); "
            "increase r_max"
        )
    return RadialProfile(omega=omega, grid=grid, values=w, residual=rel)


# ---------------------------------------------------------------------------
# threshold level and verdicts
# ---------------------------------------------------------------------------


def _node_gradient(grid: RadialGrid, w: np.ndarray) -> np.ndarray:
    out = np.gradient(w, grid.dr)
    out[0] = 0.0  # regularity at the origin
    return out


def _scaling_tables(model, profile: RadialProfile, c: float):
    grid = profile.grid
    nu, mu, dr = grid.node_weights, grid.edge_weights, grid.dr
    w = c * profile.values
    s = w**2
    dw = _edge_diffs(grid, w) / dr
    k_w = float(np.sum(mu * dw**2))
    dh = _edge_diffs(grid, model.h(s)) / dr
    k_h = float(np.sum(mu * dh**2))
    wprime = c * _node_gradient(grid, profile.values)
    k_hh = float(np.sum(nu * model.h_second(s) * model.h_prime(s) * s * s
                        * wprime**2))
    pot_f = float(np.sum(nu * s * model.f(s)))
    pot_g = float(np.sum(nu * model.g(s)))
    mass = float(np.sum(nu * s))
    return k_w, k_h, k_hh, pot_f, pot_g, mass


def virial_on_dilation(model, profile, c: float, lam: float, dim: int) -> float:
    """Q along v(x) = c w(x / lam)."""
    k_w, k_h, k_hh, pot_f, pot_g, _ = _scaling_tables(model, profile, c)
    a = 2.0 * k_w + (dim + 2.0) * k_h + 8.0 * dim * k_hh
    b = dim * (pot_f - pot_g)
    return lam ** (dim - 2) * a - lam**dim * b


def _zero_virial_dilation(a: float, b: float) -> float:
    """Bisection for the lam with lam^(N-2) a = lam^N b."""
    if not (a > 0 and b > 0):
        raise GroundStateError(
            "virial functional has no sign change along the dilation family"
        )
    lo, hi = 1e-8, 1e8

    def q(lam, n_minus=a, n_plus=b):
        return n_minus - lam * lam * n_plus  # sign of Q / lam^(N-2)

    if q(lo) <= 0 or q(hi) >= 0:
        raise GroundStateError(
            "virial functional has no sign change along the dilation family"
        )
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if q(mid) > 0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def estimate_threshold_level(
    model: NonlinearityModel,
    omega: float,
    profile: RadialProfile,
    dim: int = 1,
    include_amplitude: bool = True,
) -> float:
    """Minimum of omega/2 ||.||^2 + E over the rescaling family on Q = 0.

    For each amplitude factor c the dilation lam solving Q = 0 is located by
    bisection, tracing a one-parameter curve of zero-virial states through
    the profile at c = 1 (where the value is always critical, the profile
    being stationary).  The reported level is the interior minimum of that
    curve when one exists; for families whose curve is unbounded below (the
    threshold machinery does not apply there and the amplitude minimum runs
    off the search boundary) the estimate degenerates to the profile's own
    critical level.  Always an upper bound for the true infimum over the
    zero-virial set; tight when the profile is the minimizer.
    """
    def value_at(c: float) -> float:
        k_w, k_h, k_hh, pot_f, pot_g, mass = _scaling_tables(model, profile, c)
        a = 2.0 * k_w + (dim + 2.0) * k_h + 8.0 * dim * k_hh
        b = dim * (pot_f - pot_g)
        lam = _zero_virial_dilation(a, b)
        return (
            0.5 * omega * lam**dim * mass
            + 0.5 * (lam ** (dim - 2) * (k_w + k_h) - lam**dim * pot_g)
        )

    base = value_at(1.0)
    if not include_amplitude:
        return base
    cs = np.logspace(math.log10(0.25), math.log10(4.0), 33)
    vals = []
    for c in cs:
        try:
            vals.append(value_at(float(c)))
        except GroundStateError:
            vals.append(math.inf)
    i = int(np.argmin(vals))
    if i in (0, len(cs) - 1):
        return base  # family value unbounded below along the amplitude axis
    # golden-section refinement on the bracketing interval
    lo, hi = cs[i - 1], cs[i + 1]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c1 = b - invphi * (b - a)
    c2 = a + invphi * (b - a)
    f1, f2 = value_at(math.exp(c1)), value_at(math.exp(c2))
    for _ in range(60):
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - invphi * (b - a)
            f1 = value_at(math.exp(c1))
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + invphi * (b - a)
            f2 = value_at(math.exp(c2))
    return float(min(f1, f2, vals[i], base))


@dataclass(frozen=True)
class ThresholdCertificate:
    omega: float
    threshold_level: float
    value: float  # omega/2 M(u0) + E(u0)
    q0: float
    y0: float
    verdict: str  # Global | Blowup | Inconclusive
    audit: tuple = ()


def threshold_verdict(
    u0: Field,
    model: NonlinearityModel,
    omega: float,
    threshold_level: float,
) -> ThresholdCertificate:
    """Dichotomy certificate for initial data below the threshold level.

    Global needs Q(u0) > 0; Blowup needs Q(u0) < 0 together with
    y(0) = Im int conj(u0) (x . grad u0) >= 0 (the nonstrict form; the audit
    flags data where the strict inequality of the blowup machinery fails
    only by roundoff).  Data at or above the level is Inconclusive.
    """
    if not threshold_level > 0:
        raise ValueError("threshold level must be positive")
    s = diag_sample(u0, model, 0.0)
    value = 0.5 * omega * s.mass + s.energy
    audit = []
    below = value < threshold_level
    audit.append(
        AuditEntry(
            "below_threshold_level",
            below,
            {"value": value, "threshold_level": threshold_level,
             "note": "conditional on the restricted-family level estimate"},
        )
    )
    window = threshold_exponent_window(model, u0.grid.dim)
    in_window = None
    if window is not None and model.f1_terms:
        q = model.f1_terms[0][1]
        in_window = window[0] < q < window[1]
    audit.append(
        AuditEntry(
            "threshold_exponent_window",
            bool(in_window),
            {"window": None if window is None else
             (float(window[0]), float(window[1]))},
        )
    )
    audit.append(
        AuditEntry(
            "finite_variance_on_box",
            s.variance_valid,
            {"boundary_mass": s.boundary_mass},
        )
    )
    y_scale = math.sqrt(max(s.variance, 0.0) * max(s.grad2, 0.0))
    y_ok = s.y >= -1e-10 * max(y_scale, 1e-300)
    if below and s.q > 0:
        verdict = "Global"
    elif below and s.q < 0 and y_ok:
        verdict = "Blowup"
        audit.append(
            AuditEntry(
                "momentum_sign",
                True,
                {"y0": s.y,
                 "note": "nonstrict y(0) >= 0 accepted; strict positivity "
                         "is the stronger blowup hypothesis"},
            )
        )
    else:
        verdict = "Inconclusive"
    return ThresholdCertificate(
        omega=omega,
        threshold_level=threshold_level,
        value=value,
        q0=s.q,
        y0=s.y,
        verdict=verdict,
        audit=tuple(audit),
    )
