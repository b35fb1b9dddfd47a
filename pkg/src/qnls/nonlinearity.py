"""Symbolic description of the nonlinearities and regime classification.

The equation under study is

    i u_t = Laplace(u) + 2 u h'(|u|^2) Laplace(h(|u|^2)) + F(|u|^2) u

with h >= 0 and F = F1 - F2 split into a focusing part F1 and a defocusing
part F2, both nonnegative on s >= 0.  This module holds the closed-form
families for h and F, evaluates them (with exact antiderivatives normalized
so G(0) = 0), and mechanically checks the growth conditions that decide
between guaranteed global existence, blowup capability, and the critical
watershed in between.  All exponent arithmetic in the classifier is done in
exact rational arithmetic so that the worked constants come out as the
fractions they are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

# exp(x) overflows double precision just above x = 709
EXP_OVERFLOW = 700.0

H_ZERO = "zero"
H_POWER_SUM = "power_sum"
H_EXPONENTIAL = "exponential"
H_RATIONAL = "rational"

_H_KINDS = (H_ZERO, H_POWER_SUM, H_EXPONENTIAL, H_RATIONAL)


class Verdict(str, Enum):
    GLOBAL_ALL_DATA = "GlobalAllData"
    BLOWUP_CAPABLE = "BlowupCapable"
    CRITICAL = "Critical"
    GLOBAL_SMALL_DATA = "GlobalSmallData"
    UNKNOWN = "Unknown"


def _frac(x) -> Fraction:
    """Exact rational value of a coefficient or exponent."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x)  # exact binary expansion of the float


def _check_terms(terms, name, positive_exponent=True):
    out = []
    for term in terms:
        if len(term) != 2:
            raise ValueError(f"{name} terms must be (coefficient, exponent) pairs")
        coeff, expo = float(term[0]), float(term[1])
        if not (math.isfinite(coeff) and math.isfinite(expo)):
            raise ValueError(f"{name} term ({coeff}, {expo}) is not finite")
        if coeff <= 0:
            raise ValueError(f"{name} coefficient must be positive, got {coeff}")
        if positive_exponent and expo <= 0:
            raise ValueError(f"{name} exponent must be positive, got {expo}")
        out.append((coeff, expo))
    return tuple(out)


@dataclass(frozen=True)
class NonlinearityValues:
    """Pointwise values of h, F and their derivatives/antiderivatives."""

    h: float
    h_prime: float
    h_second: float
    f: float
    f1: float
    f2: float
    g: float
    g1: float
    g2: float


@dataclass(frozen=True)
class NonlinearityModel:
    """Closed-form model for h and F = F1 - F2.

    h families:
      zero          h(s) = 0, h_params ignored
      power_sum     h(s) = sum a_l s^{p_l}, h_params = ((a, p), ...)
      exponential   h(s) = a exp(k s),      h_params = (a, k)
      rational      h(s) = A / (1 + s^l),   h_params = (A, l) with 0 < l < 1

    f1_terms / f2_terms are ((coeff, exponent), ...) power sums with positive
    coefficients; f_exp_terms are (sign, a, k) exponential contributions
    sign * a * exp(k s) with a > 0, k > 0.
    """

    h_kind: str = H_ZERO
    h_params: tuple = ()
    f1_terms: tuple = ()
    f2_terms: tuple = ()
    f_exp_terms: tuple = ()

    def __post_init__(self):
        if self.h_kind not in _H_KINDS:
            raise ValueError(f"unknown h kind {self.h_kind!r}")
        if self.h_kind == H_POWER_SUM:
            object.__setattr__(self, "h_params", _check_terms(self.h_params, "h"))
        elif self.h_kind == H_EXPONENTIAL:
            a, k = float(self.h_params[0]), float(self.h_params[1])
            if a <= 0 or k <= 0:
                raise ValueError("exponential h needs a > 0 and k > 0")
            object.__setattr__(self, "h_params", (a, k))
        elif self.h_kind == H_RATIONAL:
            a, l = float(self.h_params[0]), float(self.h_params[1])
            if a <= 0 or not 0 < l < 1:
                raise ValueError("rational h needs A > 0 and 0 < l < 1")
            object.__setattr__(self, "h_params", (a, l))
        else:
            object.__setattr__(self, "h_params", ())
        object.__setattr__(self, "f1_terms", _check_terms(self.f1_terms, "f1"))
        object.__setattr__(self, "f2_terms", _check_terms(self.f2_terms, "f2"))
        exp_terms = []
        for term in self.f_exp_terms:
            sign, a, k = int(term[0]), float(term[1]), float(term[2])
            if sign not in (-1, 1):
                raise ValueError("exponential F term sign must be +1 or -1")
            if a <= 0 or k <= 0 or not (math.isfinite(a) and math.isfinite(k)):
                raise ValueError("exponential F term needs finite a > 0, k > 0")
            exp_terms.append((sign, a, k))
        object.__setattr__(self, "f_exp_terms", tuple(exp_terms))

    # -- h family ---------------------------------------------------------

    @property
    def is_trivial_h(self) -> bool:
        return self.h_kind == H_ZERO

    def _guard_exp(self, s, k, where):
        smax = np.max(s) if np.ndim(s) else s
        if k * smax > EXP_OVERFLOW:
            raise OverflowError(
                f"{where} term exp({k}*s) overflows at s = {smax}"
            )

    def h(self, s):
        s = np.asarray(s, dtype=float)
        if self.h_kind == H_ZERO:
            return np.zeros_like(s)
        if self.h_kind == H_POWER_SUM:
            out = np.zeros_like(s)
            for a, p in self.h_params:
                out += a * np.power(s, p)
            return out
        if self.h_kind == H_EXPONENTIAL:
            a, k = self.h_params
            self._guard_exp(s, k, "h exponential")
            return a * np.exp(k * s)
        a, l = self.h_params
        return a / (1.0 + np.power(s, l))

    def h_prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.h_kind == H_ZERO:
            return np.zeros_like(s)
        if self.h_kind == H_POWER_SUM:
            out = np.zeros_like(s)
            with np.errstate(divide="ignore"):
                for a, p in self.h_params:
                    out += a * p * np.power(s, p - 1.0)
            return out
        if self.h_kind == H_EXPONENTIAL:
            a, k = self.h_params
            self._guard_exp(s, k, "h exponential")
            return a * k * np.exp(k * s)
        a, l = self.h_params
        with np.errstate(divide="ignore"):
            sl = np.power(s, l)
            return -a * l * np.power(s, l - 1.0) / (1.0 + sl) ** 2

    def h_second(self, s):
        s = np.asarray(s, dtype=float)
        if self.h_kind == H_ZERO:
            return np.zeros_like(s)
        if self.h_kind == H_POWER_SUM:
            out = np.zeros_like(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                for a, p in self.h_params:
                    if p == 1.0:
                        continue
                    out += a * p * (p - 1.0) * np.power(s, p - 2.0)
            return out
        if self.h_kind == H_EXPONENTIAL:
            a, k = self.h_params
            self._guard_exp(s, k, "h exponential")
            return a * k * k * np.exp(k * s)
        a, l = self.h_params
        with np.errstate(divide="ignore", invalid="ignore"):
            sl = np.power(s, l)
            return (
                -a * l * (l - 1.0) * np.power(s, l - 2.0) / (1.0 + sl) ** 2
                + 2.0 * a * l * l * np.power(s, 2.0 * l - 2.0) / (1.0 + sl) ** 3
            )

    # -- F and its antiderivative ------------------------------------------

    def f1(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for b, q in self.f1_terms:
            out += b * np.power(s, q)
        for sign, a, k in self.f_exp_terms:
            if sign > 0:
                self._guard_exp(s, k, "f1 exponential")
                out += a * np.exp(k * s)
        return out

    def f2(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, r in self.f2_terms:
            out += c * np.power(s, r)
        for sign, a, k in self.f_exp_terms:
            if sign < 0:
                self._guard_exp(s, k, "f2 exponential")
                out += a * np.exp(k * s)
        return out

    def f(self, s):
        return self.f1(s) - self.f2(s)

    def g1(self, s):
        # antiderivative of F1 with G1(0) = 0
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for b, q in self.f1_terms:
            out += b / (q + 1.0) * np.power(s, q + 1.0)
        for sign, a, k in self.f_exp_terms:
            if sign > 0:
                self._guard_exp(s, k, "f1 exponential")
                out += a / k * (np.exp(k * s) - 1.0)
        return out

    def g2(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, r in self.f2_terms:
            out += c / (r + 1.0) * np.power(s, r + 1.0)
        for sign, a, k in self.f_exp_terms:
            if sign < 0:
                self._guard_exp(s, k, "f2 exponential")
                out += a / k * (np.exp(k * s) - 1.0)
        return out

    def g(self, s):
        return self.g1(s) - self.g2(s)

    def evaluate(self, s: float) -> NonlinearityValues:
        """All nine pointwise values at a single s >= 0."""
        if not math.isfinite(s) or s < 0:
            raise ValueError(f"s must be finite and nonnegative, got {s}")
        return NonlinearityValues(
            h=float(self.h(s)),
            h_prime=float(self.h_prime(s)),
            h_second=float(self.h_second(s)),
            f=float(self.f(s)),
            f1=float(self.f1(s)),
            f2=float(self.f2(s)),
            g=float(self.g(s)),
            g1=float(self.g1(s)),
            g2=float(self.g2(s)),
        )

    # -- structural helpers --------------------------------------------------

    @property
    def has_focusing_part(self) -> bool:
        return bool(self.f1_terms) or any(sg > 0 for sg, _, _ in self.f_exp_terms)

    @property
    def has_defocusing_part(self) -> bool:
        return bool(self.f2_terms) or any(sg < 0 for sg, _, _ in self.f_exp_terms)

    @property
    def is_power_family(self) -> bool:
        """True when h and F are pure power sums (or zero)."""
        return self.h_kind in (H_ZERO, H_POWER_SUM) and not self.f_exp_terms


# ---------------------------------------------------------------------------
# Growth constants and classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthConstants:
    """The constants (k, c_N, c_M) certifying s h'' <= k h' and
    c_N G <= s F + c_M s.  Exact values are Fractions; a sampled c_M is a
    float carrying `c_m_sampled = True`."""

    k: Fraction
    c_n: Fraction
    c_m: float
    c_m_sampled: bool = False
    note: str = ""


@dataclass(frozen=True)
class AuditEntry:
    condition: str
    satisfied: bool
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RegimeReport:
    verdict: Verdict
    k: float | None = None
    c_n: float | None = None
    c_m: float | None = None
    watershed: float | None = None
    interpolation_witnesses: tuple | None = None  # (theta1, theta2, q1, q2, slack)
    threshold_window: tuple | None = None
    sobolev_constant: float | None = None
    audit: tuple = ()

    def find(self, condition: str) -> AuditEntry | None:
        for entry in self.audit:
            if entry.condition == condition:
                return entry
        return None


_SAMPLE_S = np.concatenate(
    [np.zeros(1), np.logspace(-8, 6, 1400)]
)


def quasilinear_growth_exponent(model: NonlinearityModel) -> Fraction | None:
    """Smallest k with s h''(s) <= k h'(s) (sign-adjusted when h' <= 0).

    None when no finite k exists, e.g. exponential h where s h''/h' = s
    is unbounded.
    """
    if model.h_kind == H_ZERO:
        return Fraction(-1, 2)
    if model.h_kind == H_POWER_SUM:
        return max(_frac(p) for _, p in model.h_params) - 1
    if model.h_kind == H_RATIONAL:
        return _frac(model.h_params[1]) - 1
    return None


def _effective_h_power(model: NonlinearityModel) -> Fraction:
    """Exponent p governing the large-s growth of s^(1/2) + h(s).

    Bounded h (zero or rational) behaves like the borderline p = 1/2 where
    the Laplacian term leads.
    """
    if model.h_kind == H_POWER_SUM:
        return max(Fraction(1, 2), max(_frac(p) for _, p in model.h_params))
    return Fraction(1, 2)


def watershed_exponent(model: NonlinearityModel, dim: int) -> Fraction | None:
    """Focusing-exponent boundary max{2/N, 2(k+1) + 2/N} - 1."""
    k = quasilinear_growth_exponent(model)
    if k is None:
        return None
    two_n = Fraction(2, dim)
    return max(two_n, 2 * k + 1 + two_n)


def _sampled_c_m(model: NonlinearityModel, c_n: float) -> float | None:
    """Smallest c_M >= 0 with c_N G(s) <= s F(s) + c_M s on a sampled grid.

    None when the deficit grows superlinearly (no finite c_M works).
    """
    s = _SAMPLE_S[1:]
    deficit = (c_n * model.g(s) - s * model.f(s)) / s
    c_m = float(max(0.0, np.max(deficit)))
    # superlinear deficit keeps growing across the top decades of the grid
    tail_hi, tail_mid = deficit[-1], deficit[-200]
    if tail_hi > 1e-8 and tail_hi > 10.0 * abs(tail_mid):
        return None
    return c_m


def blowup_growth_constants(
    model: NonlinearityModel, dim: int | None = None
) -> GrowthConstants | None:
    """Constants (k, c_N, c_M) for the finite-time blowup criterion.

    Single focusing power: c_N = q + 1 and c_M = 0, exact.  Focusing power
    sums: c_N = q_max + 1 - eps with eps = min(1/100, half the margin above
    the watershed when dim is given), and c_M the smallest sampled constant.
    Mixed F needs the top exponent on the focusing side; the inequality is
    then verified on a sampled grid.  None when no finite k exists or the
    family is unsupported.
    """
    k = quasilinear_growth_exponent(model)
    if k is None:
        return None
    if any(sg > 0 for sg, _, _ in model.f_exp_terms):
        return None  # no polynomial growth bound for exponential focusing
    if not model.f1_terms:
        return None  # nothing to drive blowup
    q_top = max(_frac(q) for _, q in model.f1_terms)
    if model.f2_terms or any(sg < 0 for sg, _, _ in model.f_exp_terms):
        r_top = max(
            [_frac(r) for _, r in model.f2_terms] or [Fraction(0)]
        )
        if model.f_exp_terms or r_top >= q_top:
            return None  # defocusing part dominates or unsupported
        c_n = q_top + 1
        if len(model.f1_terms) > 1:
            c_n = c_n - _epsilon_margin(model, dim, q_top)
        c_m = _sampled_c_m(model, float(c_n))
        if c_m is None:
            return None
        return GrowthConstants(k, c_n, c_m, c_m_sampled=True,
                               note="mixed F, c_M sampled")
    if len(model.f1_terms) == 1:
        return GrowthConstants(k, q_top + 1, 0.0)
    eps = _epsilon_margin(model, dim, q_top)
    c_n = q_top + 1 - eps
    c_m = _sampled_c_m(model, float(c_n))
    if c_m is None:
        return None
    return GrowthConstants(k, c_n, float(c_m), c_m_sampled=True,
                           note="power sum, c_M sampled")


def _epsilon_margin(model, dim, q_top) -> Fraction:
    eps = Fraction(1, 100)
    if dim is not None:
        shed = watershed_exponent(model, dim)
        if shed is not None and q_top > shed:
            eps = min(eps, (q_top - shed) / 2)
    return eps


def threshold_exponent_window(
    model: NonlinearityModel, dim: int
) -> tuple[Fraction, Fraction | float] | None:
    """Open interval of focusing exponents admitting the sharp threshold.

    Requires h = a s^p with p >= 1/2 as a single power (h = 0 counts as the
    borderline p = 1/2) and a single focusing power.  The upper endpoint is
    p * 2N/(N-2) - 1 for N = 3 and +inf below that, where the Sobolev
    endpoint degenerates.
    """
    if model.f2_terms or model.f_exp_terms or len(model.f1_terms) != 1:
        return None
    if model.h_kind == H_ZERO:
        p = Fraction(1, 2)
    elif model.h_kind == H_POWER_SUM and len(model.h_params) == 1:
        p = _frac(model.h_params[0][1])
        if p < Fraction(1, 2):
            return None
    else:
        return None
    lower = 2 * p - 1 + Fraction(2, dim)
    if dim <= 2:
        return (lower, math.inf)
    two_star = Fraction(2 * dim, dim - 2)
    return (lower, p * two_star - 1)


def sobolev_best_constant(dim: int) -> float | None:
    """Best constant in int w^{2*} <= C_s (int |grad w|^2)^{2*/2}, N = 3 only.

    From the sharp constant of ||w||_{2*} <= C ||grad w||_2 on R^N,
    C = (N (N-2) pi)^{-1/2} (Gamma(N) / Gamma(N/2))^{1/N}, raised to the
    power 2*.  Numerically C_s(3) = 0.0060864...
    """
    if dim != 3:
        return None
    n = dim
    c = (math.gamma(n) / math.gamma(n / 2)) ** (1.0 / n) / math.sqrt(
        n * (n - 2) * math.pi
    )
    return c ** (2.0 * n / (n - 2))


def _interpolation_witnesses(model, dim, q_low, q_top):
    """Exponent witnesses (theta1, theta2, q1, q2) and the slack of the
    Sobolev exponent inequality, exact rationals, N = 3 only."""
    if dim != 3:
        return None
    two_star = Fraction(2 * dim, dim - 2)
    p = _effective_h_power(model)
    theta1 = 1 / (q_low + 1)
    q1 = two_star + 1 / (q_low + 1)
    theta2 = 1 / (q_top + 1)
    if p > Fraction(1, 2):
        q2 = p * two_star / (q_top + 1)
    else:
        q2 = two_star / (2 * (q_top + 1))
    slack = (two_star - 2) * theta2 + 2 * q2 - two_star
    return (theta1, theta2, q1, q2, slack)


def _smallness_product(model, dim, mass):
    """Initial-mass smallness product at the equality endpoint, N = 3.

    Closed form for a single focusing power b s^q against h = a s^p:
    with B = b/(q+1), the large-s witnesses are c2 = B^{1/(q+1)} and
    eps2 = B^{q2} / hcoef^{2*}, and the product is
    2^{(2*-1)/tau2'} c2^{1/tau2} (eps2 C_s)^{1/tau2'} mass^{1/tau2}.
    """
    if dim != 3 or len(model.f1_terms) != 1:
        return None
    b, q = model.f1_terms[0]
    qf = _frac(q)
    wit = _interpolation_witnesses(model, dim, qf, qf)
    if wit is None:
        return None
    _, theta2, _, q2, _ = wit
    two_star = Fraction(2 * dim, dim - 2)
    inv_tau2 = (q2 - 1) / (q2 - theta2)
    inv_tau2p = (1 - theta2) / (q2 - theta2)
    big_b = b / (float(qf) + 1.0)
    p = _effective_h_power(model)
    if model.h_kind == H_POWER_SUM:
        a = model.h_params[0][0] if len(model.h_params) == 1 else sum(
            a for a, _ in model.h_params
        )
        hcoef = 1.0 + a if p == Fraction(1, 2) else a
    else:
        hcoef = 1.0
    eps2 = big_b ** float(q2) / hcoef ** float(two_star)
    c2 = big_b ** float(theta2)
    cs = sobolev_best_constant(dim)
    return (
        2.0 ** (float(two_star - 1) * float(inv_tau2p))
        * c2 ** float(inv_tau2)
        * (eps2 * cs) ** float(inv_tau2p)
        * mass ** float(inv_tau2)
    )


def _dominated_focusing(model: NonlinearityModel) -> tuple[bool, dict, bool]:
    """Check |G1(s)| <= c s + G2(s): the defocusing antiderivative dominates.

    Closed form for pure power sums and for a single exponential pair;
    otherwise a sampled check (flagged).  Returns (holds, witness, sampled).
    """
    if not model.has_focusing_part or not model.has_defocusing_part:
        return False, {}, False
    pos_exp = [t for t in model.f_exp_terms if t[0] > 0]
    neg_exp = [t for t in model.f_exp_terms if t[0] < 0]
    if model.is_power_family:
        q_top = max(_frac(q) for _, q in model.f1_terms)
        r_top = max(_frac(r) for _, r in model.f2_terms)
        if r_top > q_top:
            return True, {"g1_top": str(q_top + 1), "g2_top": str(r_top + 1)}, False
        if r_top == q_top:
            b = sum(b for b, q in model.f1_terms if _frac(q) == q_top)
            c = sum(c for c, r in model.f2_terms if _frac(r) == r_top)
            return b <= c, {"top_coeff_f1": b, "top_coeff_f2": c}, False
        return False, {"g1_top": str(q_top + 1), "g2_top": str(r_top + 1)}, False
    if len(pos_exp) == 1 and len(neg_exp) == 1 and not model.f1_terms:
        _, a1, k1 = pos_exp[0]
        _, a2, k2 = neg_exp[0]
        ok = k2 > k1 and a1 / k1 <= a2 / k2
        return ok, {"a1/k1": a1 / k1, "a2/k2": a2 / k2, "k1": k1, "k2": k2}, False
    # sampled fallback on a bounded grid
    s = _SAMPLE_S[1:]
    try:
        margin = (np.abs(model.g1(s)) - model.g2(s)) / s
    except OverflowError:
        return False, {"note": "overflow during sampled check"}, True
    c = float(np.max(margin))
    grows = margin[-1] > 1e-8 and margin[-1] > 10.0 * abs(margin[-200])
    return (not grows) and math.isfinite(c), {"sampled_c": c}, True


def classify_regime(
    model: NonlinearityModel,
    dim: int,
    mass_of_u0: float | None = None,
    cs_override: float | None = None,
) -> RegimeReport:
    """Decide which side of the global-existence/blowup dichotomy holds.

    The verdict is GlobalAllData when the defocusing case applies, when the
    focusing exponents sit strictly below the watershed, or when the
    defocusing antiderivative dominates the focusing one.  BlowupCapable
    needs certified growth constants with c_N strictly above the watershed;
    equality is Critical, upgraded to GlobalSmallData at N = 3 when the
    initial-mass smallness product is below one.  Anything else is Unknown,
    with the audit naming the failed conditions.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    audit: list[AuditEntry] = []
    cs = cs_override if cs_override is not None else sobolev_best_constant(dim)
    k = quasilinear_growth_exponent(model)
    shed = watershed_exponent(model, dim)
    window = threshold_exponent_window(model, dim)

    def report(verdict, constants=None, witnesses=None):
        return RegimeReport(
            verdict=verdict,
            k=None if k is None else float(k),
            c_n=None if constants is None else float(constants.c_n),
            c_m=None if constants is None else float(constants.c_m),
            watershed=None if shed is None else float(shed),
            interpolation_witnesses=witnesses,
            threshold_window=None
            if window is None
            else (float(window[0]), float(window[1])),
            sobolev_constant=cs,
            audit=tuple(audit),
        )

    # Case 1: no focusing part at all, F = -F2 <= 0
    if not model.has_focusing_part:
        audit.append(
            AuditEntry("defocusing_sign", True, {"f1_terms": 0})
        )
        return report(Verdict.GLOBAL_ALL_DATA)

    # Exponential h grows fast enough to absorb any focusing power sum
    if model.h_kind == H_EXPONENTIAL:
        if model.f1_terms and not model.f_exp_terms:
            audit.append(
                AuditEntry(
                    "rapid_quasilinear_growth",
                    True,
                    {"note": "exponential h dominates any focusing power"},
                )
            )
            return report(Verdict.GLOBAL_ALL_DATA)
        audit.append(
            AuditEntry(
                "rapid_quasilinear_growth",
                False,
                {"note": "exponential h with exponential F unsupported"},
            )
        )
        return report(Verdict.UNKNOWN)

    # Defocusing domination, Case 3(v)
    if model.has_defocusing_part:
        holds, witness, sampled = _dominated_focusing(model)
        if sampled:
            witness = dict(witness, sampled=True)
        audit.append(AuditEntry("dominated_focusing", holds, witness))
        if holds:
            return report(Verdict.GLOBAL_ALL_DATA)

    if any(sg > 0 for sg, _, _ in model.f_exp_terms):
        audit.append(
            AuditEntry(
                "focusing_growth_supported",
                False,
                {"note": "undominated exponential focusing term"},
            )
        )
        return report(Verdict.UNKNOWN)

    if shed is None or not model.f1_terms:
        audit.append(
            AuditEntry(
                "focusing_growth_supported", False, {"note": "unsupported family"}
            )
        )
        return report(Verdict.UNKNOWN)

    q_low = min(_frac(q) for _, q in model.f1_terms)
    q_top = max(_frac(q) for _, q in model.f1_terms)
    # global side threshold uses the large-s growth of s^(1/2) + h(s)
    p_eff = _effective_h_power(model)
    global_shed = max(Fraction(2, dim), 2 * p_eff - 1 + Fraction(2, dim))
    witnesses = _interpolation_witnesses(model, dim, q_low, q_top)
    wit_floats = (
        None
        if witnesses is None
        else tuple(float(x) for x in witnesses)
    )

    if q_top < global_shed:
        entry = {"q_top": str(q_top), "watershed": str(global_shed)}
        if witnesses is not None:
            entry["sobolev_slack"] = str(witnesses[4])
        name = "subcritical_exponent" if not model.has_defocusing_part else (
            "subcritical_focusing_part"
        )
        audit.append(AuditEntry(name, True, entry))
        return report(Verdict.GLOBAL_ALL_DATA, witnesses=wit_floats)

    constants = blowup_growth_constants(model, dim)
    if constants is not None and constants.c_n > shed + 1:
        audit.append(
            AuditEntry(
                "quasilinear_growth_bound",
                True,
                {"k": str(constants.k)},
            )
        )
        audit.append(
            AuditEntry(
                "supercritical_exponent",
                True,
                {
                    "c_n": str(constants.c_n),
                    "c_m": constants.c_m,
                    "bound": str(shed + 1),
                    "sampled": constants.c_m_sampled,
                },
            )
        )
        return report(Verdict.BLOWUP_CAPABLE, constants=constants)

    if constants is not None and constants.c_n == shed + 1:
        audit.append(
            AuditEntry(
                "watershed_equality",
                True,
                {"c_n": str(constants.c_n), "bound": str(shed + 1)},
            )
        )
        if dim == 3 and mass_of_u0 is not None:
            product = _smallness_product(model, dim, mass_of_u0)
            if product is not None and cs is not None:
                audit.append(
                    AuditEntry(
                        "small_mass_product", product < 1.0, {"product": product}
                    )
                )
                if product < 1.0:
                    return report(
                        Verdict.GLOBAL_SMALL_DATA,
                        constants=constants,
                        witnesses=wit_floats,
                    )
        else:
            audit.append(
                AuditEntry(
                    "small_mass_product",
                    False,
                    {"note": "needs N = 3 and the initial mass"},
                )
            )
        return report(Verdict.CRITICAL, constants=constants, witnesses=wit_floats)

    audit.append(
        AuditEntry(
            "classification_gap",
            False,
            {
                "q_top": str(q_top),
                "global_watershed": str(global_shed),
                "blowup_watershed": str(shed),
            },
        )
    )
    return report(Verdict.UNKNOWN, constants=constants, witnesses=wit_floats)
