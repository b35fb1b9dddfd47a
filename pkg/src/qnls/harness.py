"""Config-driven experiment runner: single runs, sweeps, classification,
ground states, rate fitting, and identity verification.

Configs are TOML with normative key names (see README).  Every experiment
writes a diagnostics CSV, checkpoints and a JSON summary embedding the full
resolved config, so a run can be reproduced bit for bit from its summary.
Exit codes: 0 completed/pass, 2 blowup detected, 3 resolution exceeded,
1 error.
"""

from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .diagnostics import (
    CSV_COLUMNS,
    blowup_time_upper_bound,
    csv_row,
    identity_residuals,
)
from .grid import (
    Field,
    GaussianSpec,
    ScaledProfileSpec,
    SechSpec,
    make_grid,
    moment,
    read_profile_csv_arrays,
    synthesize_initial,
    write_checkpoint,
)
from .groundstate import (
    GroundStateError,
    RadialConfig,
    estimate_threshold_level,
    solve_stationary,
    threshold_verdict,
)
from .nonlinearity import (
    NonlinearityModel,
    classify_regime,
    sobolev_best_constant,
)
from .solver import RunStatus, SolverConfig, integrate

KINDS = (
    "run",
    "sweep",
    "classify",
    "groundstate",
    "fit_decay",
    "fit_blowup_rate",
    "verify_identities",
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2
EXIT_RESOLUTION = 3

_STATUS_EXIT = {
    RunStatus.COMPLETED: EXIT_OK,
    RunStatus.BLOWUP_DETECTED: EXIT_BLOWUP,
    RunStatus.RESOLUTION_EXCEEDED: EXIT_RESOLUTION,
}


class ConfigError(ValueError):
    """Invalid experiment config; message lists the offending key paths."""


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomli.load(fh)


def apply_override(raw: dict, assignment: str) -> None:
    """Apply one `dotted.path=value` override; value is parsed as TOML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    path, value = assignment.split("=", 1)
    try:
        parsed = tomli.loads(f"v = {value}")["v"]
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse override value {value!r}: {exc}")
    segments = path.strip().split(".")
    target = raw
    for seg in segments[:-1]:
        if isinstance(target, list):
            target = target[int(seg)]
        else:
            target = target.setdefault(seg, {})
    last = segments[-1]
    if isinstance(target, list):
        target[int(last)] = parsed
    else:
        target[last] = parsed


def set_by_path(raw: dict, path: str, value) -> None:
    apply_override(raw, f"{path}={json.dumps(value)}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    output_dir: Path
    raw: dict  # fully resolved config, embedded in summaries

    @property
    def grid_dim(self) -> int:
        return int(self.raw["grid"]["dim"])


def _require(errors, section, key, path, kinds=(int, float)):
    if key not in section:
        errors.append(f"missing key {path}")
        return None
    value = section[key]
    if kinds and not isinstance(value, kinds):
        errors.append(f"{path} has wrong type {type(value).__name__}")
        return None
    if isinstance(value, (int, float)) and not math.isfinite(value):
        errors.append(f"{path} is not finite")
        return None
    return value


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate the raw config dict, filling defaults in place."""
    raw = copy.deepcopy(raw)
    errors: list[str] = []
    kind = raw.get("kind")
    if kind not in KINDS:
        errors.append(f"kind must be one of {KINDS}, got {kind!r}")
    out_dir = raw.get("output_dir")
    if not isinstance(out_dir, str) or not out_dir:
        errors.append("missing key output_dir")

    model_block = raw.setdefault("model", {})
    h_block = model_block.setdefault("h", {"kind": "zero"})
    h_block.setdefault("kind", "zero")
    h_block.setdefault("terms", [])
    model_block.setdefault("f1", {}).setdefault("terms", [])
    model_block.setdefault("f2", {}).setdefault("terms", [])
    model_block.setdefault("f_exp", {}).setdefault("terms", [])
    try:
        build_model(model_block)
    except (ValueError, OverflowError) as exc:
        errors.append(f"model: {exc}")

    grid_block = raw.setdefault("grid", {})
    grid_block.setdefault("n", 512)
    grid_block.setdefault("L", 40.0)
    dim = _require(errors, grid_block, "dim", "grid.dim", (int,))
    if dim is not None and dim not in (1, 2, 3):
        errors.append("grid.dim must be 1, 2 or 3")
    if not errors:
        try:
            make_grid(int(grid_block["dim"]), int(grid_block["n"]),
                      float(grid_block["L"]))
        except ValueError as exc:
            errors.append(f"grid: {exc}")

    needs_run = kind in ("run", "sweep", "fit_decay", "fit_blowup_rate",
                         "verify_identities")
    if needs_run:
        initial = raw.setdefault("initial", {})
        if initial.get("kind") not in ("gaussian", "sech", "profile"):
            errors.append("initial.kind must be gaussian, sech or profile")
        time_block = raw.setdefault("time", {})
        _require(errors, time_block, "dt0", "time.dt0")
        _require(errors, time_block, "t_end", "time.t_end")
        time_block.setdefault("dt_min", 0.0)
        time_block.setdefault("adapt", False)
        time_block.setdefault("checkpoint_every", 0)
        detect = raw.setdefault("detect", {})
        detect.setdefault("tail_max", 0.1)
        detect.setdefault("grad_factor", 1e3)
        detect.setdefault("energy_jump_max", 1e-3)
        diag = raw.setdefault("diagnostics", {})
        diag.setdefault("sample_every", 10)
        diag.setdefault("lp_list", [])
    if kind == "sweep":
        sweep = raw.setdefault("sweep", {})
        if not sweep.get("parameter"):
            errors.append("missing key sweep.parameter")
        values = sweep.get("values")
        if not isinstance(values, list) or not values:
            errors.append("sweep.values must be a nonempty list")
    if kind == "groundstate":
        gs = raw.setdefault("groundstate", {})
        _require(errors, gs, "omega", "groundstate.omega")
        if isinstance(gs.get("omega"), (int, float)) and gs["omega"] <= 0:
            errors.append("groundstate.omega must be positive")
        gs.setdefault("r_max", 0.0)
        gs.setdefault("nodes", 4096)
        gs.setdefault("candidate_scales", [])
    if kind in ("fit_decay", "fit_blowup_rate"):
        fit = raw.setdefault("fit", {})
        fit.setdefault("quantity", "gradh2")
        if fit["quantity"] not in ("grad2", "gradh2", "variance", "mass",
                                   "linf"):
            errors.append(f"fit.quantity {fit['quantity']!r} unknown")
        fit.setdefault("t_lo", 2.0)
        fit.setdefault("t_hi", float(raw.get("time", {}).get("t_end", 0.0)))
    if errors:
        raise ConfigError("; ".join(errors))
    return ExperimentConfig(kind=kind, output_dir=Path(out_dir), raw=raw)


def build_model(model_block: dict) -> NonlinearityModel:
    h = model_block.get("h", {})
    kind = h.get("kind", "zero")
    terms = h.get("terms", [])
    if kind == "zero":
        params = ()
    elif kind == "power_sum":
        params = tuple(tuple(t) for t in terms)
    else:
        params = tuple(terms)
    return NonlinearityModel(
        h_kind=kind,
        h_params=params,
        f1_terms=tuple(tuple(t) for t in model_block["f1"]["terms"]),
        f2_terms=tuple(tuple(t) for t in model_block["f2"]["terms"]),
        f_exp_terms=tuple(tuple(t) for t in model_block["f_exp"]["terms"]),
    )


def build_initial(grid, initial_block: dict) -> Field:
    kind = initial_block["kind"]
    if kind == "gaussian":
        spec = GaussianSpec(
            amplitude=float(initial_block.get("amplitude", 1.0)),
            sigma=float(initial_block.get("sigma", 1.0)),
            chirp=float(initial_block.get("chirp", 0.0)),
        )
    elif kind == "sech":
        spec = SechSpec(
            amplitude=float(initial_block.get("amplitude", 1.0)),
            scale=float(initial_block.get("scale", 1.0)),
            power=float(initial_block.get("power", 1.0)),
        )
    else:
        r, w = read_profile_csv_arrays(initial_block["path"])
        spec = ScaledProfileSpec(
            scale=float(initial_block.get("scale", 1.0)), r=r, w=w
        )
    return synthesize_initial(grid, spec)


def build_solver_config(raw: dict) -> SolverConfig:
    time_block = raw["time"]
    detect = raw["detect"]
    dt_min = float(time_block.get("dt_min", 0.0))
    return SolverConfig(
        dt0=float(time_block["dt0"]),
        t_end=float(time_block["t_end"]),
        dt_min=dt_min if dt_min > 0 else None,
        adapt=bool(time_block.get("adapt", False)),
        tail_max=float(detect["tail_max"]),
        grad_blowup_factor=float(detect["grad_factor"]),
        energy_jump_max=float(detect["energy_jump_max"]),
    )


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if hasattr(obj, "__dataclass_fields__"):
        return {
            name: _jsonable(getattr(obj, name))
            for name in obj.__dataclass_fields__
        }
    if hasattr(obj, "value"):  # enums
        return obj.value
    return str(obj)


def write_series_csv(path, series, lp_list=()) -> None:
    columns = list(CSV_COLUMNS) + [f"lp_{float(p):g}" for p in lp_list]
    lines = [",".join(columns)]
    for s in series:
        lines.append(",".join(repr(float(v)) for v in csv_row(s, lp_list)))
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary(out_dir: Path, summary: dict) -> Path:
    summary = dict(summary)
    summary["versions"] = {
        "qnls": __version__,
        "numpy": np.__version__,
        "python": "%d.%d" % sys.version_info[:2],
    }
    path = out_dir / "summary.json"
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True)
                    + "\n")
    return path


# ---------------------------------------------------------------------------
# power-law fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    stderr: float
    window: tuple
    n_points: int
    valid: bool
    quantity: str = ""
    mode: str = "decay"


def fit_power_law(
    ts,
    vs,
    window,
    mode: str = "decay",
    t_blowup: float | None = None,
    flags=None,
) -> FitResult:
    """Least squares of log v against log t (or log(T - t) in blowup mode).

    Needs at least 4 window points with positive values; the validity flag
    goes false when any boundary-guard flag inside the window is tripped.
    """
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(vs, dtype=float)
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError(f"bad fit window ({t_lo}, {t_hi})")
    mask = (ts >= t_lo) & (ts <= t_hi)
    if mode == "blowup":
        if t_blowup is None:
            raise ValueError("blowup mode needs the blowup time estimate")
        mask &= ts < t_blowup
    idx = np.nonzero(mask)[0]
    if idx.size < 4:
        raise ValueError(
            f"need at least 4 points in the window, found {idx.size}"
        )
    sel = vs[idx]
    nonpos = np.nonzero(~(sel > 0))[0]
    if nonpos.size:
        j = int(idx[nonpos[0]])
        raise ValueError(f"nonpositive value {vs[j]} at index {j}")
    if mode == "blowup":
        x = np.log(t_blowup - ts[idx])
    else:
        if np.any(ts[idx] <= 0):
            raise ValueError("decay fits need positive times")
        x = np.log(ts[idx])
    y = np.log(sel)
    n = x.size
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - (slope * x + intercept)
    stderr = math.sqrt(float(np.sum(resid**2)) / max(n - 2, 1) / sxx)
    valid = True
    if flags is not None:
        flags = np.asarray(flags, dtype=bool)
        valid = bool(np.all(flags[idx]))
    return FitResult(
        exponent=slope,
        intercept=float(intercept),
        stderr=stderr,
        window=(float(t_lo), float(t_hi)),
        n_points=int(n),
        valid=valid,
        mode=mode,
    )


# ---------------------------------------------------------------------------
# asymptotic-decay case routing
# ---------------------------------------------------------------------------

_ROUTE_S = np.logspace(-6, 3, 901)


def _sign_rating(values, scale) -> str:
    tol = 1e-12 * max(scale, 1e-300)
    if np.all(values >= -tol):
        return "nonneg"
    if np.all(values <= tol):
        return "nonpos"
    return "mixed"


@dataclass(frozen=True)
class DecayCaseRoute:
    """Which decay case the model falls into and its predicted exponent.

    k1 bounds the defocusing deficit: -k1 G2 <= N F2 s - (N+2) G2 < 0;
    k1_tilde bounds the focusing excess against |G1|; k2 bounds the negative
    part of 2 h'' h' s + (h')^2 against (h')^2.  The smallness sum and the
    resulting l constant are exact only for compatible single-power families
    at N = 3; elsewhere they are reported as None and the case is
    qualitative.
    """

    case: int | None
    quasilinear_sign: str
    focusing_sign: str
    defocusing_sign: str
    k1: float | None
    k1_tilde: float | None
    k2: float | None
    smallness: float | None
    l_constant: float | None
    predicted_exponent: float | None
    notes: tuple = ()


def decay_case_route(
    model: NonlinearityModel,
    dim: int,
    mass: float | None = None,
    cs_override: float | None = None,
) -> DecayCaseRoute:
    """Evaluate the eight-case sign table on a sampled s grid.

    The three classifiers are the quasilinear sign 2 h'' h' s + (h')^2, the
    focusing deficit N F1 s - (N+2) G1, and the defocusing deficit
    N F2 s - (N+2) G2.  Exact rational constants are used for pure power
    families, sampled bounds otherwise.
    """
    notes = []
    s = _ROUTE_S
    hp = model.h_prime(s)
    hpp = model.h_second(s)
    ch = 2.0 * hpp * hp * s + hp * hp
    if model.is_trivial_h:
        ch_rating, k2 = "nonneg", None
    else:
        ch_rating = _sign_rating(ch, float(np.max(np.abs(ch))))
        k2 = None
        if ch_rating == "nonpos" and np.any(hp != 0):
            if model.h_kind == "power_sum" and len(model.h_params) == 1:
                p = Fraction(model.h_params[0][1])
                k2 = float(1 - 2 * p)
                ch_rating = "negbounded"
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(hp != 0, -ch / (hp * hp), 0.0)
                k2 = float(np.max(ratio))
                ch_rating = "negbounded"
                notes.append("k2 sampled")

    a1 = dim * model.f1(s) * s - (dim + 2) * model.g1(s)
    g1 = np.abs(model.g1(s))
    if not model.has_focusing_part:
        a1_rating, k1t = "nonpos", None
    elif model.f1_terms and not any(sg > 0 for sg, _, _ in model.f_exp_terms):
        deficits = [dim * (Fraction(q) + 1) - (dim + 2)
                    for _, q in model.f1_terms]
        if all(d <= 0 for d in deficits):
            a1_rating, k1t = "nonpos", None
        elif all(d > 0 for d in deficits):
            a1_rating, k1t = "pos", float(max(deficits))
        else:
            a1_rating, k1t = "mixed", None
    else:
        a1_rating = _sign_rating(a1, float(np.max(g1, initial=1e-300)))
        a1_rating = "pos" if a1_rating == "nonneg" else a1_rating
        k1t = None
        if a1_rating == "pos":
            with np.errstate(divide="ignore", invalid="ignore"):
                k1t = float(np.max(np.where(g1 > 0, a1 / g1, 0.0)))
            notes.append("k1_tilde sampled")

    a2 = dim * model.f2(s) * s - (dim + 2) * model.g2(s)
    g2 = model.g2(s)
    if not model.has_defocusing_part:
        a2_rating, k1 = "nonneg", None
    elif model.f2_terms and not any(sg < 0 for sg, _, _ in model.f_exp_terms):
        deficits = [dim * (Fraction(r) + 1) - (dim + 2)
                    for _, r in model.f2_terms]
        if all(d >= 0 for d in deficits):
            a2_rating, k1 = "nonneg", None
        elif all(d < 0 for d in deficits):
            a2_rating, k1 = "neg", float(-min(deficits))
        else:
            a2_rating, k1 = "mixed", None
    else:
        a2_rating = _sign_rating(a2, float(np.max(np.abs(g2), initial=1e-300)))
        a2_rating = "neg" if a2_rating == "nonpos" else a2_rating
        k1 = None
        if a2_rating == "neg":
            with np.errstate(divide="ignore", invalid="ignore"):
                k1 = float(np.max(np.where(g2 > 0, -a2 / g2, 0.0)))
            notes.append("k1 sampled")

    table = {
        ("nonneg", "nonpos", "nonneg"): 1,
        ("nonneg", "nonpos", "neg"): 2,
        ("nonneg", "pos", "nonneg"): 3,
        ("nonneg", "pos", "neg"): 4,
        ("negbounded", "nonpos", "nonneg"): 5,
        ("negbounded", "nonpos", "neg"): 6,
        ("negbounded", "pos", "nonneg"): 7,
        ("negbounded", "pos", "neg"): 8,
    }
    case = table.get((ch_rating, a1_rating, a2_rating))
    if case is None:
        notes.append("sign pattern outside the eight-case table")

    smallness = _decay_smallness(model, dim, mass, cs_override)
    l_constant = None
    if case == 1:
        l_constant = 0.0
    elif case == 2:
        l_constant = k1
    elif case is not None and smallness is not None and smallness < 1.0:
        s_sum = smallness
        denom = 1.0 - s_sum
        if case == 3:
            l_constant = k1t * s_sum / denom
        elif case == 4:
            l_constant = max(k1, k1t * s_sum) / denom
        elif case == 5:
            l_constant = dim * k2 / denom
        elif case == 6:
            l_constant = max(dim * k2, k1) / denom
        elif case == 7:
            l_constant = (dim * k2 + k1t * s_sum) / denom
        elif case == 8:
            l_constant = max(k1, dim * k2 + k1t * s_sum) / denom
    elif case not in (None, 1, 2):
        notes.append("smallness constants unavailable; case is qualitative")

    predicted = None
    if l_constant is not None and l_constant < 2.0:
        predicted = -(2.0 - l_constant)
    return DecayCaseRoute(
        case=case,
        quasilinear_sign=ch_rating,
        focusing_sign=a1_rating,
        defocusing_sign=a2_rating,
        k1=k1,
        k1_tilde=k1t,
        k2=k2,
        smallness=smallness,
        l_constant=l_constant,
        predicted_exponent=predicted,
        notes=tuple(notes),
    )


def _decay_smallness(model, dim, mass, cs_override):
    """Smallness sum S for the Gronwall constants; single compatible
    power pair at N = 3 only."""
    if dim != 3 or mass is None:
        return None
    cs = cs_override if cs_override is not None else sobolev_best_constant(dim)
    if len(model.f1_terms) != 1 or model.h_kind != "power_sum":
        return None
    if len(model.h_params) != 1 or model.f_exp_terms:
        return None
    a, p = model.h_params[0]
    b, q = model.f1_terms[0]
    two_star = Fraction(2 * dim, dim - 2)
    # the G1-vs-h^{2*} bound needs the exponent compatibility 2p = q + 2/2*
    if 2 * Fraction(p) != Fraction(q) + 2 / two_star:
        return None
    gamma1 = 1 / (Fraction(q) + 1)
    gamma2 = gamma1 + two_star * (1 - gamma1) / 2
    inv_tau = float((1 - gamma1) / (gamma2 - gamma1))
    inv_tau_p = float((gamma2 - 1) / (gamma2 - gamma1))
    big_b = b / (float(q) + 1.0)
    c1 = big_b ** float(gamma1)
    c2 = big_b ** float(gamma2) / a ** float(two_star)
    return (c1 * mass) ** inv_tau_p * (c2 * cs) ** inv_tau


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    kind: str
    output_dir: Path
    summary: dict
    exit_code: int


def _series_arrays(series, quantity):
    ts = np.array([s.t for s in series])
    vs = np.array([getattr(s, quantity) for s in series])
    flags = np.array([s.variance_valid for s in series])
    return ts, vs, flags


def _residual_block(series):
    try:
        res = identity_residuals(series)
    except ValueError as exc:
        return {"note": f"residuals unavailable: {exc}"}
    return res


def _simulate(cfg: ExperimentConfig):
    raw = cfg.raw
    grid = make_grid(int(raw["grid"]["dim"]), int(raw["grid"]["n"]),
                     float(raw["grid"]["L"]))
    model = build_model(raw["model"])
    u0 = build_initial(grid, raw["initial"])
    solver_cfg = build_solver_config(raw)
    diag = raw["diagnostics"]
    series, verdict, final = integrate(
        u0, model, solver_cfg,
        sample_every=int(diag["sample_every"]),
        lp_list=tuple(diag["lp_list"]),
    )
    return grid, model, u0, solver_cfg, series, verdict, final


def _write_run_outputs(cfg, model, u0, series, verdict, final):
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lp_list = tuple(cfg.raw["diagnostics"]["lp_list"])
    write_series_csv(out / "diagnostics.csv", series, lp_list)
    write_checkpoint(out / "checkpoint_initial.qnls", u0, 0.0)
    write_checkpoint(out / "checkpoint_final.qnls", final.field, final.t)
    valid = [s for s in series if s.valid]
    mass0 = valid[0].mass
    summary = {
        "config": cfg.raw,
        "verdict": {
            "status": verdict.status.value,
            "t_estimate": verdict.t_estimate,
            "reason": verdict.reason,
        },
        "final_time": final.t,
        "steps": final.steps,
        "residuals": _residual_block(series),
        "mass_drift": max(abs(s.mass - mass0) for s in valid) / mass0,
        "boundary_guard_ok": all(s.variance_valid for s in valid),
        "fits": [],
        "certificates": [],
    }
    bound = blowup_time_upper_bound(series[0], model, u0.grid.dim)
    summary["blowup_time_bound"] = (
        {"t0": bound.t0, "c_kn": bound.c_kn}
        if bound
        else {"t0": None, "failed": bound.failed}
    )
    return summary


def _experiment_run(cfg: ExperimentConfig) -> RunRecord:
    _, model, u0, _, series, verdict, final = _simulate(cfg)
    summary = _write_run_outputs(cfg, model, u0, series, verdict, final)
    write_summary(cfg.output_dir, summary)
    return RunRecord(cfg.kind, cfg.output_dir, summary,
                     _STATUS_EXIT[verdict.status])


def _experiment_sweep(cfg: ExperimentConfig) -> RunRecord:
    sweep = cfg.raw["sweep"]
    parameter, values = sweep["parameter"], sweep["values"]
    rows = []
    for i, value in enumerate(values):
        row_raw = copy.deepcopy(cfg.raw)
        row_raw["kind"] = "run"
        row_raw["output_dir"] = str(cfg.output_dir / f"row_{i:03d}")
        try:
            set_by_path(row_raw, parameter, value)
            record = _experiment_run(parse_config(row_raw))
            verdict = record.summary["verdict"]
            grad_path = Path(record.output_dir) / "diagnostics.csv"
            rows.append(
                {
                    "value": value,
                    "status": verdict["status"],
                    "t_estimate": verdict["t_estimate"],
                    "max_grad2": _max_column(grad_path, "grad2"),
                    "error": "",
                }
            )
        except Exception as exc:  # keep sweeping on per-row failure
            rows.append(
                {"value": value, "status": "Error", "t_estimate": None,
                 "max_grad2": None, "error": str(exc)}
            )
    rows.sort(key=lambda r: r["value"])
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = ["value,status,t_estimate,max_grad2,error"]
    for r in rows:
        lines.append(
            f"{r['value']!r},{r['status']},"
            f"{'' if r['t_estimate'] is None else repr(r['t_estimate'])},"
            f"{'' if r['max_grad2'] is None else repr(r['max_grad2'])},"
            f"{r['error']}"
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    summary = {"config": cfg.raw, "rows": rows}
    write_summary(out, summary)
    code = EXIT_OK if all(r["status"] != "Error" for r in rows) else EXIT_ERROR
    return RunRecord(cfg.kind, out, summary, code)


def _max_column(csv_path, column):
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
        idx = header.index(column)
        best = -math.inf
        for line in fh:
            v = float(line.split(",")[idx])
            if math.isfinite(v) and v > best:
                best = v
    return best


def _experiment_classify(cfg: ExperimentConfig) -> RunRecord:
    raw = cfg.raw
    model = build_model(raw["model"])
    mass = None
    if "initial" in raw and raw["initial"].get("kind"):
        grid = make_grid(int(raw["grid"]["dim"]), int(raw["grid"]["n"]),
                         float(raw["grid"]["L"]))
        mass = moment(build_initial(grid, raw["initial"]), "one")
    report = classify_regime(
        model,
        cfg.grid_dim,
        mass_of_u0=mass,
        cs_override=raw["model"].get("cs_override"),
    )
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "config": raw,
        "verdict": report.verdict.value,
        "report": report,
        "mass_of_u0": mass,
    }
    write_summary(out, summary)
    return RunRecord(cfg.kind, out, summary, EXIT_OK)


def _experiment_groundstate(cfg: ExperimentConfig) -> RunRecord:
    raw = cfg.raw
    gs = raw["groundstate"]
    model = build_model(raw["model"])
    dim = cfg.grid_dim
    omega = float(gs["omega"])
    radial_cfg = RadialConfig(
        r_max=float(gs["r_max"]) or None, nodes=int(gs["nodes"])
    )
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        profile = solve_stationary(model, omega, radial_cfg, dim=dim)
    except (GroundStateError, ValueError) as exc:
        summary = {"config": raw, "error": str(exc)}
        write_summary(out, summary)
        return RunRecord(cfg.kind, out, summary, EXIT_ERROR)
    profile.to_csv(out / "profile.csv")
    level = estimate_threshold_level(model, omega, profile, dim=dim)
    certificates = []
    scales = [float(c) for c in gs["candidate_scales"]]
    if scales:
        grid = make_grid(dim, int(raw["grid"]["n"]), float(raw["grid"]["L"]))
        for scale in scales:
            u0 = synthesize_initial(
                grid, ScaledProfileSpec(scale=scale, r=profile.r,
                                        w=profile.values)
            )
            cert = threshold_verdict(u0, model, omega, level)
            certificates.append({"scale": scale, "certificate": cert})
    summary = {
        "config": raw,
        "omega": omega,
        "threshold_level": level,
        "profile_residual": profile.residual,
        "profile_mass": profile.mass,
        "profile_peak": profile.peak(),
        "certificates": certificates,
        "fits": [],
    }
    write_summary(out, summary)
    return RunRecord(cfg.kind, out, summary, EXIT_OK)


def _experiment_fit_decay(cfg: ExperimentConfig) -> RunRecord:
    _, model, u0, _, series, verdict, final = _simulate(cfg)
    summary = _write_run_outputs(cfg, model, u0, series, verdict, final)
    fit_block = cfg.raw["fit"]
    route = decay_case_route(
        model, cfg.grid_dim, mass=moment(u0, "one"),
        cs_override=cfg.raw["model"].get("cs_override"),
    )
    ts, vs, flags = _series_arrays(
        [s for s in series if s.valid], fit_block["quantity"]
    )
    fit_error = ""
    try:
        fit = fit_power_law(
            ts, vs, (float(fit_block["t_lo"]), float(fit_block["t_hi"])),
            flags=flags,
        )
        fit = replace(fit, quantity=fit_block["quantity"])
        summary["fits"] = [fit]
    except ValueError as exc:
        fit_error = str(exc)
        summary["fits"] = []
    summary["decay_route"] = route
    if fit_error:
        summary["fit_error"] = fit_error
    write_summary(cfg.output_dir, summary)
    code = _STATUS_EXIT[verdict.status] if not fit_error else EXIT_ERROR
    return RunRecord(cfg.kind, cfg.output_dir, summary, code)


def _experiment_fit_blowup(cfg: ExperimentConfig) -> RunRecord:
    _, model, u0, _, series, verdict, final = _simulate(cfg)
    summary = _write_run_outputs(cfg, model, u0, series, verdict, final)
    if verdict.status != RunStatus.BLOWUP_DETECTED:
        summary["fit_error"] = (
            f"no blowup detected (status {verdict.status.value})"
        )
        write_summary(cfg.output_dir, summary)
        return RunRecord(cfg.kind, cfg.output_dir, summary, EXIT_ERROR)
    usable = [s for s in series if s.valid and math.isfinite(s.grad2)]
    ts = np.array([s.t for s in usable])
    grads = np.sqrt(np.array([s.grad2 for s in usable]))
    flags = np.array([s.variance_valid for s in usable])
    # fit over the last decade of gradient growth
    mask = grads >= 0.1 * np.max(grads)
    t_lo = float(ts[mask][0])
    t_hi = float(ts[-1])
    fit = fit_power_law(
        ts, grads, (t_lo, t_hi + 1e-30), mode="blowup",
        t_blowup=verdict.t_estimate, flags=flags,
    )
    fit = replace(fit, quantity="grad_norm")
    summary["fits"] = [fit]
    write_summary(cfg.output_dir, summary)
    return RunRecord(cfg.kind, cfg.output_dir, summary,
                     _STATUS_EXIT[verdict.status])


def _conformal_critical(model: NonlinearityModel, dim: int) -> bool:
    """True when theta vanishes algebraically: h = 0 and
    N F(s) s = (N + 2) G(s)."""
    if not model.is_trivial_h:
        return False
    s = _ROUTE_S
    lhs = dim * model.f(s) * s - (dim + 2) * model.g(s)
    scale = float(np.max(np.abs(model.g(s)), initial=1e-300))
    return bool(np.all(np.abs(lhs) <= 1e-10 * max(scale, 1e-300)))


VERIFY_BUDGETS = {
    "mass": 1e-10,
    "energy": 1e-6,
    "variance_rate_rel": 1e-6,   # x max |y|
    "momentum_rate_rel": 1e-2,   # x max |Q|
    "conformal_rate_rel": 1e-4,  # x max |4 t theta|, floored
    "conformal_drift": 1e-4,     # relative P drift, critical models only
}


def _experiment_verify(cfg: ExperimentConfig) -> RunRecord:
    if cfg.raw["time"].get("adapt"):
        raise ConfigError(
            "verify_identities needs uniform sampling; set time.adapt = false"
        )
    _, model, u0, _, series, verdict, final = _simulate(cfg)
    summary = _write_run_outputs(cfg, model, u0, series, verdict, final)
    res = identity_residuals(series)
    budgets = dict(VERIFY_BUDGETS)
    budgets.update(cfg.raw.get("verify", {}))
    checks = [
        ("mass_conservation", res.r_mass, budgets["mass"]),
        ("energy_conservation", res.r_energy, budgets["energy"]),
        (
            "variance_rate",
            res.r_variance,
            budgets["variance_rate_rel"] * max(res.max_abs_y, 1e-300),
        ),
        (
            "momentum_rate",
            res.r_momentum,
            budgets["momentum_rate_rel"] * max(res.max_abs_q, 1e-300),
        ),
        (
            "conformal_rate",
            res.r_conformal,
            budgets["conformal_rate_rel"]
            * max(4.0 * final.t * res.max_abs_theta, res.max_abs_q * 1e-2,
                  1e-300),
        ),
    ]
    report = [
        {"identity": name, "residual": value, "budget": budget,
         "passed": bool(value <= budget), "window_valid": res.window_valid}
        for name, value, budget in checks
    ]
    if _conformal_critical(model, cfg.grid_dim):
        ps = np.array([s.p for s in series if s.valid])
        drift = float(np.max(np.abs(ps - ps[0])) / max(abs(ps[0]), 1e-300))
        report.append(
            {"identity": "conformal_constancy", "residual": drift,
             "budget": budgets["conformal_drift"],
             "passed": bool(drift <= budgets["conformal_drift"]),
             "window_valid": res.window_valid}
        )
    summary["identity_report"] = report
    summary["residuals"] = res
    write_summary(cfg.output_dir, summary)
    ok = all(item["passed"] for item in report)
    return RunRecord(cfg.kind, cfg.output_dir, summary,
                     EXIT_OK if ok else EXIT_ERROR)


_EXPERIMENTS = {
    "run": _experiment_run,
    "sweep": _experiment_sweep,
    "classify": _experiment_classify,
    "groundstate": _experiment_groundstate,
    "fit_decay": _experiment_fit_decay,
    "fit_blowup_rate": _experiment_fit_blowup,
    "verify_identities": _experiment_verify,
}


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    """Execute the configured experiment, writing all artifacts to disk."""
    return _EXPERIMENTS[cfg.kind](cfg)
