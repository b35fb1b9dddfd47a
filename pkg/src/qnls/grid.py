"""Periodic uniform grids with spectral calculus and initial-data synthesis.

The whole-space problem is truncated to the torus [-L/2, L/2)^dim; box size
is a convergence parameter and a boundary-mass monitor guards every
|x|^2-weighted diagnostic.  Fields are complex samples in row-major axis
order; treat them as immutable values (no operation mutates its input).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"QNLS"
CHECKPOINT_VERSION = 1

# fraction of the half-width counted as the outer boundary shell
BOUNDARY_SHELL = 0.1
# spectral tail starts at 2/3 of the Nyquist wavenumber on any axis
TAIL_CUTOFF = 2.0 / 3.0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)^dim with n samples per axis."""

    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.n
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {n}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"box length must be positive, got {self.length}")
        object.__setattr__(self, "spacing", self.length / n)
        axis = -0.5 * self.length + self.spacing * np.arange(n)
        wavenumbers = 2.0 * math.pi * np.fft.fftfreq(n, d=self.spacing)
        object.__setattr__(self, "axis_coords", axis)
        object.__setattr__(self, "axis_wavenumbers", wavenumbers)
        coords = np.meshgrid(*([axis] * self.dim), indexing="ij")
        ks = np.meshgrid(*([wavenumbers] * self.dim), indexing="ij")
        object.__setattr__(self, "coords", tuple(coords))
        object.__setattr__(self, "wavenumbers", tuple(ks))
        object.__setattr__(self, "k_squared", sum(k * k for k in ks))
        object.__setattr__(self, "radius_squared", sum(x * x for x in coords))
        shell = 0.5 * self.length * (1.0 - BOUNDARY_SHELL)
        boundary = np.zeros((n,) * self.dim, dtype=bool)
        for x in coords:
            boundary |= np.abs(x) >= shell
        object.__setattr__(self, "boundary_mask", boundary)
        k_nyq = math.pi / self.spacing
        tail = np.zeros((n,) * self.dim, dtype=bool)
        for k in ks:
            tail |= np.abs(k) >= TAIL_CUTOFF * k_nyq
        object.__setattr__(self, "tail_mask", tail)

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def weight(self) -> float:
        """Quadrature weight spacing^dim of the uniform rule."""
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim


@dataclass(frozen=True)
class Field:
    """Complex-valued state u sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise ValueError(
                f"field shape {v.shape} does not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "values", v)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values.real)) and
                    np.all(np.isfinite(self.values.imag)))

    def copy_with(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)


def make_grid(dim: int, n: int, length: float) -> Grid:
    return Grid(dim, n, length)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianSpec:
    """A exp(-|x|^2 / (2 sigma^2)) exp(i b |x|^2); b > 0 chirps toward focus."""

    amplitude: float = 1.0
    sigma: float = 1.0
    chirp: float = 0.0


@dataclass(frozen=True)
class SechSpec:
    """A sech^power(x / scale), one dimension only."""

    amplitude: float
    scale: float = 1.0
    power: float = 1.0


@dataclass(frozen=True)
class ScaledProfileSpec:
    """c times a radial profile given as (r, w) tables, linearly interpolated."""

    scale: float
    r: np.ndarray
    w: np.ndarray


def synthesize_initial(grid: Grid, spec) -> Field:
    if isinstance(spec, GaussianSpec):
        for name in ("amplitude", "sigma", "chirp"):
            if not math.isfinite(getattr(spec, name)):
                raise ValueError(f"gaussian {name} must be finite")
        if spec.sigma <= 0:
            raise ValueError("gaussian sigma must be positive")
        r2 = grid.radius_squared
        values = spec.amplitude * np.exp(-r2 / (2.0 * spec.sigma**2))
        values = values.astype(np.complex128)
        if spec.chirp != 0.0:
            values *= np.exp(1j * spec.chirp * r2)
        return Field(grid, values)
    if isinstance(spec, SechSpec):
        if grid.dim != 1:
            raise ValueError("sech profiles are one-dimensional")
        for name in ("amplitude", "scale", "power"):
            if not math.isfinite(getattr(spec, name)):
                raise ValueError(f"sech {name} must be finite")
        if spec.scale <= 0 or spec.power <= 0:
            raise ValueError("sech scale and power must be positive")
        x = grid.coords[0]
        values = spec.amplitude / np.cosh(x / spec.scale) ** spec.power
        return Field(grid, values.astype(np.complex128))
    if isinstance(spec, ScaledProfileSpec):
        if not math.isfinite(spec.scale):
            raise ValueError("profile scale must be finite")
        r = np.sqrt(grid.radius_squared)
        values = spec.scale * np.interp(r, spec.r, spec.w, right=0.0)
        return Field(grid, values.astype(np.complex128))
    raise TypeError(f"unknown initial-data spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------


def spectral_laplacian(f: Field) -> Field:
    """Exact Laplacian of band-limited data via the Fourier symbol -|k|^2."""
    hat = np.fft.fftn(f.values)
    return f.copy_with(np.fft.ifftn(-f.grid.k_squared * hat))


def laplacian_of_real(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Laplacian of a real array, returned real."""
    hat = np.fft.fftn(values)
    return np.fft.ifftn(-grid.k_squared * hat).real


def spectral_gradient(f: Field) -> tuple:
    """Per-axis derivatives (i k_a symbol), one Field per axis."""
    hat = np.fft.fftn(f.values)
    return tuple(
        f.copy_with(np.fft.ifftn(1j * k * hat)) for k in f.grid.wavenumbers
    )


def gradient_norm_sq(f: Field) -> float:
    """int |grad f|^2 dx by Parseval."""
    hat = np.fft.fftn(f.values)
    total = np.sum(f.grid.k_squared * (hat.real**2 + hat.imag**2))
    return float(total * f.grid.weight / f.grid.size)


def gradient_norm_sq_real(grid: Grid, values: np.ndarray) -> float:
    hat = np.fft.fftn(values)
    total = np.sum(grid.k_squared * (hat.real**2 + hat.imag**2))
    return float(total * grid.weight / grid.size)


def moment(f: Field, weight: str) -> float:
    """int |f|^2 dx ("one") or int |x|^2 |f|^2 dx ("abs_x2")."""
    density = f.values.real**2 + f.values.imag**2
    if weight == "one":
        return float(np.sum(density) * f.grid.weight)
    if weight == "abs_x2":
        return float(np.sum(f.grid.radius_squared * density) * f.grid.weight)
    raise ValueError(f"unknown moment weight {weight!r}")


def boundary_mass_fraction(f: Field) -> float:
    """Mass fraction sitting in the outermost 10% shell of the box."""
    density = f.values.real**2 + f.values.imag**2
    total = np.sum(density)
    if total == 0.0:
        return 0.0
    return float(np.sum(density[f.grid.boundary_mask]) / total)


def tail_fraction_from_hat(grid: Grid, hat: np.ndarray) -> float:
    power = hat.real**2 + hat.imag**2
    total = np.sum(power)
    if total == 0.0:
        return 0.0
    return float(np.sum(power[grid.tail_mask]) / total)


def tail_fraction(f: Field) -> float:
    """Fraction of spectral mass above 2/3 of the Nyquist wavenumber."""
    return tail_fraction_from_hat(f.grid, np.fft.fftn(f.values))


def read_profile_csv_arrays(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column (r, w) radial profile table."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path} is not a two-column r,w table")
    return data[:, 0], data[:, 1]


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sBBIdd")


def write_checkpoint(path, f: Field, t: float) -> None:
    """Binary state dump: magic, version, dim, n, L, t, then row-major
    little-endian (re, im) float64 pairs."""
    g = f.grid
    interleaved = np.empty(2 * g.size, dtype="<f8")
    interleaved[0::2] = f.values.real.ravel()
    interleaved[1::2] = f.values.imag.ravel()
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                CHECKPOINT_MAGIC, CHECKPOINT_VERSION, g.dim, g.n, g.length, t
            )
        )
        fh.write(interleaved.tobytes())


def read_checkpoint(path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, dim, n, length, t = _HEADER.unpack(header)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        grid = Grid(dim, n, length)
        raw = np.frombuffer(fh.read(16 * grid.size), dtype="<f8")
    if raw.size != 2 * grid.size:
        raise ValueError("truncated checkpoint payload")
    values = (raw[0::2] + 1j * raw[1::2]).reshape(grid.shape)
    return Field(grid, values), t
