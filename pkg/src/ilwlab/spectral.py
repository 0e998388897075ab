"""Periodic grids, Fourier coefficients and diagonal Fourier multipliers.

Coefficient convention: a function on a grid of period ``L`` is stored
through the coefficients

    c_n = (1/L) * integral_0^L exp(-i k_n x) f(x) dx,   k_n = 2 pi n / L,

so that ``f(x) = sum_n c_n exp(i k_n x)``. Pointwise products are then plain
convolutions of coefficient arrays, and norms carry a factor ``L`` so that
``H^0`` coincides with ``L^2``. Arrays are kept in numpy FFT ordering; the
integer lattice index of every slot is ``Grid.indices``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ShapeError

__all__ = [
    "Grid",
    "SpectralField",
    "MultiplierSpec",
    "MULTIPLIER_KINDS",
    "PROJECTOR_KINDS",
    "make_grid",
    "transform",
    "inverse_transform",
    "field_from_function",
    "field_from_modes",
    "coth",
    "coth_minus_inv",
    "coth_minus_sign",
    "linear_symbol",
    "make_symbol",
    "apply_symbol",
    "psi",
    "projector_symbol",
    "project",
    "mean",
    "norm",
    "is_hermitian",
    "to_padded",
    "from_padded",
    "hs_norm_coeffs",
]

_SERIES_CUTOFF = 0.1
_TAIL_CUTOFF = 20.0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice with ``n_modes`` points on ``[0, period)``."""

    n_modes: int
    period: float = 2 * np.pi

    def __post_init__(self):
        n = self.n_modes
        if isinstance(n, bool) or int(n) != n:
            raise ConfigurationError(f"n_modes must be an integer, got {n!r}")
        if n < 8 or n % 2:
            raise ConfigurationError(f"n_modes must be even and >= 8, got {n}")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ConfigurationError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "n_modes", int(n))
        object.__setattr__(self, "period", float(self.period))

    @property
    def spacing(self) -> float:
        return self.period / self.n_modes

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n_modes) * self.spacing

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer lattice frequencies in FFT order."""
        return np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes).round().astype(np.int64)

    @cached_property
    def k(self) -> np.ndarray:
        """Physical wavenumbers ``2 pi n / period`` in FFT order."""
        return self.indices * (2 * np.pi / self.period)

    @property
    def nyquist(self) -> int:
        """Array slot of the unpaired frequency ``-n_modes/2``."""
        return self.n_modes // 2

    @property
    def kmax(self) -> int:
        return self.n_modes // 2

    def slot(self, n: int) -> int:
        """Array position of lattice frequency ``n``."""
        half = self.n_modes // 2
        if not -half <= n < half:
            raise ShapeError(f"frequency {n} is not on the lattice [{-half}, {half})")
        return int(n) % self.n_modes

    def frequencies_sorted(self) -> np.ndarray:
        return np.arange(-self.kmax, self.kmax)


def make_grid(n_modes: int, period: float = 2 * np.pi) -> Grid:
    return Grid(n_modes, period)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a function on ``grid``.

    ``real`` records that the underlying function is real valued, i.e. that
    the coefficients are Hermitian symmetric.
    """

    grid: Grid
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n_modes,):
            raise ShapeError(
                f"coefficient array has shape {c.shape}, expected ({self.grid.n_modes},)"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def coeff(self, n: int) -> complex:
        return complex(self.coeffs[self.grid.slot(n)])

    def to_physical(self) -> np.ndarray:
        return inverse_transform(self)

    def with_coeffs(self, coeffs, real: bool | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real if real is None else real)

    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid != self.grid:
            raise ShapeError("fields live on different grids")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs, self.real)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralField(
            self.grid, self.coeffs * scalar, self.real and np.isrealobj(scalar)
        )

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(n_modes={self.grid.n_modes}, real={self.real})"


def transform(samples, grid: Grid) -> SpectralField:
    """Coefficients of the trigonometric interpolant of ``samples``."""
    samples = np.asarray(samples)
    if samples.shape != (grid.n_modes,):
        raise ShapeError(f"expected {grid.n_modes} samples, got shape {samples.shape}")
    real = np.isrealobj(samples)
    c = np.fft.fft(samples) / grid.n_modes
    if real:
        c = _hermitize(c, grid)
    return SpectralField(grid, c, real)


def inverse_transform(field: SpectralField) -> np.ndarray:
    values = np.fft.ifft(field.coeffs) * field.grid.n_modes
    if field.real:
        return values.real.copy()
    return values


def _hermitize(c, grid):
    """Enforce exact Hermitian symmetry along the last axis."""
    mirrored = np.conj(c[..., (-grid.indices) % grid.n_modes])
    out = 0.5 * (c + mirrored)
    out[..., grid.nyquist] = out[..., grid.nyquist].real
    return out


def to_padded(coeffs, grid: Grid, n_padded: int) -> np.ndarray:
    """Physical samples of lattice coefficients on a finer grid (zero padding).

    Every slot keeps its lattice frequency, including ``-n_modes/2``.
    """
    n = grid.n_modes
    half = n // 2
    if n_padded < n or n_padded % 2:
        raise ShapeError("padded grid must be even and not coarser than the lattice")
    big = np.zeros(coeffs.shape[:-1] + (n_padded,), dtype=complex)
    big[..., :half] = coeffs[..., :half]
    big[..., n_padded - half:] = coeffs[..., half:]
    return np.fft.ifft(big, axis=-1) * n_padded


def from_padded(values, grid: Grid) -> np.ndarray:
    """Lattice coefficients of samples taken on a finer grid (truncation)."""
    m = values.shape[-1]
    half = grid.n_modes // 2
    big = np.fft.fft(values, axis=-1) / m
    return np.concatenate([big[..., :half], big[..., m - half:]], axis=-1)


def is_hermitian(field: SpectralField, rtol: float = 1e-12) -> bool:
    c = field.coeffs
    grid = field.grid
    mirrored = np.conj(c[(-grid.indices) % grid.n_modes])
    scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
    return bool(np.max(np.abs(c - mirrored)) <= rtol * scale)


def field_from_function(func, grid: Grid) -> SpectralField:
    """Sample ``func`` on the grid points and transform."""
    return transform(func(grid.x), grid)


def field_from_modes(grid: Grid, modes: dict, real: bool | None = None) -> SpectralField:
    """Build a field from ``{lattice_frequency: coefficient}``."""
    c = np.zeros(grid.n_modes, dtype=np.complex128)
    for n, value in modes.items():
        c[grid.slot(n)] += value
    if real is None:
        real = is_hermitian(SpectralField(grid, c), rtol=0.0) if np.any(c) else True
    return SpectralField(grid, c, real)


# --- hyperbolic cotangent and its two cancellation-prone differences -------


def coth(x):
    """coth with a Laurent series near 0 and an exponential tail for |x| > 20."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(x)
    small = ax < _SERIES_CUTOFF
    large = ax > _TAIL_CUTOFF
    mid = ~(small | large)
    xs = x[small]
    with np.errstate(divide="ignore"):
        out[small] = 1.0 / xs + _coth_series_tail(xs)
    out[large] = np.sign(x[large]) * (1.0 + 2.0 * np.exp(-2.0 * ax[large]))
    out[mid] = 1.0 / np.tanh(x[mid])
    return out if out.ndim else float(out)


def _coth_series_tail(x):
    # coth(x) - 1/x, Taylor series; truncation error ~ x^11 / 1e6
    x2 = x * x
    return x * (1 / 3 + x2 * (-1 / 45 + x2 * (2 / 945 + x2 * (-1 / 4725 + x2 * (2 / 93555)))))


def coth_minus_inv(x):
    """``coth(x) - 1/x`` evaluated without cancellation; 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(x)
    small = ax < _SERIES_CUTOFF
    large = ax > _TAIL_CUTOFF
    mid = ~(small | large)
    out[small] = _coth_series_tail(x[small])
    xl = x[large]
    inv = np.where(np.isinf(xl), 0.0, 1.0 / np.where(np.isinf(xl), 1.0, xl))
    out[large] = np.sign(xl) * (1.0 + 2.0 * np.exp(-2.0 * ax[large])) - inv
    xm = x[mid]
    out[mid] = 1.0 / np.tanh(xm) - 1.0 / xm
    return out if out.ndim else float(out)


def coth_minus_sign(x):
    """``coth(x) - sgn(x)`` via ``2 sgn(x) / expm1(2|x|)``; 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.zeros_like(x)
    nz = ax > 0
    with np.errstate(over="ignore"):
        out[nz] = np.sign(x[nz]) * 2.0 / np.expm1(2.0 * ax[nz])
    return out if out.ndim else float(out)


# --- multipliers -------------------------------------------------------------

MULTIPLIER_KINDS = (
    "hilbert",
    "t_delta",
    "q_delta",
    "g_delta",
    "q_effective",
    "dx",
    "dx_inv",
    "j_s",
    "free_propagator",
)

_DELTA_KINDS = {"t_delta", "q_delta", "g_delta", "q_effective"}

PROPAGATOR_EQUATIONS = ("ilw", "bo", "kdv", "silw", "bo_perturbed", "gauged")


@dataclass(frozen=True)
class MultiplierSpec:
    """A named diagonal Fourier symbol.

    ``delta`` may be ``inf`` for the depth-dependent kinds, in which case the
    deep-water limit symbol is used. ``equation``, ``t``, ``m0`` and
    ``kdv_coefficient`` only matter for ``free_propagator``.
    """

    kind: str
    delta: float | None = None
    s: float = 0.0
    t: float = 0.0
    equation: str = "ilw"
    m0: float = 0.0
    kdv_coefficient: float = 1.0

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ConfigurationError(f"unknown multiplier kind {self.kind!r}")
        needs_delta = self.kind in _DELTA_KINDS or (
            self.kind == "free_propagator" and self.equation in ("ilw", "silw", "bo_perturbed")
        )
        if self.kind == "free_propagator" and self.equation not in PROPAGATOR_EQUATIONS:
            raise ConfigurationError(f"unknown propagator equation {self.equation!r}")
        if needs_delta:
            if self.delta is None or not self.delta > 0:
                raise ConfigurationError(f"{self.kind} requires delta > 0, got {self.delta}")

    @property
    def reality_preserving(self) -> bool:
        return not (self.kind == "free_propagator" and self.equation == "gauged")


def _check_delta(delta):
    if delta is None or not delta > 0:
        raise ConfigurationError(f"delta must be positive, got {delta}")


def _depth_arg(delta, k):
    """``delta * k`` with the convention ``inf * 0 = 0``."""
    with np.errstate(invalid="ignore"):
        x = delta * k
    return np.where(k == 0, 0.0, x)


def linear_symbol(equation: str, k, delta=None, kdv_coefficient: float = 1.0):
    """Symbol ``l(k)`` of the linear part, ``d/dt c_k = l(k) c_k``."""
    k = np.asarray(k, dtype=float)
    if equation == "bo":
        return 1j * k * np.abs(k)
    if equation == "kdv":
        return 1j * kdv_coefficient * k**3
    if equation == "gauged":
        return 1j * k**2
    _check_delta(delta)
    x = _depth_arg(delta, k)
    if equation == "ilw":
        return 1j * k**2 * coth_minus_inv(x)
    if equation == "silw":
        return 1j * k**2 * coth_minus_inv(x) / delta
    if equation == "bo_perturbed":
        # BO plus i k * q_effective(k), i.e. i k^2 coth(delta k)
        return 1j * k * np.abs(k) + 1j * k * k * coth_minus_sign(x)
    raise ConfigurationError(f"no linear symbol for equation {equation!r}")


def make_symbol(spec: MultiplierSpec, grid: Grid) -> np.ndarray:
    """Symbol values on the lattice, FFT order."""
    k = grid.k
    kind = spec.kind
    if kind == "hilbert":
        return -1j * np.sign(k)
    if kind == "dx":
        return 1j * k
    if kind == "dx_inv":
        out = np.zeros(k.shape, dtype=complex)
        nz = k != 0
        out[nz] = 1.0 / (1j * k[nz])
        return out
    if kind == "j_s":
        return (1.0 + k**2) ** (spec.s / 2) + 0j
    if kind == "free_propagator":
        if spec.equation == "gauged":
            return np.exp(1j * spec.t * k**2) * np.exp(-1j * spec.t * spec.m0)
        ell = linear_symbol(spec.equation, k, spec.delta, spec.kdv_coefficient)
        # ell is purely imaginary; exponentiate the phase only
        return np.exp(1j * spec.t * ell.imag)
    _check_delta(spec.delta)
    x = _depth_arg(spec.delta, k)
    if kind == "t_delta":
        out = np.zeros(k.shape, dtype=complex)
        nz = k != 0
        out[nz] = -1j * coth(x[nz])
        return out
    if kind == "g_delta":
        return -1j * coth_minus_inv(x)
    if kind == "q_delta":
        return -1j * coth_minus_sign(x)
    if kind == "q_effective":
        out = k * coth_minus_sign(x) + 0j
        out[k == 0] = 0.0 if np.isinf(spec.delta) else 1.0 / spec.delta
        return out
    raise ConfigurationError(f"unknown multiplier kind {kind!r}")  # pragma: no cover


def _real_nyquist(symbol, grid):
    # the unpaired mode -N/2 stands for cos(N x / 2) on the grid; a Hermitian
    # symbol acts on it through its real part
    symbol = symbol.copy()
    symbol[grid.nyquist] = symbol[grid.nyquist].real
    return symbol


def apply_symbol(field: SpectralField, spec) -> SpectralField:
    """Multiply coefficients by a symbol (a MultiplierSpec or a raw array)."""
    grid = field.grid
    if isinstance(spec, MultiplierSpec):
        symbol = make_symbol(spec, grid)
        keeps_real = spec.reality_preserving
    else:
        symbol = np.asarray(spec)
        if symbol.shape != (grid.n_modes,):
            raise ShapeError("symbol array does not match the grid")
        keeps_real = False
    real = field.real and keeps_real
    if real:
        symbol = _real_nyquist(symbol, grid)
    return SpectralField(grid, field.coeffs * symbol, real)


# --- Littlewood-Paley projectors -------------------------------------------


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def psi(xi):
    """Smooth bump: 1 on [-1, 1], 0 outside (-2, 2), values in [0, 1]."""
    a = np.abs(np.asarray(xi, dtype=float))
    num = _h(2.0 - a)
    den = num + _h(a - 1.0)
    return num / den


PROJECTOR_KINDS = ("dyadic_N", "leq_N", "plus", "minus", "lo", "hi", "plus_hi", "zero_mode")


def _is_dyadic(N):
    if N is None:
        return False
    try:
        f = float(N)
    except (TypeError, ValueError):
        return False
    if not f > 0 or not np.isfinite(f):
        return False
    e = np.log2(f)
    return abs(e - round(e)) < 1e-12


def projector_symbol(kind: str, grid: Grid, N=None) -> np.ndarray:
    k = grid.k
    if kind in ("dyadic_N", "leq_N"):
        if not _is_dyadic(N):
            raise ConfigurationError(f"{kind} needs a dyadic N, got {N!r}")
        if kind == "leq_N":
            return psi(k / N)
        return psi(k / N) - psi(2 * k / N)
    if kind == "plus":
        return (k > 0).astype(float)
    if kind == "minus":
        return (k < 0).astype(float)
    if kind == "lo":
        return psi(k)
    if kind == "hi":
        return 1.0 - psi(k)
    if kind == "plus_hi":
        return (k > 0) * (1.0 - psi(k))
    if kind == "zero_mode":
        return (k == 0).astype(float)
    raise ConfigurationError(f"unknown projector kind {kind!r}")


def project(field: SpectralField, kind: str, N=None) -> SpectralField:
    """Apply a frequency projector.

    ``zero_mode`` returns the constant field carrying the mean of ``field``.
    """
    symbol = projector_symbol(kind, field.grid, N)
    real = field.real and kind not in ("plus", "minus", "plus_hi")
    return SpectralField(field.grid, field.coeffs * symbol, real)


# --- norms -----------------------------------------------------------------


def mean(field: SpectralField) -> float | complex:
    c0 = field.coeffs[0]
    return float(c0.real) if field.real else complex(c0)


def norm(field: SpectralField, space: str = "L2", p: float | None = None, s: float | None = None) -> float:
    """Norms ``L2``, ``Linf``, ``Lp`` (give ``p``) and ``Hs`` (give ``s``).

    ``Hs`` is ``sqrt(period * sum <k>^{2s} |c_k|^2)``; ``Lp`` uses the
    rectangle rule on the grid samples, exact for trigonometric polynomials
    of low enough degree.
    """
    grid = field.grid
    if space == "L2":
        s, space = 0.0, "Hs"
    if space == "Hs":
        if s is None:
            raise ConfigurationError("Hs norm needs s")
        w = (1.0 + grid.k**2) ** s
        return float(np.sqrt(grid.period * np.sum(w * np.abs(field.coeffs) ** 2)))
    values = np.abs(inverse_transform(field))
    if space == "Linf" or (space == "Lp" and p == np.inf):
        return float(values.max())
    if space == "Lp":
        if p is None or p < 1:
            raise ConfigurationError(f"Lp norm needs p in [1, inf], got {p}")
        return float((grid.spacing * np.sum(values**p)) ** (1.0 / p))
    raise ConfigurationError(f"unknown space {space!r}")


def hs_norm_coeffs(coeffs: np.ndarray, grid: Grid, s: float, axis: int = -1) -> np.ndarray:
    """Vectorized ``H^s`` norm over the last axis of a coefficient stack."""
    w = (1.0 + grid.k**2) ** s
    return np.sqrt(grid.period * np.sum(w * np.abs(coeffs) ** 2, axis=axis))
