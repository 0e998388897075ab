"""Periodic gauge transform and diagnostics for gauged trajectories.

Pipeline for a real, mean-zero ``v`` on the torus::

    F = d/dx^{-1} v,      w = d/dx P_+ exp(iF),      z = w exp(i gamma(t))

with ``gamma(t) = int_0^t mean(v^2)``. ``w`` satisfies

    w_t - H w_xx = -2 d/dx P_+ (d/dx^{-1} w * P_- v_x)
                   + i d/dx P_+ (exp(iF) R v) - i mean(v^2) w

where ``R`` is the operator whose derivative is the smoothing perturbation
of the evolution equation (``R = 0`` for BO).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, RangeError
from .evolution import Trajectory, conjugate_trajectory
from .spectral import (
    Grid,
    SpectralField,
    coth_minus_sign,
    from_padded,
    hs_norm_coeffs,
    to_padded,
)

__all__ = [
    "GaugeState",
    "READINGS",
    "mean_normalize",
    "normalize_trajectory",
    "primitive",
    "exp_iF",
    "gauge_w",
    "gauge_state",
    "gauge_trajectory",
    "gamma_integral",
    "gauge_z",
    "perturbation_operator",
    "gauged_rhs",
    "gauged_residual",
    "ResidualReport",
    "smoothing_deficit",
    "error_E1",
    "error_E2",
    "error_E3",
    "error_E4",
]

log = logging.getLogger(__name__)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

MEAN_TOL = 1e-12
PAD_FACTOR = 2
READINGS = ("q_effective", "literal")
RHS_TERMS = ("transport", "perturbation", "phase")


@dataclass(frozen=True)
class GaugeState:
    v: SpectralField
    F: SpectralField
    w: SpectralField
    gamma: float = 0.0
    m0: float = 0.0


def _grid_of(obj) -> Grid:
    return obj.grid


def mean_normalize(u0: SpectralField):
    """Remove the mean of ``u0``.

    Returns ``(v0, drift_velocity, mean_shift)``. A solution ``u`` with mean
    ``c`` maps to a mean-zero solution through
    ``v(t, x) = u(t, x - drift_velocity * t) - mean_shift`` with
    ``drift_velocity = 2c``.
    """
    if not u0.real:
        raise PreconditionError("mean_normalize expects a real field")
    c = float(u0.coeffs[0].real)
    coeffs = u0.coeffs.copy()
    coeffs[0] = 0.0
    return SpectralField(u0.grid, coeffs, True), 2.0 * c, c


def normalize_trajectory(traj: Trajectory) -> Trajectory:
    """Apply the mean-removing change of frame to every snapshot."""
    grid = traj.grid
    c = float(traj.coeffs[0, 0].real)
    coeffs = traj.coeffs.copy()
    if c != 0.0:
        phases = np.exp(-1j * np.outer(traj.times, grid.k) * (2.0 * c))
        phases[:, grid.nyquist] = phases[:, grid.nyquist].real
        coeffs *= phases
    coeffs[:, 0] = 0.0
    return traj.with_coeffs(coeffs)


def _inv_ik(grid: Grid) -> np.ndarray:
    out = np.zeros(grid.n_modes, dtype=complex)
    nz = grid.k != 0
    out[nz] = 1.0 / (1j * grid.k[nz])
    out[grid.nyquist] = 0.0
    return out


def _check_mean_zero(coeffs, grid):
    scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
    m = np.abs(coeffs[..., 0])
    if np.any(m > MEAN_TOL * scale):
        raise PreconditionError(
            f"primitive needs a mean-zero field, mean = {float(np.max(m)):.3e}"
        )


def primitive(v: SpectralField) -> SpectralField:
    """Mean-zero primitive: ``c_0(F) = 0``, ``c_n(F) = c_n(v) / (i k_n)``."""
    _check_mean_zero(v.coeffs, v.grid)
    return SpectralField(v.grid, v.coeffs * _inv_ik(v.grid), v.real)


def _padded_size(grid: Grid, pad: int) -> int:
    return int(pad) * grid.n_modes


def exp_iF(F_coeffs: np.ndarray, grid: Grid, pad: int = PAD_FACTOR) -> np.ndarray:
    """Lattice coefficients of ``exp(iF)`` (exponential taken on a padded grid)."""
    samples = to_padded(F_coeffs, grid, _padded_size(grid, pad)).real
    return from_padded(np.exp(1j * samples), grid)


def _plus(grid):
    return (grid.k > 0).astype(float)


def _minus(grid):
    return (grid.k < 0).astype(float)


def _w_from_G(G, grid):
    return 1j * grid.k * _plus(grid) * G


def gauge_w(v: SpectralField, pad: int = PAD_FACTOR) -> SpectralField:
    """``w = d/dx P_+ exp(iF)`` with ``F`` the mean-zero primitive of ``v``."""
    F = primitive(v)
    G = exp_iF(F.coeffs, v.grid, pad)
    return SpectralField(v.grid, _w_from_G(G, v.grid), False)


def gauge_state(v: SpectralField, m0: float | None = None) -> GaugeState:
    F = primitive(v)
    w = SpectralField(v.grid, _w_from_G(exp_iF(F.coeffs, v.grid), v.grid), False)
    if m0 is None:
        m0 = float(np.sum(np.abs(v.coeffs) ** 2))
    return GaugeState(v=v, F=F, w=w, gamma=0.0, m0=m0)


def gauge_trajectory(traj_v: Trajectory, pad: int = PAD_FACTOR) -> Trajectory:
    """Gauge every snapshot; returns a (complex) trajectory of ``w``."""
    grid = traj_v.grid
    _check_mean_zero(traj_v.coeffs, grid)
    F = traj_v.coeffs * _inv_ik(grid)
    G = exp_iF(F, grid, pad)
    return traj_v.with_coeffs(_w_from_G(G, grid), real=False)


def _mean_square(traj_v: Trajectory) -> np.ndarray:
    # mean of v^2 is sum |c_n|^2 by Parseval
    return np.sum(np.abs(traj_v.coeffs) ** 2, axis=1)


def gamma_integral(traj_v: Trajectory, t: float) -> float:
    """Trapezoid approximation of ``int_0^t mean(v^2) dt'`` on the snapshots."""
    times = traj_v.times
    if len(times) == 0:
        raise RangeError("empty trajectory")
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12 * max(1.0, times[-1]):
        raise RangeError(f"t={t} outside [{times[0]}, {times[-1]}]")
    g = _mean_square(traj_v)
    j = int(np.searchsorted(times, t, side="right")) - 1
    j = min(max(j, 0), len(times) - 1)
    total = float(_trapezoid(g[: j + 1], times[: j + 1])) if j > 0 else 0.0
    if j < len(times) - 1 and t > times[j]:
        # partial interval, linear interpolation of the integrand
        theta = (t - times[j]) / (times[j + 1] - times[j])
        g_t = (1 - theta) * g[j] + theta * g[j + 1]
        total += 0.5 * (g[j] + g_t) * (t - times[j])
    return total


def _gamma_series(traj_v: Trajectory) -> np.ndarray:
    g = _mean_square(traj_v)
    dt = np.diff(traj_v.times)
    return np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * dt)])


def gauge_z(traj_v: Trajectory) -> Trajectory:
    """``z = w exp(i gamma(t))`` snapshot by snapshot."""
    w = gauge_trajectory(traj_v)
    phase = np.exp(1j * _gamma_series(traj_v))
    return w.with_coeffs(w.coeffs * phase[:, None])


def perturbation_operator(grid: Grid, delta: float | None, reading: str) -> np.ndarray:
    """Symbol of ``R`` in the ``i d/dx P_+(exp(iF) R v)`` term.

    ``q_effective``: ``R = Q_delta d/dx`` (symbol ``k (coth(delta k) - sgn k)``),
    which is the reading whose derivative is the perturbation produced by the
    Galilean change of frame. ``literal``: ``R = Q_delta`` (symbol
    ``-i (coth(delta k) - sgn k)``).
    """
    if reading not in READINGS:
        raise PreconditionError(f"unknown reading {reading!r}")
    if delta is None or np.isinf(delta):
        return np.zeros(grid.n_modes, dtype=complex)
    x = np.where(grid.k == 0, 0.0, delta * grid.k)
    gap = coth_minus_sign(x)
    if reading == "literal":
        return -1j * gap
    out = grid.k * gap + 0j
    out[grid.k == 0] = 1.0 / delta
    return out


def _products(a_coeffs, b_coeffs, grid, pad=PAD_FACTOR):
    m = _padded_size(grid, pad)
    return from_padded(to_padded(a_coeffs, grid, m) * to_padded(b_coeffs, grid, m), grid)


def gauged_rhs(v_coeffs, grid: Grid, delta=None, reading="q_effective", pad=PAD_FACTOR):
    """Right-hand-side terms of the gauged equation for a snapshot stack.

    Returns ``(w, terms)`` where ``terms`` maps ``transport``,
    ``perturbation`` and ``phase`` to coefficient arrays.
    """
    v_coeffs = np.atleast_2d(v_coeffs)
    ik = 1j * grid.k
    plus = _plus(grid)
    m = _padded_size(grid, pad)
    F = v_coeffs * _inv_ik(grid)
    F_phys = to_padded(F, grid, m).real
    eiF = np.exp(1j * F_phys)
    G = from_padded(eiF, grid)
    w = ik * plus * G
    # d/dx^{-1} w = P_+ exp(iF) on the torus
    transport = -2.0 * ik * plus * _products(plus * G, ik * _minus(grid) * v_coeffs, grid, pad)
    R = perturbation_operator(grid, delta, reading)
    Rv_phys = to_padded(R * v_coeffs, grid, m)
    perturbation = 1j * ik * plus * from_padded(eiF * Rv_phys, grid)
    msq = np.sum(np.abs(v_coeffs) ** 2, axis=1)
    phase = -1j * msq[:, None] * w
    return w, {"transport": transport, "perturbation": perturbation, "phase": phase}


@dataclass(frozen=True)
class ResidualReport:
    """Normalized ``H^{-1}`` residuals of the gauged equation per reading."""

    times: np.ndarray
    residuals: dict
    canonical: str
    dropped: tuple = ()
    term_norms: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals[self.canonical]))

    def series(self, reading=None) -> np.ndarray:
        return self.residuals[reading or self.canonical]


def _source_frame(traj: Trajectory):
    """Mean-zero, BO-frame snapshots and the depth for the perturbation."""
    cfg = traj.config
    base = cfg.base_equation
    delta = cfg.delta if base in ("ilw", "bo_perturbed") else None
    if base == "ilw":
        traj = conjugate_trajectory(traj, cfg.delta)
    elif base not in ("bo", "bo_perturbed"):
        raise PreconditionError(f"gauged residual is defined for ilw/bo/bo_perturbed, not {base}")
    return normalize_trajectory(traj), delta


def gauged_residual(
    traj_v: Trajectory,
    drop: tuple | str = (),
    readings=READINGS,
    pad: int = PAD_FACTOR,
) -> ResidualReport:
    """Residual of the gauged equation along a trajectory.

    ``d/dt w`` is approximated by centered differences between snapshots, so
    only interior snapshots carry a residual. ``drop`` removes right-hand-side
    terms (``transport``, ``perturbation``, ``phase``) to show that each one
    matters. ILW trajectories are moved to the BO frame first; non-zero means
    are removed by :func:`normalize_trajectory`.
    """
    if len(traj_v) < 3:
        raise PreconditionError("gauged_residual needs at least 3 snapshots")
    if isinstance(drop, str):
        drop = (drop,)
    for name in drop:
        if name not in RHS_TERMS:
            raise PreconditionError(f"unknown right-hand-side term {name!r}")
    traj, delta = _source_frame(traj_v)
    grid = traj.grid
    times = traj.times
    linear = 1j * grid.k * np.abs(grid.k)
    residuals = {}
    term_norms = {}
    for reading in readings:
        w, terms = gauged_rhs(traj.coeffs, grid, delta, reading, pad)
        dwdt = (w[2:] - w[:-2]) / (times[2:] - times[:-2])[:, None]
        rhs = sum(terms[name][1:-1] for name in RHS_TERMS if name not in drop)
        res = dwdt - linear * w[1:-1] - rhs
        scale = hs_norm_coeffs(w[1:-1], grid, -1.0) + 1.0
        residuals[reading] = hs_norm_coeffs(res, grid, -1.0) / scale
        term_norms[reading] = {
            name: float(np.max(hs_norm_coeffs(terms[name][1:-1], grid, -1.0) / scale))
            for name in RHS_TERMS
        }
    canonical = min(residuals, key=lambda r: float(np.max(residuals[r])))
    log.debug("gauged residual readings: %s", {r: float(np.max(v)) for r, v in residuals.items()})
    return ResidualReport(times[1:-1].copy(), residuals, canonical, tuple(drop), term_norms)


def smoothing_deficit(traj_v: Trajectory, s: float, eps: float) -> np.ndarray:
    """``||w(t) - Phi(t) w(0)||_{H^{s+eps}}`` for every snapshot.

    ``Phi(t)`` multiplies positive frequencies by ``exp(i t k^2 - i t m0)``
    with ``m0 = mean(v(0)^2)``, the free flow of the gauged equation.
    """
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    traj, _ = _source_frame(traj_v)
    grid = traj.grid
    w = gauge_trajectory(traj)
    m0 = float(np.sum(np.abs(traj.coeffs[0]) ** 2))
    times = traj.times
    phase = np.exp(1j * np.outer(times, grid.k**2) - 1j * m0 * times[:, None])
    free = phase * w.coeffs[0][None, :]
    return hs_norm_coeffs(w.coeffs - free, grid, s + eps)


# --- error terms of the gauged equations --------------------------------------


def _lo(grid):
    from .spectral import psi

    return psi(grid.k)


def error_E1(f: SpectralField, g: SpectralField) -> SpectralField:
    """``-2 d/dx P_{+,hi}[(P_lo f)(P_- d/dx g)]``."""
    grid = f.grid
    ik = 1j * grid.k
    lo = _lo(grid)
    plus_hi = _plus(grid) * (1.0 - lo)
    prod = _products(lo * f.coeffs, _minus(grid) * ik * g.coeffs, grid)
    return SpectralField(grid, -2.0 * ik * plus_hi * prod, False)


def error_E2(f: SpectralField, g: SpectralField, delta: float, reading="literal") -> SpectralField:
    """``i d/dx P_{+,hi}[f Q_delta g]`` (``reading`` selects Q_delta vs Q_delta d/dx)."""
    grid = f.grid
    ik = 1j * grid.k
    plus_hi = _plus(grid) * (1.0 - _lo(grid))
    R = perturbation_operator(grid, delta, reading)
    prod = _products(f.coeffs, R * g.coeffs, grid)
    return SpectralField(grid, 1j * ik * plus_hi * prod, False)


def error_E3(f: SpectralField, g: SpectralField) -> SpectralField:
    """``-2 P_+ P_lo (d/dx^{-1} f * P_- d/dx g)``."""
    grid = f.grid
    ik = 1j * grid.k
    prod = _products(_inv_ik(grid) * f.coeffs, _minus(grid) * ik * g.coeffs, grid)
    return SpectralField(grid, -2.0 * _plus(grid) * _lo(grid) * prod, False)


def error_E4(f: SpectralField, g: SpectralField, delta: float, reading="literal") -> SpectralField:
    """``i d/dx P_+ (f Q_delta g)``."""
    grid = f.grid
    ik = 1j * grid.k
    R = perturbation_operator(grid, delta, reading)
    prod = _products(f.coeffs, R * g.coeffs, grid)
    return SpectralField(grid, 1j * ik * _plus(grid) * prod, False)
