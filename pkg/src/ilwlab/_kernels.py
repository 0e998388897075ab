"""Lattice convolution kernels for the normal-form operators.

Two interchangeable backends compute the same sums:

* ``numba``: explicit loops compiled with ``@njit``, skipping zero inputs;
* ``numpy``: broadcasting over the nonzero input frequencies followed by a
  ``bincount`` scatter.

The numba path is used when numba imports and ``ILWLAB_DISABLE_NUMBA`` is
unset (or ``0``). Both are always importable so they can be cross-checked.

Variant codes
-------------
bilinear:  0 full, 1 leq_M, 2 gt_M, 3 zero
trilinear: 0 n2_1, 1 n2_leqM, 2 n2_2, 3 n2_0_1, 4 n2_0_2

``shells`` is a float array ``(N1, N2, N3, N12, N23)``; a 0 entry means the
corresponding dyadic factor is absent (identically 1).
"""

import os

import numpy as np

from .spectral import psi as _psi_np

BILINEAR_CODES = {"full": 0, "leq_M": 1, "gt_M": 2, "zero": 3}
TRILINEAR_CODES = {"n2_1": 0, "n2_leqM": 1, "n2_2": 2, "n2_0_1": 3, "n2_0_2": 4}


def _numba_requested():
    flag = os.environ.get("ILWLAB_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

BACKEND = "numba" if (HAS_NUMBA and _numba_requested()) else "numpy"


# --- numpy backend -------------------------------------------------------------


def _psi_shell_np(x, N):
    if N == 0:
        return np.ones(np.shape(x))
    x = np.asarray(x, dtype=float)
    return _psi_np(x / N) - _psi_np(2.0 * x / N)


def _omega_np(a, b, c):
    return (a * np.abs(a) - b * np.abs(b) - c * np.abs(c)).astype(float)


def _sigma_np(xi, x1, x2):
    return (xi >= 1) & (x1 >= 1) & (x2 < 0)


def _scatter(n, xi, values):
    slots = np.mod(xi, n).ravel()
    v = values.ravel()
    re = np.bincount(slots, weights=v.real, minlength=n)
    im = np.bincount(slots, weights=v.imag, minlength=n)
    return re + 1j * im


def bilinear_symbol_np(code, xi, x1, x2, M, t, N1=0.0, N2=0.0):
    """Vectorized bilinear symbol, ``e^{-it Omega}`` included."""
    xi = np.asarray(xi)
    om = _omega_np(xi, x1, x2)
    sig = _sigma_np(xi, x1, x2)
    safe_x1 = np.where(x1 == 0, 1, x1).astype(float)
    if code == 3:
        m = np.where(sig & (np.abs(om) > M), 1.0 / safe_x1, 0.0) + 0j
    else:
        m = np.where(sig, -2j * xi * x2 / safe_x1, 0.0)
        if code == 1:
            m = np.where(np.abs(om) <= M, m, 0.0)
        elif code == 2:
            m = np.where(np.abs(om) > M, m, 0.0)
    m = m * _psi_shell_np(x1, N1) * _psi_shell_np(x2, N2)
    return m * np.exp(-1j * t * om)


def bilinear_np(code, u1, u2, idx, M, t, shells):
    n = u1.shape[0]
    half = n // 2
    i1 = np.flatnonzero(u1)
    i2 = np.flatnonzero(u2)
    out = np.zeros(n, dtype=complex)
    if i1.size == 0 or i2.size == 0:
        return out
    x1 = idx[i1][:, None]
    x2 = idx[i2][None, :]
    xi = x1 + x2
    inside = (xi >= -half) & (xi < half)
    sym = bilinear_symbol_np(code, xi, x1, x2, M, t, shells[0], shells[1])
    vals = np.where(inside, sym * u1[i1][:, None] * u2[i2][None, :], 0.0)
    return _scatter(n, np.where(inside, xi, 0), vals)


def trilinear_symbol_np(code, xi, x1, x2, x3, M, t, shells):
    """Vectorized trilinear symbol; returns ``(values, bad)``.

    ``bad`` flags retained points whose divisor vanishes (must never happen).
    """
    N1, N2, N3, N12, N23 = shells
    prod_psi = _psi_shell_np(x1, N1) * _psi_shell_np(x2, N2) * _psi_shell_np(x3, N3)
    safe_x1 = np.where(x1 == 0, 1, x1).astype(float)
    if code in (0, 3):
        x12 = x1 + x2
        om_a = _omega_np(xi, x12, x3)
        om = om_a + _omega_np(x12, x1, x2)
        keep = (np.abs(om_a) > M) & _sigma_np(xi, x12, x3) & _sigma_np(x12, x1, x2)
        m = np.where(keep, -2j * x2 / safe_x1, 0.0) * _psi_shell_np(x12, N12) * prod_psi
    else:
        x23 = x2 + x3
        x12 = x1 + x2
        om_a = _omega_np(xi, x1, x23)
        om = om_a + _omega_np(x23, x2, x3)
        keep = (np.abs(om_a) > M) & _sigma_np(xi, x1, x23)
        low = (np.abs(x12) <= 1) | (np.abs(om) <= M)
        keep = keep & (low if code == 1 else ~low)
        m = np.where(keep, x23 / safe_x1, 0.0) * _psi_shell_np(x23, N23) * prod_psi + 0j
        if code in (1, 2):
            m = -1j * m
    bad = np.zeros(np.shape(m), dtype=bool)
    if code in (3, 4):
        bad = (m != 0) & (om == 0)
        m = m / np.where(om == 0, 1.0, -1j * om)
    return m * np.exp(-1j * t * om), bad


def trilinear_np(code, u1, u2, u3, idx, M, t, shells):
    n = u1.shape[0]
    half = n // 2
    i1, i2, i3 = np.flatnonzero(u1), np.flatnonzero(u2), np.flatnonzero(u3)
    out = np.zeros(n, dtype=complex)
    if i1.size == 0 or i2.size == 0 or i3.size == 0:
        return out, False
    x1 = idx[i1][:, None, None]
    x2 = idx[i2][None, :, None]
    x3 = idx[i3][None, None, :]
    xi = x1 + x2 + x3
    inside = (xi >= -half) & (xi < half)
    sym, bad = trilinear_symbol_np(code, xi, x1, x2, x3, M, t, shells)
    vals = sym * (u1[i1][:, None, None] * u2[i2][None, :, None] * u3[i3][None, None, :])
    vals = np.where(inside, vals, 0.0)
    out = _scatter(n, np.where(inside, xi, 0), vals)
    return out, bool(np.any(bad & inside))


# --- numba backend -------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _h_nb(t):
        if t > 0.0:
            return np.exp(-1.0 / t)
        return 0.0

    @njit(cache=True)
    def _psi_nb(x):
        a = abs(x)
        num = _h_nb(2.0 - a)
        return num / (num + _h_nb(a - 1.0))

    @njit(cache=True)
    def _psi_shell_nb(x, N):
        if N == 0.0:
            return 1.0
        return _psi_nb(x / N) - _psi_nb(2.0 * x / N)

    @njit(cache=True)
    def _omega_nb(a, b, c):
        return float(a * abs(a) - b * abs(b) - c * abs(c))

    @njit(cache=True)
    def _bilinear_symbol_nb(code, xi, x1, x2, M, t, N1, N2):
        if not (xi >= 1 and x1 >= 1 and x2 < 0):
            return 0j
        om = _omega_nb(xi, x1, x2)
        if code == 3:
            if abs(om) <= M:
                return 0j
            m = 1.0 / x1 + 0j
        else:
            if code == 1 and abs(om) > M:
                return 0j
            if code == 2 and abs(om) <= M:
                return 0j
            m = -2j * xi * x2 / x1
        m *= _psi_shell_nb(float(x1), N1) * _psi_shell_nb(float(x2), N2)
        return m * np.exp(-1j * t * om)

    @njit(cache=True)
    def bilinear_nb(code, u1, u2, idx, M, t, shells):
        n = u1.shape[0]
        half = n // 2
        out = np.zeros(n, dtype=np.complex128)
        for i in range(n):
            a = u1[i]
            if a == 0:
                continue
            x1 = idx[i]
            for j in range(n):
                b = u2[j]
                if b == 0:
                    continue
                x2 = idx[j]
                xi = x1 + x2
                if xi < -half or xi >= half:
                    continue
                k = _bilinear_symbol_nb(code, xi, x1, x2, M, t, shells[0], shells[1])
                if k != 0:
                    out[xi % n] += k * a * b
        return out

    @njit(cache=True)
    def _sigma_nb(xi, x1, x2):
        return xi >= 1 and x1 >= 1 and x2 < 0

    @njit(cache=True)
    def _trilinear_symbol_nb(code, xi, x1, x2, x3, M, t, shells):
        # returns (value, bad) with bad = zero divisor on the support
        if code == 0 or code == 3:
            x12 = x1 + x2
            om_a = _omega_nb(xi, x12, x3)
            if not (abs(om_a) > M and _sigma_nb(xi, x12, x3) and _sigma_nb(x12, x1, x2)):
                return 0j, False
            om = om_a + _omega_nb(x12, x1, x2)
            m = -2j * x2 / x1 * _psi_shell_nb(float(x12), shells[3])
        else:
            x23 = x2 + x3
            om_a = _omega_nb(xi, x1, x23)
            if not (abs(om_a) > M and _sigma_nb(xi, x1, x23)):
                return 0j, False
            om = om_a + _omega_nb(x23, x2, x3)
            low = abs(x1 + x2) <= 1 or abs(om) <= M
            if code == 1 and not low:
                return 0j, False
            if code != 1 and low:
                return 0j, False
            m = (x23 / x1) * _psi_shell_nb(float(x23), shells[4]) + 0j
            if code == 1 or code == 2:
                m = -1j * m
        m *= (
            _psi_shell_nb(float(x1), shells[0])
            * _psi_shell_nb(float(x2), shells[1])
            * _psi_shell_nb(float(x3), shells[2])
        )
        if code == 3 or code == 4:
            if om == 0.0:
                return 0j, m != 0
            m = m / (-1j * om)
        return m * np.exp(-1j * t * om), False

    @njit(cache=True)
    def trilinear_nb(code, u1, u2, u3, idx, M, t, shells):
        n = u1.shape[0]
        half = n // 2
        out = np.zeros(n, dtype=np.complex128)
        bad = False
        for i in range(n):
            a = u1[i]
            if a == 0:
                continue
            x1 = idx[i]
            for j in range(n):
                b = u2[j]
                if b == 0:
                    continue
                x2 = idx[j]
                ab = a * b
                for l in range(n):
                    c = u3[l]
                    if c == 0:
                        continue
                    x3 = idx[l]
                    xi = x1 + x2 + x3
                    if xi < -half or xi >= half:
                        continue
                    k, flag = _trilinear_symbol_nb(code, xi, x1, x2, x3, M, t, shells)
                    if flag:
                        bad = True
                    if k != 0:
                        out[xi % n] += k * ab * c
        return out, bad


def bilinear(code, u1, u2, idx, M, t, shells, backend=None):
    backend = backend or BACKEND
    shells = np.asarray(shells, dtype=np.float64)
    if backend == "numba":
        return bilinear_nb(code, u1, u2, idx, float(M), float(t), shells)
    return bilinear_np(code, u1, u2, idx, float(M), float(t), shells)


def trilinear(code, u1, u2, u3, idx, M, t, shells, backend=None):
    backend = backend or BACKEND
    shells = np.asarray(shells, dtype=np.float64)
    if backend == "numba":
        return trilinear_nb(code, u1, u2, u3, idx, float(M), float(t), shells)
    return trilinear_np(code, u1, u2, u3, idx, float(M), float(t), shells)
