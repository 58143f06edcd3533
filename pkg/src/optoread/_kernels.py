"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

The jitted path is used by default when numba is importable.  Setting the
environment variable ``OPTOREAD_NO_NUMBA=1`` before import selects the
pure-numpy path instead (useful for debugging and as a dependency-light
fallback).  Both implementations of each kernel are exported so they can be
benchmarked against each other (see ``benchmarks/kernel_benchmark.py``).

Kernels:

* RK4 integration of the six-quadrature linear model, with constant
  (rotating-wave) or time-periodic (counter-rotating) drift matrix.
* Trapezoidal double integral of weight traces against the exponential
  autocorrelation kernel ``exp(-gamma |t - t'| / 2)``.
* Exact one-step Ornstein-Uhlenbeck recursion.

All rates passed to these kernels are angular (rad/s).
"""

import os

import numpy as np
from scipy.signal import lfilter, lfiltic

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("OPTOREAD_NO_NUMBA", "0") not in (
    "1",
    "true",
    "yes",
)


def backend():
    """Return the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# RK4 propagation, constant drift (rotating-wave approximation)
# ---------------------------------------------------------------------------

def _rk4_lti_numpy(a, b, u_half, x0, dt):
    """RK4 for x' = a x + b u(t) with u sampled on the half-step grid.

    u_half has shape (2n+1, n_in): entries 2k, 2k+1, 2k+2 are the drive at
    t_k, t_k + dt/2, t_k + dt.  Returns states of shape (n+1, n_state).
    """
    n = (u_half.shape[0] - 1) // 2
    x = np.empty((n + 1, a.shape[0]))
    x[0, :] = x0
    h = dt / 2.0
    for k in range(n):
        xk = x[k]
        bu0 = b @ u_half[2 * k]
        bum = b @ u_half[2 * k + 1]
        bu1 = b @ u_half[2 * k + 2]
        k1 = a @ xk + bu0
        k2 = a @ (xk + h * k1) + bum
        k3 = a @ (xk + h * k2) + bum
        k4 = a @ (xk + dt * k3) + bu1
        x[k + 1, :] = xk + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


# ---------------------------------------------------------------------------
# RK4 propagation with counter-rotating terms
# ---------------------------------------------------------------------------

def _counter_matvec(g_o, g_e, s, c, x, out):
    """out += A_counter(t) @ x for sin/cos values s, c of 2*omega_m*t."""
    out[0] += g_o * (c * x[5] - s * x[2])
    out[1] += g_e * (c * x[5] - s * x[2])
    out[2] += -g_o * s * x[0] - g_e * s * x[1] + g_o * c * x[3] + g_e * c * x[4]
    out[3] += g_o * (c * x[2] + s * x[5])
    out[4] += g_e * (c * x[2] + s * x[5])
    out[5] += g_o * c * x[0] + g_e * c * x[1] + g_o * s * x[3] + g_e * s * x[4]


def _rk4_counter_numpy(a_rwa, g_o, g_e, two_omega_m, b, u_half, x0, dt, t0):
    """RK4 for x' = (a_rwa + A_counter(t)) x + b u(t).

    g_o, g_e are the pump-enhanced coupling amplitudes and two_omega_m the
    counter-rotating oscillation rate, all angular.
    """
    n = (u_half.shape[0] - 1) // 2
    x = np.empty((n + 1, a_rwa.shape[0]))
    x[0, :] = x0
    h = dt / 2.0

    def rhs(t, xv, bu):
        out = a_rwa @ xv + bu
        ph = two_omega_m * t
        _counter_matvec(g_o, g_e, np.sin(ph), np.cos(ph), xv, out)
        return out

    for k in range(n):
        xk = x[k]
        tk = t0 + k * dt
        bu0 = b @ u_half[2 * k]
        bum = b @ u_half[2 * k + 1]
        bu1 = b @ u_half[2 * k + 2]
        k1 = rhs(tk, xk, bu0)
        k2 = rhs(tk + h, xk + h * k1, bum)
        k3 = rhs(tk + h, xk + h * k2, bum)
        k4 = rhs(tk + dt, xk + dt * k3, bu1)
        x[k + 1, :] = xk + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


# ---------------------------------------------------------------------------
# Exponential-kernel double integral
# ---------------------------------------------------------------------------

def _exp_kernel_quad_numpy(w, dt, gamma):
    """Trapezoid rule for the double integral of w(t) w(t') exp(-g|t-t'|/2).

    w is sampled on a uniform grid of spacing dt; gamma is angular.  Large
    grids are processed in row tiles to bound memory.
    """
    n = w.shape[0]
    cw = w * dt
    cw[0] *= 0.5
    cw[-1] *= 0.5
    rho = np.exp(-gamma * dt / 2.0)
    idx = np.arange(n)
    total = 0.0
    tile = 1024
    for start in range(0, n, tile):
        stop = min(start + tile, n)
        lag = np.abs(idx[start:stop, None] - idx[None, :])
        total += cw[start:stop] @ (rho ** lag) @ cw
    return total


def _exp_kernel_quad_loop(w, dt, gamma):
    """Loop form of the trapezoid double integral (jitted path)."""
    n = w.shape[0]
    cw = w * dt
    cw[0] *= 0.5
    cw[n - 1] *= 0.5
    rho = np.exp(-gamma * dt / 2.0)
    # diagonal plus twice the strict lower triangle, with rho**(i-j)
    # accumulated by running product to avoid N^2 exp evaluations
    total = 0.0
    for i in range(n):
        total += cw[i] * cw[i]
        r = 1.0
        acc = 0.0
        for j in range(i - 1, -1, -1):
            r *= rho
            acc += cw[j] * r
        total += 2.0 * cw[i] * acc
    return total


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck recursion
# ---------------------------------------------------------------------------

def _ou_exact_numpy(z, rho, sigma, x0):
    """x_k = rho x_{k-1} + sigma sqrt(1-rho^2) z_k, exact OU discretisation.

    z is a 1-D vector of standard normals; x0 is the stationary start value
    at index 0 (z[0] is unused).  Implemented as an AR(1) filter.
    """
    q = sigma * np.sqrt(1.0 - rho * rho)
    out = np.empty(z.shape[0])
    out[0] = x0
    zi = lfiltic([q], [1.0, -rho], [x0])
    out[1:] = lfilter([q], [1.0, -rho], z[1:], zi=zi)[0]
    return out


def _ou_exact_loop(z, rho, sigma, x0):
    """Loop form of the exact OU recursion (jitted path), 1-D streams."""
    n = z.shape[0]
    q = sigma * np.sqrt(1.0 - rho * rho)
    x = np.empty(n)
    x[0] = x0
    for k in range(1, n):
        x[k] = rho * x[k - 1] + q * z[k]
    return x


# ---------------------------------------------------------------------------
# Backend selection
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, fastmath=False)
    _rk4_lti_numba = _njit(_rk4_lti_numpy)
    _counter_matvec_numba = _njit(_counter_matvec)

    @numba.njit(cache=True)
    def _rk4_counter_numba(a_rwa, g_o, g_e, two_omega_m, b, u_half, x0, dt, t0):
        n = (u_half.shape[0] - 1) // 2
        m = a_rwa.shape[0]
        x = np.empty((n + 1, m))
        x[0] = x0
        h = dt / 2.0
        for k in range(n):
            xk = x[k]
            tk = t0 + k * dt
            bu0 = b @ u_half[2 * k]
            bum = b @ u_half[2 * k + 1]
            bu1 = b @ u_half[2 * k + 2]

            k1 = a_rwa @ xk + bu0
            ph = two_omega_m * tk
            _counter_matvec_numba(g_o, g_e, np.sin(ph), np.cos(ph), xk, k1)

            v = xk + h * k1
            k2 = a_rwa @ v + bum
            ph = two_omega_m * (tk + h)
            _counter_matvec_numba(g_o, g_e, np.sin(ph), np.cos(ph), v, k2)

            v = xk + h * k2
            k3 = a_rwa @ v + bum
            _counter_matvec_numba(g_o, g_e, np.sin(ph), np.cos(ph), v, k3)

            v = xk + dt * k3
            k4 = a_rwa @ v + bu1
            ph = two_omega_m * (tk + dt)
            _counter_matvec_numba(g_o, g_e, np.sin(ph), np.cos(ph), v, k4)

            x[k + 1] = xk + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return x

    _exp_kernel_quad_numba = _njit(_exp_kernel_quad_loop)
    _ou_exact_numba = _njit(_ou_exact_loop)


def rk4_lti(a, b, u_half, x0, dt):
    """Propagate the constant-drift model; see ``_rk4_lti_numpy``."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    u_half = np.ascontiguousarray(u_half, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    if USE_NUMBA:
        return _rk4_lti_numba(a, b, u_half, x0, float(dt))
    return _rk4_lti_numpy(a, b, u_half, x0, float(dt))


def rk4_counter(a_rwa, g_o, g_e, two_omega_m, b, u_half, x0, dt, t0=0.0):
    """Propagate with counter-rotating terms; see ``_rk4_counter_numpy``."""
    a_rwa = np.ascontiguousarray(a_rwa, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    u_half = np.ascontiguousarray(u_half, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    args = (a_rwa, float(g_o), float(g_e), float(two_omega_m), b, u_half, x0,
            float(dt), float(t0))
    if USE_NUMBA:
        return _rk4_counter_numba(*args)
    return _rk4_counter_numpy(*args)


def exp_kernel_quad(w, dt, gamma):
    """Double integral of w(t)w(t')exp(-gamma|t-t'|/2); gamma angular."""
    w = np.ascontiguousarray(w, dtype=float)
    if USE_NUMBA:
        return _exp_kernel_quad_numba(w, float(dt), float(gamma))
    return _exp_kernel_quad_numpy(w, float(dt), float(gamma))


def ou_exact(z, rho, sigma, x0):
    """Exact-discretisation OU path from standard normals z (1-D)."""
    z = np.ascontiguousarray(z, dtype=float)
    if USE_NUMBA:
        return _ou_exact_numba(z, float(rho), float(sigma), float(x0))
    return _ou_exact_numpy(z, float(rho), float(sigma), float(x0))
