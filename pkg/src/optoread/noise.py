"""Detector-input noise model: spectrum, autocorrelation, sampling.

The single-quadrature power spectral density at the heterodyne detector
input, in shot-noise units (photons/s/Hz), is a white floor plus a
Lorentzian of half-width gamma_t/2 from mechanical fluctuations imprinted
on the optical pump:

    S(w) = (1 + s_b)/2 + (G^2/4) s_t0 / (G^2/4 + w^2),      G = gamma_t

The corresponding autocorrelation is a delta of weight (1 + s_b)/2 plus a
continuous part (G s_t0 / 4) exp(-G|tau|/2) with G angular.  The sampler
realises exactly these statistics: independent white Gaussians of
per-sample variance (1 + s_b)/(2 dt) on each quadrature plus an
Ornstein-Uhlenbeck process discretised with its exact one-step conditional
law, so sampled statistics do not depend on dt below the resolution bound.

Note the delta-correlated part appears in raw traces as variance
proportional to 1/dt; integrated quantities are dt-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .statespace import QuadratureTrace

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class NoiseParams:
    """Measured noise levels at the detector input (shot-noise units)."""

    s_b: float      # white excess from pump phase noise
    s_t0: float     # on-resonance Lorentzian amplitude S_t(0)
    gamma_t: float  # Lorentzian full width = transducer bandwidth, Hz

    def __post_init__(self):
        if self.s_b < 0 or self.s_t0 < 0:
            raise ValueError("noise levels must be >= 0")
        if not self.gamma_t > 0:
            raise ValueError("gamma_t must be > 0")

    @property
    def white_weight(self):
        """Weight of the delta-correlated part, (1 + s_b)/2."""
        return 0.5 * (1.0 + self.s_b)


def output_spectrum(n: NoiseParams, omega):
    """Single-quadrature PSD at frequency omega (Hz in, even in omega)."""
    g2 = n.gamma_t * n.gamma_t / 4.0
    return n.white_weight + g2 * n.s_t0 / (g2 + np.asarray(omega) ** 2)


def autocorrelation(n: NoiseParams, tau):
    """Continuous part of the autocorrelation at lag tau (s).

    The delta contribution of weight ``n.white_weight`` is reported
    separately and not included here.
    """
    g = TWO_PI * n.gamma_t
    return (g * n.s_t0 / 4.0) * np.exp(-g * np.abs(np.asarray(tau)) / 2.0)


def max_sample_dt(n: NoiseParams):
    """Largest dt resolving the OU correlation time 2/gamma (angular)."""
    return 0.1 * 2.0 / (TWO_PI * n.gamma_t)


def _resolve_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_noise(n: NoiseParams, seed, dt, count):
    """Draw a stationary noise record of ``count`` samples per quadrature.

    Deterministic for a given seed; the stream order is fixed as
    (white I, white Q, OU I, OU Q).  The OU component starts from its
    stationary distribution, so no burn-in is needed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if dt > max_sample_dt(n) * (1.0 + 1e-12):
        raise ValueError(
            f"dt={dt:g} too coarse for gamma_t={n.gamma_t:g} Hz; "
            f"need dt <= {max_sample_dt(n):g}")
    rng = _resolve_rng(seed)
    white_std = math.sqrt(n.white_weight / dt)
    zi = rng.standard_normal(count) * white_std
    zq = rng.standard_normal(count) * white_std
    if n.s_t0 > 0.0:
        g = TWO_PI * n.gamma_t
        rho = math.exp(-g * dt / 2.0)
        sigma = math.sqrt(g * n.s_t0 / 4.0)
        for target in (zi, zq):
            z = rng.standard_normal(count)
            x0 = rng.standard_normal() * sigma
            target += _kernels.ou_exact(z, rho, sigma, x0)
    return QuadratureTrace(dt=dt, samples=np.column_stack([zi, zq]),
                           label="detector-noise")


def exp_kernel_integral(w, dt, gamma_t):
    """Trapezoid double integral of w(t)w(t')exp(-pi gamma_t |t-t'|) dt dt'.

    gamma_t is an ordinary frequency; the kernel decay rate is the angular
    gamma over two.
    """
    return _kernels.exp_kernel_quad(np.asarray(w, dtype=float), dt,
                                    TWO_PI * gamma_t)


def square_weight_noise_number(gamma_t, s_t0, s_b, t_int):
    """Closed-form added-noise number for constant weights on [0, t_int].

    Both quadrature weights constant; the double integral of the
    exponential kernel evaluates analytically and the weight magnitude
    cancels:  n_t = 2 s_t0 (1 - 2(1 - e^(-x/2))/x) + s_b, x = angular
    gamma_t times t_int.
    """
    x = TWO_PI * gamma_t * t_int
    return 2.0 * s_t0 * (1.0 - 2.0 * (1.0 - math.exp(-x / 2.0)) / x) + s_b


def s_t0_for_noise_target(w_i, w_q, dt, gamma_t, n_t_target, s_b=0.0):
    """Lorentzian amplitude that makes the filtered added noise hit a target.

    Inverts the weighted-double-integral expression for the added-noise
    number given matched-filter weights, so that the total transducer noise
    equals ``n_t_target`` for this filter.
    """
    if n_t_target < s_b:
        raise ValueError("n_t_target must be >= s_b")
    w_i = np.asarray(w_i, dtype=float)
    w_q = np.asarray(w_q, dtype=float)
    g_norm = 0.5 * (np.trapezoid(w_i * w_i, dx=dt)
                    + np.trapezoid(w_q * w_q, dx=dt))
    quad = (exp_kernel_integral(w_i, dt, gamma_t)
            + exp_kernel_integral(w_q, dt, gamma_t))
    if quad <= 0.0 or g_norm <= 0.0:
        raise ValueError("degenerate weights")
    return (n_t_target - s_b) * 4.0 * g_norm / (TWO_PI * gamma_t * quad)
