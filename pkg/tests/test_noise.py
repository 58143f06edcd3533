import math

import numpy as np
import pytest
from scipy.signal import welch

from optoread.noise import (NoiseParams, autocorrelation,
                            exp_kernel_integral, max_sample_dt,
                            output_spectrum, s_t0_for_noise_target,
                            sample_noise, square_weight_noise_number)

TWO_PI = 2.0 * math.pi

NP = NoiseParams(s_b=0.3, s_t0=2.0, gamma_t=1000.0)


class TestSpectrum:
    def test_on_resonance(self):
        assert output_spectrum(NP, 0.0) == pytest.approx(
            0.5 * (1 + NP.s_b) + NP.s_t0, rel=1e-12)

    def test_white_floor(self):
        assert output_spectrum(NP, 1e9) == pytest.approx(
            0.5 * (1 + NP.s_b), rel=1e-6)

    def test_even_and_bounded(self):
        f = np.geomspace(1.0, 1e6, 50)
        np.testing.assert_allclose(output_spectrum(NP, f),
                                   output_spectrum(NP, -f), rtol=1e-13)
        assert np.all(output_spectrum(NP, f) >= 0.5)


class TestAutocorrelation:
    def test_zero_lag_continuous_part(self):
        expect = TWO_PI * NP.gamma_t * NP.s_t0 / 4.0
        assert autocorrelation(NP, 0.0) == pytest.approx(expect, rel=1e-12)
        assert NP.white_weight == pytest.approx(0.5 * (1 + NP.s_b))

    def test_fourier_transform_recovers_lorentzian(self):
        # quadrature oracle: 2 int_0^T C(tau) cos(w tau) dtau
        tau = np.arange(0.0, 12e-3, 5e-7)
        c = autocorrelation(NP, tau)
        for f in (0.0, 300.0, 1000.0, 4000.0):
            w = TWO_PI * f
            num = 2.0 * np.trapezoid(c * np.cos(w * tau), tau)
            lorentzian = output_spectrum(NP, f) - NP.white_weight
            assert num == pytest.approx(lorentzian, rel=5e-3)

    def test_white_only(self):
        n = NoiseParams(s_b=0.1, s_t0=0.0, gamma_t=1000.0)
        assert autocorrelation(n, 0.0) == 0.0
        assert autocorrelation(n, 1e-3) == 0.0


class TestSampler:
    def test_deterministic(self):
        a = sample_noise(NP, 99, 1e-5, 4096)
        b = sample_noise(NP, 99, 1e-5, 4096)
        assert np.array_equal(a.samples, b.samples)
        c = sample_noise(NP, 100, 1e-5, 4096)
        assert not np.array_equal(a.samples, c.samples)

    def test_step_size_precondition(self):
        with pytest.raises(ValueError, match="too coarse"):
            sample_noise(NP, 1, 10.0 * max_sample_dt(NP), 100)

    def test_white_variance(self):
        n = NoiseParams(s_b=0.0, s_t0=0.0, gamma_t=1000.0)
        dt = 1e-5
        tr = sample_noise(n, 5, dt, 10 ** 6)
        expect = 0.5 / dt
        for x in (tr.i, tr.q):
            var = x.var()
            se = expect * math.sqrt(2.0 / x.size)
            assert abs(var - expect) < 3 * se

    def test_autocovariance_matches_kernel(self):
        dt = 1e-5
        tr = sample_noise(NP, 31, dt, 400_000)
        x = tr.i.reshape(80, -1)
        for lag in (1, 4, 16):
            prods = x[:, :-lag] * x[:, lag:]
            per_seg = prods.mean(axis=1)
            emp = per_seg.mean()
            se = per_seg.std(ddof=1) / math.sqrt(per_seg.size)
            theory = autocorrelation(NP, lag * dt)
            assert abs(emp - theory) < 3 * se

    def test_quadratures_uncorrelated(self):
        dt = 1e-5
        tr = sample_noise(NP, 17, dt, 400_000)
        xi = tr.i.reshape(80, -1)
        xq = tr.q.reshape(80, -1)
        for lag in (0, 3, 11):
            if lag:
                prods = xi[:, :-lag] * xq[:, lag:]
            else:
                prods = xi * xq
            per_seg = prods.mean(axis=1)
            emp = per_seg.mean()
            se = per_seg.std(ddof=1) / math.sqrt(per_seg.size)
            assert abs(emp) < 3 * se

    def test_statistics_dt_independent(self):
        # exact OU discretisation: the autocovariance at a fixed physical
        # lag does not depend on the step below the resolution bound
        tau_star = 2e-4
        for seed, dt in ((21, 1e-5), (22, 2e-5)):
            tr = sample_noise(NP, seed, dt, 300_000)
            lag = int(round(tau_star / dt))
            x = tr.i.reshape(60, -1)
            prods = x[:, :-lag] * x[:, lag:]
            per_seg = prods.mean(axis=1)
            emp = per_seg.mean()
            se = per_seg.std(ddof=1) / math.sqrt(per_seg.size)
            assert abs(emp - autocorrelation(NP, tau_star)) < 3 * se

    def test_periodogram_matches_spectrum(self):
        # averaged two-sided Welch periodogram of both quadratures,
        # band-averaged and compared pointwise on [0, 5 gamma_t]
        dt = 1e-5
        tr = sample_noise(NP, 2024, dt, 2 ** 20)
        psds = []
        for x in (tr.i, tr.q):
            f, psd = welch(x, fs=1.0 / dt, window="hann", nperseg=4096,
                           return_onesided=False, detrend=False)
            psds.append(np.fft.fftshift(psd))
        f = np.fft.fftshift(f)
        psd = 0.5 * (psds[0] + psds[1])
        sel = (f >= 0) & (f <= 5 * NP.gamma_t)
        fb, pb = f[sel], psd[sel]
        nb = fb.size // 16 * 16
        emp = pb[:nb].reshape(-1, 16).mean(axis=1)
        theory = output_spectrum(NP, fb[:nb]).reshape(-1, 16).mean(axis=1)
        assert np.max(np.abs(emp - theory) / theory) < 0.05


class TestNoiseNumberHelpers:
    def test_exp_kernel_integral_against_matrix_oracle(self):
        rng = np.random.default_rng(8)
        w = rng.standard_normal(300)
        dt, gamma_t = 2e-6, 3000.0
        got = exp_kernel_integral(w, dt, gamma_t)
        t = np.arange(w.size) * dt
        kern = np.exp(-TWO_PI * gamma_t * np.abs(t[:, None] - t[None, :])
                      / 2.0)
        cw = w * dt
        cw[0] *= 0.5
        cw[-1] *= 0.5
        oracle = cw @ kern @ cw
        assert got == pytest.approx(oracle, rel=1e-10)

    def test_square_weight_closed_form(self):
        t_int, gamma_t, s_t0, s_b = 1e-3, 2000.0, 1.7, 0.2
        closed = square_weight_noise_number(gamma_t, s_t0, s_b, t_int)
        # numeric double integral with constant weights
        n = 2000
        dt = t_int / n
        w = np.ones(n + 1)
        quad = 2.0 * exp_kernel_integral(w, dt, gamma_t)
        g_norm = 0.5 * 2.0 * np.trapezoid(w * w, dx=dt)
        numeric = (TWO_PI * gamma_t * s_t0 / (4 * g_norm)) * quad + s_b
        assert closed == pytest.approx(numeric, rel=1e-4)

    def test_square_weight_long_window_limit(self):
        # gamma_t * t_int >> 1 drives the added noise to 2 s_t0 + s_b
        val = square_weight_noise_number(5e4, 1.7, 0.2, 1.0)
        assert val == pytest.approx(2 * 1.7 + 0.2, rel=1e-4)

    def test_s_t0_target_round_trip(self):
        rng = np.random.default_rng(12)
        dt = 1e-6
        w_i = rng.standard_normal(512)
        w_q = rng.standard_normal(512)
        gamma_t, target, s_b = 4000.0, 1.4, 0.1
        s_t0 = s_t0_for_noise_target(w_i, w_q, dt, gamma_t, target, s_b)
        g_norm = 0.5 * (np.trapezoid(w_i ** 2, dx=dt)
                        + np.trapezoid(w_q ** 2, dx=dt))
        quad = (exp_kernel_integral(w_i, dt, gamma_t)
                + exp_kernel_integral(w_q, dt, gamma_t))
        n_t = (TWO_PI * gamma_t * s_t0 / (4 * g_norm)) * quad + s_b
        assert n_t == pytest.approx(target, rel=1e-12)

    def test_target_below_white_rejected(self):
        with pytest.raises(ValueError):
            s_t0_for_noise_target(np.ones(16), np.ones(16), 1e-6, 1e3,
                                  0.05, s_b=0.1)


class TestValidation:
    def test_negative_levels_rejected(self):
        with pytest.raises(ValueError):
            NoiseParams(s_b=-0.1, s_t0=0.0, gamma_t=1e3)
        with pytest.raises(ValueError):
            NoiseParams(s_b=0.0, s_t0=1.0, gamma_t=0.0)
