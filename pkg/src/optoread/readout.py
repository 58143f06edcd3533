"""Dispersive-readout pipeline.

Covers the chain from cavity pointer dynamics through upconversion,
matched-filter integration, added-noise accounting, SNR and fidelity, to
the quantum-efficiency calibration that compares SNR against
measurement-induced dephasing.

Conventions: heterodyne records are normalised to shot noise (vacuum PSD
1/2 per quadrature) and the mean record for qubit state k is the
drive-referenced cavity amplitude sqrt(kappa_c) alpha_k(t) attenuated by
the amplitude factors of the measurement chain.  The measurement strength
n_r is defined through the total emitted which-state energy,
n_r = (kappa_c/4) int |alpha_e - alpha_g|^2 dt, which makes the qubit
coherence after a pulse exp(-2 n_r) and the white-noise matched-filter
SNR exactly 2 sqrt(2 eta_q n_r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .noise import NoiseParams, exp_kernel_integral, s_t0_for_noise_target
from .params import CircuitQedParams, EfficiencyBudget, eta_gain
from .statespace import (NumericsError, PORT_MW_EXT_1, PORT_MW_EXT_2,
                         OUT_OPT_1, OUT_OPT_2, StateSpaceModel, propagate,
                         transfer_matrix)

TWO_PI = 2.0 * math.pi


class DegenerateFilterError(ValueError):
    """Raised when matched-filter weights vanish (no pointer separation)."""


class FitError(NumericsError):
    """Raised when a calibration fit fails its quality requirements."""


# ---------------------------------------------------------------------------
# Pulse and pointer dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReadoutPulse:
    """Readout drive pulse.

    amplitude is the measurement strength in sqrt(photons): the realised
    pulse satisfies n_r = amplitude^2.  shape is "square" or "sampled", the
    latter using ``envelope`` as a piecewise-constant profile over
    [0, t_p].
    """

    amplitude: float
    t_p: float
    shape: str = "square"
    t_r: float = 1e-3
    envelope: np.ndarray | None = None

    def __post_init__(self):
        if not self.t_p > 0:
            raise ValueError("t_p must be > 0")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.shape not in ("square", "sampled"):
            raise ValueError("shape must be 'square' or 'sampled'")
        if self.shape == "sampled":
            env = np.asarray(self.envelope, dtype=float)
            if env.ndim != 1 or env.size < 1:
                raise ValueError("sampled shape needs a 1-D envelope")
            object.__setattr__(self, "envelope", env)

    def profile(self, t):
        """Unit-amplitude drive profile at times t."""
        t = np.asarray(t, dtype=float)
        if self.shape == "square":
            return ((t >= 0.0) & (t < self.t_p)).astype(float)
        idx = np.floor(t / self.t_p * self.envelope.size).astype(int)
        inside = (t >= 0.0) & (t < self.t_p)
        idx = np.clip(idx, 0, self.envelope.size - 1)
        return np.where(inside, self.envelope[idx], 0.0)


@dataclass(frozen=True)
class PointerTrajectory:
    """Cavity and output field amplitudes for both qubit states."""

    t: np.ndarray
    alpha_g: np.ndarray
    alpha_e: np.ndarray
    alpha_out_g: np.ndarray
    alpha_out_e: np.ndarray
    drive: np.ndarray
    theta: float            # pointer phase, rad
    kappa_c: float          # Hz
    kappa_c_ext: float      # Hz

    def measurement_strength(self):
        """Integrated which-state signal n_r (photons)."""
        sep = np.abs(self.alpha_e - self.alpha_g) ** 2
        return 0.25 * TWO_PI * self.kappa_c * np.trapezoid(sep, self.t)

    def coherence_ratio(self):
        """Qubit coherence left after the pulse, exp(-2 n_r)."""
        return math.exp(-2.0 * self.measurement_strength())


def cavity_response(pulse: ReadoutPulse, q: CircuitQedParams,
                    t=None, t_int=None, n_samples=8192) -> PointerTrajectory:
    """Drive the dispersively shifted cavity and return both pointer states.

    The cavity obeys d(alpha)/dt = -(i Delta_k + kappa_c/2) alpha +
    sqrt(kappa_c_ext) drive(t) with Delta = -chi for ground and +chi for
    excited (so the ground pointer acquires phase +theta).  Square pulses
    use the exact closed-form solution; sampled envelopes use an exact
    piecewise-constant exponential propagator on a uniform grid.  The drive
    is scaled so the realised measurement strength equals amplitude^2
    (falling back to steady-state photon number amplitude^2 when chi = 0).
    """
    kc = TWO_PI * q.kappa_c
    kext = TWO_PI * q.kappa_c_ext
    chi = TWO_PI * q.chi
    if t is None:
        if t_int is None:
            t_int = pulse.t_p + 10.0 / kc
        t = np.linspace(0.0, t_int, n_samples + 1)
    else:
        t = np.asarray(t, dtype=float)
    dt = t[1] - t[0]
    dt_max = 1.0 / (20.0 * max(q.kappa_c, 2.0 * abs(q.chi)))
    if dt > dt_max * (1.0 + 1e-9):
        raise ValueError(
            f"grid step {dt:g} too coarse for the cavity; need <= {dt_max:g}")

    lam_g = kc / 2.0 - 1j * chi
    lam_e = kc / 2.0 + 1j * chi
    if pulse.shape == "square":
        drive = pulse.profile(t)

        def solve(lam):
            ring_up = (1.0 - np.exp(-lam * np.minimum(t, pulse.t_p))) / lam
            decay = np.exp(-lam * np.maximum(t - pulse.t_p, 0.0))
            return math.sqrt(kext) * ring_up * decay

        alpha_g = solve(lam_g)
        alpha_e = solve(lam_e)
    else:
        if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0.0):
            raise ValueError("sampled envelopes require a uniform grid")
        drive = pulse.profile(t)

        def step(lam):
            prop = np.exp(-lam * dt)
            gain = math.sqrt(kext) * (1.0 - prop) / lam
            alpha = np.zeros(t.size, dtype=complex)
            for k in range(t.size - 1):
                alpha[k + 1] = alpha[k] * prop + gain * drive[k]
            return alpha

        alpha_g = step(lam_g)
        alpha_e = step(lam_e)

    sep = np.abs(alpha_e - alpha_g) ** 2
    n_r_unit = 0.25 * kc * np.trapezoid(sep, t)
    if n_r_unit > 0.0:
        scale = pulse.amplitude / math.sqrt(n_r_unit)
    else:
        # no dispersion: normalise to steady-state photon number instead
        ss = abs(math.sqrt(kext) / lam_g)
        scale = pulse.amplitude / ss if ss > 0 else 0.0
    alpha_g = alpha_g * scale
    alpha_e = alpha_e * scale
    drive = drive * scale
    return PointerTrajectory(
        t=t, alpha_g=alpha_g, alpha_e=alpha_e,
        alpha_out_g=math.sqrt(kext) * alpha_g - drive,
        alpha_out_e=math.sqrt(kext) * alpha_e - drive,
        drive=drive, theta=q.pointer_phase,
        kappa_c=q.kappa_c, kappa_c_ext=q.kappa_c_ext,
    )


# ---------------------------------------------------------------------------
# Upconversion through the transducer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpconvertedMeans:
    """Mean detected optical quadrature records on the filter grid."""

    t: np.ndarray
    dt: float
    mean_g: np.ndarray  # complex
    mean_e: np.ndarray  # complex
    eta_bw_exact: float
    dc_transfer: float  # |microwave -> optical| amplitude transfer at dc

    @property
    def i_g(self):
        return self.mean_g.real

    @property
    def q_g(self):
        return self.mean_g.imag

    @property
    def i_e(self):
        return self.mean_e.real

    @property
    def q_e(self):
        return self.mean_e.imag


def upconvert(model: StateSpaceModel, traj: PointerTrajectory,
              eta_mic, eta_opt, eta_cav, decimate=1) -> UpconvertedMeans:
    """Propagate the pointer records through the transducer.

    The microwave input fed to the model is the drive-referenced wave
    sqrt(eta_mic eta_cav) sqrt(kappa_c) alpha_k(t); the optical output is
    scaled by sqrt(epsilon eta_opt eta_G) at detection.  The trajectory
    must be sampled on the propagation half grid (odd point count);
    ``decimate`` keeps every decimate-th output sample.

    Returns means plus the exact bandwidth efficiency of this pulse, i.e.
    the transferred fraction of which-state energy relative to a flat
    response pinned at the dc transfer amplitude.
    """
    n_half = traj.t.size
    if n_half % 2 == 0:
        raise ValueError("trajectory must be sampled on a half grid "
                         "(odd number of points)")
    n_fine = (n_half - 1) // 2
    if n_fine % decimate != 0:
        raise ValueError("decimate must divide the number of steps")
    dt_fine = 2.0 * (traj.t[1] - traj.t[0])

    amp_in = math.sqrt(eta_mic * eta_cav * TWO_PI * traj.kappa_c)
    eta_g = eta_gain(model.kappa_e, model.kappa_o, model.omega_m / TWO_PI)
    amp_out = math.sqrt(model.epsilon * eta_opt * eta_g)

    def run(alpha):
        u = np.zeros((n_half, 10))
        w = amp_in * alpha
        u[:, PORT_MW_EXT_1] = w.real
        u[:, PORT_MW_EXT_2] = w.imag
        res = propagate(model, u, dt_fine, n_fine * dt_fine)
        return res.y[:, OUT_OPT_1] + 1j * res.y[:, OUT_OPT_2]

    out_g = run(traj.alpha_g)
    out_e = run(traj.alpha_e)

    # exact bandwidth efficiency of this pulse through the passband
    diff_out = out_e - out_g
    diff_in = amp_in * (traj.alpha_e - traj.alpha_g)[::2]
    dc = abs(transfer_matrix(model, 0.0)[OUT_OPT_1, PORT_MW_EXT_1])
    energy_in = np.trapezoid(np.abs(diff_in) ** 2, dx=dt_fine)
    if energy_in > 0.0:
        eta_bw_exact = (np.trapezoid(np.abs(diff_out) ** 2, dx=dt_fine)
                        / (dc * dc * energy_in))
    else:
        eta_bw_exact = 0.0

    sl = slice(None, None, decimate)
    t_out = traj.t[::2][sl]
    return UpconvertedMeans(
        t=t_out, dt=dt_fine * decimate,
        mean_g=amp_out * out_g[sl], mean_e=amp_out * out_e[sl],
        eta_bw_exact=float(eta_bw_exact), dc_transfer=float(dc),
    )


# ---------------------------------------------------------------------------
# Matched filtering and integrated statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchedFilter:
    """Integration weights (mean-trace differences) and normalisation."""

    w_i: np.ndarray
    w_q: np.ndarray
    dt: float
    t_int: float
    g_norm: float

    def noise_quadratic(self, gamma_t):
        """Double integral of the weights against the exponential kernel."""
        return (exp_kernel_integral(self.w_i, self.dt, gamma_t)
                + exp_kernel_integral(self.w_q, self.dt, gamma_t))


def matched_filter(means: UpconvertedMeans, t_int=None) -> MatchedFilter:
    """SNR-optimal weights: the difference of the mean records."""
    if t_int is None:
        stop = means.t.size
    else:
        stop = int(np.searchsorted(means.t, t_int * (1 + 1e-12),
                                   side="right"))
        if stop < 2:
            raise ValueError("t_int shorter than one sample")
    w = (means.mean_e - means.mean_g)[:stop]
    w_i = np.ascontiguousarray(w.real)
    w_q = np.ascontiguousarray(w.imag)
    g_norm = 0.5 * (np.trapezoid(w_i * w_i, dx=means.dt)
                    + np.trapezoid(w_q * w_q, dx=means.dt))
    if not (g_norm > 0.0) or not np.isfinite(g_norm):
        raise DegenerateFilterError(
            "mean records are identical; matched filter is degenerate")
    return MatchedFilter(w_i=w_i, w_q=w_q, dt=means.dt,
                         t_int=means.t[stop - 1], g_norm=g_norm)


@dataclass(frozen=True)
class ReadoutStatistics:
    """Moments of the integrated voltage and derived figures."""

    mu_g: float
    mu_e: float
    sigma: float
    snr: float
    n_t: float
    fidelity: float


def weighted_mean(w_i, w_q, dt, i_k, q_k):
    """Filter-weighted integral of one state's mean record."""
    n = len(w_i)
    return np.trapezoid(w_i * i_k[:n] + w_q * q_k[:n], dx=dt)


def weighted_variance(w_i, w_q, dt, noise: NoiseParams):
    """Variance of the integrated voltage for arbitrary weights."""
    white = noise.white_weight * (np.trapezoid(w_i * w_i, dx=dt)
                                  + np.trapezoid(w_q * w_q, dx=dt))
    if noise.s_t0 == 0.0:
        return white
    quad = (exp_kernel_integral(w_i, dt, noise.gamma_t)
            + exp_kernel_integral(w_q, dt, noise.gamma_t))
    return white + (TWO_PI * noise.gamma_t * noise.s_t0 / 4.0) * quad


def transducer_noise_number(f: MatchedFilter, noise: NoiseParams):
    """Filtered transducer added noise (photons): Lorentzian term plus s_b."""
    if not f.g_norm > 0:
        raise DegenerateFilterError("filter normalisation must be positive")
    if noise.s_t0 == 0.0:
        return noise.s_b
    quad = f.noise_quadratic(noise.gamma_t)
    return (TWO_PI * noise.gamma_t * noise.s_t0 / (4.0 * f.g_norm)) * quad \
        + noise.s_b


def integrated_stats(f: MatchedFilter, means: UpconvertedMeans,
                     noise: NoiseParams) -> ReadoutStatistics:
    """Means, shared width, SNR and added-noise number for this filter."""
    mu_g = weighted_mean(f.w_i, f.w_q, f.dt, means.i_g, means.q_g)
    mu_e = weighted_mean(f.w_i, f.w_q, f.dt, means.i_e, means.q_e)
    sigma = math.sqrt(weighted_variance(f.w_i, f.w_q, f.dt, noise))
    snr = abs(mu_e - mu_g) / sigma
    n_t = transducer_noise_number(f, noise)
    return ReadoutStatistics(
        mu_g=mu_g, mu_e=mu_e, sigma=sigma, snr=snr, n_t=n_t,
        fidelity=float(erf(snr / (2.0 * math.sqrt(2.0)))),
    )


# ---------------------------------------------------------------------------
# Budget-level figures
# ---------------------------------------------------------------------------

def snr_from_budget(n_r, budget: EfficiencyBudget,
                    convention="supplementary"):
    """SNR of a measurement of strength n_r through a budgeted chain.

    With the adopted amplitude-loss convention (``"supplementary"``) the
    chain transmits amplitude sqrt(eta_loss) and SNR = 2 sqrt(2 eta_q n_r),
    consistent with the erf fidelity law.  ``"methods"`` applies the loss
    to the amplitude linearly instead (one more factor sqrt(eta_loss)).
    """
    if n_r < 0:
        raise ValueError("n_r must be >= 0")
    base = 2.0 * math.sqrt(2.0 * budget.eta_q * n_r)
    if convention == "supplementary":
        return base
    if convention == "methods":
        return base * math.sqrt(budget.eta_loss)
    raise ValueError("convention must be 'supplementary' or 'methods'")


def fidelity_formula(eta_q, n_r, f_o, convention="consistent"):
    """Saturating readout fidelity versus measurement strength.

    The default ``"consistent"`` form, f_o erf(sqrt(eta_q n_r)), is the
    Gaussian-threshold fidelity f_o erf(SNR / 2 sqrt(2)) implied by the
    adopted SNR = 2 sqrt(2 eta_q n_r) and the calibration identity
    eta_q = sigma^2 a^2 / 2.  ``"literal"`` evaluates the saturation
    expression f_o erf(sqrt(2 eta_q n_r)), whose argument is sqrt(2)
    larger; the discrepancy between the two published forms cannot be
    removed, so both are exposed.
    """
    if eta_q < 0 or n_r < 0:
        raise ValueError("eta_q and n_r must be >= 0")
    if not 0.0 <= f_o <= 1.0:
        raise ValueError("f_o must lie in [0, 1]")
    if convention == "consistent":
        return f_o * float(erf(math.sqrt(eta_q * n_r)))
    if convention == "literal":
        return f_o * float(erf(math.sqrt(2.0 * eta_q * n_r)))
    raise ValueError("convention must be 'consistent' or 'literal'")


def measurement_dephasing(n_r):
    """Coherence ratio exp(-2 n_r) left by a measurement of strength n_r."""
    if n_r < 0:
        raise ValueError("n_r must be >= 0")
    return math.exp(-2.0 * n_r)


# ---------------------------------------------------------------------------
# Measurement chains and the end-to-end pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatChain:
    """Frequency-flat measurement chain with fixed loss and added noise.

    Used for synthetic calibrations: the detected mean record is
    sqrt(eta_loss kappa_c) alpha_k(t) and the noise is white with
    two-quadrature added noise n_t.
    """

    eta_loss: float
    n_t: float = 0.0

    @property
    def gamma_t(self):
        return None

    def max_rate_hz(self):
        return 0.0

    def apply(self, traj: PointerTrajectory, decimate=1):
        amp = math.sqrt(self.eta_loss * TWO_PI * traj.kappa_c)
        sl = slice(None, None, 2 * decimate)
        t = traj.t[sl]
        return UpconvertedMeans(
            t=t, dt=t[1] - t[0],
            mean_g=amp * traj.alpha_g[sl], mean_e=amp * traj.alpha_e[sl],
            eta_bw_exact=1.0, dc_transfer=1.0,
        )

    def resolve_noise(self, f: MatchedFilter):
        # pure white noise: realised as an s_b excess over shot noise
        return NoiseParams(s_b=self.n_t, s_t0=0.0, gamma_t=1.0)


@dataclass(frozen=True)
class TransducerChain:
    """Physical chain: state-space transducer plus lumped efficiencies.

    Exactly one of s_t0 / n_t_target fixes the Lorentzian noise level;
    n_t_target chooses s_t0 so the filtered added-noise number equals the
    target for the realised weights.
    """

    model: StateSpaceModel
    eta_mic: float
    eta_opt: float
    eta_cav: float
    s_b: float = 0.0
    s_t0: float | None = None
    n_t_target: float | None = None

    def __post_init__(self):
        if (self.s_t0 is None) == (self.n_t_target is None):
            raise ValueError("specify exactly one of s_t0 or n_t_target")

    @property
    def gamma_t(self):
        return self.model.gamma_t_hz

    def max_rate_hz(self):
        return self.model.max_rate_hz()

    def apply(self, traj: PointerTrajectory, decimate=1):
        return upconvert(self.model, traj, self.eta_mic, self.eta_opt,
                         self.eta_cav, decimate=decimate)

    def resolve_noise(self, f: MatchedFilter):
        if self.s_t0 is not None:
            return NoiseParams(s_b=self.s_b, s_t0=self.s_t0,
                               gamma_t=self.gamma_t)
        s_t0 = s_t0_for_noise_target(f.w_i, f.w_q, f.dt, self.gamma_t,
                                     self.n_t_target, self.s_b)
        return NoiseParams(s_b=self.s_b, s_t0=s_t0, gamma_t=self.gamma_t)


@dataclass(frozen=True)
class ReadoutBundle:
    """Everything produced by one end-to-end readout evaluation."""

    pulse: ReadoutPulse
    t_int: float
    traj: PointerTrajectory
    means: UpconvertedMeans
    filter: MatchedFilter
    noise: NoiseParams
    stats: ReadoutStatistics
    n_r: float
    rho_ge: float


def integration_window(pulse: ReadoutPulse, q: CircuitQedParams,
                       gamma_t=None):
    """Window long enough for the readout energy to decay through the chain."""
    tail = 10.0 / (TWO_PI * q.kappa_c)
    if gamma_t is not None:
        tail = max(tail, 5.0 / (TWO_PI * gamma_t))
    return pulse.t_p + tail


def evaluate_readout(pulse: ReadoutPulse, q: CircuitQedParams, chain,
                     n_filter=4096, t_int=None) -> ReadoutBundle:
    """Run the full pipeline: cavity -> chain -> filter -> statistics."""
    if t_int is None:
        t_int = integration_window(pulse, q, chain.gamma_t)
    dt_f = t_int / n_filter
    f_max = max(q.kappa_c, 2.0 * abs(q.chi), chain.max_rate_hz())
    r = max(1, math.ceil(dt_f * 20.0 * f_max * (1.0 - 1e-12)))
    n_fine = n_filter * r
    t_half = np.arange(2 * n_fine + 1) * (t_int / (2 * n_fine))
    traj = cavity_response(pulse, q, t=t_half)
    means = chain.apply(traj, decimate=r)
    filt = matched_filter(means)
    noise = chain.resolve_noise(filt)
    stats = integrated_stats(filt, means, noise)
    n_r = traj.measurement_strength()
    return ReadoutBundle(
        pulse=pulse, t_int=t_int, traj=traj, means=means, filter=filt,
        noise=noise, stats=stats, n_r=n_r, rho_ge=math.exp(-2.0 * n_r),
    )


# ---------------------------------------------------------------------------
# Quantum-efficiency calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    """SNR slope, dephasing width and the recovered quantum efficiency."""

    a: float          # SNR per unit drive voltage
    sigma_v: float    # Gaussian dephasing width in drive voltage
    eta_q: float
    voltages: np.ndarray = field(repr=False, default=None)
    snrs: np.ndarray = field(repr=False, default=None)
    rho_ge: np.ndarray = field(repr=False, default=None)
    r2_snr: float = 1.0
    r2_gauss: float = 1.0


def fit_calibration(voltages, snrs, rho_ge, min_r2=0.999) -> CalibrationResult:
    """Fit SNR = a V and rho = exp(-V^2 / 2 sigma^2); eta_q = sigma^2 a^2 / 2.

    Raises FitError when fewer than five points are supplied, when the SNR
    is not linear in V to the requested R^2, or when the coherence data are
    not Gaussian in V.
    """
    v = np.asarray(voltages, dtype=float)
    s = np.asarray(snrs, dtype=float)
    r = np.asarray(rho_ge, dtype=float)
    if v.size < 5:
        raise FitError("need at least 5 voltage points")
    if np.any(r <= 0) or np.any(r > 1 + 1e-12):
        raise FitError("coherence ratios must lie in (0, 1]")

    a = float(v @ s / (v @ v))
    resid = s - a * v
    ss_tot = float(np.sum((s - s.mean()) ** 2))
    r2_snr = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    if r2_snr < min_r2:
        raise FitError(
            f"SNR(V) deviates from linearity: R^2 = {r2_snr:.6f} < {min_r2}; "
            f"residuals {np.array2string(resid, precision=3)}")

    y = -np.log(r)
    v2 = v * v
    slope = float(v2 @ y / (v2 @ v2))
    if slope <= 0:
        raise FitError("coherence does not decay with drive voltage")
    resid_g = y - slope * v2
    ss_tot_g = float(np.sum((y - y.mean()) ** 2))
    r2_gauss = 1.0 - float(resid_g @ resid_g) / ss_tot_g if ss_tot_g > 0 else 1.0
    if r2_gauss < min_r2:
        raise FitError(
            f"coherence decay is not Gaussian in V: R^2 = {r2_gauss:.6f}")

    sigma2 = 1.0 / (2.0 * slope)
    eta_q = sigma2 * a * a / 2.0
    return CalibrationResult(
        a=a, sigma_v=math.sqrt(sigma2), eta_q=eta_q,
        voltages=v, snrs=s, rho_ge=r, r2_snr=r2_snr, r2_gauss=r2_gauss,
    )


def calibrate_quantum_efficiency(voltages, pulse: ReadoutPulse,
                                 q: CircuitQedParams, chain,
                                 amplitude_per_volt, n_filter=4096,
                                 min_r2=0.999) -> CalibrationResult:
    """Simulate the SNR-versus-dephasing calibration over drive voltages.

    The pipeline is linear in the drive, so one reference evaluation fixes
    SNR(V) and n_r(V); the standard fits then recover eta_q.
    """
    v = np.asarray(voltages, dtype=float)
    if v.size < 5:
        raise FitError("need at least 5 voltage points")
    if np.any(v <= 0):
        raise FitError("drive voltages must be positive")
    ref_amp = amplitude_per_volt * float(v.max())
    ref = evaluate_readout(
        ReadoutPulse(amplitude=ref_amp, t_p=pulse.t_p, shape=pulse.shape,
                     t_r=pulse.t_r, envelope=pulse.envelope),
        q, chain, n_filter=n_filter)
    scale = v * amplitude_per_volt / ref_amp
    snrs = ref.stats.snr * scale
    rho = np.exp(-2.0 * ref.n_r * scale ** 2)
    return fit_calibration(v, snrs, rho, min_r2=min_r2)
