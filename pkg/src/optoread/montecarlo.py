"""Single-shot stochastic simulation and histogram-based fidelity.

Each shot integrates one noisy heterodyne record against the matched
filter: v = mu(true state) + filtered noise.  Shots are keyed by
deterministic, documented random streams (one ``SeedSequence`` child per
(state, shot index)), so results are reproducible, order-independent and
safe to distribute across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfc

from .noise import NoiseParams, sample_noise
from .readout import ReadoutBundle

TWO_PI = 2.0 * math.pi

_STATES = ("g", "e")


@dataclass(frozen=True)
class ShotRecord:
    """Outcome of one simulated single-shot readout."""

    prepared_state: str
    true_state: str
    v: float


@dataclass(frozen=True)
class HistogramPair:
    """Histograms for both preparations with the optimal threshold."""

    bin_edges: np.ndarray
    counts_g: np.ndarray
    counts_e: np.ndarray
    v_thresh: float
    p_e_given_g: float
    p_g_given_e: float
    f_opt: float
    e_is_above: bool

    def __post_init__(self):
        total = self.p_e_given_g + self.p_g_given_e + self.f_opt
        if abs(total - 1.0) > 1e-9:
            raise ValueError("fidelity must equal 1 - P(e|g) - P(g|e)")

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


@dataclass(frozen=True)
class ShotModel:
    """Frozen per-shot inputs derived from a readout evaluation."""

    dt: float
    w_i: np.ndarray
    w_q: np.ndarray
    i_g: np.ndarray
    q_g: np.ndarray
    i_e: np.ndarray
    q_e: np.ndarray
    mu_g: float
    mu_e: float
    sigma: float
    noise: NoiseParams | None  # None: noiseless shots, for diagnostics
    p_residual: float
    t1: float | None = None
    _cum_g: np.ndarray = field(repr=False, default=None)
    _cum_e: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_bundle(cls, bundle: ReadoutBundle, p_residual, t1=None):
        f = bundle.filter
        n = f.w_i.size
        m = bundle.means

        def cum(i_k, q_k):
            y = f.w_i * i_k[:n] + f.w_q * q_k[:n]
            inc = 0.5 * (y[:-1] + y[1:]) * f.dt
            return np.concatenate([[0.0], np.cumsum(inc)])

        return cls(
            dt=f.dt, w_i=f.w_i, w_q=f.w_q,
            i_g=m.i_g[:n], q_g=m.q_g[:n], i_e=m.i_e[:n], q_e=m.q_e[:n],
            mu_g=bundle.stats.mu_g, mu_e=bundle.stats.mu_e,
            sigma=bundle.stats.sigma, noise=bundle.noise,
            p_residual=p_residual, t1=t1,
            _cum_g=cum(m.i_g, m.q_g), _cum_e=cum(m.i_e, m.q_e),
        )

    @property
    def t(self):
        return np.arange(self.w_i.size) * self.dt

    def mean_voltage(self, state):
        return self.mu_e if state == "e" else self.mu_g

    def decayed_mean(self, t_jump):
        """Weighted mean when the qubit relaxes e -> g at time t_jump."""
        t = self.t
        ce = np.interp(t_jump, t, self._cum_e)
        cg = np.interp(t_jump, t, self._cum_g)
        return ce + (self._cum_g[-1] - cg)


def _noise_integral(model: ShotModel, rng):
    trace = sample_noise(model.noise, rng, model.dt, model.w_i.size)
    return np.trapezoid(model.w_i * trace.i + model.w_q * trace.q,
                        dx=model.dt)


def simulate_shot(model: ShotModel, prepared, rng,
                  include_t1_decay=False) -> ShotRecord:
    """One shot: preparation error, optional relaxation, filtered noise.

    rng may be an integer seed, a SeedSequence or a Generator; the draw
    order is fixed (flip, decay time, noise trace).
    """
    if prepared not in _STATES:
        raise ValueError("prepared must be 'g' or 'e'")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    true = prepared
    if rng.random() < model.p_residual:
        true = "e" if prepared == "g" else "g"
    v_mean = model.mean_voltage(true)
    if include_t1_decay and true == "e" and model.t1 is not None:
        t_jump = rng.exponential(model.t1)
        t_end = model.t[-1]
        if t_jump < t_end:
            v_mean = model.decayed_mean(t_jump)
            true = "g"
    return ShotRecord(prepared_state=prepared, true_state=true,
                      v=v_mean + _noise_integral(model, rng))


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(
        entropy=seed, spawn_key=tuple(int(k) for k in key)))


def collect_shots(model: ShotModel, prepared, n_shots, seed,
                  include_t1_decay=False):
    """Voltages for n_shots preparations of one state (stream-per-shot)."""
    state_idx = _STATES.index(prepared)
    v = np.empty(n_shots)
    for i in range(n_shots):
        rec = simulate_shot(model, prepared, _stream(seed, state_idx, i),
                            include_t1_decay=include_t1_decay)
        v[i] = rec.v
    return v


def histogram_from_voltages(v_g, v_e, bins="fd") -> HistogramPair:
    """Shared-bin histograms plus the exhaustively optimised threshold."""
    v_g = np.asarray(v_g, dtype=float)
    v_e = np.asarray(v_e, dtype=float)
    if v_g.size == 0 or v_e.size == 0:
        raise ValueError("histograms need at least one shot per state")
    edges = np.histogram_bin_edges(
        np.concatenate([v_g, v_e]),
        bins="fd" if bins == "fd" else int(bins))
    counts_g, _ = np.histogram(v_g, bins=edges)
    counts_e, _ = np.histogram(v_e, bins=edges)
    v_thresh, f_opt, p_eg, p_ge, above = optimal_threshold(
        edges, counts_g, counts_e)
    return HistogramPair(
        bin_edges=edges, counts_g=counts_g, counts_e=counts_e,
        v_thresh=v_thresh, p_e_given_g=p_eg, p_g_given_e=p_ge,
        f_opt=f_opt, e_is_above=above,
    )


def run_histograms(model: ShotModel, n_shots, seed, bins="fd",
                   include_t1_decay=False) -> HistogramPair:
    """Simulate n_shots per preparation and histogram the voltages."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    v_g = collect_shots(model, "g", n_shots, seed,
                        include_t1_decay=include_t1_decay)
    v_e = collect_shots(model, "e", n_shots, seed,
                        include_t1_decay=include_t1_decay)
    return histogram_from_voltages(v_g, v_e, bins=bins)


def optimal_threshold(bin_edges, counts_g, counts_e):
    """Exhaustive threshold scan over bin edges.

    Returns (v_thresh, f_opt, p_e_given_g, p_g_given_e, e_is_above); ties
    are broken toward the midpoint of the tied edge range.
    """
    counts_g = np.asarray(counts_g, dtype=float)
    counts_e = np.asarray(counts_e, dtype=float)
    n_g = counts_g.sum()
    n_e = counts_e.sum()
    if n_g <= 0 or n_e <= 0:
        raise ValueError("cannot optimise a threshold on empty histograms")
    # cumulative fraction strictly below each edge
    cum_g = np.concatenate([[0.0], np.cumsum(counts_g)]) / n_g
    cum_e = np.concatenate([[0.0], np.cumsum(counts_e)]) / n_e
    f_above = cum_g - cum_e  # fidelity when 'e' is classified above
    above = f_above.max() >= (-f_above).max()
    score = f_above if above else -f_above
    best = score.max()
    tied = np.flatnonzero(score >= best - 1e-15)
    j = int(tied[len(tied) // 2])
    v_thresh = float(bin_edges[j])
    if above:
        p_eg = 1.0 - cum_g[j]
        p_ge = cum_e[j]
    else:
        p_eg = cum_g[j]
        p_ge = 1.0 - cum_e[j]
    return v_thresh, float(1.0 - p_eg - p_ge), float(p_eg), float(p_ge), above


@dataclass(frozen=True)
class AnalyticFidelity:
    """Closed-form optimum for the Gaussian-mixture voltage model."""

    f_opt: float
    v_thresh: float
    p_e_given_g: float
    p_g_given_e: float


def analytic_fidelity(mu_g, mu_e, sigma, p_residual) -> AnalyticFidelity:
    """Optimal fidelity of two equal-width Gaussian mixtures.

    Each preparation is contaminated with the other state with probability
    p_residual; the optimal threshold sits at the midpoint and
    f_opt = (1 - 2 p_residual) erf(|mu_e - mu_g| / (2 sqrt(2) sigma)).
    """
    d = abs(mu_e - mu_g)
    thresh = 0.5 * (mu_g + mu_e)
    f_opt = (1.0 - 2.0 * p_residual) * float(erf(d / (2.0 * math.sqrt(2.0)
                                                      * sigma)))
    q_half = 0.5 * float(erfc(d / (2.0 * math.sqrt(2.0) * sigma)))
    p = p_residual
    # P(cross the midpoint | prepared k) for the two-component mixture
    p_eg = (1.0 - p) * q_half + p * (1.0 - q_half)
    p_ge = p_eg
    return AnalyticFidelity(f_opt=f_opt, v_thresh=thresh,
                            p_e_given_g=p_eg, p_g_given_e=p_ge)


def rabi_probability(tau, detuning_hz, omega_r_hz):
    """Detuned-Rabi excitation probability for pulse length tau (s)."""
    w_r = TWO_PI * omega_r_hz
    w_d = TWO_PI * np.asarray(detuning_hz, dtype=float)
    w = np.sqrt(w_r * w_r + w_d * w_d)
    frac = np.divide(w_r * w_r, w * w, out=np.ones_like(w), where=w > 0)
    return frac * np.sin(w * np.asarray(tau) / 2.0) ** 2


def rabi_scan(model: ShotModel, taus, detunings_hz, omega_r_hz,
              shots_per_point, seed):
    """Threshold-classified excitation map over (tau, detuning).

    A single fixed threshold (the analytic midpoint) is used for the whole
    map.  Returns (p_e map with shape (len(taus), len(detunings)),
    v_thresh).
    """
    taus = np.asarray(taus, dtype=float)
    dets = np.asarray(detunings_hz, dtype=float)
    if taus.size == 0 or dets.size == 0:
        raise ValueError("grids must be non-empty")
    thresh = 0.5 * (model.mu_g + model.mu_e)
    e_above = model.mu_e >= model.mu_g
    p_res = model.p_residual
    p_map = np.empty((taus.size, dets.size))
    for i, tau in enumerate(taus):
        for j, det in enumerate(dets):
            p_drive = rabi_probability(tau, det, omega_r_hz)
            p_exc = p_res + (1.0 - 2.0 * p_res) * p_drive
            hits = 0
            for k in range(shots_per_point):
                rng = _stream(seed, 2, i, j, k)
                true = "e" if rng.random() < p_exc else "g"
                v = model.mean_voltage(true) + _noise_integral(model, rng)
                measured_e = (v > thresh) if e_above else (v < thresh)
                hits += measured_e
            p_map[i, j] = hits / shots_per_point
    return p_map, float(thresh)
