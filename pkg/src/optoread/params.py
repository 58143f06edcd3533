"""Physical parameters and closed-form scalar quantities.

All frequencies and rates are stored as ordinary frequencies in Hz; the
factors of 2*pi required by any formula are applied inside that formula.
Types are frozen dataclasses and every operation is a pure function, so
everything here is safe to evaluate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised when a parameter set violates its physical invariants."""


def _require(cond, msg):
    if not cond:
        raise ParameterError(msg)


@dataclass(frozen=True)
class TransducerParams:
    """Electro-optomechanical transducer constants (Hz unless noted)."""

    omega_m: float          # mechanical mode frequency
    gamma_m: float          # intrinsic mechanical dissipation rate
    g_o: float              # vacuum optomechanical coupling
    g_e: float              # vacuum electromechanical coupling
    kappa_o: float          # optical cavity total linewidth
    kappa_o_ext: float      # optical external coupling
    kappa_e_low: float      # LC linewidth at low pump power
    kappa_e_high: float     # LC linewidth at high pump power
    kappa_e_ext: float      # LC external coupling
    epsilon: float          # heterodyne mode-matching factor, dimensionless
    gamma_e_max: float = 1.1e3  # damping at which kappa_e reaches kappa_e_high

    def __post_init__(self):
        for name in ("omega_m", "gamma_m", "g_o", "g_e", "kappa_o",
                     "kappa_o_ext", "kappa_e_low", "kappa_e_high",
                     "kappa_e_ext", "gamma_e_max"):
            _require(getattr(self, name) > 0, f"{name} must be > 0")
        _require(self.kappa_o_ext <= self.kappa_o,
                 "kappa_o_ext must not exceed kappa_o")
        _require(self.kappa_e_ext <= self.kappa_e_low <= self.kappa_e_high,
                 "need kappa_e_ext <= kappa_e_low <= kappa_e_high")
        _require(0.0 <= self.epsilon <= 1.0, "epsilon must lie in [0, 1]")

    @property
    def kappa_o_int(self):
        return self.kappa_o - self.kappa_o_ext

    def kappa_e_at(self, gamma_e, table=None):
        """LC linewidth at electromechanical damping gamma_e (Hz).

        The pump-power dependence of the internal loss is modelled as linear
        interpolation between (0, kappa_e_low) and (gamma_e_max,
        kappa_e_high); clipped outside.  An override ``table`` of
        (gamma_e, kappa_e) breakpoints replaces the default model.
        """
        if table is not None:
            pts = np.asarray(table, dtype=float)
            return float(np.interp(gamma_e, pts[:, 0], pts[:, 1]))
        frac = np.clip(gamma_e / self.gamma_e_max, 0.0, 1.0)
        return float(self.kappa_e_low
                     + (self.kappa_e_high - self.kappa_e_low) * frac)


@dataclass(frozen=True)
class CircuitQedParams:
    """Qubit plus readout cavity constants (Hz and seconds)."""

    omega_q: float
    omega_c: float
    g_qc: float
    nu: float               # transmon anharmonicity
    chi: float              # measured dispersive shift
    kappa_c: float
    kappa_c_ext: float
    kappa_c_w: float
    kappa_c_int: float
    t1: float
    t2: float
    p_residual: float = 0.0

    def __post_init__(self):
        _require(abs(self.kappa_c_ext + self.kappa_c_w + self.kappa_c_int
                     - self.kappa_c) <= 1e-9 * self.kappa_c,
                 "cavity rates must satisfy ext + weak + int = total")
        _require(self.t2 <= 2.0 * self.t1 * (1.0 + 1e-12),
                 "t2 must not exceed 2*t1")
        _require(0.0 <= self.p_residual <= 0.5,
                 "p_residual must lie in [0, 0.5]")

    @property
    def delta_qc(self):
        """Qubit-cavity detuning omega_q - omega_c (Hz)."""
        return self.omega_q - self.omega_c

    @property
    def eta_cav(self):
        """Fraction of readout energy leaving through the output port."""
        return 1.0 - (self.kappa_c_int + self.kappa_c_w) / self.kappa_c

    @property
    def pointer_phase(self):
        """Pointer state phase theta = arctan(2*chi/kappa_c) (rad)."""
        return math.atan2(2.0 * self.chi, self.kappa_c)


@dataclass(frozen=True)
class OperatingPoint:
    """Pump-controlled damping rates and derived quantities (Hz)."""

    gamma_e: float
    gamma_o: float
    gamma_m: float
    kappa_e_effective: float
    n_pump_o: float
    n_pump_e: float
    gamma_t: float = field(init=False)

    def __post_init__(self):
        _require(self.gamma_e >= 0 and self.gamma_o >= 0,
                 "damping rates must be >= 0")
        _require(self.n_pump_o >= 0 and self.n_pump_e >= 0,
                 "pump photon numbers must be >= 0")
        # exact sum, no recomputation elsewhere
        object.__setattr__(self, "gamma_t",
                           self.gamma_e + self.gamma_o + self.gamma_m)

    @classmethod
    def from_damping(cls, p: TransducerParams, gamma_e, gamma_o,
                     kappa_e_override=None, kappa_e_table=None):
        """Build an operating point from target damping rates."""
        kappa_e = (kappa_e_override if kappa_e_override is not None
                   else p.kappa_e_at(gamma_e, table=kappa_e_table))
        return cls(
            gamma_e=gamma_e,
            gamma_o=gamma_o,
            gamma_m=p.gamma_m,
            kappa_e_effective=kappa_e,
            n_pump_o=pump_photons(p.g_o, gamma_o, p.kappa_o),
            n_pump_e=pump_photons(p.g_e, gamma_e, kappa_e),
        )


@dataclass(frozen=True)
class EfficiencyBudget:
    """Multiplicative efficiency factors and added-noise numbers.

    eta_loss collects every loss between the readout cavity and an ideal
    optical heterodyne detector; eta_noise converts the transducer added
    noise n_t into an equivalent transmissivity.  n_cqed refers that noise
    back to the readout cavity output.
    """

    eta_bw: float
    eta_t: float
    eta_g: float
    eta_mic: float
    eta_opt: float
    eta_cav: float
    eta_noise: float
    eta_loss: float
    eta_q: float
    n_t: float
    n_det: float
    n_cqed: float

    def __post_init__(self):
        for name in ("eta_bw", "eta_t", "eta_mic", "eta_opt", "eta_cav"):
            v = getattr(self, name)
            _require(0.0 < v <= 1.0 + 1e-12, f"{name} must lie in (0, 1]")
        _require(self.eta_g >= 1.0 - 1e-12, "eta_g must be >= 1")
        _require(self.n_t >= 0.0, "n_t must be >= 0")
        prod = (self.eta_bw * self.eta_t * self.eta_g * self.eta_mic
                * self.eta_opt * self.eta_cav)
        _require(abs(self.eta_loss - prod) <= 1e-12 * max(prod, 1e-300),
                 "eta_loss must equal the product of its factors")
        _require(abs(self.eta_q - self.eta_loss * self.eta_noise)
                 <= 1e-12 * max(self.eta_q, 1e-300),
                 "eta_q must equal eta_loss * eta_noise")


# ---------------------------------------------------------------------------
# Closed-form operations
# ---------------------------------------------------------------------------

def dispersive_shift(g_qc, delta_qc, nu):
    """Transmon dispersive shift chi = g^2 nu / (Delta (Delta - nu)) (Hz).

    The ratio of rates makes the expression identical in ordinary and
    angular units.  Degenerate detunings (Delta = 0 or Delta = nu) are
    singular.
    """
    if delta_qc == 0.0 or delta_qc == nu:
        raise ZeroDivisionError(
            "dispersive shift is singular at delta_qc = 0 or delta_qc = nu")
    return g_qc * g_qc * nu / (delta_qc * (delta_qc - nu))


def damping_rate(g, n_pump, kappa):
    """Pump-enhanced damping Gamma = 4 g^2 n / kappa (all in Hz)."""
    if kappa <= 0.0:
        raise ZeroDivisionError("kappa must be positive")
    if g < 0 or n_pump < 0:
        raise ParameterError("g and n_pump must be >= 0")
    return 4.0 * g * g * n_pump / kappa


def pump_photons(g, gamma, kappa):
    """Intracavity pump photon number n = Gamma kappa / (4 g^2)."""
    if g <= 0.0:
        if gamma == 0.0:
            return 0.0
        raise ZeroDivisionError("g must be positive for nonzero damping")
    return gamma * kappa / (4.0 * g * g)


def eta_bandwidth(gamma_t, t_p):
    """Efficiency of pushing a square pulse of width t_p through the
    transducer passband, eta_bw = 1 - 2(1 - e^(-x/2))/x with
    x = 2*pi*gamma_t*t_p."""
    _require(gamma_t > 0 and t_p > 0, "gamma_t and t_p must be > 0")
    x = TWO_PI * gamma_t * t_p
    return 1.0 - 2.0 * (1.0 - math.exp(-x / 2.0)) / x


def eta_transducer(p: TransducerParams, op: OperatingPoint):
    """Narrowband transduction efficiency
    eta_t = epsilon (k_o,ext/k_o)(k_e,ext/k_e) 4 G_e G_o / G_T^2."""
    if op.gamma_t == 0.0:
        return 0.0
    return (p.epsilon
            * (p.kappa_o_ext / p.kappa_o)
            * (p.kappa_e_ext / op.kappa_e_effective)
            * 4.0 * op.gamma_e * op.gamma_o / op.gamma_t ** 2)


def eta_gain(kappa_e, kappa_o, omega_m):
    """Two-quadrature gain from finite sideband resolution,
    eta_G = (1 + (k_e/4w_m)^2)(1 + (k_o/4w_m)^2) >= 1."""
    _require(omega_m > 0, "omega_m must be > 0")
    return ((1.0 + (kappa_e / (4.0 * omega_m)) ** 2)
            * (1.0 + (kappa_o / (4.0 * omega_m)) ** 2))


def efficiency_budget(p: TransducerParams, q: CircuitQedParams,
                      op: OperatingPoint, eta_mic, eta_opt, n_t, t_p):
    """Assemble the full efficiency and added-noise budget.

    eta_mic and eta_opt are lumped measured constants, n_t is the
    two-quadrature transducer added noise at the detector input (photons)
    and t_p the readout pulse width used for the bandwidth factor.
    """
    _require(0.0 < eta_mic <= 1.0, "eta_mic must lie in (0, 1]")
    _require(0.0 < eta_opt <= 1.0, "eta_opt must lie in (0, 1]")
    _require(n_t >= 0.0, "n_t must be >= 0")
    eta_bw = eta_bandwidth(op.gamma_t, t_p)
    eta_t = eta_transducer(p, op)
    eta_g = eta_gain(op.kappa_e_effective, p.kappa_o, p.omega_m)
    eta_cav = q.eta_cav
    eta_noise = 1.0 / (1.0 + n_t)
    eta_loss = eta_bw * eta_t * eta_g * eta_mic * eta_opt * eta_cav
    return EfficiencyBudget(
        eta_bw=eta_bw, eta_t=eta_t, eta_g=eta_g, eta_mic=eta_mic,
        eta_opt=eta_opt, eta_cav=eta_cav, eta_noise=eta_noise,
        eta_loss=eta_loss, eta_q=eta_loss * eta_noise,
        n_t=n_t, n_det=1.0 + n_t, n_cqed=n_t / eta_loss,
    )


def _dephasing_factor(kappa_c, chi):
    return kappa_c * chi * chi / (kappa_c * kappa_c / 4.0 + chi * chi)


def dephasing_rate(n_eff, kappa_c, chi):
    """Photon shot-noise dephasing G_phi = k_c chi^2/(k_c^2/4 + chi^2) n_eff.

    With kappa_c and chi in Hz the result is an ordinary frequency; the
    corresponding decay rate of coherence is 2*pi times larger.
    """
    _require(n_eff >= 0, "n_eff must be >= 0")
    return _dephasing_factor(kappa_c, chi) * n_eff


def effective_occupancy(gamma_phi, kappa_c, chi):
    """Invert ``dephasing_rate``: cavity occupancy from a dephasing rate."""
    _require(gamma_phi >= 0, "gamma_phi must be >= 0")
    return gamma_phi / _dephasing_factor(kappa_c, chi)


def occupancy_from_lifetimes(t1, t2, kappa_c, chi):
    """Cavity occupancy inferred from qubit lifetimes.

    The pure dephasing rate 1/t2 - 1/(2 t1) is a decay rate in 1/s, i.e. an
    angular rate; it is converted to Hz before inversion.
    """
    _require(t1 > 0 and t2 > 0, "lifetimes must be > 0")
    gamma_phi_angular = 1.0 / t2 - 0.5 / t1
    _require(gamma_phi_angular >= 0, "t2 exceeds the 2*t1 limit")
    return effective_occupancy(gamma_phi_angular / TWO_PI, kappa_c, chi)


def stark_shift(chi, n_p):
    """Qubit frequency pull 2 chi n_p from coherent cavity photons (Hz)."""
    _require(n_p >= 0, "n_p must be >= 0")
    return 2.0 * chi * n_p
