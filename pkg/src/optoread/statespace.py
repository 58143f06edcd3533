"""Six-quadrature linear state-space model of the transducer.

State vector x = (X1, Y1, Z1, X2, Y2, Z2): first and second quadratures of
the optical (X), microwave (Y) and mechanical (Z) modes, in the convention
X = (a' + a)/2 so that vacuum variance is 1/4 per quadrature.  Ten input
ports (external, internal-loss and mechanical-bath channels for both
quadratures) and four output ports (external optical and microwave, both
quadratures).  Matrix entries are angular rates; pump phases are fixed so
all matrices are real.

Frequency-domain evaluation uses the rotating-wave drift matrix only;
time-domain propagation can optionally include the counter-rotating terms
oscillating at twice the mechanical frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import _kernels
from .params import OperatingPoint, TransducerParams

TWO_PI = 2.0 * math.pi

# input port order: (opt ext, opt int, mw ext, mw int, mech) per quadrature
PORT_OPT_EXT_1, PORT_OPT_INT_1, PORT_MW_EXT_1, PORT_MW_INT_1, PORT_MECH_1 = range(5)
PORT_OPT_EXT_2, PORT_OPT_INT_2, PORT_MW_EXT_2, PORT_MW_INT_2, PORT_MECH_2 = range(5, 10)
# output port order
OUT_OPT_1, OUT_MW_1, OUT_OPT_2, OUT_MW_2 = range(4)


class NumericsError(RuntimeError):
    """Raised when a numerical procedure fails or produces an unstable model."""


@dataclass(frozen=True)
class QuadratureTrace:
    """Uniformly sampled (I, Q) record for one port."""

    dt: float
    samples: np.ndarray  # shape (n, 2)
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ValueError("samples must have shape (n, 2)")
        if not (self.dt > 0):
            raise ValueError("dt must be > 0")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def i(self):
        return self.samples[:, 0]

    @property
    def q(self):
        return self.samples[:, 1]

    @property
    def t(self):
        return np.arange(self.samples.shape[0]) * self.dt

    def to_csv(self, fh):
        """Write columns t, I, Q (header included) to an open text file."""
        fh.write(f"# label={self.label}\n")
        fh.write("t,I,Q\n")
        for tk, (ik, qk) in zip(self.t, self.samples):
            fh.write(f"{tk:.12g},{ik:.12g},{qk:.12g}\n")


@dataclass(frozen=True)
class PropagationResult:
    """Time grid, state trajectory and output-port records."""

    t: np.ndarray   # (n + 1,)
    x: np.ndarray   # (n + 1, 6)
    y: np.ndarray   # (n + 1, 4)
    dt: float

    def output_trace(self, mode="optical"):
        """Bundle one output mode's quadrature pair as a QuadratureTrace."""
        cols = (OUT_OPT_1, OUT_OPT_2) if mode == "optical" else (OUT_MW_1, OUT_MW_2)
        return QuadratureTrace(self.dt, np.column_stack(
            [self.y[:, cols[0]], self.y[:, cols[1]]]), label=mode)


@dataclass(frozen=True)
class StateSpaceModel:
    """Matrices and rates defining the linearised transducer dynamics."""

    a_rwa: np.ndarray        # (6, 6) angular rates
    b: np.ndarray            # (6, 10)
    c: np.ndarray            # (4, 6)
    d: np.ndarray            # (4, 10)
    g_o_amp: float           # pump-enhanced optomechanical coupling, rad/s
    g_e_amp: float           # pump-enhanced electromechanical coupling, rad/s
    omega_m: float           # mechanical frequency, rad/s
    input_noise: np.ndarray  # (10,) symmetrized occupancy, 1/2 for vacuum
    kappa_o: float           # Hz, kept for gain/bookkeeping
    kappa_e: float           # Hz, effective at this operating point
    gamma_m: float           # Hz
    epsilon: float           # heterodyne mode matching

    @property
    def gamma_o_hz(self):
        """Optomechanical damping implied by the coupling amplitude (Hz)."""
        return (self.g_o_amp / TWO_PI) ** 2 * 4.0 / self.kappa_o

    @property
    def gamma_e_hz(self):
        """Electromechanical damping implied by the coupling amplitude (Hz)."""
        return (self.g_e_amp / TWO_PI) ** 2 * 4.0 / self.kappa_e

    @property
    def gamma_t_hz(self):
        """Total transduction bandwidth (Hz)."""
        return self.gamma_o_hz + self.gamma_e_hz + self.gamma_m

    def a_counter(self, t):
        """Counter-rotating drift contribution at time t (6x6, angular)."""
        s = math.sin(2.0 * self.omega_m * t)
        c = math.cos(2.0 * self.omega_m * t)
        go, ge = self.g_o_amp, self.g_e_amp
        return np.array([
            [0.0, 0.0, -go * s, 0.0, 0.0, go * c],
            [0.0, 0.0, -ge * s, 0.0, 0.0, ge * c],
            [-go * s, -ge * s, 0.0, go * c, ge * c, 0.0],
            [0.0, 0.0, go * c, 0.0, 0.0, go * s],
            [0.0, 0.0, ge * c, 0.0, 0.0, ge * s],
            [go * c, ge * c, 0.0, go * s, ge * s, 0.0],
        ])

    def max_rate_hz(self, include_counter=False):
        """Largest characteristic frequency, used for step-size bounds."""
        rates = [self.kappa_o, self.kappa_e, self.gamma_m,
                 self.g_o_amp / TWO_PI, self.g_e_amp / TWO_PI]
        if include_counter:
            rates.append(2.0 * self.omega_m / TWO_PI)
        return max(rates)


def build_model(p: TransducerParams, op: OperatingPoint,
                mech_occupancy=0.0) -> StateSpaceModel:
    """Construct the state-space model at an operating point.

    mech_occupancy is the thermal occupancy of the mechanical bath port
    (default 0, i.e. vacuum); all other loss ports carry vacuum.
    """
    if op.kappa_e_effective < p.kappa_e_ext:
        raise NumericsError(
            "effective kappa_e below the external coupling")
    kappa_o = TWO_PI * p.kappa_o
    kappa_e = TWO_PI * op.kappa_e_effective
    gamma_m = TWO_PI * p.gamma_m
    go = TWO_PI * p.g_o * math.sqrt(op.n_pump_o)
    ge = TWO_PI * p.g_e * math.sqrt(op.n_pump_e)

    a = np.zeros((6, 6))
    half = np.array([kappa_o, kappa_e, gamma_m]) / 2.0
    a[:3, :3] = -np.diag(half)
    a[3:, 3:] = -np.diag(half)
    # beamsplitter coupling between quadrature blocks
    a[0, 5] = -go
    a[1, 5] = -ge
    a[2, 3] = -go
    a[2, 4] = -ge
    a[3, 2] = go
    a[4, 2] = ge
    a[5, 0] = go
    a[5, 1] = ge

    m = np.zeros((3, 5))
    m[0, 0] = math.sqrt(TWO_PI * p.kappa_o_ext)
    m[0, 1] = math.sqrt(TWO_PI * p.kappa_o_int)
    m[1, 2] = math.sqrt(TWO_PI * p.kappa_e_ext)
    m[1, 3] = math.sqrt(TWO_PI * (op.kappa_e_effective - p.kappa_e_ext))
    m[2, 4] = math.sqrt(gamma_m)
    b = np.zeros((6, 10))
    b[:3, :5] = m
    b[3:, 5:] = m

    c = np.zeros((4, 6))
    c[0, 0] = m[0, 0]
    c[1, 1] = m[1, 2]
    c[2, 3] = m[0, 0]
    c[3, 4] = m[1, 2]

    d = np.zeros((4, 10))
    d[0, PORT_OPT_EXT_1] = -1.0
    d[1, PORT_MW_EXT_1] = -1.0
    d[2, PORT_OPT_EXT_2] = -1.0
    d[3, PORT_MW_EXT_2] = -1.0

    noise = np.full(10, 0.5)
    noise[PORT_MECH_1] = mech_occupancy + 0.5
    noise[PORT_MECH_2] = mech_occupancy + 0.5

    eig = np.linalg.eigvals(a)
    if np.any(eig.real >= 0.0):
        raise NumericsError(
            f"unstable drift matrix: max Re(eig) = {eig.real.max():g}")

    return StateSpaceModel(
        a_rwa=a, b=b, c=c, d=d, g_o_amp=go, g_e_amp=ge,
        omega_m=TWO_PI * p.omega_m, input_noise=noise,
        kappa_o=p.kappa_o, kappa_e=op.kappa_e_effective,
        gamma_m=p.gamma_m, epsilon=p.epsilon,
    )


def transfer_matrix(m: StateSpaceModel, omega):
    """Input-to-output response H(w) = C (iwI - A)^-1 B + D (RWA).

    omega is an ordinary frequency in Hz; the 4x10 result is complex.
    """
    w = TWO_PI * float(omega)
    lhs = 1j * w * np.eye(6) - m.a_rwa
    try:
        x = np.linalg.solve(lhs, m.b)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"singular resolvent at omega={omega}") from exc
    return m.c @ x + m.d


def steady_state_covariance(m: StateSpaceModel):
    """Stationary quadrature covariance from the Lyapunov equation.

    Solves A V + V A^T + B N B^T = 0 where N carries half the symmetrized
    port occupancies (so a vacuum port, occupancy 1/2, drives a decoupled
    mode to variance 1/4).
    """
    q = (m.b * (m.input_noise / 2.0)) @ m.b.T
    try:
        v = solve_continuous_lyapunov(m.a_rwa, -q)
    except Exception as exc:
        raise NumericsError(f"Lyapunov solve failed: {exc}") from exc
    v = 0.5 * (v + v.T)
    resid = np.linalg.norm(m.a_rwa @ v + v @ m.a_rwa.T + q)
    if resid > 1e-10 * max(np.linalg.norm(q), 1e-300):
        raise NumericsError(f"Lyapunov residual too large: {resid:g}")
    if np.linalg.eigvalsh(v).min() < -1e-12 * np.abs(v).max():
        raise NumericsError("covariance is not positive semidefinite")
    return v


def _drive_to_half_grid(drive, n, dt):
    """Normalise the drive argument to samples on the half-step grid."""
    if drive is None:
        return np.zeros((2 * n + 1, 10))
    if callable(drive):
        t_half = np.arange(2 * n + 1) * (dt / 2.0)
        u = np.empty((2 * n + 1, 10))
        for k, tk in enumerate(t_half):
            u[k] = np.asarray(drive(tk), dtype=float)
        return u
    u = np.asarray(drive, dtype=float)
    if u.shape == (2 * n + 1, 10):
        return u
    if u.shape == (n + 1, 10):
        full = np.empty((2 * n + 1, 10))
        full[::2] = u
        full[1::2] = 0.5 * (u[:-1] + u[1:])
        return full
    raise ValueError(
        f"drive must have shape ({n + 1}, 10) or ({2 * n + 1}, 10), "
        f"got {u.shape}")


def propagate(m: StateSpaceModel, drive, dt, t_end,
              include_counter=False, x0=None) -> PropagationResult:
    """Integrate x' = A(t) x + B u(t) with classical RK4.

    drive may be None, a callable t -> 10-vector, or an array sampled on
    the output grid (n+1, 10) or the half-step grid (2n+1, 10); callables
    and half-grid samples preserve fourth-order accuracy.  The step must
    resolve the fastest rate in A (including 2*omega_m when the
    counter-rotating terms are enabled) or a ValueError is raised.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be > 0")
    dt_max = 1.0 / (20.0 * m.max_rate_hz(include_counter))
    if dt > dt_max * (1.0 + 1e-9):
        raise ValueError(
            f"dt={dt:g} too coarse: need dt <= {dt_max:g} to resolve the "
            f"fastest rate{' (2*omega_m)' if include_counter else ''}")
    n = int(round(t_end / dt))
    if n < 1:
        raise ValueError("t_end shorter than one step")
    u_half = _drive_to_half_grid(drive, n, dt)
    x0 = np.zeros(6) if x0 is None else np.asarray(x0, dtype=float)

    if include_counter:
        x = _kernels.rk4_counter(m.a_rwa, m.g_o_amp, m.g_e_amp,
                                 2.0 * m.omega_m, m.b, u_half, x0, dt)
    else:
        x = _kernels.rk4_lti(m.a_rwa, m.b, u_half, x0, dt)

    u_grid = u_half[::2]
    y = x @ m.c.T + u_grid @ m.d.T
    t = np.arange(n + 1) * dt
    return PropagationResult(t=t, x=x, y=y, dt=dt)


def dump_matrices(m: StateSpaceModel, fh):
    """Write the model matrices row-major as labelled plain text."""
    for name, mat in (("A_RWA", m.a_rwa), ("B", m.b), ("C", m.c), ("D", m.d)):
        fh.write(f"# {name} ({mat.shape[0]}x{mat.shape[1]}, angular rates)\n")
        for row in mat:
            fh.write(" ".join(f"{v:.12g}" for v in row) + "\n")
    fh.write(f"# input_noise\n{' '.join(f'{v:.12g}' for v in m.input_noise)}\n")
