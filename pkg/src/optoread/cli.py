"""Command-line front end.

Four subcommands: ``budget`` (efficiency and added-noise table), ``sweep``
(quantum efficiency over a damping-rate grid), ``shots`` (single-shot
histograms and fidelity) and ``calibrate`` (SNR-versus-dephasing quantum
efficiency recovery).  Every run is deterministic given (config, seed);
output files carry a header recording the config hash and seed.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import montecarlo, readout
from .config import ConfigError, RunConfig, load_config
from .params import efficiency_budget
from .statespace import NumericsError, build_model

_BUDGET_FIELDS = ("eta_bw", "eta_t", "eta_g", "eta_mic", "eta_opt",
                  "eta_cav", "eta_noise", "eta_loss", "eta_q", "n_t",
                  "n_det", "n_cqed")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


class Writer:
    """CSV or JSON-lines table writer with a provenance header."""

    def __init__(self, out_dir, fmt, sha256, seed):
        self.out_dir = out_dir
        self.fmt = fmt
        self.sha256 = sha256
        self.seed = seed
        os.makedirs(out_dir, exist_ok=True)

    def path(self, stem):
        ext = "csv" if self.fmt == "csv" else "jsonl"
        return os.path.join(self.out_dir, f"{stem}.{ext}")

    def write_table(self, stem, columns, rows):
        path = self.path(stem)
        with open(path, "w", encoding="utf-8") as fh:
            if self.fmt == "csv":
                fh.write(f"# config_sha256={self.sha256}\n")
                fh.write(f"# seed={self.seed}\n")
                fh.write(",".join(columns) + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
            else:
                fh.write(json.dumps({"config_sha256": self.sha256,
                                     "seed": self.seed}) + "\n")
                for row in rows:
                    obj = {c: (v if isinstance(v, str)
                               else (int(v) if isinstance(v, (int, np.integer))
                                     else float(v)))
                           for c, v in zip(columns, row)}
                    fh.write(json.dumps(obj) + "\n")
        return path


# ---------------------------------------------------------------------------
# Shared pipeline construction
# ---------------------------------------------------------------------------

def _chain_for(cfg: RunConfig, op):
    model = build_model(cfg.transducer, op)
    kwargs = dict(s_b=cfg.noise.s_b)
    if cfg.noise.s_t0 is not None:
        kwargs["s_t0"] = cfg.noise.s_t0
    else:
        target = (cfg.noise.n_t_target if cfg.noise.n_t_target is not None
                  else cfg.budget.n_t)
        kwargs["n_t_target"] = target
    return readout.TransducerChain(
        model, eta_mic=cfg.budget.eta_mic, eta_opt=cfg.budget.eta_opt,
        eta_cav=cfg.cqed.eta_cav, **kwargs)


def _pulse_for(cfg: RunConfig, amplitude=None):
    return readout.ReadoutPulse(
        amplitude=cfg.pulse.amplitude if amplitude is None else amplitude,
        t_p=cfg.pulse.t_p, t_r=cfg.pulse.t_r)


def _budget_for(cfg: RunConfig, op):
    return efficiency_budget(cfg.transducer, cfg.cqed, op,
                             cfg.budget.eta_mic, cfg.budget.eta_opt,
                             cfg.budget.n_t, cfg.pulse.t_p)


# ---------------------------------------------------------------------------
# budget
# ---------------------------------------------------------------------------

def cmd_budget(cfg: RunConfig, args, writer: Writer):
    op = cfg.operating_point()
    b = _budget_for(cfg, op)
    n_r = cfg.pulse.amplitude ** 2
    snr = readout.snr_from_budget(n_r, b, convention=args.convention)
    f_o = 1.0 - 2.0 * cfg.cqed.p_residual
    fidelity = f_o * math.erf(snr / (2.0 * math.sqrt(2.0)))
    rows = [(name, getattr(b, name)) for name in _BUDGET_FIELDS]
    rows += [("snr_predicted", snr), ("fidelity_predicted", fidelity)]
    path = writer.write_table("budget", ("quantity", "value"), rows)
    print(f"# operating point: gamma_e={op.gamma_e:g} Hz, "
          f"gamma_o={op.gamma_o:g} Hz, gamma_t={op.gamma_t:g} Hz, "
          f"kappa_e={op.kappa_e_effective:g} Hz")
    for name, value in rows:
        print(f"{name:>20s} = {value:.6g}")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_row(task):
    cfg, gamma_o, gamma_e = task
    op = cfg.operating_point(gamma_e=gamma_e, gamma_o=gamma_o)
    b = _budget_for(cfg, op)
    return (gamma_e, gamma_o, op.kappa_e_effective) + tuple(
        getattr(b, name) for name in _BUDGET_FIELDS)


def cmd_sweep(cfg: RunConfig, args, writer: Writer):
    s = cfg.sweep
    gamma_es = np.geomspace(s.gamma_e_min, s.gamma_e_max, s.gamma_e_points)
    tasks = [(cfg, go, ge) for go in s.gamma_o_values for ge in gamma_es]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_row, tasks, chunksize=8))
    else:
        rows = [_sweep_row(t) for t in tasks]
    columns = ("gamma_e_hz", "gamma_o_hz", "kappa_e_hz") + _BUDGET_FIELDS
    path = writer.write_table("sweep", columns, rows)
    best = max(rows, key=lambda r: r[columns.index("eta_q")])
    print(f"swept {len(rows)} points; max eta_q = "
          f"{best[columns.index('eta_q')]:.4g} at gamma_e={best[0]:.4g} Hz, "
          f"gamma_o={best[1]:.4g} Hz")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# shots
# ---------------------------------------------------------------------------

def _shot_chunk(task):
    model, prepared, indices, seed, include_decay = task
    out = np.empty(len(indices))
    state_idx = 0 if prepared == "g" else 1
    for j, i in enumerate(indices):
        rec = montecarlo.simulate_shot(
            model, prepared, montecarlo._stream(seed, state_idx, i),
            include_t1_decay=include_decay)
        out[j] = rec.v
    return out


def _collect_parallel(model, prepared, n_shots, seed, include_decay, workers):
    if workers <= 1:
        return montecarlo.collect_shots(model, prepared, n_shots, seed,
                                        include_t1_decay=include_decay)
    chunks = np.array_split(np.arange(n_shots), workers * 4)
    tasks = [(model, prepared, list(c), seed, include_decay)
             for c in chunks if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_shot_chunk, tasks))
    return np.concatenate(parts)


def cmd_shots(cfg: RunConfig, args, writer: Writer):
    op = cfg.operating_point()
    chain = _chain_for(cfg, op)
    bundle = readout.evaluate_readout(_pulse_for(cfg), cfg.cqed, chain)
    model = montecarlo.ShotModel.from_bundle(
        bundle, p_residual=cfg.cqed.p_residual,
        t1=cfg.cqed.t1 if cfg.montecarlo.include_t1_decay else None)
    mc = cfg.montecarlo
    v_g = _collect_parallel(model, "g", mc.n_shots, args.seed,
                            mc.include_t1_decay, args.workers)
    v_e = _collect_parallel(model, "e", mc.n_shots, args.seed,
                            mc.include_t1_decay, args.workers)
    hist = montecarlo.histogram_from_voltages(v_g, v_e, bins=mc.bins)

    writer.write_table(
        "histogram", ("bin_center", "count_g", "count_e"),
        list(zip(hist.bin_centers, hist.counts_g, hist.counts_e)))
    writer.write_table(
        "traces", ("t_s", "w_i", "w_q", "i_g", "q_g", "i_e", "q_e"),
        list(zip(model.t, model.w_i, model.w_q, model.i_g, model.q_g,
                 model.i_e, model.q_e)))
    summary = [
        ("v_thresh", hist.v_thresh), ("f_opt", hist.f_opt),
        ("p_e_given_g", hist.p_e_given_g), ("p_g_given_e", hist.p_g_given_e),
        ("n_shots_per_state", mc.n_shots),
        ("mu_g", model.mu_g), ("mu_e", model.mu_e), ("sigma", model.sigma),
        ("snr_analytic", bundle.stats.snr), ("n_t", bundle.stats.n_t),
        ("n_r", bundle.n_r), ("eta_bw_exact", bundle.means.eta_bw_exact),
    ]
    path = writer.write_table("shots_summary", ("quantity", "value"), summary)
    print(f"F_opt = {hist.f_opt:.4f} at V_thresh = {hist.v_thresh:.4g} "
          f"(P(e|g) = {hist.p_e_given_g:.4f}, "
          f"P(g|e) = {hist.p_g_given_e:.4f})")
    print(f"analytic SNR = {bundle.stats.snr:.4f}, n_t = "
          f"{bundle.stats.n_t:.4f}")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(cfg: RunConfig, args, writer: Writer):
    cal = cfg.calibration
    if cal.points < 2:
        raise ConfigError("[calibration] points must be >= 2")
    volts = np.linspace(cal.v_min, cal.v_max, cal.points)
    op = cfg.operating_point()
    chain = _chain_for(cfg, op)
    try:
        result = readout.calibrate_quantum_efficiency(
            volts, _pulse_for(cfg, amplitude=1.0), cfg.cqed, chain,
            amplitude_per_volt=cal.amplitude_per_volt)
    except readout.FitError as exc:
        raise NumericsError(f"calibration fit failed: {exc}") from exc
    writer.write_table(
        "calibration", ("v", "snr", "rho_ge"),
        list(zip(result.voltages, result.snrs, result.rho_ge)))
    summary = [("a_per_volt", result.a), ("sigma_v", result.sigma_v),
               ("eta_q", result.eta_q), ("r2_snr", result.r2_snr),
               ("r2_gauss", result.r2_gauss)]
    path = writer.write_table("calibration_summary", ("quantity", "value"),
                              summary)
    print(f"eta_q = {result.eta_q:.6g} (a = {result.a:.6g}/V, sigma_v = "
          f"{result.sigma_v:.6g} V)")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="optoread",
        description="Noise budget and single-shot simulation of optically "
                    "mediated dispersive qubit readout.")
    parser.add_argument("--config", default=None,
                        help="config file (default: bundled device table)")
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--convention",
                        choices=("supplementary", "methods"),
                        default="supplementary",
                        help="SNR loss-scaling convention")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("budget", help="efficiency and added-noise budget")
    sub.add_parser("sweep", help="eta_q over the damping-rate grid")
    sub.add_parser("shots", help="single-shot histograms and fidelity")
    sub.add_parser("calibrate", help="quantum-efficiency calibration")
    return parser


_COMMANDS = {
    "budget": cmd_budget,
    "sweep": cmd_sweep,
    "shots": cmd_shots,
    "calibrate": cmd_calibrate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    writer = Writer(args.out, args.format, cfg.sha256, args.seed)
    try:
        return _COMMANDS[args.command](cfg, args, writer)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericsError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
