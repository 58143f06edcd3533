"""Configuration loading with unit-suffixed keys.

Run configurations are plain INI files.  Every key in the schema carries an
explicit unit suffix (``_hz``, ``_s``, ``_photons``, ...) or is a registered
dimensionless quantity; anything else is rejected with a diagnostic naming
the offending key and the expected spelling, so rad/s-vs-Hz mistakes cannot
enter through the interface.
"""

from __future__ import annotations

import configparser
import hashlib
import importlib.resources
from dataclasses import dataclass

from .params import (CircuitQedParams, OperatingPoint, ParameterError,
                     TransducerParams)


class ConfigError(ValueError):
    """Raised for malformed or physically inconsistent configurations."""


# key -> (python type, unit hint shown in diagnostics)
_SCHEMA = {
    "transducer": {
        "omega_m_hz": (float, "Hz"),
        "gamma_m_hz": (float, "Hz"),
        "g_o_hz": (float, "Hz"),
        "g_e_hz": (float, "Hz"),
        "kappa_o_hz": (float, "Hz"),
        "kappa_o_ext_hz": (float, "Hz"),
        "kappa_e_low_hz": (float, "Hz"),
        "kappa_e_high_hz": (float, "Hz"),
        "kappa_e_ext_hz": (float, "Hz"),
        "epsilon": (float, "dimensionless"),
        "gamma_e_max_hz": (float, "Hz"),
    },
    "cqed": {
        "omega_q_hz": (float, "Hz"),
        "omega_c_hz": (float, "Hz"),
        "g_qc_hz": (float, "Hz"),
        "nu_hz": (float, "Hz"),
        "chi_hz": (float, "Hz"),
        "kappa_c_hz": (float, "Hz"),
        "kappa_c_ext_hz": (float, "Hz"),
        "kappa_c_w_hz": (float, "Hz"),
        "kappa_c_int_hz": (float, "Hz"),
        "t1_s": (float, "s"),
        "t2_s": (float, "s"),
        "p_residual": (float, "dimensionless"),
    },
    "operating_point": {
        "gamma_e_hz": (float, "Hz"),
        "gamma_o_hz": (float, "Hz"),
        "kappa_e_hz": (float, "Hz"),  # optional override of the loss model
    },
    "budget": {
        "eta_mic": (float, "dimensionless"),
        "eta_opt": (float, "dimensionless"),
        "n_t_photons": (float, "photons"),
    },
    "pulse": {
        "amplitude_sqrt_photons": (float, "photons^(1/2)"),
        "t_p_s": (float, "s"),
        "t_r_s": (float, "s"),
    },
    "noise": {
        "s_b": (float, "shot-noise units"),
        "s_t0_photons": (float, "photons"),
        "n_t_target_photons": (float, "photons"),
    },
    "montecarlo": {
        "n_shots": (int, "count"),
        "bins": (str, "'fd' or integer count"),
        "include_t1_decay": (bool, "boolean"),
    },
    "sweep": {
        "gamma_e_min_hz": (float, "Hz"),
        "gamma_e_max_hz": (float, "Hz"),
        "gamma_e_points": (int, "count"),
        "gamma_o_list_hz": ("floatlist", "comma-separated Hz"),
    },
    "calibration": {
        "v_min": (float, "drive voltage, arbitrary"),
        "v_max": (float, "drive voltage, arbitrary"),
        "points": (int, "count"),
        "amplitude_per_volt_sqrt_photons": (float, "photons^(1/2) per volt"),
    },
}

_OPTIONAL_KEYS = {
    ("operating_point", "kappa_e_hz"),
    ("noise", "s_t0_photons"),
    ("noise", "n_t_target_photons"),
}


@dataclass(frozen=True)
class BudgetSettings:
    eta_mic: float
    eta_opt: float
    n_t: float


@dataclass(frozen=True)
class PulseSettings:
    amplitude: float
    t_p: float
    t_r: float


@dataclass(frozen=True)
class NoiseSettings:
    s_b: float
    s_t0: float | None
    n_t_target: float | None


@dataclass(frozen=True)
class MonteCarloSettings:
    n_shots: int
    bins: str
    include_t1_decay: bool


@dataclass(frozen=True)
class SweepSettings:
    gamma_e_min: float
    gamma_e_max: float
    gamma_e_points: int
    gamma_o_values: tuple


@dataclass(frozen=True)
class CalibrationSettings:
    v_min: float
    v_max: float
    points: int
    amplitude_per_volt: float


@dataclass(frozen=True)
class RunConfig:
    transducer: TransducerParams
    cqed: CircuitQedParams
    gamma_e: float
    gamma_o: float
    kappa_e_override: float | None
    budget: BudgetSettings
    pulse: PulseSettings
    noise: NoiseSettings
    montecarlo: MonteCarloSettings
    sweep: SweepSettings
    calibration: CalibrationSettings
    sha256: str

    def operating_point(self, gamma_e=None, gamma_o=None):
        """Operating point at the configured (or overridden) damping rates."""
        ge = self.gamma_e if gamma_e is None else gamma_e
        go = self.gamma_o if gamma_o is None else gamma_o
        override = self.kappa_e_override if gamma_e is None else None
        try:
            return OperatingPoint.from_damping(
                self.transducer, ge, go, kappa_e_override=override)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc


def default_config_text():
    """Text of the bundled default configuration."""
    ref = importlib.resources.files("optoread").joinpath("data/table1.cfg")
    return ref.read_text(encoding="utf-8")


def config_sha256(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _suffix_hint(section, key):
    """Suggest the schema key whose stem matches an unknown key."""
    known = _SCHEMA[section]
    for cand, (_, unit) in known.items():
        stem = cand
        for suf in ("_hz", "_s", "_photons", "_sqrt_photons"):
            if cand.endswith(suf):
                stem = cand[: -len(suf)]
                break
        if key == stem or key.startswith(stem + "_") or cand.startswith(key):
            return f"; did you mean '{cand}' ({unit})?"
    return ""


def _parse_value(section, key, raw, kind):
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floatlist":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {kind}") from exc


def loads(text):
    """Parse configuration text into a validated ``RunConfig``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{key}' in [{section}]"
                    + _suffix_hint(section, key))
            kind, _ = _SCHEMA[section][key]
            values[(section, key)] = _parse_value(section, key, raw, kind)

    for section, keys in _SCHEMA.items():
        if section not in parser.sections():
            raise ConfigError(f"missing section [{section}]")
        for key, (_, unit) in keys.items():
            if (section, key) in _OPTIONAL_KEYS:
                continue
            if (section, key) not in values:
                raise ConfigError(
                    f"missing key '{key}' ({unit}) in [{section}]")

    def get(section, key, default=None):
        return values.get((section, key), default)

    try:
        transducer = TransducerParams(
            omega_m=get("transducer", "omega_m_hz"),
            gamma_m=get("transducer", "gamma_m_hz"),
            g_o=get("transducer", "g_o_hz"),
            g_e=get("transducer", "g_e_hz"),
            kappa_o=get("transducer", "kappa_o_hz"),
            kappa_o_ext=get("transducer", "kappa_o_ext_hz"),
            kappa_e_low=get("transducer", "kappa_e_low_hz"),
            kappa_e_high=get("transducer", "kappa_e_high_hz"),
            kappa_e_ext=get("transducer", "kappa_e_ext_hz"),
            epsilon=get("transducer", "epsilon"),
            gamma_e_max=get("transducer", "gamma_e_max_hz"),
        )
        cqed = CircuitQedParams(
            omega_q=get("cqed", "omega_q_hz"),
            omega_c=get("cqed", "omega_c_hz"),
            g_qc=get("cqed", "g_qc_hz"),
            nu=get("cqed", "nu_hz"),
            chi=get("cqed", "chi_hz"),
            kappa_c=get("cqed", "kappa_c_hz"),
            kappa_c_ext=get("cqed", "kappa_c_ext_hz"),
            kappa_c_w=get("cqed", "kappa_c_w_hz"),
            kappa_c_int=get("cqed", "kappa_c_int_hz"),
            t1=get("cqed", "t1_s"),
            t2=get("cqed", "t2_s"),
            p_residual=get("cqed", "p_residual"),
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc

    noise = NoiseSettings(
        s_b=get("noise", "s_b"),
        s_t0=get("noise", "s_t0_photons"),
        n_t_target=get("noise", "n_t_target_photons"),
    )
    if noise.s_t0 is not None and noise.n_t_target is not None:
        raise ConfigError(
            "[noise] specify either s_t0_photons or n_t_target_photons, "
            "not both")

    sweep = SweepSettings(
        gamma_e_min=get("sweep", "gamma_e_min_hz"),
        gamma_e_max=get("sweep", "gamma_e_max_hz"),
        gamma_e_points=get("sweep", "gamma_e_points"),
        gamma_o_values=get("sweep", "gamma_o_list_hz"),
    )
    if sweep.gamma_e_points < 1 or not sweep.gamma_o_values:
        raise ConfigError("[sweep] grids must be non-empty")
    if sweep.gamma_e_max > transducer.gamma_e_max:
        raise ConfigError(
            "[sweep] gamma_e_max_hz exceeds the modelled kappa_e range "
            f"(gamma_e_max_hz = {transducer.gamma_e_max:g} in [transducer])")

    calibration = CalibrationSettings(
        v_min=get("calibration", "v_min"),
        v_max=get("calibration", "v_max"),
        points=get("calibration", "points"),
        amplitude_per_volt=get("calibration",
                               "amplitude_per_volt_sqrt_photons"),
    )

    cfg = RunConfig(
        transducer=transducer,
        cqed=cqed,
        gamma_e=get("operating_point", "gamma_e_hz"),
        gamma_o=get("operating_point", "gamma_o_hz"),
        kappa_e_override=get("operating_point", "kappa_e_hz"),
        budget=BudgetSettings(
            eta_mic=get("budget", "eta_mic"),
            eta_opt=get("budget", "eta_opt"),
            n_t=get("budget", "n_t_photons"),
        ),
        pulse=PulseSettings(
            amplitude=get("pulse", "amplitude_sqrt_photons"),
            t_p=get("pulse", "t_p_s"),
            t_r=get("pulse", "t_r_s"),
        ),
        noise=noise,
        montecarlo=MonteCarloSettings(
            n_shots=get("montecarlo", "n_shots"),
            bins=get("montecarlo", "bins"),
            include_t1_decay=get("montecarlo", "include_t1_decay"),
        ),
        sweep=sweep,
        calibration=calibration,
        sha256=config_sha256(text),
    )
    cfg.operating_point()  # validate the configured point eagerly
    return cfg


def load_config(path=None):
    """Load a config file; ``None`` loads the bundled defaults."""
    if path is None:
        return loads(default_config_text())
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)
