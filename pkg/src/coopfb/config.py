"""Run configuration: INI files flattened to dotted keys, plus overrides.

A file such as::

    [system]
    nu = 0.05

    [ipc.alg2]
    fallback = zero

sets ``system.nu`` and ``ipc.alg2.fallback``.  Every key can also be given
on the command line as ``--system.nu=0.05``.  Unknown keys are rejected.
"""

import configparser
from dataclasses import dataclass
import math

from .channel import SystemParams, TauMode
from .ipc import FALLBACKS
from .simulator import DEFAULT_SCHEMES, SchemeConfig, SweepSpec

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "PRESETS", "load_config", "parse_tau"]


class ConfigError(ValueError):
    pass


# key -> (default as text, kind)
DEFAULTS = {
    "system.l_antennas": ("6", "int"),
    "system.m_streams": ("2", "int"),
    "system.n_inner": ("3", "int"),
    "system.b_bits": ("6", "int"),
    "system.nu": ("0.2", "float"),
    "system.theta": ("1.0", "float"),
    "sweep.p_max_db": ("0,5,10,15,20,25,30", "floats"),
    "sweep.trials": ("10000", "int"),
    "sweep.seed": ("0", "int"),
    "sweep.workers": ("1", "int"),
    "sweep.per_trial_codebook": ("false", "bool"),
    "precoding.outer_from_true_inner": ("false", "bool"),
    "ipc.scheme": ("margin_fixed,margin_prop,algorithm1,perfect", "names"),
    "ipc.tau": ("2", "float"),
    "ipc.tau_proportional_coeff": ("0.4", "float"),
    "ipc.alg1.step": ("auto", "auto_float"),
    "ipc.alg1.step_fraction": ("0.05", "float"),
    "ipc.alg1.max_iters": ("200", "int"),
    "ipc.alg1.tol": ("1e-4", "float"),
    "ipc.alg1.multistart": ("true", "bool"),
    "ipc.alg2.fallback": ("p_max", "str"),
    "output.path": ("-", "str"),
    "output.sidecar": ("auto", "str"),
    "output.format": ("csv", "str"),
    "output.verbosity": ("1", "int"),
    "validate.check": ("all", "names"),
    "validate.points": ("1000", "int"),
    "validate.inject_fault": ("false", "bool"),
    "asymptote.tau": ("1,2,5,10,1e6", "names"),
    "asymptote.trials": ("10000", "int"),
    "scan_n.n_values": ("", "ints"),
}

PRESETS = {
    # throughput comparison at strong coupling
    "throughput": {"system.nu": "0.2", "ipc.scheme": "margin_fixed,margin_prop,algorithm1,perfect"},
    # outage / transmit power comparison at weak coupling
    "outage": {"system.nu": "0.05", "system.theta": "1.5", "ipc.scheme": "margin_fixed,margin_prop,algorithm2,perfect"},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, text, kind):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "floats":
            vals = tuple(float(x) for x in text.split(",") if x.strip())
            if not vals:
                raise ValueError
            return vals
        if kind == "ints":
            return tuple(int(x) for x in text.split(",") if x.strip())
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind == "names":
            return tuple(x.strip() for x in text.split(",") if x.strip())
        if kind == "auto_float":
            return None if text.lower() == "auto" else float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}") from None


def parse_tau(token):
    """``"2"`` -> fixed margin 2; ``"0.4*p_max"`` -> proportional margin 0.4."""
    t = token.replace(" ", "")
    try:
        if t.endswith("*p_max"):
            return TauMode("proportional", float(t[: -len("*p_max")]))
        return TauMode("fixed", float(t))
    except ValueError as exc:
        raise ConfigError(f"bad tau value {token!r}: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: raw text values plus typed accessors."""

    raw: dict

    def __getitem__(self, key):
        return _convert(key, self.raw[key], DEFAULTS[key][1])

    def system_params(self, p_max=None):
        try:
            return SystemParams(
                l_antennas=self["system.l_antennas"],
                m_streams=self["system.m_streams"],
                n_inner=self["system.n_inner"],
                b_bits=self["system.b_bits"],
                nu=self["system.nu"],
                theta=self["system.theta"],
                p_max=10 ** (max(self["sweep.p_max_db"]) / 10) if p_max is None else p_max,
                tau_mode=TauMode("fixed", self["ipc.tau"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def schemes(self):
        out = []
        for name in self["ipc.scheme"]:
            if name not in DEFAULT_SCHEMES:
                raise ConfigError(f"ipc.scheme: unknown scheme {name!r}; choose from {sorted(DEFAULT_SCHEMES)}")
            base = DEFAULT_SCHEMES[name]
            if name == "margin_prop":
                tau = TauMode("proportional", self["ipc.tau_proportional_coeff"])
            else:
                tau = TauMode("fixed", self["ipc.tau"])
            out.append(
                SchemeConfig(
                    name=name,
                    kind=base.kind,
                    tau=tau,
                    fallback=self["ipc.alg2.fallback"],
                    alg1_step=self["ipc.alg1.step"],
                    alg1_step_fraction=self["ipc.alg1.step_fraction"],
                    alg1_max_iters=self["ipc.alg1.max_iters"],
                    alg1_tol=self["ipc.alg1.tol"],
                    alg1_multistart=self["ipc.alg1.multistart"],
                )
            )
        return tuple(out)

    def sweep_spec(self):
        try:
            return SweepSpec(
                params=self.system_params(),
                p_max_db=self["sweep.p_max_db"],
                schemes=self.schemes(),
                trials_per_point=self["sweep.trials"],
                master_seed=self["sweep.seed"],
                workers=self["sweep.workers"],
                per_trial_codebook=self["sweep.per_trial_codebook"],
                outer_from_true_inner=self["precoding.outer_from_true_inner"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self):
        """Type-check every key and the physical constraints; raise ConfigError."""
        for key in self.raw:
            self[key]
        self.system_params()
        self.sweep_spec()
        if self["ipc.alg2.fallback"] not in FALLBACKS:
            raise ConfigError(f"ipc.alg2.fallback must be one of {FALLBACKS}")
        if self["ipc.alg1.step"] is not None and not self["ipc.alg1.step"] > 0:
            raise ConfigError("ipc.alg1.step must be positive or 'auto'")
        if self["ipc.alg1.max_iters"] < 1:
            raise ConfigError("ipc.alg1.max_iters must be >= 1")
        if self["sweep.workers"] < 1:
            raise ConfigError("sweep.workers must be >= 1")
        if self["sweep.seed"] < 0:
            raise ConfigError("sweep.seed must be nonnegative")
        if self["output.format"] != "csv":
            raise ConfigError("output.format: only 'csv' is supported")
        if self["validate.points"] < 1 or self["asymptote.trials"] < 1:
            raise ConfigError("validate.points and asymptote.trials must be >= 1")
        for tok in self["asymptote.tau"]:
            parse_tau(tok)
        return self

    def to_ini(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for key in DEFAULTS:
            section, _, name = key.rpartition(".")
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, name, self.raw[key])
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in cp.items(section))
            lines.append("")
        return "\n".join(lines)


def read_ini(path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return {f"{section}.{k}": v for section in cp.sections() for k, v in cp.items(section)}


def load_config(path=None, overrides=None, preset=None):
    """Defaults, then preset, then file, then overrides; unknown keys raise."""
    raw = {k: v for k, (v, _) in DEFAULTS.items()}
    layers = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        layers.append(("preset " + preset, PRESETS[preset]))
    if path is not None:
        layers.append((str(path), read_ini(path)))
    if overrides:
        layers.append(("command line", dict(overrides)))
    for origin, layer in layers:
        for key, value in layer.items():
            if key not in DEFAULTS:
                raise ConfigError(f"{origin}: unknown key {key!r}")
            raw[key] = str(value)
    return RunConfig(raw).validate()
