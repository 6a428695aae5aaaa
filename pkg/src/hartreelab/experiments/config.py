"""Plain key=value experiment configuration.

One flat namespace per subcommand; unknown keys are rejected, known keys are
type-checked, and every key has a default so a missing config file runs the
reference setup.  Lists are comma-separated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s}")


def _parse_float_list(s: str):
    return tuple(float(tok) for tok in s.split(",") if tok.strip())


_PARSERS = {
    int: lambda s: int(s, 0),
    float: float,
    str: lambda s: s.strip(),
    bool: _parse_bool,
    tuple: _parse_float_list,
}

# key -> (type, default); the common block applies to every subcommand
COMMON_KEYS = {
    "D": (int, 3),
    "p": (float, 3.0),
    "omega": (float, 1.0),
    "n": (int, 32),
    "half_length": (float, 12.0),
    "support_tol": (float, 1e-3),
    "rng_seed": (int, 12345),
    "output_dir": (str, "out"),
    "solver_tol": (float, 1e-6),
    "solver_max_iter": (int, 3000),
    "seed_widths": (tuple, (0.8, 1.0, 1.5)),
    "seed_amplitude": (float, 2.0),
    "dt": (float, 1e-3),
    "t_end": (float, 5.0),
    "sample_every": (int, 20),
    "blowup_factor": (float, 3.0),
    "dt_min": (float, 1e-8),
    "hartree_mode": (str, "truncated"),
    "classify_tol": (float, 1e-9),
}

# Per-subcommand keys may shadow a common key to change its default; the
# resolution-sensitive runs (extremizers, refinement studies) default to the
# fine grid, the dynamics-heavy sweeps to the coarse one.
SUBCOMMAND_KEYS = {
    "groundstate": {
        "equation": (str, "standing_wave"),  # standing_wave|power_extremizer|hartree_extremizer|mass_constrained
        "q": (float, 1.0),
        "mass": (float, 0.0),  # 0 -> 0.5 * grad-norm threshold for mass_constrained
    },
    "evolve": {
        "seed_kind": (str, "gaussian"),  # gaussian|groundstate|file
        "seed_width": (float, 1.0),
        "seed_scale": (float, 1.0),
        "seed_path": (str, ""),
        "boost": (float, 0.0),
    },
    "classify": {
        "amplitudes": (tuple, ()),  # empty -> automatic ray scan
        "ray_width": (float, 1.0),
        "ray_points": (int, 40),
        "ray_max_amplitude": (float, 3.0),
    },
    "gn-verify": {
        "q": (float, 1.0),
        "n_probes": (int, 100),
        "n": (int, 64),
    },
    "compare-dnm": {
        "n_samples": (int, 50),
        "perturbation": (float, 0.3),
    },
    "dichotomy": {
        # the open region with positive virial sign is only reachable near the
        # mass-critical exponent; default the sweep there
        "p": (float, 2.5),
        "lambdas": (tuple, (0.9, 0.95, 1.05, 1.1, 1.2)),
        "kplus_search": (bool, True),
        "n_extra_gaussians": (int, 4),
    },
    "instability": {
        "lambdas": (tuple, (1.2, 1.1, 1.05, 1.02)),
        "t_end": (float, 25.0),
    },
    "orbit-stability": {
        "p": (float, 2.0),
        "half_length": (float, 16.0),
        "t_end": (float, 10.0),
        "sample_every": (int, 40),
        "mass_fraction": (float, 0.5),  # times the computed stability threshold
        "deltas": (tuple, (0.0, 1e-2)),
        "epsilon_factor": (float, 10.0),
        "epsilon_floor": (float, 1e-6),
    },
}


@dataclass
class ExperimentConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = object.__getattribute__(self, "values")
        key = name.replace("_", "-") if name in () else name
        if key in values:
            return values[key]
        raise AttributeError(name)

    def get(self, key, default=None):
        return self.values.get(key, default)


def schema_for(subcommand: str) -> dict:
    if subcommand not in SUBCOMMAND_KEYS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    schema = dict(COMMON_KEYS)
    schema.update(SUBCOMMAND_KEYS[subcommand])
    return schema


def load_config(subcommand: str, path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse `key = value` lines; '#' starts a comment; unknown keys rejected."""
    schema = schema_for(subcommand)
    values = {k: v for k, (_, v) in schema.items()}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in schema:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} for {subcommand}")
            typ, _default = schema[key]
            try:
                values[key] = _PARSERS[typ](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    for key, val in (overrides or {}).items():
        if key not in schema:
            raise ConfigError(f"override of unknown key {key!r}")
        values[key] = val
    _validate(subcommand, values)
    return ExperimentConfig(subcommand=subcommand, values=values)


def _validate(subcommand: str, v: dict) -> None:
    if v["hartree_mode"] not in ("truncated", "periodic"):
        raise ConfigError(f"hartree_mode must be truncated|periodic, got {v['hartree_mode']!r}")
    if v["n"] < 8 or (v["n"] & (v["n"] - 1)) != 0:
        raise ConfigError(f"n = {v['n']} must be a power of two >= 8")
    if not (v["half_length"] > 0):
        raise ConfigError("half_length must be positive")
    if not (v["dt"] > v["dt_min"] > 0):
        raise ConfigError("need dt > dt_min > 0")
    if subcommand == "groundstate" and v["equation"] not in (
            "standing_wave", "power_extremizer", "hartree_extremizer", "mass_constrained"):
        raise ConfigError(f"unknown equation {v['equation']!r}")
    if subcommand == "evolve" and v["seed_kind"] not in ("gaussian", "groundstate", "file"):
        raise ConfigError(f"unknown seed_kind {v['seed_kind']!r}")
