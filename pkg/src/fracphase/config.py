"""Flat key-value run configuration with schema validation.

Config files hold one ``key = value`` pair per line; ``#`` starts a comment.
Unknown keys are rejected before any computation.  Command-line flags
override file values.  The full schema (defaults in brackets):

=================  =========================================================
key                meaning
=================  =========================================================
model              tfac_vc | tfch | tfsh
alpha              fractional order in (0, 1]  [0.5]
sigma              temporal regularity of the manufactured solution  [2.0]
gamma              mesh grading exponent >= 1  [1.0]
N                  number of steps for fixed meshes, >= 0  [64]
grid               nodes per direction, even, >= 4  [128]
Lx, Ly             domain lengths  [2*pi]
T                  time horizon >= 0  [1.0]
M                  mobility > 0  [0.01]
epsilon            interface width > 0  [0.25]
g, delta           pattern-well parameters  [1.0, 0.2]
S                  stabilizer  [2.0]
lambda             adaptive sensitivity >= 0  [100.0]
tau_min, tau_max   adaptive step bounds  [1e-3, 0.5]
mesh               uniform | graded | adaptive  [uniform]
tol                linear-solve relative tolerance in (0, 1e-6]  [1e-12]
seed               RNG seed for random initial data  [0]
snapshot_times     comma-separated times; nearest node at or after each  []
out_dir            artifact directory  [out]
init               random | cosine_mix | mms  [random]
levels             comma-separated step counts for convergence  [8,16,32,64]
=================  =========================================================
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "parse_config_file",
           "load_config"]

MESH_KINDS = ("uniform", "graded", "adaptive")
INIT_KINDS = ("random", "cosine_mix", "mms")
_TWO_PI = 6.283185307179586


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


def _parse_float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_int_list(text: str) -> list[int]:
    return [int(round(v)) for v in _parse_float_list(text)]


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "tfac_vc"
    alpha: float = 0.5
    sigma: float = 2.0
    gamma: float = 1.0
    N: int = 64
    grid: int = 128
    Lx: float = _TWO_PI
    Ly: float = _TWO_PI
    T: float = 1.0
    M: float = 0.01
    epsilon: float = 0.25
    g: float = 1.0
    delta: float = 0.2
    S: float = 2.0
    lam: float = 100.0
    tau_min: float = 1e-3
    tau_max: float = 0.5
    mesh: str = "uniform"
    tol: float = 1e-12
    seed: int = 0
    snapshot_times: tuple[float, ...] = ()
    out_dir: str = "out"
    init: str = "random"
    levels: tuple[int, ...] = (8, 16, 32, 64)

    def validate(self) -> "ExperimentConfig":
        if self.model not in ("tfac_vc", "tfch", "tfsh"):
            raise ConfigError(f"model must be one of tfac_vc|tfch|tfsh, "
                              f"got {self.model!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.sigma <= 0.0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.gamma < 1.0:
            raise ConfigError(f"gamma must be >= 1, got {self.gamma}")
        if self.N < 0:
            raise ConfigError(f"N must be nonnegative, got {self.N}")
        if self.grid < 4 or self.grid % 2:
            raise ConfigError(f"grid must be even and >= 4, got {self.grid}")
        if self.Lx <= 0.0 or self.Ly <= 0.0:
            raise ConfigError("domain lengths must be positive")
        if self.T < 0.0:
            raise ConfigError(f"T must be nonnegative, got {self.T}")
        if self.M <= 0.0:
            raise ConfigError(f"M must be positive, got {self.M}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.lam < 0.0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 < self.tau_min <= self.tau_max:
            raise ConfigError("need 0 < tau_min <= tau_max")
        if self.mesh not in MESH_KINDS:
            raise ConfigError(f"mesh must be one of {'|'.join(MESH_KINDS)}, "
                              f"got {self.mesh!r}")
        if not 0.0 < self.tol <= 1e-6:
            raise ConfigError(f"tol must lie in (0, 1e-6], got {self.tol}")
        if self.init not in INIT_KINDS:
            raise ConfigError(f"init must be one of {'|'.join(INIT_KINDS)}, "
                              f"got {self.init!r}")
        if any(n < 1 for n in self.levels):
            raise ConfigError("levels must be positive step counts")
        if self.mesh != "adaptive" and self.T > 0.0 and self.N == 0:
            raise ConfigError("fixed meshes with T > 0 need N >= 1")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lam" else f.name
            val = getattr(self, f.name)
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


# maps config-file key -> (dataclass field, converter)
_SCHEMA = {
    "model": ("model", str),
    "alpha": ("alpha", float),
    "sigma": ("sigma", float),
    "gamma": ("gamma", float),
    "N": ("N", int),
    "grid": ("grid", int),
    "Lx": ("Lx", float),
    "Ly": ("Ly", float),
    "T": ("T", float),
    "M": ("M", float),
    "epsilon": ("epsilon", float),
    "g": ("g", float),
    "delta": ("delta", float),
    "S": ("S", float),
    "lambda": ("lam", float),
    "tau_min": ("tau_min", float),
    "tau_max": ("tau_max", float),
    "mesh": ("mesh", str),
    "tol": ("tol", float),
    "seed": ("seed", int),
    "snapshot_times": ("snapshot_times", lambda s: tuple(_parse_float_list(s))),
    "out_dir": ("out_dir", str),
    "init": ("init", str),
    "levels": ("levels", lambda s: tuple(_parse_int_list(s))),
}


def parse_config_file(path) -> dict:
    """Read a config file into a dict of dataclass-field assignments."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    assignments: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {raw!r}")
        key, _, value = (tok.strip() for tok in line.partition("="))
        if key not in _SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        attr, conv = _SCHEMA[key]
        try:
            assignments[attr] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: "
                              f"{exc}") from exc
    return assignments


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build and validate a config from an optional file plus overrides."""
    assignments = parse_config_file(path) if path is not None else {}
    for attr, value in (overrides or {}).items():
        if value is None:
            continue
        assignments[attr] = value
    try:
        cfg = ExperimentConfig(**assignments)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
