"""Experiment configuration: an INI-style ``key = value`` file with one section per stage.

Every key has a default, unknown sections or keys are rejected, and
``parse(serialize(cfg)) == cfg`` holds for every valid config.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .codec import ENCODER_KINDS, Encoder
from .marching import MarchConfig
from .network import SUBTRACT, ZERO, LifConfig, TrainConfig

PROBLEMS = ("vdp", "lorenz", "wave", "heat")


class ConfigError(ValueError):
    pass


def _f(section, default, **kw):
    return field(default=default, metadata={"section": section, **kw})


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = _f("problem", "custom")
    problem: str = _f("problem", "vdp")
    mu: float = _f("problem", 2.0)
    sigma: float = _f("problem", 10.0)
    rho: float = _f("problem", 28.0)
    beta: float = _f("problem", 8.0 / 3.0)
    state0: tuple = _f("problem", (1.0, 0.0))
    c: float = _f("problem", 1.0)
    alpha: float = _f("problem", 1.0)
    x_min: float = _f("problem", 0.0)
    x_max: float = _f("problem", 1.0)
    dx: float = _f("problem", 0.01)
    ic: str = _f("problem", "gaussian")
    ic_width: float = _f("problem", 0.05)

    dt: float = _f("integrator", 0.004)
    n_steps: int = _f("integrator", 2500)

    window: int = _f("march", 2)
    subsample: int = _f("march", 10)
    train_split: int = _f("march", 200)
    encoder: str = _f("march", "lower_triangular")
    spike_steps: int = _f("march", 100)
    encoder_seed: int = _f("march", 0)
    range_margin: float = _f("march", 0.1)
    shared_range: bool = _f("march", False)

    hidden: int = _f("network", 500)
    lif_decay: float = _f("network", 0.9)
    lif_threshold: float = _f("network", 1.0)
    lif_reset: str = _f("network", SUBTRACT)
    literal_relu: bool = _f("network", False)

    epochs: int = _f("train", 5000)
    learning_rate: float = _f("train", 1e-3)
    batch_size: int = _f("train", 0)
    seed: int = _f("train", 0)
    beta1: float = _f("train", 0.9)
    beta2: float = _f("train", 0.999)
    eps: float = _f("train", 1e-8)

    out_dir: str = _f("output", "")

    def __post_init__(self):
        try:
            object.__setattr__(self, "state0", tuple(float(v) for v in self.state0))
            self.validate()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}")
        if self.problem in ("vdp", "lorenz"):
            dim = 2 if self.problem == "vdp" else 3
            if len(self.state0) != dim:
                raise ConfigError(f"{self.problem} needs a {dim}-component state0")
        else:
            if self.ic not in ("gaussian", "hat"):
                raise ConfigError("ic must be 'gaussian' or 'hat'")
            self.grid()  # raises on a bad grid
        positive = ["dt", "ic_width", "dx", "learning_rate", "hidden", "spike_steps", "n_steps"]
        positive += {"wave": ["c"], "heat": ["alpha"]}.get(self.problem, [])
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.encoder not in ENCODER_KINDS:
            raise ConfigError(f"encoder must be one of {ENCODER_KINDS}")
        if self.lif_reset not in (SUBTRACT, ZERO):
            raise ConfigError(f"lif_reset must be {SUBTRACT!r} or {ZERO!r}")
        if self.subsample < 1 or self.subsample > self.n_steps:
            raise ConfigError("subsample must lie in [1, n_steps]")
        n_sub = self.n_steps // self.subsample
        if not 0 < self.train_split < n_sub:
            raise ConfigError(f"train_split must lie in (0, {n_sub})")
        self.march_config()
        self.lif_config()
        self.train_config()

    def grid(self):
        from .solvers import Grid1D
        return Grid1D(self.x_min, self.x_max, self.dx)

    def encoder_config(self) -> Encoder:
        return Encoder(self.encoder, self.spike_steps, self.encoder_seed)

    def march_config(self) -> MarchConfig:
        return MarchConfig(self.window, self.subsample, self.train_split, self.encoder_config(),
                           per_channel=not self.shared_range, range_margin=self.range_margin)

    def lif_config(self) -> LifConfig:
        return LifConfig(self.lif_decay, self.lif_threshold, self.lif_reset)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.learning_rate, self.batch_size, self.seed,
                           self.beta1, self.beta2, self.eps)

    @property
    def is_pde(self) -> bool:
        return self.problem in ("wave", "heat")

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


SECTIONS = ("problem", "integrator", "march", "network", "train", "output")
_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _parse_value(name: str, text: str):
    kind = _FIELDS[name].type
    text = text.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {text!r}")
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "tuple":
            return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc
    return text


def serialize(cfg: ExperimentConfig) -> str:
    values = asdict(cfg)
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for f in fields(cfg):
            if f.metadata["section"] == section:
                lines.append(f"{f.name} = {_format_value(values[f.name])}")
        lines.append("")
    return "\n".join(lines)


def parse(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kwargs = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            f = _FIELDS.get(key)
            if f is None or f.metadata["section"] != section:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kwargs[key] = _parse_value(key, raw)
    return ExperimentConfig(**kwargs)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(text)


# Full presets are the reference experiment sizes; desk presets shrink #T and
# epochs so they finish in minutes on one CPU core.
_FULL = {
    "vdp": ExperimentConfig(
        name="vdp", problem="vdp", mu=2.0, state0=(1.0, 0.0), dt=0.004, n_steps=2500,
        window=2, subsample=10, train_split=200, spike_steps=100, epochs=5000),
    "lorenz": ExperimentConfig(
        name="lorenz", problem="lorenz", sigma=10.0, rho=28.0, beta=8.0 / 3.0, state0=(1.0, 1.0, 1.0),
        dt=0.01, n_steps=4000, window=2, subsample=10, train_split=320, spike_steps=1000, epochs=5000),
    "wave": ExperimentConfig(
        name="wave", problem="wave", c=1.0, x_min=0.0, x_max=1.0, dx=0.01, ic="gaussian", ic_width=0.05,
        dt=0.01, n_steps=1000, window=2, subsample=1, train_split=800, spike_steps=100,
        shared_range=True, epochs=5000),
    "heat": ExperimentConfig(
        name="heat", problem="heat", alpha=1.0, x_min=0.0, x_max=1.0, dx=0.01, ic="hat",
        dt=0.00004, n_steps=1000, window=2, subsample=10, train_split=80, spike_steps=100,
        shared_range=True, epochs=5000),
}

_DESK = {
    "vdp": dict(spike_steps=20, epochs=500),
    "lorenz": dict(spike_steps=50, epochs=500),
    "wave": dict(spike_steps=20, epochs=300),
    "heat": dict(spike_steps=20, epochs=500),
}

DESCRIPTIONS = {
    "vdp": "Van der Pol oscillator, mu=2 on t in [0, 10] from (1, 0); 2500 RK4 steps kept every 10th; "
           "steps 1-200 train, 201-250 extrapolate; lower-triangular #T=100, 2-step window",
    "lorenz": "Lorenz system, sigma=10, rho=28, beta=8/3 on t in [0, 40] from (1, 1, 1); 4000 RK4 steps "
              "kept every 10th; steps 1-320 train, 321-400 extrapolate; lower-triangular #T=1000",
    "wave": "1-D wave, c=1 on [0, 1], dx=dt=0.01 (Courant number 1), Gaussian pulse of width 0.05 at "
            "x=0.5, zero velocity; 1000 leapfrog steps, no sub-sampling; steps 1-800 train; #T=100",
    "heat": "1-D heat, alpha=1 on [0, 1], dx=0.01, dt=4e-5 (diffusion number 0.4), hat initial "
            "condition peaking at x=0.5; 1000 FTCS steps kept every 10th (diffusion number 4 per "
            "kept step); steps 1-80 train, 81-100 extrapolate; #T=100",
}


def presets() -> dict[str, ExperimentConfig]:
    out = {}
    for name, cfg in _FULL.items():
        out[name] = cfg
    for name, overrides in _DESK.items():
        out[f"{name}-desk"] = replace(_FULL[name], name=f"{name}-desk", **overrides)
    return out


def preset(name: str) -> ExperimentConfig:
    table = presets()
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(table)}")
    return table[name]


def describe(name: str) -> str:
    base = name.removesuffix("-desk")
    text = DESCRIPTIONS[base]
    if name.endswith("-desk"):
        d = _DESK[base]
        text += f" [desk scale: #T={d['spike_steps']}, {d['epochs']} epochs]"
    return text
