"""The trained network as an explicit time-marching scheme.

A sample maps the encoded window ``[u(n-p+1), ..., u(n)]`` to the window shifted one
step forward, ``[u(n-p+2), ..., u(n+1)]``; the newest block of the output is the
prediction. Window channels are ordered oldest block first.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import RATE, Encoder, NormRange, count_out_of_range
from .network import Network, binarize, forward
from .solvers import Trajectory, format_trajectory, parse_trajectory, subsample

log = logging.getLogger(__name__)

ONE_STEP = "one_step"
CASCADE = "cascade"
INTERPOLATION = "interpolation"
EXTRAPOLATION = "extrapolation"
DIVERGENCE_FACTOR = 1e3


@dataclass(frozen=True)
class MarchConfig:
    """How a trajectory becomes spike samples.

    ``train_split`` counts steps of the sub-sampled trajectory: predictions of
    steps ``1..train_split`` are interpolation, later steps extrapolation.
    ``ranges`` is fitted on the training rows when left as ``None``.
    """

    window: int = 2
    subsample: int = 1
    train_split: int = 1
    encoder: Encoder = field(default_factory=Encoder)
    per_channel: bool = True
    range_margin: float = 0.1
    ranges: NormRange | None = None

    def __post_init__(self):
        if self.window not in (1, 2):
            raise ValueError("window must be 1 or 2")
        if self.subsample < 1:
            raise ValueError("subsample must be >= 1")
        if self.train_split < 1:
            raise ValueError("train_split must be positive")
        if self.range_margin < 0:
            raise ValueError("range_margin must be >= 0")

    @property
    def steps(self) -> int:
        return self.encoder.steps


def encode_states(values, encoder: Encoder, ranges: NormRange | None, first_step: int = 0) -> np.ndarray:
    """Encode state rows ``(rows, d)`` into blocks ``(rows, steps, d)``.

    Rate encoding keys each row's random stream by ``(seed, physical step)`` so a
    timestep encodes identically in every window that contains it.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if encoder.kind != RATE:
        return encoder.encode(values, ranges)
    return np.stack([encoder.encode(row, ranges, seed=(encoder.seed, first_step + i))
                     for i, row in enumerate(values)])


def make_window(blocks) -> np.ndarray:
    """Concatenate ``(p, steps, d)`` blocks into one ``(steps, p*d)`` window."""
    blocks = np.asarray(blocks)
    return np.concatenate(list(blocks), axis=-1)


def split_window(window, p: int) -> np.ndarray:
    window = np.asarray(window)
    d = window.shape[-1] // p
    return np.stack([window[..., i * d:(i + 1) * d] for i in range(p)], axis=-3)


@dataclass
class WindowDataset:
    """Paired input/target windows and the physical step each sample predicts."""

    inputs: np.ndarray
    targets: np.ndarray
    steps: np.ndarray
    reference: Trajectory
    config: MarchConfig
    ranges: NormRange | None
    clamped: int = 0

    def __len__(self):
        return len(self.inputs)

    @property
    def dim(self) -> int:
        return self.reference.values.shape[1]

    @property
    def channels(self) -> int:
        return self.config.window * self.dim


def fit_ranges(sub: Trajectory, cfg: MarchConfig) -> NormRange | None:
    if cfg.encoder.kind == "float32":
        return None
    if cfg.ranges is not None:
        return cfg.ranges
    rows = sub.values[:cfg.train_split + 1]
    return NormRange.from_data(rows, cfg.range_margin, cfg.per_channel)


def build_dataset(traj: Trajectory, cfg: MarchConfig) -> tuple[WindowDataset, WindowDataset]:
    """Sub-sample, fit ranges on the training rows, and split into train/test datasets."""
    sub = subsample(traj, cfg.subsample) if cfg.subsample > 1 else traj
    p = cfg.window
    if sub.n_rows < p + 1:
        raise ValueError(f"trajectory too short: {sub.n_rows} rows for window {p}")
    if cfg.train_split >= sub.n_steps:
        raise ValueError(f"train_split {cfg.train_split} must be below the {sub.n_steps} available steps")
    ranges = fit_ranges(sub, cfg)
    clamped = 0 if ranges is None else count_out_of_range(sub.values, ranges)
    if clamped:
        log.info("%d reference value(s) fall outside the encoding range and will be clamped", clamped)
    blocks = encode_states(sub.values, cfg.encoder, ranges)
    n_samples = sub.n_rows - p
    windows = np.stack([make_window(blocks[n:n + p]) for n in range(n_samples + 1)])
    inputs, targets = windows[:-1], windows[1:]
    predicted = np.arange(p, p + n_samples)
    train = predicted <= cfg.train_split

    def part(mask):
        return WindowDataset(inputs[mask], targets[mask], predicted[mask], sub, cfg, ranges, clamped)

    return part(train), part(~train)


@dataclass
class ErrorSeries:
    step: np.ndarray
    phys_time: np.ndarray
    error: np.ndarray
    mode: list
    regime: list

    def __post_init__(self):
        self.step = np.asarray(self.step, dtype=np.int64)
        self.phys_time = np.asarray(self.phys_time, dtype=np.float64)
        self.error = np.asarray(self.error, dtype=np.float64)
        self.mode = list(self.mode)
        self.regime = list(self.regime)
        n = len(self.step)
        if not all(len(a) == n for a in (self.phys_time, self.error, self.mode, self.regime)):
            raise ValueError("error-series columns differ in length")
        if n > 1 and np.any(np.diff(self.step) <= 0):
            raise ValueError("error-series steps must be strictly increasing")

    def __len__(self):
        return len(self.step)

    def __eq__(self, other):
        if not isinstance(other, ErrorSeries):
            return NotImplemented
        return (np.array_equal(self.step, other.step) and np.array_equal(self.phys_time, other.phys_time)
                and np.array_equal(self.error, other.error, equal_nan=True)
                and self.mode == other.mode and self.regime == other.regime)

    @classmethod
    def empty(cls) -> "ErrorSeries":
        return cls([], [], [], [], [])

    @classmethod
    def build(cls, steps, errors, dt: float, mode: str, train_split: int) -> "ErrorSeries":
        steps = np.asarray(steps, dtype=np.int64)
        regime = [INTERPOLATION if s <= train_split else EXTRAPOLATION for s in steps]
        return cls(steps, steps * dt, errors, [mode] * len(steps), regime)

    def select(self, regime: str | None = None, steps=None) -> "ErrorSeries":
        keep = np.ones(len(self), dtype=bool)
        if regime is not None:
            keep &= np.array([r == regime for r in self.regime], dtype=bool)
        if steps is not None:
            keep &= np.isin(self.step, np.asarray(steps))
        idx = np.flatnonzero(keep)
        return ErrorSeries(self.step[idx], self.phys_time[idx], self.error[idx],
                           [self.mode[i] for i in idx], [self.regime[i] for i in idx])

    def mean(self, regime: str | None = None) -> float:
        sel = self.select(regime)
        return float(np.mean(sel.error)) if len(sel) else float("nan")

    def max(self, regime: str | None = None) -> float:
        sel = self.select(regime)
        return float(np.max(sel.error)) if len(sel) else float("nan")


def error_metric(pred, ref) -> float:
    """Mean of componentwise squared differences."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"prediction {pred.shape} and reference {ref.shape} differ in shape")
    return float(np.mean((pred - ref) ** 2))


def _check_net(net: Network, channels: int, encoder: Encoder):
    if (net.steps, net.n_in, net.n_out) != (encoder.steps, channels, channels):
        raise ValueError(f"network shape {(net.steps, net.n_in, net.n_out)} does not match "
                         f"data shape {(encoder.steps, channels, channels)}")


def predict_window(net: Network, window) -> np.ndarray:
    """One application of the scheme in the spike domain."""
    return binarize(forward(net, window), net.steps, net.n_out)


def one_step_predictions(net: Network, dataset: WindowDataset) -> np.ndarray:
    """Decoded newest block of the output for every reference input window."""
    cfg = dataset.config
    _check_net(net, dataset.channels, cfg.encoder)
    if len(dataset) == 0:
        return np.empty((0, dataset.dim))
    out = predict_window(net, dataset.inputs)
    return cfg.encoder.decode(out[..., -dataset.dim:], dataset.ranges)


def one_step_eval(net: Network, dataset: WindowDataset) -> ErrorSeries:
    """Feed reference windows and score the newest decoded block of each output."""
    cfg = dataset.config
    decoded = one_step_predictions(net, dataset)
    if len(dataset) == 0:
        return ErrorSeries.empty()
    ref = dataset.reference.values[dataset.steps]
    errors = np.mean((decoded - ref) ** 2, axis=1)
    return ErrorSeries.build(dataset.steps, errors, dataset.reference.dt, ONE_STEP, cfg.train_split)


@dataclass
class CascadeResult:
    trajectory: Trajectory
    series: ErrorSeries | None
    diverged_step: int | None = None


def cascade_predict(net: Network, initial_window, n_steps: int, encoder: Encoder,
                    ranges: NormRange | None, window: int, dt: float,
                    reference: Trajectory | None = None, train_split: int | None = None,
                    kind: str = "ode") -> CascadeResult:
    """Roll the scheme forward ``n_steps`` times, feeding binarized outputs straight back.

    The returned trajectory starts with the decoded initial window (``window`` rows)
    followed by one row per prediction. Against a ``reference``, errors cover every
    row after step 0 that the reference also has.
    """
    state = np.asarray(initial_window, dtype=np.uint8)
    channels = state.shape[-1]
    d = channels // window
    _check_net(net, channels, encoder)
    rows = list(encoder.decode(split_window(state, window), ranges))
    for _ in range(n_steps):
        state = predict_window(net, state)
        rows.append(encoder.decode(state[:, -d:], ranges))
    values = np.array(rows).reshape(len(rows), d)

    diverged = None
    if ranges is not None:
        limit = DIVERGENCE_FACTOR * float(np.max(ranges.span))
        bad = ~np.all(np.isfinite(values), axis=1) | np.any(np.abs(values) > limit, axis=1)
    else:
        bad = ~np.all(np.isfinite(values), axis=1)
    if np.any(bad):
        diverged = int(np.argmax(bad))
        log.warning("cascade diverged at step %d", diverged)

    series = None
    if reference is not None:
        last = min(len(values) - 1, reference.n_steps)
        steps = np.arange(1, last + 1)
        errors = np.mean((values[steps] - reference.values[steps]) ** 2, axis=1)
        split = train_split if train_split is not None else last
        series = ErrorSeries.build(steps, errors, dt, CASCADE, split)
    return CascadeResult(Trajectory(values, dt, kind), series, diverged)


def initial_window(dataset: WindowDataset) -> np.ndarray:
    """Encoded reference window holding steps ``0..p-1``."""
    cfg = dataset.config
    blocks = encode_states(dataset.reference.values[:cfg.window], cfg.encoder, dataset.ranges)
    return make_window(blocks)


def cascade_from_reference(net: Network, dataset: WindowDataset) -> CascadeResult:
    """Cascade over the whole reference horizon starting from its first window."""
    cfg = dataset.config
    ref = dataset.reference
    return cascade_predict(net, initial_window(dataset), ref.n_steps - cfg.window + 1, cfg.encoder,
                           dataset.ranges, cfg.window, ref.dt, ref, cfg.train_split, ref.kind)


SERIES_HEADER = ["step", "phys_time", "error", "mode", "regime"]


def format_series(series: ErrorSeries) -> str:
    lines = [",".join(SERIES_HEADER)]
    for s, t, e, m, r in zip(series.step, series.phys_time, series.error, series.mode, series.regime):
        lines.append(f"{int(s)},{float(t)!r},{float(e)!r},{m},{r}")
    return "\n".join(lines) + "\n"


def parse_series(text: str) -> ErrorSeries:
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header != SERIES_HEADER:
        raise ValueError(f"unexpected error-series header {header}")
    rows = [r for r in reader if r]
    return ErrorSeries([int(r[0]) for r in rows], [float(r[1]) for r in rows],
                       [float(r[2]) for r in rows], [r[3] for r in rows], [r[4] for r in rows])


def export_series(series: ErrorSeries, path) -> Path:
    path = Path(path)
    path.write_text(format_series(series))
    return path


def load_series(path) -> ErrorSeries:
    return parse_series(Path(path).read_text())


def _ranges_to_json(ranges: NormRange | None):
    if ranges is None:
        return None
    return {"lo": np.atleast_1d(ranges.lo).tolist(), "hi": np.atleast_1d(ranges.hi).tolist(),
            "per_channel": ranges.per_channel}


def _ranges_from_json(obj) -> NormRange | None:
    if obj is None:
        return None
    if obj["per_channel"]:
        return NormRange(obj["lo"], obj["hi"], True)
    return NormRange(obj["lo"][0], obj["hi"][0], False)


def save_dataset_cache(dataset: WindowDataset, prefix) -> list[Path]:
    """Write the sub-sampled trajectory (``.traj``) and a JSON sidecar of march settings."""
    prefix = Path(prefix)
    cfg = dataset.config
    traj_path = prefix.with_suffix(".traj")
    meta_path = prefix.with_suffix(".json")
    traj_path.write_text(format_trajectory(dataset.reference))
    meta = {"window": cfg.window, "subsample": cfg.subsample, "train_split": cfg.train_split,
            "encoder": cfg.encoder.kind, "steps": cfg.encoder.steps, "seed": cfg.encoder.seed,
            "ranges": _ranges_to_json(dataset.ranges)}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [traj_path, meta_path]


def load_dataset_cache(prefix) -> tuple[WindowDataset, WindowDataset]:
    prefix = Path(prefix)
    sub = parse_trajectory(prefix.with_suffix(".traj").read_text())
    meta = json.loads(prefix.with_suffix(".json").read_text())
    ranges = _ranges_from_json(meta["ranges"])
    cfg = MarchConfig(window=meta["window"], subsample=1, train_split=meta["train_split"],
                      encoder=Encoder(meta["encoder"], meta["steps"], meta.get("seed", 0)),
                      per_channel=ranges.per_channel if ranges is not None else True, ranges=ranges)
    train, test = build_dataset(sub, cfg)
    # restore the original sub-sampling factor for provenance
    true_cfg = MarchConfig(cfg.window, meta["subsample"], cfg.train_split, cfg.encoder,
                           cfg.per_channel, 0.1, ranges)
    train.config = true_cfg
    test.config = true_cfg
    return train, test
