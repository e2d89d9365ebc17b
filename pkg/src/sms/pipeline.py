"""End-to-end experiment steps shared by the CLI and the acceptance tests."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .codec import FLOAT32, LOWER_TRIANGULAR, RATE, Encoder, NormRange, encoding_error
from .config import ExperimentConfig
from .marching import (CascadeResult, ErrorSeries, WindowDataset, build_dataset, cascade_from_reference,
                       one_step_eval, one_step_predictions)
from .network import Network, train
from .solvers import (Lorenz, PdeProblem, Trajectory, VanDerPol, make_ic, rk4_integrate, solve_heat_ftcs,
                      solve_wave_leapfrog)

log = logging.getLogger(__name__)

BENCH_STEPS = 50
BENCH_SEEDS = tuple(range(10))


def reference_trajectory(cfg: ExperimentConfig) -> Trajectory:
    if cfg.problem == "vdp":
        return rk4_integrate(VanDerPol(cfg.mu), cfg.state0, cfg.dt, cfg.n_steps)
    if cfg.problem == "lorenz":
        return rk4_integrate(Lorenz(cfg.sigma, cfg.rho, cfg.beta), cfg.state0, cfg.dt, cfg.n_steps)
    grid = cfg.grid()
    u0 = make_ic(cfg.ic, grid, width=cfg.ic_width)
    if cfg.problem == "wave":
        return solve_wave_leapfrog(PdeProblem("wave", cfg.c, grid, u0), cfg.dt, cfg.n_steps)
    return solve_heat_ftcs(PdeProblem("heat", cfg.alpha, grid, u0), cfg.dt, cfg.n_steps)


def make_datasets(cfg: ExperimentConfig, traj: Trajectory) -> tuple[WindowDataset, WindowDataset]:
    return build_dataset(traj, cfg.march_config())


def new_network(cfg: ExperimentConfig, channels: int) -> Network:
    net = Network(cfg.encoder_config().steps, channels, channels, cfg.hidden, cfg.lif_config(),
                  cfg.literal_relu)
    return net.init_weights(cfg.seed)


def fit(cfg: ExperimentConfig, dataset: WindowDataset, log_every: int = 100) -> tuple[Network, list[float]]:
    net = new_network(cfg, dataset.channels)

    def progress(epoch, loss):
        if log_every and (epoch % log_every == 0 or epoch == cfg.epochs - 1):
            log.info("epoch %d/%d  loss %.6g", epoch + 1, cfg.epochs, loss)

    history = train(net, dataset.inputs, dataset.targets, cfg.train_config(), progress)
    return net, history


@dataclass
class Evaluation:
    one_step: ErrorSeries
    one_step_values: np.ndarray
    cascade: CascadeResult

    def summary(self) -> list[dict]:
        rows = []
        for mode, series in (("one_step", self.one_step), ("cascade", self.cascade.series)):
            for regime in ("interpolation", "extrapolation"):
                sel = series.select(regime)
                rows.append({"mode": mode, "regime": regime, "count": len(sel),
                             "mean": series.mean(regime), "max": series.max(regime)})
        return rows

    def paired_interpolation_means(self) -> tuple[float, float]:
        """(one-step, cascade) interpolation means over the steps both series cover."""
        one = self.one_step.select("interpolation")
        casc = self.cascade.series.select("interpolation", steps=one.step)
        return float(np.mean(one.error)), float(np.mean(casc.error))


def evaluate(net: Network, train_ds: WindowDataset, test_ds: WindowDataset) -> Evaluation:
    parts = [one_step_eval(net, ds) for ds in (train_ds, test_ds) if len(ds)]
    one = ErrorSeries(np.concatenate([s.step for s in parts]), np.concatenate([s.phys_time for s in parts]),
                      np.concatenate([s.error for s in parts]), sum((s.mode for s in parts), []),
                      sum((s.regime for s in parts), []))
    values = np.concatenate([one_step_predictions(net, ds) for ds in (train_ds, test_ds) if len(ds)])
    return Evaluation(one, values, cascade_from_reference(net, train_ds))


def quantization_floor(ranges: NormRange, steps: int) -> float:
    """Mean over components of the squared half-level ``((hi - lo) / (2 #T))**2``."""
    return float(np.mean((np.atleast_1d(ranges.span) / (2.0 * steps)) ** 2))


def reference_signal(dx: float = 0.01, mu: float = 0.5, sigma: float = 0.1):
    """Gaussian test signal on ``[0, 1]`` used for the encoder comparison."""
    n = int(round(1.0 / dx)) + 1
    x = np.linspace(0.0, 1.0, n)
    return x, np.exp(-0.5 * ((x - mu) / sigma) ** 2)


def bench_encoding(steps: int = BENCH_STEPS, seeds=BENCH_SEEDS) -> list[dict]:
    """Round-trip errors of each encoder on the Gaussian test signal.

    The range is the signal's own min/max; the rate encoder is run once per seed.
    """
    _, signal = reference_signal()
    rng = NormRange(signal.min(), signal.max())
    rows = []
    for kind, run_seeds in ((LOWER_TRIANGULAR, [None]), (RATE, list(seeds)), (FLOAT32, [None])):
        for seed in run_seeds:
            enc = Encoder(kind, steps, 0 if seed is None else seed)
            l2, rel = encoding_error(signal, enc, rng)
            rows.append({"encoder": kind, "seed": "" if seed is None else seed, "steps": enc.steps,
                         "l2": l2, "rel_l2": rel})
    return rows
