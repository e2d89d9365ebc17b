"""Reference trajectories: RK4 for the ODEs, explicit finite differences for the PDEs."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ODE = "ode"
PDE = "pde"


@dataclass
class Trajectory:
    """Solution rows; row 0 is the initial condition, row ``n`` is time ``n * dt``."""

    values: np.ndarray
    dt: float
    kind: str = ODE

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.kind not in (ODE, PDE):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.n_rows - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_rows) * self.dt

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.kind == other.kind and self.dt == other.dt
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class VanDerPol:
    mu: float = 2.0
    dim: int = field(default=2, init=False)

    def rhs(self, state):
        x, y = state
        return np.array([y, self.mu * (1.0 - x * x) * y - x])


@dataclass(frozen=True)
class Lorenz:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dim: int = field(default=3, init=False)

    def rhs(self, state):
        x, y, z = state
        return np.array([self.sigma * (y - x), x * (self.rho - z) - y, x * y - self.beta * z])


def vdp_rhs(state, mu):
    return VanDerPol(mu).rhs(state)


def lorenz_rhs(state, sigma, rho, beta):
    return Lorenz(sigma, rho, beta).rhs(state)


def rk4_integrate(system, state0, dt: float, n_steps: int) -> Trajectory:
    """Classical fixed-step 4-stage Runge-Kutta."""
    state = np.asarray(state0, dtype=np.float64)
    if state.shape != (system.dim,):
        raise ValueError(f"initial state must have {system.dim} components")
    if not np.all(np.isfinite(state)):
        raise ValueError("initial state must be finite")
    if dt <= 0 or n_steps < 1:
        raise ValueError("need dt > 0 and n_steps >= 1")
    f = system.rhs
    out = np.empty((n_steps + 1, system.dim))
    out[0] = state
    for n in range(n_steps):
        k1 = f(state)
        k2 = f(state + 0.5 * dt * k1)
        k3 = f(state + 0.5 * dt * k2)
        k4 = f(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n + 1] = state
    return Trajectory(out, dt, ODE)


@dataclass(frozen=True)
class Grid1D:
    x_min: float = 0.0
    x_max: float = 1.0
    dx: float = 0.01

    def __post_init__(self):
        if self.dx <= 0 or self.x_max <= self.x_min:
            raise ValueError("grid needs dx > 0 and x_max > x_min")
        n = (self.x_max - self.x_min) / self.dx
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("grid length must be a multiple of dx")

    @property
    def n_x(self) -> int:
        return int(round((self.x_max - self.x_min) / self.dx)) + 1

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_x)


def gaussian_ic(x, center: float, width: float = 0.05):
    return np.exp(-(((np.asarray(x, dtype=np.float64) - center) / width) ** 2))


def hat_ic(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    up = (x >= 0.45) & (x < 0.5)
    down = (x >= 0.5) & (x < 0.55)
    out[up] = 20.0 * (x[up] - 0.45)
    out[down] = 20.0 * (0.55 - x[down])
    return out


def make_ic(kind: str, grid: Grid1D, center: float | None = None, width: float = 0.05) -> np.ndarray:
    """Sample an initial field on ``grid``. Gaussian defaults to the domain midpoint."""
    if kind == "gaussian":
        if center is None:
            center = grid.x_min + (grid.x_max - grid.x_min) / 2
        return gaussian_ic(grid.x, center, width)
    if kind == "hat":
        return hat_ic(grid.x)
    raise ValueError(f"unknown initial condition {kind!r}")


@dataclass
class PdeProblem:
    """1-D wave (``coeff`` = wave speed) or heat (``coeff`` = diffusivity) with zero Dirichlet ends."""

    kind: str
    coeff: float
    grid: Grid1D
    u0: np.ndarray
    v0: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("wave", "heat"):
            raise ValueError(f"unknown PDE {self.kind!r}")
        self.u0 = np.asarray(self.u0, dtype=np.float64)
        if self.u0.shape != (self.grid.n_x,):
            raise ValueError("initial field does not match the grid")
        if self.grid.n_x < 3:
            raise ValueError("need at least 3 grid points")
        if self.v0 is None:
            self.v0 = np.zeros_like(self.u0)


def _laplacian(u):
    lap = np.zeros_like(u)
    lap[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
    return lap


def solve_wave_leapfrog(problem: PdeProblem, dt: float, n_steps: int) -> Trajectory:
    c2 = (problem.coeff * dt / problem.grid.dx) ** 2
    out = np.zeros((n_steps + 1, problem.grid.n_x))
    u_prev = problem.u0.copy()
    u_prev[[0, -1]] = 0.0
    out[0] = u_prev
    if n_steps == 0:
        return Trajectory(out, dt, PDE)
    u = u_prev + dt * problem.v0 + 0.5 * c2 * _laplacian(u_prev)
    u[[0, -1]] = 0.0
    out[1] = u
    for n in range(1, n_steps):
        u_next = 2 * u - u_prev + c2 * _laplacian(u)
        u_next[[0, -1]] = 0.0
        out[n + 1] = u_next
        u_prev, u = u, u_next
    return Trajectory(out, dt, PDE)


def solve_heat_ftcs(problem: PdeProblem, dt: float, n_steps: int) -> Trajectory:
    r = problem.coeff * dt / problem.grid.dx ** 2
    out = np.zeros((n_steps + 1, problem.grid.n_x))
    u = problem.u0.copy()
    u[[0, -1]] = 0.0
    out[0] = u
    for n in range(n_steps):
        u = u + r * _laplacian(u)
        u[[0, -1]] = 0.0
        out[n + 1] = u
    return Trajectory(out, dt, PDE)


def subsample(traj: Trajectory, m: int) -> Trajectory:
    """Keep rows 0, m, 2m, ...; the new step is ``m * dt``."""
    if m < 1:
        raise ValueError("subsample factor must be >= 1")
    if m > traj.n_steps:
        raise ValueError(f"subsample factor {m} exceeds trajectory length {traj.n_steps}")
    return Trajectory(traj.values[::m].copy(), traj.dt * m, traj.kind)


def format_trajectory(traj: Trajectory) -> str:
    buf = io.StringIO()
    buf.write(f"# {traj.kind} {traj.dt!r} {traj.n_rows} {traj.values.shape[1]}\n")
    np.savetxt(buf, traj.values, fmt="%.17g")
    return buf.getvalue()


def parse_trajectory(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("trajectory file is missing its header")
    try:
        kind, dt, n_rows, n_cols = lines[0][1:].split()
        dt, n_rows, n_cols = float(dt), int(n_rows), int(n_cols)
    except ValueError as exc:
        raise ValueError(f"bad trajectory header: {lines[0]!r}") from exc
    rows = [line.split() for line in lines[1:] if line.strip()]
    values = np.array(rows, dtype=np.float64).reshape(len(rows), -1) if rows else np.empty((0, n_cols))
    if values.shape != (n_rows, n_cols):
        raise ValueError(f"trajectory body has shape {values.shape}, header says {(n_rows, n_cols)}")
    return Trajectory(values, dt, kind)


def save_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.write_text(format_trajectory(traj))
    return path


def load_trajectory(path) -> Trajectory:
    return parse_trajectory(Path(path).read_text())
