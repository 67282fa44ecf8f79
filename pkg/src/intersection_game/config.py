"""Configuration objects for the intersection game and its experiment pipeline.

Every tunable lives in one of the frozen dataclasses below.  GameConfig can be
round-tripped through a flat ``key = value`` text file so runs are easy to
reproduce and override from the command line.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace, asdict


@dataclass(frozen=True)
class GameConfig:
    """Physical and loss parameters of the two-player intersection game.

    Units: positions m, speeds m/s, accelerations m/s^2, time s.
    """

    horizon_T: float = 3.0        # game horizon
    alpha: float = 1.0            # progress-reward weight (1/m)
    v_bar: float = 18.0           # target terminal speed (m/s)
    road_R: float = 70.0          # road length (m)
    car_L: float = 3.0            # car length (m)
    car_W: float = 1.5            # car width (m)
    penalty_b: float = 1.0e4      # collision loss magnitude
    penalty_gamma: float = 5.0    # sigmoid steepness (1/m)
    penalty_theta: float = 5.0    # safety-buffer multiplier for own occupancy
    u_min: float = -5.0           # control lower bound (m/s^2)
    u_max: float = 10.0           # control upper bound (m/s^2)

    def __post_init__(self):
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        if not self.penalty_b >= 0:
            # zero switches the interaction off, which the analytic oracle uses
            raise ValueError("penalty_b must be non-negative")
        if not self.penalty_gamma > 0:
            raise ValueError("penalty_gamma must be positive")
        if not (self.u_min < 0.0 < self.u_max):
            raise ValueError("control bounds must straddle zero")
        if not (self.road_R > self.car_L > 0.0):
            raise ValueError("need road_R > car_L > 0")
        if not self.car_W > 0:
            raise ValueError("car_W must be positive")

    # Geometry of the soft penalty and of the hard collision box.
    def rise_point(self, theta: float) -> float:
        """Position where the occupancy sigmoid starts rising (buffer width theta)."""
        return self.road_R / 2.0 - theta * self.car_W / 2.0

    def fall_point(self) -> float:
        """Position where the occupancy sigmoid falls back to zero."""
        return (self.road_R + self.car_W) / 2.0 + self.car_L

    @property
    def box_lo(self) -> float:
        return (self.road_R - self.car_W) / 2.0

    @property
    def box_hi(self) -> float:
        return self.fall_point()

    @property
    def zone_exit(self) -> float:
        """Progress threshold past which a player has cleared the crossing."""
        return self.fall_point()


@dataclass(frozen=True)
class SolverConfig:
    """Mesh, Newton, and quadrature settings for the collocation BVP solver."""

    n_nodes: int = 61             # initial uniform mesh size
    max_nodes: int = 1201         # refinement cap
    newton_max_iter: int = 60
    newton_tol: float = 1.0e-9    # scaled collocation residual target
    bc_tol: float = 1.0e-11       # terminal boundary-condition target for Newton
    bc_accept: float = 1.0e-10    # boundary residual allowed in a converged solution
    damping_halvings: int = 10
    defect_tol: float = 1.0e-6    # per-interval defect acceptance
    max_refinements: int = 40
    fd_step: float = 1.0e-7       # relative step for local rhs Jacobians
    clip_smoothing: float = 4.0e-6  # C1 rounding of the control clamp, Newton only
    value_quad_step: float = 0.0025   # evaluation grid step for value quadrature
    max_total_iters: int = 400    # Newton budget across one whole solve
    ic_walk_max_splits: int = 4   # recursive depth of the initial-state walk
    continuation_start: float = 10.0   # first penalty magnitude of the fallback ramp
    continuation_factor: float = 10.0  # per-stage penalty multiplier
    continuation_defect_tol: float = 1.0e-3  # mesh quality kept at intermediate stages
    continuation_max_splits: int = 3   # recursive substage depth on Newton stalls


@dataclass(frozen=True)
class FitConfig:
    """Settings for the step-model fit of co-state trajectories."""

    grid_step: float = 0.01       # uniform resampling step for the fit grid (s)
    q_tol_rel: float = 1.0e-3     # |q| below q_tol_rel * alpha collapses to the sentinel


@dataclass(frozen=True)
class SamplerConfig:
    """Initial-state sampling box, dataset sizes, and the label time grid."""

    d_lo: float = 15.0
    d_hi: float = 20.0
    v_lo: float = 18.0
    v_hi: float = 25.0
    n_train: int = 400            # desk-scale defaults; --full switches to 1573/1000/575/400
    n_acquisition: int = 200
    n_test: int = 150
    n_validation: int = 100
    t0_max: float = 3.0
    t0_step: float = 0.1
    seed: int = 0
    max_skip_rate: float = 0.02   # tolerated fraction of non-convergent samples

    def full_scale(self) -> "SamplerConfig":
        return replace(self, n_train=1573, n_acquisition=1000, n_test=575,
                       n_validation=400)

    def t0_grid(self):
        import numpy as np
        n = int(round(self.t0_max / self.t0_step))
        return np.linspace(0.0, self.t0_max, n + 1)

    @property
    def ranges(self):
        return ((self.d_lo, self.d_hi), (self.v_lo, self.v_hi),
                (self.d_lo, self.d_hi), (self.v_lo, self.v_hi))


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch gradient-descent training settings."""

    learning_rate: float = 0.01
    patience_epochs: int = 500    # cumulative count of epochs above the best val error
    max_epochs: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.patience_epochs < 1:
            raise ValueError("patience_epochs must be >= 1")


@dataclass(frozen=True)
class ActiveConfig:
    """Pool-based active-learning loop settings."""

    candidates_per_iter: int = 50
    picks_per_iter: int = 10
    budget: int = 100             # total points to acquire
    rollout_step: float = 0.03    # comparison grid step (s)
    inverse_substeps: int = 3     # RK4 substeps per comparison-grid step
    blowup_cap: float = 1.0e6
    seed: int = 0
    warm_start: bool = True

    def __post_init__(self):
        if self.picks_per_iter > self.candidates_per_iter:
            raise ValueError("picks_per_iter must not exceed candidates_per_iter")


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop rollout settings."""

    dt: float = 0.03
    horizon_T: float = 3.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class ExperimentPlan:
    """Grid of (variant, size, repeat) cells for the comparison study."""

    sizes: tuple = (50, 150, 250)
    repeats: int = 5
    base_seed: int = 0
    variants: tuple = ("value", "costate_static", "costate_active")
    active_fraction: float = 0.4  # share of each size acquired by the active loop

    def __post_init__(self):
        if self.repeats < 2:
            raise ValueError("need at least 2 repeats for t-tests")

    def full_scale(self) -> "ExperimentPlan":
        return replace(self, sizes=(50, 100, 150, 200, 250, 300), repeats=20)

    def seed_for(self, repeat: int) -> int:
        return self.base_seed + repeat


_GAME_FIELDS = {f.name: f.type for f in fields(GameConfig)}


def write_game_config(cfg: GameConfig, path) -> None:
    """Write a GameConfig as flat ``key = value`` lines."""
    lines = ["# intersection game configuration"]
    for f in fields(GameConfig):
        lines.append(f"{f.name} = {getattr(cfg, f.name)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_game_config(path) -> GameConfig:
    """Parse a flat ``key = value`` config file. Unknown keys are rejected."""
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw.rstrip()}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _GAME_FIELDS:
                raise ValueError(f"unknown config key: {key}")
            values[key] = float(val.strip())
    return GameConfig(**values)


def config_hash(*cfgs) -> str:
    """Stable hash of any mix of config dataclasses, for provenance records."""
    blob = json.dumps([(type(c).__name__, asdict(c)) for c in cfgs],
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
