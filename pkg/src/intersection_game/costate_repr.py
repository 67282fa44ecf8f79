"""Low-dimensional parameterization of equilibrium co-state trajectories.

Along an equilibrium, the position co-state stays at alpha except inside a
single interaction window where it is shifted by a jump q; the speed co-state
is the backward integral of the position component.  A trajectory is therefore
summarized by (lam2 at the horizon, window entry, window exit, q), with the
sentinel (t_in = t_out = T, q = 0) meaning no close call.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import GameConfig
from .game_model import Costate


class DegenerateGrid(ValueError):
    """Fit requested on fewer than 3 samples."""


class InteractionType(Enum):
    NO_COLLISION = "NoCollision"
    P1_OVERTAKES = "P1Overtakes"
    P2_OVERTAKES = "P2Overtakes"
    P1_ADVANCES_P2_EVADES = "P1AdvancesP2Evades"
    P2_ADVANCES_P1_EVADES = "P2AdvancesP1Evades"

    def mirrored(self) -> "InteractionType":
        swap = {InteractionType.P1_OVERTAKES: InteractionType.P2_OVERTAKES,
                InteractionType.P2_OVERTAKES: InteractionType.P1_OVERTAKES,
                InteractionType.P1_ADVANCES_P2_EVADES:
                    InteractionType.P2_ADVANCES_P1_EVADES,
                InteractionType.P2_ADVANCES_P1_EVADES:
                    InteractionType.P1_ADVANCES_P2_EVADES}
        return swap.get(self, self)


@dataclass(frozen=True)
class CostateParams:
    """Step-model summary of one player's co-state trajectory.

    lam1 at the horizon is always alpha and is therefore not stored.
    """

    lamT2: float
    t_in: float
    t_out: float
    q: float

    @property
    def is_sentinel(self) -> bool:
        return self.q == 0.0

    @staticmethod
    def sentinel(lamT2: float, cfg: GameConfig) -> "CostateParams":
        return CostateParams(lamT2, cfg.horizon_T, cfg.horizon_T, 0.0)

    def as_tuple(self) -> tuple:
        return (self.lamT2, self.t_in, self.t_out, self.q)


def reconstruct_lambda1(p: CostateParams, t, cfg: GameConfig):
    """alpha - q inside [t_in, t_out), alpha elsewhere."""
    t = np.asarray(t, dtype=float)
    val = cfg.alpha - p.q * (t >= p.t_in) + p.q * (t >= p.t_out)
    if val.ndim == 0:
        return float(val)
    return val


def reconstruct_lambda2(p: CostateParams, t, cfg: GameConfig):
    """lamT2 plus the backward integral of the reconstructed lam1.

    Piecewise linear with kinks at the window edges; continuous everywhere.
    """
    t = np.asarray(t, dtype=float)
    T = cfg.horizon_T
    overlap = np.maximum(0.0, p.t_out - np.maximum(t, p.t_in))
    val = p.lamT2 + cfg.alpha * (T - t) - p.q * overlap
    if val.ndim == 0:
        return float(val)
    return val


def general_reconstruct(lamT: Costate, p: CostateParams, t, cfg: GameConfig,
                        exp_at=None) -> Costate:
    """Matrix-exponential form of the reconstruction.

    The jump enters as two impulses on the position co-state, each propagated
    back through exp(A^T tau); for the double integrator that map sends (a, b)
    to (a, a*tau + b).  Must agree with the piecewise closed forms.
    """
    if exp_at is None:
        def exp_at(tau):
            return np.array([[1.0, 0.0], [tau, 1.0]])
    t = float(t)
    T = cfg.horizon_T
    lam = exp_at(T - t) @ np.array([lamT.l1, lamT.l2])
    qvec = np.array([p.q, 0.0])
    if t < p.t_in:
        lam = lam + exp_at(p.t_in - t) @ qvec
    if t < p.t_out:
        lam = lam - exp_at(p.t_out - t) @ qvec
    return Costate(float(lam[0]), float(lam[1]))


def fit_params(lam1_traj, grid, lamT2: float, cfg: GameConfig,
               q_tol: float | None = None) -> CostateParams:
    """Least-squares step fit of a sampled lam1 trajectory.

    Searches every (t_in, t_out) pair of grid times; for a fixed window the
    optimal q is the mean deviation from alpha inside it, so the search
    reduces to maximizing S(a, b)^2 / (b - a) over prefix sums S.  Windows
    whose fitted |q| falls below q_tol collapse to the sentinel.
    """
    lam1 = np.asarray(lam1_traj, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if lam1.shape != grid.shape or lam1.ndim != 1:
        raise ValueError("lam1 samples and grid must be 1-d and aligned")
    n = len(grid)
    if n < 3:
        raise DegenerateGrid(f"need at least 3 samples, got {n}")
    if q_tol is None:
        q_tol = 1.0e-3 * abs(cfg.alpha)

    r = cfg.alpha - lam1
    prefix = np.concatenate([[0.0], np.cumsum(r)])
    # windows are index ranges [a, b) with 0 <= a < b <= n-1, plus b = n-1
    # meaning t_out = grid[-1]; samples at the exit time sit outside the window.
    a_idx = np.arange(n)
    S = prefix[None, :] - prefix[:, None]          # S[a, b] = sum of r[a:b]
    count = a_idx[None, :] - a_idx[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(count > 0, S * S / np.maximum(count, 1), -np.inf)
    a_best, b_best = np.unravel_index(np.argmax(gain), gain.shape)
    q = S[a_best, b_best] / count[a_best, b_best]
    if abs(q) < q_tol:
        return CostateParams.sentinel(lamT2, cfg)
    return CostateParams(float(lamT2), float(grid[a_best]),
                         float(grid[b_best]), float(q))


def reconstruction_rmse(p: CostateParams, lam1_traj, grid,
                        cfg: GameConfig) -> float:
    rec = reconstruct_lambda1(p, grid, cfg)
    return float(np.sqrt(np.mean((np.asarray(lam1_traj) - rec) ** 2)))


def classify_interaction(p1: CostateParams, p2: CostateParams,
                         trajectories=None) -> InteractionType:
    """Map the pair of window patterns to one of the five interaction types.

    With two active windows the earlier entrant is the advancing player; exact
    entry ties fall back to exit times and then default to player 1 advancing.
    The optional trajectories argument is accepted for API symmetry with
    callers that carry the source solution around; the rule does not need it.
    """
    if p1.is_sentinel and p2.is_sentinel:
        return InteractionType.NO_COLLISION
    if not p1.is_sentinel and p2.is_sentinel:
        return InteractionType.P1_OVERTAKES
    if p1.is_sentinel and not p2.is_sentinel:
        return InteractionType.P2_OVERTAKES
    if p1.t_in < p2.t_in:
        return InteractionType.P1_ADVANCES_P2_EVADES
    if p2.t_in < p1.t_in:
        return InteractionType.P2_ADVANCES_P1_EVADES
    if p1.t_out < p2.t_out:
        return InteractionType.P1_ADVANCES_P2_EVADES
    if p2.t_out < p1.t_out:
        return InteractionType.P2_ADVANCES_P1_EVADES
    return InteractionType.P1_ADVANCES_P2_EVADES


def clip_to_horizon(p: CostateParams, t0: float, cfg: GameConfig) -> CostateParams:
    """Window restricted to the remaining horizon [t0, T].

    A window entirely in the past collapses to the sentinel; a window already
    entered keeps its exit but starts now.
    """
    if p.is_sentinel or t0 >= p.t_out:
        return CostateParams.sentinel(p.lamT2, cfg)
    if t0 > p.t_in:
        return CostateParams(p.lamT2, t0, p.t_out, p.q)
    return p
