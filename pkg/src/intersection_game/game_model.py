"""Two-player uncontrolled-intersection game.

Each player moves along its own road with double-integrator dynamics
(position d, speed v, control u = acceleration).  Running loss is control
effort plus a softened collision penalty; terminal loss rewards progress and
penalizes deviation from a target speed.  The first-order equilibrium
conditions couple states with a 2-dimensional co-state per player, giving the
8-dimensional system evaluated by :func:`pmp_rhs`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import GameConfig

# Flat component order used by the solver and rollouts.
STATE_LABELS = ("d1", "v1", "d2", "v2", "lam11", "lam12", "lam21", "lam22")


@dataclass(frozen=True)
class PlayerState:
    """Position along own road (m) and speed (m/s)."""
    d: float
    v: float


@dataclass(frozen=True)
class JointState:
    """Both players plus the current time."""
    p1: PlayerState
    p2: PlayerState
    t: float = 0.0

    def player(self, i: int) -> PlayerState:
        if i == 1:
            return self.p1
        if i == 2:
            return self.p2
        raise ValueError(f"player index must be 1 or 2, got {i}")

    def fellow(self, i: int) -> PlayerState:
        return self.player(3 - i)

    def to_array(self) -> np.ndarray:
        return np.array([self.p1.d, self.p1.v, self.p2.d, self.p2.v])

    @staticmethod
    def from_array(x, t: float = 0.0) -> "JointState":
        d1, v1, d2, v2 = (float(c) for c in x)
        return JointState(PlayerState(d1, v1), PlayerState(d2, v2), t)


@dataclass(frozen=True)
class Costate:
    """Adjoint pair: l1 pairs with position, l2 with speed."""
    l1: float
    l2: float


@dataclass(frozen=True)
class PmpState:
    """Joint state plus both players' co-states (the coupled 8-dim system)."""
    joint: JointState
    lam1: Costate
    lam2: Costate

    def to_array(self) -> np.ndarray:
        j = self.joint
        return np.array([j.p1.d, j.p1.v, j.p2.d, j.p2.v,
                         self.lam1.l1, self.lam1.l2, self.lam2.l1, self.lam2.l2])

    @staticmethod
    def from_array(y, t: float = 0.0) -> "PmpState":
        y = np.asarray(y, dtype=float)
        return PmpState(JointState.from_array(y[:4], t),
                        Costate(float(y[4]), float(y[5])),
                        Costate(float(y[6]), float(y[7])))


def _logistic(z):
    """Numerically stable 1 / (1 + exp(-z)); saturates instead of overflowing."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def dynamics_rhs(x: PlayerState, u: float):
    """Double integrator: returns (d_dot, v_dot) = (v, u)."""
    return x.v, u


def sigma(d, theta: float, cfg: GameConfig):
    """Soft occupancy indicator in (0, 1).

    Rises near road_R/2 - theta*car_W/2 and falls near
    (road_R + car_W)/2 + car_L; theta widens the rise side into a buffer.
    """
    g = cfg.penalty_gamma
    rise = _logistic(g * (np.asarray(d, dtype=float) - cfg.rise_point(theta)))
    fall = _logistic(-g * (np.asarray(d, dtype=float) - cfg.fall_point()))
    return rise * fall


def sigma_grad(d, theta: float, cfg: GameConfig):
    """Analytic d(sigma)/dd.

    With A the rise factor and B the fall factor, the derivative collapses to
    gamma * A * B * (B - A).
    """
    g = cfg.penalty_gamma
    a = _logistic(g * (np.asarray(d, dtype=float) - cfg.rise_point(theta)))
    b = _logistic(-g * (np.asarray(d, dtype=float) - cfg.fall_point()))
    return g * a * b * (b - a)


def collision_penalty(s: JointState, i: int, cfg: GameConfig) -> float:
    """Softened collision loss for player i: b * sigma(d_i, theta) * sigma(d_fellow, 1)."""
    own = s.player(i)
    fellow = s.fellow(i)
    return cfg.penalty_b * float(sigma(own.d, cfg.penalty_theta, cfg)) \
        * float(sigma(fellow.d, 1.0, cfg))


def penalty_grad_own(s: JointState, i: int, cfg: GameConfig) -> float:
    """d(collision_penalty)/d(d_i), holding the fellow fixed."""
    own = s.player(i)
    fellow = s.fellow(i)
    return cfg.penalty_b * float(sigma_grad(own.d, cfg.penalty_theta, cfg)) \
        * float(sigma(fellow.d, 1.0, cfg))


def instantaneous_loss(s: JointState, u_i: float, i: int, cfg: GameConfig) -> float:
    """Effort plus collision loss rate: u^2 + penalty."""
    return u_i * u_i + collision_penalty(s, i, cfg)


def terminal_loss(x: PlayerState, cfg: GameConfig) -> float:
    """-alpha * d + (v - v_bar)^2 at the final time."""
    dv = x.v - cfg.v_bar
    return -cfg.alpha * x.d + dv * dv


def terminal_costate(x: PlayerState, cfg: GameConfig) -> Costate:
    """Boundary value of the co-state: minus the terminal-loss gradient."""
    return Costate(cfg.alpha, -2.0 * (x.v - cfg.v_bar))


def hamiltonian(s: JointState, u_i: float, lam_i: Costate, i: int,
                cfg: GameConfig) -> float:
    """Player i's Hamiltonian with the co-state paired to its own dynamics block.

    Cross terms between lam_i and the fellow's dynamics are constant in u_i and
    are omitted, which leaves the policy and adjoint equations unchanged.
    """
    own = s.player(i)
    return lam_i.l1 * own.v + lam_i.l2 * u_i - u_i * u_i \
        - collision_penalty(s, i, cfg)


def optimal_control(lam_i: Costate, cfg: GameConfig) -> float:
    """Hamiltonian-maximizing acceleration 0.5 * l2, clamped to the input bounds."""
    return float(np.clip(0.5 * lam_i.l2, cfg.u_min, cfg.u_max))


def _smooth_clip(z, lo: float, hi: float, eps: float):
    """clip(z, lo, hi) with the corners rounded over a 2*eps window.

    Exact outside the windows; inside, a quadratic keeps the map C1 with a
    worst-case deviation of eps/4.  Newton-type solvers use a tiny eps so the
    control law stays differentiable at the clamp boundaries.
    """
    z = np.asarray(z, dtype=float)
    out = np.clip(z, lo, hi)
    hi_band = np.abs(z - hi) < eps
    out = np.where(hi_band, hi - (z - hi - eps) ** 2 / (4.0 * eps), out)
    lo_band = np.abs(z - lo) < eps
    out = np.where(lo_band, lo + (z - lo + eps) ** 2 / (4.0 * eps), out)
    return out


def pmp_rhs_array(Y, cfg: GameConfig, clip_eps: float = 0.0) -> np.ndarray:
    """Vectorized coupled state/co-state dynamics.

    Y has shape (..., 8) in STATE_LABELS order; returns d/dt of every row.
    The system is autonomous, so no time argument is needed.  clip_eps > 0
    rounds the control clamp corners (solver internal use).
    """
    Y = np.asarray(Y, dtype=float)
    d1, v1 = Y[..., 0], Y[..., 1]
    d2, v2 = Y[..., 2], Y[..., 3]
    l11, l12 = Y[..., 4], Y[..., 5]
    l21, l22 = Y[..., 6], Y[..., 7]
    if clip_eps > 0.0:
        u1 = _smooth_clip(0.5 * l12, cfg.u_min, cfg.u_max, clip_eps)
        u2 = _smooth_clip(0.5 * l22, cfg.u_min, cfg.u_max, clip_eps)
    else:
        u1 = np.clip(0.5 * l12, cfg.u_min, cfg.u_max)
        u2 = np.clip(0.5 * l22, cfg.u_min, cfg.u_max)
    occ1 = sigma(d1, 1.0, cfg)
    occ2 = sigma(d2, 1.0, cfg)
    g1 = cfg.penalty_b * sigma_grad(d1, cfg.penalty_theta, cfg) * occ2
    g2 = cfg.penalty_b * sigma_grad(d2, cfg.penalty_theta, cfg) * occ1
    out = np.empty_like(Y)
    out[..., 0] = v1
    out[..., 1] = u1
    out[..., 2] = v2
    out[..., 3] = u2
    out[..., 4] = g1
    out[..., 5] = -l11
    out[..., 6] = g2
    out[..., 7] = -l21
    return out


def pmp_rhs(ps: PmpState, cfg: GameConfig) -> PmpState:
    """Time derivative of the coupled system for a single point."""
    dy = pmp_rhs_array(ps.to_array(), cfg)
    return PmpState.from_array(dy, ps.joint.t)
