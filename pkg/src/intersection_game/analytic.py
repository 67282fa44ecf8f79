"""Closed-form solution of the decoupled game (penalty_b = 0).

Without the collision term each player solves an independent
linear-quadratic problem.  Eliminating u = 0.5 * lam[2] and enforcing the
terminal condition lam[2](T) = -2 (v(T) - v_bar) gives

    v(T)     = (v(t0) + tau * v_bar + alpha * tau^2 / 4) / (1 + tau)
    lam[1]   = alpha                           (constant)
    lam[2](t)= lam[2](T) + alpha * (T - t)

with tau = T - t0.  These formulas serve as an exact oracle for the BVP
solver and as the no-interaction feedback controller.
"""
from __future__ import annotations

import numpy as np

from .config import GameConfig
from .game_model import Costate, PlayerState


def terminal_speed(v0: float, t0: float, cfg: GameConfig) -> float:
    tau = cfg.horizon_T - t0
    return (v0 + tau * cfg.v_bar + cfg.alpha * tau * tau / 4.0) / (1.0 + tau)


def terminal_costate_l2(v0: float, t0: float, cfg: GameConfig) -> float:
    return -2.0 * (terminal_speed(v0, t0, cfg) - cfg.v_bar)


def costate(t, v0: float, t0: float, cfg: GameConfig):
    """(lam1, lam2) at times t for the decoupled problem started at (v0, t0)."""
    t = np.asarray(t, dtype=float)
    lam2T = terminal_costate_l2(v0, t0, cfg)
    lam1 = np.full_like(t, cfg.alpha)
    lam2 = lam2T + cfg.alpha * (cfg.horizon_T - t)
    return lam1, lam2


def control(t, v0: float, t0: float, cfg: GameConfig):
    """Open-loop optimal acceleration along the decoupled trajectory."""
    _, lam2 = costate(t, v0, t0, cfg)
    return np.clip(0.5 * lam2, cfg.u_min, cfg.u_max)


def feedback_control(x: PlayerState, t: float, cfg: GameConfig) -> float:
    """Closed-loop form: re-solve the remaining-horizon problem at (x.v, t)."""
    lam2 = terminal_costate_l2(x.v, t, cfg) + cfg.alpha * (cfg.horizon_T - t)
    return float(np.clip(0.5 * lam2, cfg.u_min, cfg.u_max))


def trajectory(t, d0: float, v0: float, t0: float, cfg: GameConfig):
    """Exact (d, v) along the decoupled optimum, assuming unclamped control."""
    t = np.asarray(t, dtype=float)
    c = terminal_costate_l2(v0, t0, cfg)
    a = cfg.alpha
    T = cfg.horizon_T
    s = t - t0
    # u(t) = 0.5 * (c + a (T - t)); integrate twice from t0.
    v = v0 + 0.5 * c * s + 0.5 * a * ((T - t0) * s - 0.5 * s * s)
    d = d0 + v0 * s + 0.25 * c * s * s \
        + 0.25 * a * ((T - t0) * s * s - s ** 3 / 3.0)
    return d, v


def value(d0: float, v0: float, t0: float, cfg: GameConfig) -> float:
    """Accumulated effort plus terminal loss of the decoupled optimum."""
    a = cfg.alpha
    T = cfg.horizon_T
    tau = T - t0
    c = terminal_costate_l2(v0, t0, cfg)
    # int u^2 dt with u = 0.5 (c + a (T - t)) over [t0, T]
    if a == 0.0:
        effort = 0.25 * c * c * tau
    else:
        effort = ((c + a * tau) ** 3 - c ** 3) / (12.0 * a)
    dT, vT = trajectory(np.array(T), d0, v0, t0, cfg)
    dv = float(vT) - cfg.v_bar
    return effort + (-a * float(dT) + dv * dv)


def costate_pair(t, v0: float, t0: float, cfg: GameConfig) -> Costate:
    l1, l2 = costate(np.asarray(t, dtype=float), v0, t0, cfg)
    return Costate(float(l1), float(l2))
