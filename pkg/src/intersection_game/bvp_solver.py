"""Collocation solver for the coupled equilibrium boundary value problem.

The two-point problem fixes the four state components at the start time and
the four co-state components at the horizon.  It is discretized with
three-stage Lobatto IIIA collocation (the Simpson / Hermite scheme, fourth
order): on each mesh interval the solution is the cubic whose derivative
matches the system right-hand side at both endpoints and at the midpoint

    y_mid = (y_k + y_{k+1}) / 2 - h/8 * (f_{k+1} - f_k).

The nonlinear collocation equations are solved with a damped Newton method
using finite-difference Jacobians of the right-hand side assembled into a
sparse block-bidiagonal system.  After Newton converges, the defect of the
interpolating cubic is sampled between collocation points; intervals whose
scaled defect exceeds the tolerance are bisected and the solve repeats on the
refined mesh.  The initial state is pinned exactly (it is not an unknown), so
converged solutions satisfy the start condition to the last bit.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import GameConfig, SolverConfig
from .game_model import (Costate, JointState, pmp_rhs_array, terminal_loss)

_EYE8 = np.eye(8)


class AllGuessesFailed(RuntimeError):
    """No initial guess produced a converged equilibrium."""


class NonConvergence(RuntimeError):
    """Kept for callers that prefer an exception over the converged flag."""


class SingularJacobian(RuntimeError):
    """Newton hit a singular collocation Jacobian (bad guess)."""


@dataclass
class GuessTrajectory:
    """Initial mesh iterate handed to the Newton solver.

    ic_shift optionally marks an easier nearby initial state (added to the
    true one) from which the solver should start and then walk back; the
    stored trajectory is consistent with the shifted state.
    """

    label: str
    t: np.ndarray       # (n,) strictly increasing, t[0] = start, t[-1] = horizon
    y: np.ndarray       # (n, 8) in STATE_LABELS order
    ic_shift: tuple = (0.0, 0.0, 0.0, 0.0)


@dataclass
class BvpSolution:
    """Converged (or best-effort) collocation solution.

    The mesh values together with the right-hand side at nodes and interval
    midpoints define a C1 piecewise-cubic interpolant used for resampling,
    defect evaluation, and quadrature.
    """

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    y_mid: np.ndarray
    f_mid: np.ndarray
    converged: bool
    max_defect: float
    cfg: GameConfig
    values: tuple = (np.nan, np.nan)
    failure: str | None = None
    newton_iters: int = 0
    guess_label: str = ""
    _acc: tuple | None = field(default=None, repr=False)

    @property
    def controls(self) -> np.ndarray:
        """(n, 2) clamped equilibrium accelerations at the mesh nodes."""
        return np.clip(0.5 * self.y[:, [5, 7]], self.cfg.u_min, self.cfg.u_max)

    @property
    def joint_states(self):
        from .game_model import PlayerState
        return [JointState(PlayerState(r[0], r[1]), PlayerState(r[2], r[3]), tk)
                for tk, r in zip(self.t, self.y)]

    def costates(self, i: int) -> np.ndarray:
        """(n, 2) co-state of player i along the mesh."""
        if i == 1:
            return self.y[:, 4:6]
        if i == 2:
            return self.y[:, 6:8]
        raise ValueError("player index must be 1 or 2")

    def interp(self, tq) -> np.ndarray:
        """Evaluate the collocation interpolant at query times (clipped to the mesh)."""
        return _hermite_eval(self.t, self.y, self.f, self.f_mid, tq)

    def interp_deriv(self, tq) -> np.ndarray:
        return _hermite_eval(self.t, self.y, self.f, self.f_mid, tq, deriv=True)

    def to_csv(self, path) -> None:
        u = self.controls
        header = "t,d1,v1,d2,v2,lam11,lam12,lam21,lam22,u1,u2"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for k in range(len(self.t)):
                row = [self.t[k], *self.y[k], u[k, 0], u[k, 1]]
                fh.write(",".join(repr(float(x)) for x in row) + "\n")

    def sidecar(self) -> dict:
        return {"values": [float(v) for v in self.values],
                "converged": bool(self.converged),
                "max_defect": float(self.max_defect),
                "guess": self.guess_label,
                "failure": self.failure,
                "n_nodes": int(len(self.t))}

    def save(self, csv_path, json_path) -> None:
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, sort_keys=True, indent=1)


# Integrated Lagrange weights of the quadratic through (f_k, f_mid, f_{k+1});
# S(t_k + s*h) = y_k + h * (f_k*C0(s) + f_mid*C1(s) + f_{k+1}*C2(s)).
def _c_weights(s):
    s2, s3 = s * s, s ** 3
    return (s - 1.5 * s2 + (2.0 / 3.0) * s3,
            2.0 * s2 - (4.0 / 3.0) * s3,
            (2.0 / 3.0) * s3 - 0.5 * s2)


def _l_weights(s):
    s2 = s * s
    return (2.0 * s2 - 3.0 * s + 1.0, 4.0 * s - 4.0 * s2, 2.0 * s2 - s)


def _hermite_eval(t, y, f, f_mid, tq, deriv=False):
    tq_arr = np.atleast_1d(np.asarray(tq, dtype=float))
    k = np.clip(np.searchsorted(t, tq_arr, side="right") - 1, 0, len(t) - 2)
    h = (t[k + 1] - t[k])[:, None]
    s = ((tq_arr - t[k]) / (t[k + 1] - t[k]))[:, None]
    if deriv:
        l0, l1, l2 = _l_weights(s)
        out = f[k] * l0 + f_mid[k] * l1 + f[k + 1] * l2
    else:
        c0, c1, c2 = _c_weights(s)
        out = y[k] + h * (f[k] * c0 + f_mid[k] * c1 + f[k + 1] * c2)
    if np.isscalar(tq) or np.asarray(tq).ndim == 0:
        return out[0]
    return out


def _collocation_parts(t, Y, cfg, clip_eps: float = 0.0):
    """Residuals of the Simpson collocation equations plus boundary rows."""
    f = pmp_rhs_array(Y, cfg, clip_eps)
    h = np.diff(t)[:, None]
    y_mid = 0.5 * (Y[:-1] + Y[1:]) - (h / 8.0) * (f[1:] - f[:-1])
    f_mid = pmp_rhs_array(y_mid, cfg, clip_eps)
    phi = Y[1:] - Y[:-1] - (h / 6.0) * (f[:-1] + 4.0 * f_mid + f[1:])
    yT = Y[-1]
    bc = np.array([yT[4] - cfg.alpha,
                   yT[5] + 2.0 * (yT[1] - cfg.v_bar),
                   yT[6] - cfg.alpha,
                   yT[7] + 2.0 * (yT[3] - cfg.v_bar)])
    return phi, f, y_mid, f_mid, bc


def _scaled_norms(t, phi, f, f_mid, bc):
    """(max scaled collocation residual, max boundary residual, overall 2-norm).

    The max norms drive convergence tests; the smoother 2-norm drives the
    line search so damping does not fixate on single spiky rows.
    """
    h = np.diff(t)[:, None]
    wf = 1.0 + np.maximum(np.abs(f).max(axis=0), np.abs(f_mid).max(axis=0))
    colloc = np.abs(phi) / (h * wf)
    l2 = float(np.sqrt(np.sum(colloc * colloc) + np.sum(bc * bc)))
    return float(colloc.max()), float(np.abs(bc).max()), l2


def _rhs_jacobians(Y, f, cfg, fd_step, clip_eps):
    """Forward-difference Jacobians of the right-hand side, one 8x8 per row of Y."""
    m = Y.shape[0]
    J = np.empty((m, 8, 8))
    for j in range(8):
        step = fd_step * np.maximum(np.abs(Y[:, j]), 1.0)
        Yp = Y.copy()
        Yp[:, j] += step
        J[:, :, j] = (pmp_rhs_array(Yp, cfg, clip_eps) - f) / step[:, None]
    return J


def _assemble_jacobian(t, Y, f, y_mid, f_mid, cfg, scfg):
    n = len(t)
    n1 = n - 1
    h = np.diff(t)[:, None, None]
    eps = scfg.clip_smoothing
    Fk = _rhs_jacobians(Y, f, cfg, scfg.fd_step, eps)
    Fm = _rhs_jacobians(y_mid, f_mid, cfg, scfg.fd_step, eps)
    A = -_EYE8 - (h / 6.0) * Fk[:-1] \
        - (2.0 * h / 3.0) * np.matmul(Fm, 0.5 * _EYE8 + (h / 8.0) * Fk[:-1])
    B = _EYE8 - (h / 6.0) * Fk[1:] \
        - (2.0 * h / 3.0) * np.matmul(Fm, 0.5 * _EYE8 - (h / 8.0) * Fk[1:])

    base = (np.arange(n1) * 8)[:, None, None]
    rows = np.broadcast_to(base + np.arange(8)[None, :, None], (n1, 8, 8))
    colsA = np.broadcast_to(base + np.arange(8)[None, None, :], (n1, 8, 8))
    colsB = colsA + 8

    c0 = 8 * (n - 1)
    bc_rows = np.array([8 * n1, 8 * n1 + 1, 8 * n1 + 1, 8 * n1 + 2,
                        8 * n1 + 3, 8 * n1 + 3])
    bc_cols = np.array([c0 + 4, c0 + 5, c0 + 1, c0 + 6, c0 + 7, c0 + 3])
    bc_vals = np.array([1.0, 1.0, 2.0, 1.0, 1.0, 2.0])

    data = np.concatenate([A.ravel(), B.ravel(), bc_vals])
    rr = np.concatenate([rows.ravel(), rows.ravel(), bc_rows])
    cc = np.concatenate([colsA.ravel(), colsB.ravel(), bc_cols])
    J = sp.coo_matrix((data, (rr, cc)), shape=(8 * n1 + 4, 8 * n)).tocsc()
    return J[:, 4:]  # initial state components are pinned, not unknowns


def _newton(t, Y, cfg, scfg):
    """Damped Newton on the collocation system; returns (Y, ok, reason, iters, parts).

    Globalization follows the natural-level strategy: a trial point is
    accepted when the simplified Newton correction (same factorized Jacobian,
    residual at the trial point) shrinks relative to the current correction.
    That monitor is far more reliable than raw residual norms when the
    penalty term makes single rows spike.
    """
    eps = scfg.clip_smoothing
    parts = _collocation_parts(t, Y, cfg, eps)
    step = 1.0
    for it in range(scfg.newton_max_iter):
        phi, f, y_mid, f_mid, bc = parts
        cnorm, bnorm, _ = _scaled_norms(t, phi, f, f_mid, bc)
        if cnorm < scfg.newton_tol and bnorm < scfg.bc_tol:
            return Y, True, None, it, parts
        if not (np.isfinite(cnorm) and np.isfinite(bnorm)):
            return Y, False, "nonfinite_residual", it, parts

        J = _assemble_jacobian(t, Y, f, y_mid, f_mid, cfg, scfg)
        rhs = -np.concatenate([phi.ravel(), bc])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                lu = spla.splu(J)
                delta = lu.solve(rhs)
            except RuntimeError:
                return Y, False, "singular_jacobian", it, parts
        if not np.all(np.isfinite(delta)):
            return Y, False, "singular_jacobian", it, parts
        wy = 1.0 + np.abs(Y.reshape(-1)[4:])
        nd = float(np.linalg.norm(delta / wy))

        step = min(1.0, 2.0 * step)
        accepted = False
        for _ in range(scfg.damping_halvings + 1):
            Y_try = Y.copy()
            Y_try.reshape(-1)[4:] += step * delta
            parts_try = _collocation_parts(t, Y_try, cfg, eps)
            rhs_try = -np.concatenate([parts_try[0].ravel(), parts_try[4]])
            if not np.all(np.isfinite(rhs_try)):
                step *= 0.5
                continue
            nd_bar = float(np.linalg.norm(lu.solve(rhs_try) / wy))
            if nd_bar <= (1.0 - 0.5 * step) * nd or nd_bar < scfg.newton_tol:
                Y, parts = Y_try, parts_try
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return Y, False, "stalled", it, parts
    return Y, False, "max_iterations", scfg.newton_max_iter, parts


_DEFECT_SAMPLES = (0.25, 0.75)


def _interval_defects(t, Y, cfg):
    """Scaled defect of the interpolating cubic, sampled between collocation points."""
    phi, f, y_mid, f_mid, bc = _collocation_parts(t, Y, cfg)
    h = np.diff(t)[:, None]
    worst = np.zeros(len(t) - 1)
    for s in _DEFECT_SAMPLES:
        c0, c1, c2 = _c_weights(s)
        l0, l1, l2 = _l_weights(s)
        y_s = Y[:-1] + h * (f[:-1] * c0 + f_mid * c1 + f[1:] * c2)
        sp_deriv = f[:-1] * l0 + f_mid * l1 + f[1:] * l2
        f_s = pmp_rhs_array(y_s, cfg)
        d = np.abs(sp_deriv - f_s) / (1.0 + np.abs(f_s))
        worst = np.maximum(worst, d.max(axis=1))
    return worst, float(np.abs(bc).max())


def residual(sol: BvpSolution, cfg: GameConfig | None = None) -> float:
    """Recompute the maximum scaled defect (plus boundary violation) from the mesh."""
    cfg = cfg or sol.cfg
    worst, bc = _interval_defects(sol.t, sol.y, cfg)
    return max(float(worst.max()), bc)


def initial_guesses(x0: JointState, cfg: GameConfig,
                    scfg: SolverConfig | None = None) -> list[GuessTrajectory]:
    """Nominal, player-1-first, and player-2-first starting iterates.

    The nominal guess holds both speeds.  The advance/yield guesses keep the
    advancing player at constant speed and brake the yielding player just
    enough that it reaches the crossing corridor only after the advancer has
    cleared it; the speed co-states are tilted to match the braking.  Starting
    Newton from a trajectory with little zone overlap is what lands it in the
    corresponding equilibrium basin.
    """
    scfg = scfg or SolverConfig()
    t0, T = x0.t, cfg.horizon_T
    if not t0 < T:
        raise ValueError("guess construction requires start time before the horizon")
    t = np.linspace(t0, T, scfg.n_nodes)
    s = t - t0
    margin = 2.0 / cfg.penalty_gamma + 0.5 * cfg.car_W  # clearance beyond the box edges

    def setback(adv: "PlayerState", yld: "PlayerState") -> float:
        """How far back the yielder must start for sequencing to be natural."""
        t_clear = max(0.0, cfg.box_hi + margin - adv.d) / max(adv.v, 1.0)
        t_clear = min(t_clear, T - t0)
        overshoot = (yld.d + yld.v * t_clear) - (cfg.box_lo - margin)
        return overshoot + 1.0 if overshoot > 0.0 else 0.0

    def build(label, shift):
        Y = np.zeros((len(t), 8))
        x0s = x0.to_array() + np.asarray(shift)
        for idx in range(2):
            d0, v0 = x0s[2 * idx], x0s[2 * idx + 1]
            lam2T = -2.0 * (v0 - cfg.v_bar)
            Y[:, 2 * idx + 0] = d0 + v0 * s
            Y[:, 2 * idx + 1] = v0
            Y[:, 4 + 2 * idx] = cfg.alpha
            Y[:, 5 + 2 * idx] = lam2T + cfg.alpha * (T - t)
        return GuessTrajectory(label, t.copy(), Y, tuple(shift))

    return [build("nominal", (0.0, 0.0, 0.0, 0.0)),
            build("p1_first", (0.0, 0.0, -setback(x0.p1, x0.p2), 0.0)),
            build("p2_first", (-setback(x0.p2, x0.p1), 0.0, 0.0, 0.0))]


def _continuation_stages(b: float, scfg: SolverConfig) -> list[float]:
    """Geometric ramp of penalty magnitudes ending at the target."""
    if b <= scfg.continuation_start:
        return [b]
    stages = []
    cur = scfg.continuation_start
    while cur < b:
        stages.append(cur)
        cur *= scfg.continuation_factor
    stages.append(b)
    return stages


def solve(x0: JointState, guess: GuessTrajectory, cfg: GameConfig,
          scfg: SolverConfig | None = None) -> BvpSolution:
    """Solve the equilibrium BVP from one starting iterate.

    Newton with defect-driven refinement is first attempted at the true
    penalty, which succeeds whenever the guess trajectory already separates
    the players.  If that fails, the penalty magnitude is ramped up
    geometrically from a mild value with each stage warm-starting the next
    (with recursive sub-stages on stalls).  Non-convergence is reported
    through the ``converged`` flag and a failure reason; the best iterate
    found is always returned.
    """
    scfg = scfg or SolverConfig()
    if not x0.t < cfg.horizon_T:
        raise ValueError("start time must precede the horizon")
    x0_arr = x0.to_array()
    shift = np.asarray(guess.ic_shift, dtype=float)
    t0 = np.asarray(guess.t, dtype=float).copy()
    Y0 = np.asarray(guess.y, dtype=float).copy()

    iters = [0]
    ok = False
    if shift.any():
        # Solve the easier shifted problem first, then walk the pinned
        # initial state back to the true one, tracking the branch.
        Y0[0, :4] = x0_arr + shift
        res = _refine_loop(t0.copy(), Y0.copy(), cfg, scfg, scfg.defect_tol,
                           iters, scfg.max_refinements, stall_retries=2)
        if res[0]:
            res = _ic_walk(res[1], res[2], shift, x0_arr, cfg, scfg, iters,
                           scfg.ic_walk_max_splits)
        ok, t, Y, parts, max_defect, reason = res

    if not ok:
        Y0[0, :4] = x0_arr   # pinned exactly; never touched by Newton
        ok, t, Y, parts, max_defect, reason = _refine_loop(
            t0.copy(), Y0.copy(), cfg, scfg, scfg.defect_tol, iters,
            scfg.max_refinements, stall_retries=2)

    if not ok:
        ok, t, Y, parts, max_defect, reason = _continuation_solve(
            t0, Y0, cfg, scfg, iters)

    if not ok:
        sol = _build_solution(t, Y, cfg, converged=False, failure=reason,
                              max_defect=max_defect)
        sol.newton_iters = iters[0]
        sol.guess_label = guess.label
        return sol

    sol = _build_solution(t, Y, cfg, converged=True, max_defect=max_defect)
    sol.newton_iters = iters[0]
    sol.guess_label = guess.label
    sol.values = compute_values(sol, cfg, scfg)
    return sol


def _ic_walk(t, Y, shift, x0_arr, cfg, scfg, iters, depth, frac_from=1.0,
             frac_to=0.0):
    """Continuation in the pinned initial state from x0+shift down to x0.

    Tries the full move; on failure recursively visits the midpoint fraction.
    Only the final leg (fraction 0) is polished to the full defect tolerance.
    """
    final = frac_to == 0.0
    tol = scfg.defect_tol if final else scfg.continuation_defect_tol
    t_try, Y_try = t.copy(), Y.copy()
    Y_try[0, :4] = x0_arr + frac_to * shift
    res = _refine_loop(t_try, Y_try, cfg, scfg, tol, iters,
                       scfg.max_refinements if final else 8,
                       stall_retries=2 if final else 0)
    if res[0] or depth <= 0:
        return res
    frac_mid = 0.5 * (frac_from + frac_to)
    mid = _ic_walk(t, Y, shift, x0_arr, cfg, scfg, iters, depth - 1,
                   frac_from, frac_mid)
    if not mid[0]:
        return res
    return _ic_walk(mid[1], mid[2], shift, x0_arr, cfg, scfg, iters,
                    depth - 1, frac_mid, frac_to)


def _continuation_solve(t, Y, cfg, scfg, iters):
    """Fallback homotopy in the penalty magnitude, from the given iterate."""
    stages = _continuation_stages(cfg.penalty_b, scfg)
    b_from = 0.0
    out = None
    for b_stage in stages:
        final = b_stage == stages[-1]
        out = _advance(t, Y, b_from, b_stage, cfg, scfg,
                       scfg.continuation_max_splits, iters, final)
        if not out[0]:
            tag = out[5] if final else f"continuation_b{b_stage:g}_{out[5]}"
            return (False, out[1], out[2], out[3], out[4], tag)
        t, Y = out[1], out[2]
        b_from = b_stage
    return out


def _advance(t, Y, b_from, b_to, cfg, scfg, depth, iters, final):
    """Move the iterate from penalty b_from to b_to.

    Tries the jump directly; if Newton cannot make it, recursively inserts
    the geometric midpoint penalty.  Intermediate hops only need a mesh good
    enough to warm-start the next hop, so they run with a loose defect target
    and a small refinement budget.
    """
    from dataclasses import replace as _replace
    cfg_to = _replace(cfg, penalty_b=b_to)
    if final:
        res = _refine_loop(t.copy(), Y.copy(), cfg_to, scfg, scfg.defect_tol,
                           iters, scfg.max_refinements, stall_retries=2)
    else:
        res = _refine_loop(t.copy(), Y.copy(), cfg_to, scfg,
                           scfg.continuation_defect_tol, iters,
                           rounds=8, stall_retries=0)
    if res[0] or depth <= 0:
        return res
    b_mid = np.sqrt(b_from * b_to) if b_from > 0 else b_to / scfg.continuation_factor
    if not (min(b_from, 1.0) < b_mid < b_to):
        return res
    mid = _advance(t, Y, b_from, b_mid, cfg, scfg, depth - 1, iters, False)
    if not mid[0]:
        return res
    return _advance(mid[1], mid[2], b_mid, b_to, cfg, scfg, depth - 1,
                    iters, final)


def _refine_loop(t, Y, cfg, scfg, tol, iters, rounds, stall_retries):
    """Newton plus defect-driven bisection at a fixed penalty.

    When allowed, a stalled Newton gets retried after refining the worst
    intervals, which rescues meshes that are simply too coarse for the
    current feature sharpness.
    """
    parts = None
    max_defect = np.inf
    for _ in range(rounds + 1):
        if iters[0] >= scfg.max_total_iters:
            parts = _collocation_parts(t, Y, cfg)
            defects, bc_viol = _interval_defects(t, Y, cfg)
            return (False, t, Y, parts, max(float(defects.max()), bc_viol),
                    "iteration_budget")
        Y, ok, reason, it, parts = _newton(t, Y, cfg, scfg)
        iters[0] += it
        defects, bc_viol = _interval_defects(t, Y, cfg)
        max_defect = max(float(defects.max()), bc_viol)
        # The deliverable contract is the defect and boundary tolerances;
        # near-fold iterates often satisfy both while the inner Newton norm
        # keeps creeping, so acceptance does not require Newton's own tol.
        if max_defect < tol and bc_viol < scfg.bc_accept:
            return True, t, Y, parts, max_defect, None
        if not ok:
            if stall_retries == 0 or len(t) >= scfg.max_nodes:
                return False, t, Y, parts, max_defect, reason or "newton_failure"
            stall_retries -= 1
            bad = np.flatnonzero(defects >= tol)
            if len(bad) == 0:
                bad = np.argsort(defects)[::-1][:8]
                bad.sort()
        else:
            if len(t) >= scfg.max_nodes:
                return False, t, Y, parts, max_defect, "defect_unresolved"
            bad = np.flatnonzero(defects >= tol)
        room = scfg.max_nodes - len(t)
        if len(bad) > room:
            bad = bad[np.argsort(defects[bad])[::-1][:room]]
            bad.sort()
        t, Y = _bisect(t, Y, parts, bad)
    return False, t, Y, parts, max_defect, "defect_unresolved"


def _build_solution(t, Y, cfg, converged, failure=None, max_defect=np.nan):
    # interpolation data always uses the exact (unsmoothed) dynamics
    phi, f, y_mid, f_mid, bc = _collocation_parts(t, Y, cfg)
    if np.isnan(max_defect):
        defects, bc_viol = _interval_defects(t, Y, cfg)
        max_defect = max(float(defects.max()), bc_viol)
    return BvpSolution(t=t.copy(), y=Y.copy(), f=f.copy(), y_mid=y_mid.copy(),
                       f_mid=f_mid.copy(), converged=converged,
                       max_defect=float(max_defect), cfg=cfg, failure=failure)


def _bisect(t, Y, parts, intervals):
    """Insert midpoints of the flagged intervals, seeded from the interpolant."""
    _, f, y_mid, _, _ = parts
    t_new = [t[0]]
    rows = [Y[0]]
    flag = np.zeros(len(t) - 1, dtype=bool)
    flag[intervals] = True
    for k in range(len(t) - 1):
        if flag[k]:
            t_new.append(0.5 * (t[k] + t[k + 1]))
            rows.append(y_mid[k])
        t_new.append(t[k + 1])
        rows.append(Y[k + 1])
    return np.array(t_new), np.array(rows)


def solve_best(x0: JointState, cfg: GameConfig,
               scfg: SolverConfig | None = None) -> BvpSolution:
    """Try every starting iterate and keep the converged equilibrium with the
    lowest total accumulated loss V1 + V2."""
    scfg = scfg or SolverConfig()
    best = None
    failures = []
    for guess in initial_guesses(x0, cfg, scfg):
        sol = solve(x0, guess, cfg, scfg)
        if not sol.converged:
            failures.append(f"{guess.label}: {sol.failure}")
            continue
        if best is None or sum(sol.values) < sum(best.values):
            best = sol
    if best is None:
        raise AllGuessesFailed("; ".join(failures))
    return best


def loss_accumulator(sol: BvpSolution, cfg: GameConfig,
                     scfg: SolverConfig | None = None):
    """Cumulative running-loss integrals on a fine uniform grid.

    Returns (grid, cum1, cum2) where cum_i[k] is the trapezoid integral of
    player i's instantaneous loss from the start of the mesh to grid[k].
    Cached on the solution, since value labels query it once per t0.
    """
    if sol._acc is not None:
        return sol._acc
    scfg = scfg or SolverConfig()
    t0, T = sol.t[0], sol.t[-1]
    n = max(2, int(round((T - t0) / scfg.value_quad_step)) + 1)
    grid = np.linspace(t0, T, n)
    Yg = sol.interp(grid)
    from .game_model import sigma
    u = np.clip(0.5 * Yg[:, [5, 7]], cfg.u_min, cfg.u_max)
    occ_buf1 = sigma(Yg[:, 0], cfg.penalty_theta, cfg)
    occ_buf2 = sigma(Yg[:, 2], cfg.penalty_theta, cfg)
    occ1 = sigma(Yg[:, 0], 1.0, cfg)
    occ2 = sigma(Yg[:, 2], 1.0, cfg)
    l1 = u[:, 0] ** 2 + cfg.penalty_b * occ_buf1 * occ2
    l2 = u[:, 1] ** 2 + cfg.penalty_b * occ_buf2 * occ1
    dt = np.diff(grid)
    cum1 = np.concatenate([[0.0], np.cumsum(0.5 * dt * (l1[:-1] + l1[1:]))])
    cum2 = np.concatenate([[0.0], np.cumsum(0.5 * dt * (l2[:-1] + l2[1:]))])
    sol._acc = (grid, cum1, cum2)
    return sol._acc


def compute_values(sol: BvpSolution, cfg: GameConfig,
                   scfg: SolverConfig | None = None) -> tuple:
    """Accumulated loss of each player: running-loss quadrature plus terminal loss."""
    from .game_model import PlayerState
    grid, cum1, cum2 = loss_accumulator(sol, cfg, scfg)
    yT = sol.y[-1]
    g1 = terminal_loss(PlayerState(yT[0], yT[1]), cfg)
    g2 = terminal_loss(PlayerState(yT[2], yT[3]), cfg)
    return (float(cum1[-1] + g1), float(cum2[-1] + g2))
