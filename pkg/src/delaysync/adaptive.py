"""Distributed adaptive tracking controller with delay compensation.

Each agent feeds back a regressor of its current state, its state one
state-delay ago, and the reference one input-delay ago, through adaptive
gains.  Because the input takes ``tau_u`` seconds to reach the plant, the
commanded value is computed against the leader regressor predicted
``tau_u`` ahead; the prediction is exact up to integration error since the
leader model and the reference are known.  A mismatch signal between the
current virtual input and the actually applied one drives an auxiliary
compensator so that the gain adaptation sees a delay-free error system.

The controller only ever touches the leader model, the graph matrices, and
the signs of the reference-matching gains; no follower dynamics enter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .dde import GRID_TOL, HistoryBuffer, rk4_ode_step
from .errors import DimensionMismatch, ValidationError
from .plant import LeaderModel
from .topology import TopologyMatrices

# Rate matrices may dip this far below zero in their smallest eigenvalue
# and still count as positive semidefinite.
PSD_TOL = 1e-10


@dataclass(frozen=True)
class ControllerConfig:
    """Static controller data shared by the whole fleet.

    ``gamma_theta`` / ``gamma_phi`` are the (l, l) adaptation rate
    matrices (symmetric positive semidefinite; zero freezes adaptation),
    ``p_matrix`` the (l*n, l*n) positive definite weight from the leader
    Lyapunov equation, ``r_sign`` the per-agent signs of the ideal
    reference gains, and ``tau_x <= tau_u`` the delays in seconds.

    ``r_weight`` optionally carries the per-agent magnitudes of the ideal
    reference gains.  The control law never reads it; it only feeds the
    energy monitor, which is the one diagnostic allowed plant-side data.
    """

    gamma_theta: np.ndarray
    gamma_phi: np.ndarray
    p_matrix: np.ndarray
    r_sign: np.ndarray
    tau_x: float
    tau_u: float
    r_weight: np.ndarray | None = None

    def __post_init__(self):
        gt = np.asarray(self.gamma_theta, dtype=float)
        gp = np.asarray(self.gamma_phi, dtype=float)
        pm = np.asarray(self.p_matrix, dtype=float)
        rs = np.asarray(self.r_sign, dtype=float)
        ell = gt.shape[0] if gt.ndim == 2 else 0
        if gt.shape != (ell, ell) or gp.shape != (ell, ell):
            raise DimensionMismatch("rate matrices must be square and equally sized")
        if rs.shape != (ell,):
            raise DimensionMismatch(f"r_sign shape {rs.shape}, expected {(ell,)}")
        if np.any(np.abs(rs) != 1.0):
            raise ValidationError("r_sign entries must be +1 or -1")
        for name, g in (("gamma_theta", gt), ("gamma_phi", gp)):
            eigs = linalg.symmetric_eigenvalues(g)
            if eigs[0] < -PSD_TOL:
                raise ValidationError(f"{name} must be positive semidefinite, min eig {eigs[0]:.3e}")
        if pm.ndim != 2 or pm.shape[0] != pm.shape[1] or pm.shape[0] % ell != 0:
            raise DimensionMismatch(f"p_matrix shape {pm.shape} incompatible with {ell} agents")
        linalg.cholesky(pm)
        if not 0.0 < self.tau_x <= self.tau_u:
            raise ValidationError(
                f"delays must satisfy 0 < tau_x <= tau_u, got tau_x={self.tau_x}, tau_u={self.tau_u}"
            )
        if self.r_weight is not None:
            rw = np.asarray(self.r_weight, dtype=float)
            if rw.shape != (ell,):
                raise DimensionMismatch(f"r_weight shape {rw.shape}, expected {(ell,)}")
            if np.any(rw < 0.0):
                raise ValidationError("r_weight magnitudes must be nonnegative")
            object.__setattr__(self, "r_weight", rw)
        object.__setattr__(self, "gamma_theta", gt)
        object.__setattr__(self, "gamma_phi", gp)
        object.__setattr__(self, "p_matrix", pm)
        object.__setattr__(self, "r_sign", rs)

    @property
    def num_agents(self) -> int:
        return self.gamma_theta.shape[0]


@dataclass
class ControllerState:
    """Adaptive gains: ``theta`` is (l, 2n+p, p), ``phi_phi`` is (l, p, p).

    ``gain_history`` holds the flattened ``theta`` trajectory so the
    mismatch can look back ``tau_u`` seconds (pre-history: initial gains).
    """

    theta: np.ndarray
    phi_phi: np.ndarray
    gain_history: HistoryBuffer | None = None


def regressor(x_now, x_delayed, r_delayed) -> np.ndarray:
    """Stack ``[x(t); x(t - tau_x); r(t - tau_u)]`` into one vector."""
    x_now = np.asarray(x_now, dtype=float).reshape(-1)
    x_delayed = np.asarray(x_delayed, dtype=float).reshape(-1)
    r_delayed = np.asarray(r_delayed, dtype=float).reshape(-1)
    if x_now.shape != x_delayed.shape:
        raise DimensionMismatch("current and delayed states differ in length")
    return np.concatenate([x_now, x_delayed, r_delayed])


def leader_block_derivative(m: LeaderModel, x_m: np.ndarray, r_value: np.ndarray) -> np.ndarray:
    """Single leader block derivative ``a_m x_m + b_m r``; shared by the
    predictor and the closed-loop integration so both see identical arithmetic."""
    return m.a_m @ x_m + m.b_m @ r_value


def predict_leader_regressor(
    m: LeaderModel,
    x_m_now: np.ndarray,
    r_of: Callable[[float], np.ndarray],
    t: float,
    tau_u: float,
    tau_x: float,
    h: float,
    hold_reference: bool = False,
) -> np.ndarray:
    """Leader regressor predicted ``tau_u`` ahead of ``t``.

    Integrates ``dx_m/ds = a_m x_m + b_m r(s - tau_u)`` forward from
    ``x_m(t)`` with step ``h``; every reference value needed lies in
    ``(t - tau_u, t]`` and is exactly known, so the returned
    ``[x_m(t + tau_u); x_m(t + tau_u - tau_x); r(t)]`` matches the future
    regressor up to integration error.

    With ``hold_reference`` the input is sampled once per step (at the
    step's left endpoint) and held through the RK4 stages.  A square wave
    whose edges land on the grid is constant on every half-open step
    interval, so the hold reproduces it exactly; stage-time evaluation
    would instead let the final stage read the value from beyond the edge.
    Leave it off for smooth references, where stage-time evaluation keeps
    the full fourth-order accuracy.
    """
    for name, delay in (("tau_u", tau_u), ("tau_x", tau_x)):
        ratio = delay / h
        if abs(ratio - round(ratio)) > GRID_TOL:
            raise ValidationError(f"step {h} does not divide {name}={delay}")
    if tau_x > tau_u:
        raise ValidationError(f"tau_x={tau_x} exceeds tau_u={tau_u}")
    steps = int(round(tau_u / h))
    mid = steps - int(round(tau_x / h))

    y = np.asarray(x_m_now, dtype=float).copy()
    x_mid = y.copy() if mid == 0 else None
    for j in range(steps):
        if hold_reference:
            r_j = r_of(t + j * h - tau_u)
            f = lambda s, yy, r=r_j: leader_block_derivative(m, yy, r)
        else:
            f = lambda s, yy: leader_block_derivative(m, yy, r_of(s - tau_u))
        y = rk4_ode_step(f, t + j * h, y, h)
        if j + 1 == mid:
            x_mid = y.copy()
    return np.concatenate([y, x_mid, np.asarray(r_of(t), dtype=float).reshape(-1)])


def control(theta: np.ndarray, eta_m_pred: np.ndarray) -> np.ndarray:
    """Commanded inputs ``u_i = theta_i^T eta``, shape (l, p); the same
    predicted leader regressor drives every agent."""
    return np.einsum("iqp,q->ip", theta, eta_m_pred)


def mismatch(
    theta_now: np.ndarray,
    gain_history: HistoryBuffer,
    eta: np.ndarray,
    eta_m_now: np.ndarray,
    t: float,
    tau_u: float,
) -> np.ndarray:
    """Input mismatch ``theta_i(t)^T eta_i(t) - theta_i(t - tau_u)^T eta_m(t)``.

    The delayed gains come from ``gain_history`` (pre-history: the initial
    gains), the second factor is the current leader regressor; shape (l, p).
    """
    ell, q, p = theta_now.shape
    th_delayed = gain_history.sample(t - tau_u).reshape(ell, q, p)
    virtual = np.einsum("iqp,iq->ip", theta_now, eta)
    applied = np.einsum("iqp,q->ip", th_delayed, eta_m_now)
    return virtual - applied


def auxiliary_input(phi_phi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Auxiliary drive ``phi_phi_i @ phi_i`` per agent, shape (l, p)."""
    return np.einsum("ipj,ij->ip", phi_phi, phi)


def augmented_error(topo_m: TopologyMatrices, x, x_m, x_a) -> np.ndarray:
    """Graph tracking error plus auxiliary state.

    ``(L (x) I) x - (diag(g) (x) I) x_m + x_a`` with ``x_m`` given either
    stacked per agent (length l*n) or as the single leader block (length n).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    x_a = np.asarray(x_a, dtype=float).reshape(-1)
    x_m = np.asarray(x_m, dtype=float).reshape(-1)
    total = topo_m.laplacian_lifted.shape[0]
    if x.shape[0] != total or x_a.shape[0] != total:
        raise DimensionMismatch(f"states must have length {total}")
    if x_m.shape[0] != total:
        ell = topo_m.laplacian_like.shape[0]
        if x_m.shape[0] * ell != total:
            raise DimensionMismatch(f"x_m length {x_m.shape[0]} fits neither n nor l*n")
        x_m = np.tile(x_m, ell)
    return topo_m.laplacian_lifted @ x - topo_m.leader_lifted @ x_m + x_a


def gain_derivatives(
    cfg: ControllerConfig,
    topo_m: TopologyMatrices,
    m: LeaderModel,
    e_a: np.ndarray,
    eta: np.ndarray,
    phi: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptation laws, block-diagonal projection.

    With ``s_i = b_m^T [(L (x) I)^T P e_a]_i`` the updates are

        d theta_i  = -sign(theta_r_i*) (Gamma_theta s)_i eta_i^T
        d phi_phi_i = -(Gamma_phi s)_i phi_i^T

    returning arrays shaped like ``theta`` (l, q, p) and ``phi_phi`` (l, p, p).
    """
    ell = cfg.num_agents
    n = m.state_dim
    v = cfg.p_matrix @ e_a
    s = (topo_m.laplacian_like.T @ v.reshape(ell, n)) @ m.b_m
    g_theta = cfg.gamma_theta @ s
    g_phi = cfg.gamma_phi @ s
    d_theta = -cfg.r_sign[:, None, None] * eta[:, :, None] * g_theta[:, None, :]
    d_phi = -g_phi[:, :, None] * phi[:, None, :]
    return d_theta, d_phi
