"""Decentralized bilevel iterations.

The main method per step: momentum hypergradient/lower-gradient estimates
that reuse one realized sample at the current and previous point, a
gradient tracker mixed over the network, consensus averaging on x, and a
local step on y. Baselines strip parts away: dsgd (no momentum, no
tracking), gtsgd (tracking of raw estimates), msgd (momentum without
tracking).

All per-step randomness comes from lanes (agent, t, "up") and
(agent, t, "low") of the run's stream, so two algorithms run with the same
seed see identical sample realizations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from decbilevel.hypergrad import (
    EstimatorConfig,
    LipschitzBundle,
    apply_estimate,
    draw_estimate_sample,
)
from decbilevel.numerics import RngStream
from decbilevel.problems.base import ProblemConstants
from decbilevel.topology import ConsensusMatrix

ALGORITHMS = ("diamond", "dsgd", "gtsgd", "msgd")


class DivergenceError(RuntimeError):
    """An iterate became non-finite; carries the iteration index and any
    metric records collected before the blow-up."""

    def __init__(self, t: int, records=None):
        super().__init__(f"non-finite iterate at iteration {t}")
        self.t = t
        self.records = records if records is not None else []


@dataclass
class Counters:
    iterations: int = 0
    comm_rounds: int = 0
    upper_ifo_per_agent: int = 0
    lower_ifo_per_agent: int = 0


@dataclass
class AgentState:
    """Per-agent view of one network snapshot."""

    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    v: np.ndarray
    u: np.ndarray
    prev_x: np.ndarray
    prev_y: np.ndarray


@dataclass
class NetworkState:
    """Stacked per-agent iterates: row i belongs to agent i."""

    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    v: np.ndarray
    u: np.ndarray
    prev_x: np.ndarray
    prev_y: np.ndarray
    t: int = 0
    counters: Counters = field(default_factory=Counters)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d_up(self) -> int:
        return self.x.shape[1]

    @property
    def d_low(self) -> int:
        return self.y.shape[1]

    def agent(self, i: int) -> AgentState:
        return AgentState(x=self.x[i], y=self.y[i], p=self.p[i], v=self.v[i],
                          u=self.u[i], prev_x=self.prev_x[i], prev_y=self.prev_y[i])

    @property
    def agents(self):
        return [self.agent(i) for i in range(self.m)]

    def copy(self) -> "NetworkState":
        return NetworkState(
            x=self.x.copy(), y=self.y.copy(), p=self.p.copy(), v=self.v.copy(),
            u=self.u.copy(), prev_x=self.prev_x.copy(), prev_y=self.prev_y.copy(),
            t=self.t, counters=Counters(**vars(self.counters)),
        )


def init_network(m: int, x0: np.ndarray, y0: np.ndarray) -> NetworkState:
    """Common initialization: every agent starts at (x0, y0) with zeroed
    momentum and tracker state (the t = -1 convention)."""
    x0 = np.asarray(x0, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    x = np.tile(x0, (m, 1))
    y = np.tile(y0, (m, 1))
    return NetworkState(
        x=x, y=y,
        p=np.zeros_like(x), v=np.zeros_like(y), u=np.zeros_like(x),
        prev_x=x.copy(), prev_y=y.copy(),
    )


@dataclass(frozen=True)
class Schedule:
    """Step-size and momentum schedule constants.

    alpha_t = c_alpha * (omega + t)^{-1/3}; beta_t = c_beta * alpha_t;
    the momentum coefficients for step t+1 are c_eta * alpha_t^2 and
    c_gamma * alpha_t^2, clamped to [0, 1].
    """

    c_alpha: float = 10.0
    omega: float = 2.0
    c_beta: float = 10.0
    c_eta: float = 0.1
    c_gamma: float = 0.1

    def __post_init__(self):
        if self.c_alpha <= 0:
            raise ValueError(f"c_alpha must be > 0, got {self.c_alpha}")
        if self.omega < 2:
            raise ValueError(f"omega must be >= 2, got {self.omega}")
        if self.c_beta <= 0:
            raise ValueError(f"c_beta must be > 0, got {self.c_beta}")
        if self.c_eta < 0 or self.c_gamma < 0:
            raise ValueError("c_eta and c_gamma must be >= 0")


def schedule_values(s: Schedule, t: int):
    """(alpha_t, beta_t, eta_{t+1}, gamma_{t+1}) for t >= 0."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    alpha = s.c_alpha * (s.omega + t) ** (-1.0 / 3.0)
    beta = s.c_beta * alpha
    eta = min(1.0, s.c_eta * alpha * alpha)
    gamma = min(1.0, s.c_gamma * alpha * alpha)
    return alpha, beta, eta, gamma


def _momentum_coeffs(s: Schedule, t: int):
    # eta_0 = gamma_0 = 1: the first step has no history to correct, which
    # matches the zero initialization of p and v.
    if t == 0:
        return 1.0, 1.0
    _, _, eta, gamma = schedule_values(s, t - 1)
    return eta, gamma


def _check_shapes(net: NetworkState, cm: ConsensusMatrix, oracle) -> None:
    if cm.m != net.m:
        raise ValueError(f"matrix is {cm.m}x{cm.m} but network has m={net.m}")
    if oracle.m != net.m or oracle.d_up != net.d_up or oracle.d_low != net.d_low:
        raise ValueError(
            f"oracle dims (m={oracle.m}, d_up={oracle.d_up}, d_low={oracle.d_low}) "
            f"do not match network (m={net.m}, d_up={net.d_up}, d_low={net.d_low})"
        )


def _momentum_estimates(net: NetworkState, oracle, cfg: EstimatorConfig,
                        eta: float, gamma: float, s: RngStream):
    """New (p, v) rows for every agent, reusing one sample per agent at the
    current and previous point. Returns the arrays plus IFO increments."""
    t = net.t
    m = net.m
    p_new = np.empty_like(net.p)
    v_new = np.empty_like(net.v)
    for i in range(m):
        sample = draw_estimate_sample(oracle, i, cfg, s.lane_stream(i, t, "up"))
        est_cur = apply_estimate(oracle, i, net.x[i], net.y[i], cfg, sample)
        if t == 0:
            p_new[i] = est_cur
        else:
            est_prev = apply_estimate(oracle, i, net.prev_x[i], net.prev_y[i],
                                      cfg, sample)
            p_new[i] = est_cur + (1.0 - eta) * (net.p[i] - est_prev)
        zeta = oracle.draw_lower_sample(i, s.lane_stream(i, t, "low"))
        gy_cur = oracle.grad_gy(i, net.x[i], net.y[i], zeta)
        if t == 0:
            v_new[i] = gy_cur
        else:
            gy_prev = oracle.grad_gy(i, net.prev_x[i], net.prev_y[i], zeta)
            v_new[i] = gy_cur + (1.0 - gamma) * (net.v[i] - gy_prev)
    upper_ifo = (cfg.K + 2) if t == 0 else 2 * (cfg.K + 2)
    lower_ifo = 1 if t == 0 else 2
    return p_new, v_new, upper_ifo, lower_ifo


def _raw_estimates(net: NetworkState, oracle, cfg: EstimatorConfig, s: RngStream):
    """Plain estimates at the current point (no momentum), one per agent."""
    t = net.t
    est = np.empty_like(net.p)
    grad = np.empty_like(net.v)
    for i in range(net.m):
        sample = draw_estimate_sample(oracle, i, cfg, s.lane_stream(i, t, "up"))
        est[i] = apply_estimate(oracle, i, net.x[i], net.y[i], cfg, sample)
        zeta = oracle.draw_lower_sample(i, s.lane_stream(i, t, "low"))
        grad[i] = oracle.grad_gy(i, net.x[i], net.y[i], zeta)
    return est, grad


def _advance(net: NetworkState, x_new, y_new, p_new, v_new, u_new,
             upper_ifo: int, lower_ifo: int) -> NetworkState:
    net.prev_x = net.x
    net.prev_y = net.y
    net.x = x_new
    net.y = y_new
    net.p = p_new
    net.v = v_new
    net.u = u_new
    net.t += 1
    c = net.counters
    c.iterations += 1
    c.comm_rounds += 1
    c.upper_ifo_per_agent += upper_ifo
    c.lower_ifo_per_agent += lower_ifo
    return net


def diamond_step(net: NetworkState, cm: ConsensusMatrix, oracle,
                 cfg: EstimatorConfig, sched: Schedule, s: RngStream) -> NetworkState:
    """One iteration of the tracked-momentum method.

    Momentum estimates -> tracker mix with the estimate increment ->
    consensus x-step along the tracker -> local y-step. One communication
    round carries the (x, u) pair.
    """
    _check_shapes(net, cm, oracle)
    t = net.t
    alpha, beta, _, _ = schedule_values(sched, t)
    eta, gamma = _momentum_coeffs(sched, t)
    p_new, v_new, upper_ifo, lower_ifo = _momentum_estimates(
        net, oracle, cfg, eta, gamma, s)
    w = cm.weights
    u_new = w @ net.u + p_new - net.p
    x_new = w @ net.x - alpha * u_new
    y_new = net.y - beta * v_new
    return _advance(net, x_new, y_new, p_new, v_new, u_new, upper_ifo, lower_ifo)


def dsgd_step(net: NetworkState, cm: ConsensusMatrix, oracle,
              cfg: EstimatorConfig, sched: Schedule, s: RngStream) -> NetworkState:
    """Baseline: consensus x-step along the raw estimate, plain y-SGD."""
    _check_shapes(net, cm, oracle)
    alpha, beta, _, _ = schedule_values(sched, net.t)
    est, grad = _raw_estimates(net, oracle, cfg, s)
    x_new = cm.weights @ net.x - alpha * est
    y_new = net.y - beta * grad
    return _advance(net, x_new, y_new, est, grad, net.u, cfg.K + 2, 1)


def gtsgd_step(net: NetworkState, cm: ConsensusMatrix, oracle,
               cfg: EstimatorConfig, sched: Schedule, s: RngStream) -> NetworkState:
    """Baseline: gradient tracking over raw estimates (no momentum), plain
    y-SGD. The p slot stores the previous raw estimate for the tracker
    increment."""
    _check_shapes(net, cm, oracle)
    alpha, beta, _, _ = schedule_values(sched, net.t)
    est, grad = _raw_estimates(net, oracle, cfg, s)
    u_new = cm.weights @ net.u + est - net.p
    x_new = cm.weights @ net.x - alpha * u_new
    y_new = net.y - beta * grad
    return _advance(net, x_new, y_new, est, grad, u_new, cfg.K + 2, 1)


def msgd_step(net: NetworkState, cm: ConsensusMatrix, oracle,
              cfg: EstimatorConfig, sched: Schedule, s: RngStream) -> NetworkState:
    """Baseline: momentum estimates without tracking; x steps along p."""
    _check_shapes(net, cm, oracle)
    t = net.t
    alpha, beta, _, _ = schedule_values(sched, t)
    eta, gamma = _momentum_coeffs(sched, t)
    p_new, v_new, upper_ifo, lower_ifo = _momentum_estimates(
        net, oracle, cfg, eta, gamma, s)
    x_new = cm.weights @ net.x - alpha * p_new
    y_new = net.y - beta * v_new
    return _advance(net, x_new, y_new, p_new, v_new, net.u, upper_ifo, lower_ifo)


_STEP_FNS = {
    "diamond": diamond_step,
    "dsgd": dsgd_step,
    "gtsgd": gtsgd_step,
    "msgd": msgd_step,
}


def run(algorithm: str, net: NetworkState, cm: ConsensusMatrix, oracle,
        cfg: EstimatorConfig, sched: Schedule, T: int, s: RngStream,
        metric_hook=None, cadence: int = 10):
    """Execute T steps, collecting metric-hook rows at the given cadence.

    Rows are taken at t = 0, cadence, 2*cadence, ... (t < T) and always at
    the final state t = T. Raises DivergenceError when an iterate goes
    non-finite, naming the iteration.
    """
    if algorithm not in _STEP_FNS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if cadence < 1:
        raise ValueError(f"cadence must be >= 1, got {cadence}")
    step = _STEP_FNS[algorithm]
    records = []
    for t in range(T):
        if metric_hook is not None and t % cadence == 0:
            records.append(metric_hook(net))
        step(net, cm, oracle, cfg, sched, s)
        if not (np.all(np.isfinite(net.x)) and np.all(np.isfinite(net.y))):
            raise DivergenceError(net.t, records)
    if metric_hook is not None:
        records.append(metric_hook(net))
    return records


@dataclass(frozen=True)
class Theorem1Constants:
    """Diagnostic evaluation of the analysis' step-size conditions."""

    L_mug: float
    c_beta: float
    c_eta: float
    c_gamma: float
    cbar_y: float
    cbar_u: float
    cbar_eta: float
    cbar_gamma: float
    cbar_x: float
    alpha_bound: float
    beta_bound: float


def theorem1_constants(pc: ProblemConstants, lb: LipschitzBundle, m: int,
                       lam: float, alpha: float | None = None) -> Theorem1Constants:
    """Evaluate the analysis constants and step-size bounds literally.

    cbar_x depends on the running step size; pass alpha to evaluate it
    there, otherwise it is evaluated at the returned alpha bound. The
    formulas are diagnostic: experiment defaults come from the empirical
    schedule, not from these conservative values.
    """
    if not (0.0 <= lam < 1.0):
        raise ValueError(f"lambda must be in [0, 1), got {lam}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if lb.L_K is None:
        raise ValueError("LipschitzBundle.L_K is required (fix a Neumann budget)")
    mu, lg = pc.mu_g, pc.L_g
    l_f, l_l, l_y, l_k = lb.L_f, lb.L_l, lb.L_y, lb.L_K
    l_mug = mu * lg / (mu + lg)
    cbar_y = min(np.sqrt(l_f / (2.0 * l_y**2 * m)),
                 np.sqrt(l_f / (10.0 * l_y**2 * m**2)))
    c_beta = 8.0 * l_f / (m * l_mug * cbar_y)
    cbar_eta = max(32.0 * l_k**2, 160.0 * l_k**2 * m,
                   24.0 * (mu + lg) * l_k**2 * c_beta / cbar_y)
    cbar_gamma = max(32.0 * lg**2, 160.0 * lg**2 * m,
                     24.0 * (mu + lg) * lg**2 * c_beta / cbar_y)
    cbar_u = min(1.0 / (48.0 * l_k**2), 1.0 / (3.0 * cbar_eta))
    denom = 3.0 * l_f * m * (1.0 - 3.0 * cbar_u * cbar_eta)
    if denom <= 0.0:
        warnings.warn(
            "momentum constant c_eta is unbounded here: (1 - 3*cbar_u*cbar_eta) <= 0",
            RuntimeWarning,
        )
        c_eta = np.inf
    else:
        c_eta = (6.0 * l_f * cbar_eta + m) / denom
    c_gamma = (1.0 / (3.0 * l_f) + 8.0 * lg**2 * c_beta**2 + cbar_gamma * (
        2.0 * c_beta * cbar_y / l_mug
        + 8.0 * l_k**2 * c_beta**2 / cbar_eta
        + 12.0 * l_k**2 * cbar_u * c_beta**2
    ))
    one_lam = 1.0 - lam
    alpha_bound = min(
        np.sqrt(m / (2.0 * l_l**2)),
        cbar_u * one_lam**2 / 30.0,
        cbar_u * one_lam * l_mug * c_beta / (40.0 * l_y**2 * cbar_y),
        cbar_u * one_lam * cbar_eta / (80.0 * l_k**2),
        cbar_u * one_lam * cbar_gamma / (80.0 * lg**2),
        1.0 / (5.0 * l_l),
        1.0 / (3.0 * l_f),
        np.sqrt(one_lam**2 / (120.0 * l_k**2)),
        one_lam / (240.0 * cbar_u * l_k**2 * m),
        cbar_y * one_lam / (36.0 * (mu + lg) * cbar_u * l_k**2 * c_beta),
        one_lam,
    )
    at = alpha_bound if alpha is None else alpha
    cbar_x = 6.0 / (one_lam * at)
    return Theorem1Constants(
        L_mug=l_mug, c_beta=c_beta, c_eta=float(c_eta), c_gamma=c_gamma,
        cbar_y=float(cbar_y), cbar_u=cbar_u, cbar_eta=cbar_eta,
        cbar_gamma=cbar_gamma, cbar_x=cbar_x,
        alpha_bound=float(alpha_bound), beta_bound=1.0 / (mu + lg),
    )
