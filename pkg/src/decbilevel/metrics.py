"""Convergence metric and estimation-error diagnostics.

The scalar tracked per iteration is

    metric_M = ||grad l(x_bar)||^2 + ||x - 1 (x) x_bar||^2 + ||y* - y||^2

summed over agents for the consensus and lower terms, with y*_i evaluated
at agent i's own x_i (the lower minimizer is defined per-agent).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from decbilevel.algorithms import Counters, NetworkState
from decbilevel.hypergrad import EstimatorConfig, neumann_estimate, surrogate_grad
from decbilevel.numerics import RngStream

CSV_COLUMNS = (
    "t", "samples_upper", "samples_lower", "comm_rounds",
    "stationarity_err", "consensus_err", "lower_err", "metric_M",
    "upper_loss", "wall_seconds",
)


@dataclass(frozen=True)
class RunRecord:
    """One metric row, aligned with the CSV schema."""

    t: int
    samples_upper: int
    samples_lower: int
    comm_rounds: int
    stationarity_err: float
    consensus_err: float
    lower_err: float
    metric_M: float
    upper_loss: float
    wall_seconds: float

    def __post_init__(self):
        for name in ("stationarity_err", "consensus_err", "lower_err"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        parts = self.stationarity_err + self.consensus_err + self.lower_err
        if abs(self.metric_M - parts) > 1e-12 * max(1.0, abs(parts)):
            raise ValueError("metric_M must equal the sum of its three terms")

    def as_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass(frozen=True)
class DiagnosticRecord:
    """Squared norms of the momentum-estimate errors, summed over agents."""

    ef_norm2: float
    eg_norm2: float
    bias_norm2: float

    def __post_init__(self):
        for name in ("ef_norm2", "eg_norm2", "bias_norm2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def exact_metric(net: NetworkState, oracle, wall_seconds: float = 0.0) -> RunRecord:
    """Evaluate the convergence metric with the problem's exact interface."""
    for name in ("y_star", "hypergrad_exact", "upper_value"):
        if not hasattr(oracle, name):
            raise TypeError(f"oracle lacks exact interface method {name!r}")
    m = net.m
    x_bar = net.x.mean(axis=0)
    grad_bar = np.zeros(net.d_up)
    for i in range(m):
        grad_bar += oracle.hypergrad_exact(i, x_bar)
    grad_bar /= m
    stationarity = float(np.sum(grad_bar**2))
    consensus = float(np.sum((net.x - x_bar) ** 2))
    lower = 0.0
    for i in range(m):
        lower += float(np.sum((oracle.y_star(i, net.x[i]) - net.y[i]) ** 2))
    loss = float(np.mean([oracle.upper_value(i, x_bar) for i in range(m)]))
    c: Counters = net.counters
    return RunRecord(
        t=net.t,
        samples_upper=c.upper_ifo_per_agent,
        samples_lower=c.lower_ifo_per_agent,
        comm_rounds=c.comm_rounds,
        stationarity_err=stationarity,
        consensus_err=consensus,
        lower_err=lower,
        metric_M=stationarity + consensus + lower,
        upper_loss=loss,
        wall_seconds=wall_seconds,
    )


def estimation_errors(net: NetworkState, oracle, cfg: EstimatorConfig,
                      s: RngStream, n_bias: int = 1000) -> DiagnosticRecord:
    """Decompose the current (p, v) slots into noise and bias parts.

    The lower error compares v against the full lower gradient. The upper
    error compares p against the exact surrogate after subtracting a
    Monte-Carlo bias estimate (mean of n_bias fresh estimator draws minus
    the surrogate).
    """
    ef = eg = bias_sq = 0.0
    for i in range(net.m):
        full_gy = oracle.grad_gy(i, net.x[i], net.y[i], None)
        eg += float(np.sum((net.v[i] - full_gy) ** 2))
        sur = surrogate_grad(oracle, i, net.x[i], net.y[i])
        draws = np.zeros(net.d_up)
        for j in range(n_bias):
            draws += neumann_estimate(oracle, i, net.x[i], net.y[i], cfg,
                                      s.lane_stream("bias", i, j))
        bias = draws / n_bias - sur
        bias_sq += float(np.sum(bias**2))
        ef += float(np.sum((net.p[i] - sur - bias) ** 2))
    return DiagnosticRecord(ef_norm2=ef, eg_norm2=eg, bias_norm2=bias_sq)


def rate_slope(records, t_lo: int, t_hi: int) -> float:
    """Least-squares slope of log(running-min metric_M) vs log t on a window.

    The running minimum is taken over the whole record sequence in time
    order; the fit uses rows with t_lo <= t <= t_hi (t_lo >= 1 so log t
    is defined). Requires at least 10 rows in the window.
    """
    if t_lo < 1:
        raise ValueError(f"t_lo must be >= 1, got {t_lo}")
    if t_hi <= t_lo:
        raise ValueError(f"need t_hi > t_lo, got [{t_lo}, {t_hi}]")
    ordered = sorted(records, key=lambda r: r.t)
    log_t, log_m = [], []
    run_min = np.inf
    for r in ordered:
        run_min = min(run_min, r.metric_M)
        if t_lo <= r.t <= t_hi:
            log_t.append(np.log(r.t))
            log_m.append(np.log(max(run_min, 1e-300)))
    if len(log_t) < 10:
        raise ValueError(f"need >= 10 records in [{t_lo}, {t_hi}], got {len(log_t)}")
    slope, _ = np.polyfit(np.array(log_t), np.array(log_m), 1)
    return float(slope)
