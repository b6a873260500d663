"""Hypergradient machinery.

The exact surrogate direction at an arbitrary (x, y),

    grad_x f - d2_xy g [d2_yy g]^{-1} grad_y f,

its truncated-Neumann stochastic estimator (biased, K+2 samples per call),
and the calculators for the smoothness/variance/bias constants those two
objects obey.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from decbilevel.numerics import RngStream, cg_solve, draw_uniform_int
from decbilevel.problems.base import ProblemConstants


@dataclass(frozen=True)
class EstimatorConfig:
    """Neumann budget and the spectral window it is scaled by.

    derandomize=True replaces the uniformly drawn truncation index with the
    full average over k in {0..K-1}; the estimate becomes deterministic
    given the samples and its only bias is Neumann truncation. Used by
    validation runs that need exactly reproducible descent directions.
    """

    K: int
    L_g: float
    mu_g: float
    derandomize: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not (0.0 < self.mu_g <= self.L_g):
            raise ValueError(
                f"need 0 < mu_g <= L_g, got mu_g={self.mu_g}, L_g={self.L_g}"
            )

    @classmethod
    def from_constants(cls, pc: ProblemConstants, K: int, derandomize: bool = False):
        return cls(K=K, L_g=pc.L_g, mu_g=pc.mu_g, derandomize=derandomize)


@dataclass(frozen=True)
class LipschitzBundle:
    """Derived smoothness constants: L_f, L_l (implicit objective), L_y
    (minimizer map), and L_K (estimator second-moment constant; None until
    a Neumann budget is fixed)."""

    L_f: float
    L_l: float
    L_y: float
    L_K: float | None = None

    def __post_init__(self):
        for name in ("L_f", "L_l", "L_y"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.L_l < self.L_f:
            raise ValueError(f"need L_l >= L_f, got {self.L_l} < {self.L_f}")
        if self.L_K is not None and self.L_K < 0:
            raise ValueError("L_K must be >= 0")


@dataclass(frozen=True)
class EstimatorSample:
    """One realized sample tuple: xi for the upper gradients, K+1 lower
    samples (zetas[0] for the cross Hessian, zetas[1:] for the Neumann
    factors), and the truncation index k (None in derandomized mode)."""

    xi: object
    zetas: tuple
    k: int | None


def draw_estimate_sample(oracle, agent: int, cfg: EstimatorConfig,
                         s: RngStream) -> EstimatorSample:
    """Draw the K+2 oracle samples (plus one uniform index) for one estimate.

    All K+1 lower samples are drawn regardless of the realized index so the
    stream advances identically across realizations.
    """
    xi = oracle.draw_upper_sample(agent, s)
    zetas = tuple(oracle.draw_lower_sample(agent, s) for _ in range(cfg.K + 1))
    k = None if cfg.derandomize else draw_uniform_int(s, cfg.K)
    return EstimatorSample(xi=xi, zetas=zetas, k=k)


def apply_estimate(oracle, agent: int, x: np.ndarray, y: np.ndarray,
                   cfg: EstimatorConfig, sample: EstimatorSample) -> np.ndarray:
    """Evaluate the truncated-Neumann estimate at (x, y) on a fixed sample.

    Standard mode (index k realized):
        grad_x f(xi) - (K/L_g) Hxy(zeta0) prod_{j=1..k}(I - Hyy(zeta_j)/L_g)
                       grad_y f(xi)
    with the product applied right-to-left as k Hessian-vector products.
    Derandomized mode averages over all k, i.e. applies
    (1/L_g) sum_{k=0}^{K-1} prod^k to grad_y f.
    """
    gx = oracle.grad_fx(agent, x, y, sample.xi)
    gy = oracle.grad_fy(agent, x, y, sample.xi)
    inv_l = 1.0 / cfg.L_g
    if sample.k is None:
        running = gy.copy()
        acc = gy.copy()
        for j in range(1, cfg.K):
            running = running - inv_l * oracle.hvp_gyy(agent, x, y, sample.zetas[j], running)
            acc += running
        corr = oracle.hvp_gxy(agent, x, y, sample.zetas[0], inv_l * acc)
        return gx - corr
    running = gy
    for j in range(1, sample.k + 1):
        running = running - inv_l * oracle.hvp_gyy(agent, x, y, sample.zetas[j], running)
    corr = oracle.hvp_gxy(agent, x, y, sample.zetas[0], (cfg.K * inv_l) * running)
    return gx - corr


def neumann_estimate(oracle, agent: int, x: np.ndarray, y: np.ndarray,
                     cfg: EstimatorConfig, s: RngStream) -> np.ndarray:
    """Draw a fresh sample tuple and evaluate the estimate at (x, y)."""
    return apply_estimate(oracle, agent, x, y, cfg,
                          draw_estimate_sample(oracle, agent, cfg, s))


def surrogate_grad(oracle, agent: int, x: np.ndarray, y: np.ndarray,
                   tol: float = 1e-10) -> np.ndarray:
    """Exact surrogate direction at (x, y) via a matrix-free linear solve."""
    gy = oracle.grad_fy(agent, x, y, None)
    gx = oracle.grad_fx(agent, x, y, None)
    if float(np.linalg.norm(gy)) == 0.0:
        return gx
    w = cg_solve(lambda v: oracle.hvp_gyy(agent, x, y, None, v), gy, tol=tol)
    return gx - oracle.hvp_gxy(agent, x, y, None, w)


def lemma1_constants(pc: ProblemConstants) -> LipschitzBundle:
    """Smoothness constants of the surrogate, implicit objective, and
    minimizer map implied by the problem constants."""
    mu = pc.mu_g
    l_f = pc.L_fx + pc.L_fy * pc.C_gxy / mu + pc.C_fy * (
        pc.L_gxy / mu + pc.L_gyy * pc.C_gxy / mu**2
    )
    l_l = l_f + l_f * pc.C_gxy / mu
    l_y = pc.C_gxy / mu
    return LipschitzBundle(L_f=l_f, L_l=l_l, L_y=l_y)


def lemma2_constant(pc: ProblemConstants, K: int) -> float:
    """Second-moment smoothness constant L_K of the K-truncated estimator."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    mu, lg = pc.mu_g, pc.L_g
    window = 2.0 * mu * lg - mu * mu
    val = 2.0 * pc.L_fx**2
    val += 6.0 * pc.C_gxy**2 * pc.L_fy**2 * K / window
    val += 6.0 * pc.C_fy**2 * pc.L_gxy**2 * K / window
    cubic_weight = pc.C_gxy**2 * pc.C_fy**2 * pc.L_gyy**2
    if lg == mu:
        if cubic_weight > 0:
            # The K^3 term's denominator vanishes at L_g == mu_g, but so does
            # the Neumann remainder that produced it; drop it and flag.
            warnings.warn(
                "L_g == mu_g: K^3 variance term omitted (degenerate spectrum)",
                RuntimeWarning,
            )
        return val
    val += 6.0 * cubic_weight * K**3 / ((lg - mu) ** 2 * window)
    return val


def lemma3_bias_bound(pc: ProblemConstants, K: int) -> float:
    """Exponentially decaying bound on the estimator's bias norm."""
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    return (pc.C_gxy * pc.C_fy / pc.mu_g) * (1.0 - pc.mu_g / pc.L_g) ** K


def lipschitz_bundle(pc: ProblemConstants, K: int) -> LipschitzBundle:
    """All four derived constants for a fixed Neumann budget."""
    base = lemma1_constants(pc)
    return LipschitzBundle(L_f=base.L_f, L_l=base.L_l, L_y=base.L_y,
                           L_K=lemma2_constant(pc, K))


def K_for_horizon(pc: ProblemConstants, T: int) -> int:
    """Neumann budget making the squared bias O(1/T): ceil of
    (L_g/mu_g) * ln(C_gxy * C_fy * T / mu_g), clamped to >= 1."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    arg = pc.C_gxy * pc.C_fy * T / pc.mu_g
    if arg <= 1.0:
        return 1
    return max(1, math.ceil((pc.L_g / pc.mu_g) * math.log(arg)))
