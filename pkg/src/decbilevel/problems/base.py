"""Oracle interfaces shared by all bilevel problem instances.

Each agent i owns an upper objective f_i(x, y) and a strongly convex lower
objective g_i(x, y). Stochastic queries take an explicit sample object so a
momentum update can evaluate the SAME realized sample at two different
points; sample=None means the deterministic (full/noiseless) quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from decbilevel.numerics import RngStream


@dataclass(frozen=True)
class ProblemConstants:
    """Smoothness/convexity/noise constants of a problem instance.

    mu_g, L_g: strong convexity and gradient smoothness of g_i in y.
    L_fx, L_fy: Lipschitz constants of grad_x f and grad_y f.
    C_fy: bound on ||grad_y f||.
    C_gxy: bound on the cross second derivative of g.
    L_gxy, L_gyy: Lipschitz constants of the two second derivatives of g.
    sigma_f, sigma_g: gradient-noise levels of the stochastic queries.
    """

    mu_g: float
    L_g: float
    L_fx: float
    L_fy: float
    C_fy: float
    C_gxy: float
    L_gxy: float
    L_gyy: float
    sigma_f: float = 0.0
    sigma_g: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.mu_g <= self.L_g):
            raise ValueError(f"need 0 < mu_g <= L_g, got mu_g={self.mu_g}, L_g={self.L_g}")
        for name in ("L_fx", "L_fy", "C_fy", "C_gxy", "L_gxy", "L_gyy", "sigma_f", "sigma_g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


class BilevelOracle:
    """Per-agent stochastic first/second-order query interface.

    Attributes: m (agents), d_up, d_low (dimensions), constants
    (ProblemConstants). All queries are deterministic functions of
    (agent, point, sample); sample=None means the full deterministic
    quantity.
    """

    m: int
    d_up: int
    d_low: int
    constants: ProblemConstants

    def draw_upper_sample(self, agent: int, s: RngStream):
        """One sample xi ~ pi_f used by grad_fx and grad_fy."""
        raise NotImplementedError

    def draw_lower_sample(self, agent: int, s: RngStream):
        """One sample zeta ~ pi_g used by grad_gy and the Hessian queries."""
        raise NotImplementedError

    def grad_fx(self, agent: int, x: np.ndarray, y: np.ndarray, sample) -> np.ndarray:
        raise NotImplementedError

    def grad_fy(self, agent: int, x: np.ndarray, y: np.ndarray, sample) -> np.ndarray:
        raise NotImplementedError

    def grad_gy(self, agent: int, x: np.ndarray, y: np.ndarray, sample) -> np.ndarray:
        raise NotImplementedError

    def hvp_gxy(self, agent: int, x: np.ndarray, y: np.ndarray, sample,
                vec: np.ndarray) -> np.ndarray:
        """Cross second derivative of g applied to vec in R^{d_low} -> R^{d_up}."""
        raise NotImplementedError

    def hvp_gyy(self, agent: int, x: np.ndarray, y: np.ndarray, sample,
                vec: np.ndarray) -> np.ndarray:
        """Lower Hessian of g applied to vec in R^{d_low} -> R^{d_low}."""
        raise NotImplementedError


class ExactOracle(BilevelOracle):
    """Extension adding ground-truth access for validation and metrics."""

    def y_star(self, agent: int, x: np.ndarray) -> np.ndarray:
        """Unique minimizer of g_agent(x, .)."""
        raise NotImplementedError

    def hypergrad_exact(self, agent: int, x: np.ndarray) -> np.ndarray:
        """Implicit gradient of l_agent(x) = f_agent(x, y_star(x))."""
        raise NotImplementedError

    def upper_value(self, agent: int, x: np.ndarray) -> float:
        """l_agent(x) = f_agent(x, y_star(x))."""
        raise NotImplementedError

    def global_min(self) -> np.ndarray:
        """Minimizer of the network-average upper objective, where available."""
        raise NotImplementedError
