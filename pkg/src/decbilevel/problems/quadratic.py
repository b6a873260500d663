"""Synthetic quadratic bilevel instances with closed-form ground truth.

Per agent i:
    g_i(x, y) = 1/2 y^T A_i y - y^T (B_i x + c_i)
    f_i(x, y) = 1/2 ||y - r_i||^2 + rho/2 ||x - s_i||^2
with A_i symmetric positive definite. The lower minimizer is
y_i*(x) = A_i^{-1}(B_i x + c_i) and every implicit quantity has a closed
form, which makes these instances the reference fixtures for estimator and
metric validation. Stochastic gradient queries add Gaussian noise of level
sigma_f / sigma_g; second-order queries are noiseless so estimator bias
isolates the Neumann truncation effect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from decbilevel.numerics import RngStream, draw_gaussian, sym_eigvals
from decbilevel.problems.base import ExactOracle, ProblemConstants


@dataclass(frozen=True)
class _UpperSample:
    eps_x: np.ndarray
    eps_y: np.ndarray


@dataclass(frozen=True)
class _LowerSample:
    eps: np.ndarray


class QuadraticBilevelOracle(ExactOracle):
    def __init__(self, a_list, b_list, c_list, r_list, s_list, rho: float,
                 sigma_f: float, sigma_g: float, c_fy_ref: float = 1.0):
        if rho < 0:
            raise ValueError(f"rho must be >= 0, got {rho}")
        self.m = len(a_list)
        if not (len(b_list) == len(c_list) == len(r_list) == len(s_list) == self.m):
            raise ValueError("per-agent data lists must share length m")
        self.a = [np.array(a, dtype=np.float64) for a in a_list]
        self.b = [np.array(b, dtype=np.float64) for b in b_list]
        self.c = [np.array(c, dtype=np.float64) for c in c_list]
        self.r = [np.array(r, dtype=np.float64) for r in r_list]
        self.s = [np.array(s, dtype=np.float64) for s in s_list]
        self.rho = float(rho)
        self.d_low = self.a[0].shape[0]
        self.d_up = self.s[0].shape[0]
        for i in range(self.m):
            if self.a[i].shape != (self.d_low, self.d_low):
                raise ValueError(f"A[{i}] has shape {self.a[i].shape}")
            if not np.allclose(self.a[i], self.a[i].T, atol=1e-12):
                raise ValueError(f"A[{i}] is not symmetric")
            if self.b[i].shape != (self.d_low, self.d_up):
                raise ValueError(f"B[{i}] has shape {self.b[i].shape}")
        eig_lo, eig_hi, b_norm = np.inf, 0.0, 0.0
        for i in range(self.m):
            vals = sym_eigvals((self.a[i] + self.a[i].T) / 2.0)
            eig_lo = min(eig_lo, vals[-1])
            eig_hi = max(eig_hi, vals[0])
            # ||B||_2^2 = largest eigenvalue of B^T B.
            btb = self.b[i].T @ self.b[i]
            b_norm = max(b_norm, np.sqrt(max(0.0, sym_eigvals((btb + btb.T) / 2)[0])))
        if eig_lo <= 0:
            raise ValueError(f"lower Hessians must be positive definite (min eig {eig_lo})")
        # C_fy: grad_y f = y - r_i is globally unbounded; report the standard
        # unit-tube bound sup_{||y-r||<=c_fy_ref} ||grad_y f|| = c_fy_ref.
        self.constants = ProblemConstants(
            mu_g=float(eig_lo), L_g=float(eig_hi),
            L_fx=self.rho, L_fy=1.0, C_fy=float(c_fy_ref),
            C_gxy=float(b_norm), L_gxy=0.0, L_gyy=0.0,
            sigma_f=float(sigma_f), sigma_g=float(sigma_g),
        )

    # stochastic queries -------------------------------------------------

    def draw_upper_sample(self, agent, s: RngStream):
        return _UpperSample(
            eps_x=draw_gaussian(s, self.d_up, self.constants.sigma_f),
            eps_y=draw_gaussian(s, self.d_low, self.constants.sigma_f),
        )

    def draw_lower_sample(self, agent, s: RngStream):
        return _LowerSample(eps=draw_gaussian(s, self.d_low, self.constants.sigma_g))

    def grad_fx(self, agent, x, y, sample):
        g = self.rho * (x - self.s[agent])
        return g if sample is None else g + sample.eps_x

    def grad_fy(self, agent, x, y, sample):
        g = y - self.r[agent]
        return g if sample is None else g + sample.eps_y

    def grad_gy(self, agent, x, y, sample):
        g = self.a[agent] @ y - self.b[agent] @ x - self.c[agent]
        return g if sample is None else g + sample.eps

    def hvp_gxy(self, agent, x, y, sample, vec):
        # d2g/dxdy = -B^T (noiseless by construction).
        return -(self.b[agent].T @ vec)

    def hvp_gyy(self, agent, x, y, sample, vec):
        return self.a[agent] @ vec

    # exact interface ----------------------------------------------------

    def y_star(self, agent, x):
        return np.linalg.solve(self.a[agent], self.b[agent] @ x + self.c[agent])

    def hypergrad_exact(self, agent, x):
        ys = self.y_star(agent, x)
        w = np.linalg.solve(self.a[agent], ys - self.r[agent])
        return self.rho * (x - self.s[agent]) + self.b[agent].T @ w

    def upper_value(self, agent, x):
        ys = self.y_star(agent, x)
        return 0.5 * float(np.sum((ys - self.r[agent]) ** 2)) + \
            0.5 * self.rho * float(np.sum((x - self.s[agent]) ** 2))

    def global_min(self):
        # Network-average l(x) is quadratic: solve its normal equations,
        # using B^T A^{-2} B = (A^{-1}B)^T (A^{-1}B) for A symmetric.
        h = self.rho * np.eye(self.d_up)
        rhs = self.rho * np.mean(self.s, axis=0)
        for i in range(self.m):
            ainv_b = np.linalg.solve(self.a[i], self.b[i])
            ainv_c = np.linalg.solve(self.a[i], self.c[i])
            h += (ainv_b.T @ ainv_b) / self.m
            rhs += ainv_b.T @ (self.r[i] - ainv_c) / self.m
        sol, *_ = np.linalg.lstsq(h, rhs, rcond=None)
        return sol


def quadratic_from_data(a_list, b_list, c_list, r_list, s_list, rho=0.0,
                        sigma_f=0.0, sigma_g=0.0, c_fy_ref=1.0) -> QuadraticBilevelOracle:
    """Build a quadratic instance from explicit per-agent matrices."""
    return QuadraticBilevelOracle(a_list, b_list, c_list, r_list, s_list,
                                  rho, sigma_f, sigma_g, c_fy_ref)


def quadratic_problem(m: int, d_up: int, d_low: int, conditioning: float,
                      sigma_f: float, sigma_g: float, s: RngStream,
                      rho: float = 0.5) -> QuadraticBilevelOracle:
    """Random heterogeneous quadratic instance.

    Each A_i gets an exact spectrum spread over [1, conditioning] under a
    random orthogonal basis, so mu_g = 1 and L_g = conditioning (for
    d_low >= 2). Each B_i is normalized to unit spectral norm, so
    C_gxy = 1. Offsets c_i, r_i, s_i are standard normal per agent.
    """
    if conditioning < 1:
        raise ValueError(f"conditioning must be >= 1, got {conditioning}")
    if min(m, d_up, d_low) < 1:
        raise ValueError("dimensions and agent count must be >= 1")
    gen = s.generator
    a_list, b_list, c_list, r_list, s_list = [], [], [], [], []
    if d_low == 1:
        spectrum = np.array([1.0])
    else:
        spectrum = np.linspace(1.0, conditioning, d_low)
    for _ in range(m):
        q, _ = np.linalg.qr(gen.standard_normal((d_low, d_low)))
        a = q @ np.diag(spectrum) @ q.T
        a = (a + a.T) / 2.0
        b = gen.standard_normal((d_low, d_up))
        b_spec = np.linalg.norm(b, 2)
        if b_spec > 0:
            b = b / b_spec
        a_list.append(a)
        b_list.append(b)
        c_list.append(gen.standard_normal(d_low))
        r_list.append(gen.standard_normal(d_low))
        s_list.append(gen.standard_normal(d_up))
    return QuadraticBilevelOracle(a_list, b_list, c_list, r_list, s_list,
                                  rho, sigma_f, sigma_g)
