"""Hyperparameter optimization on softmax (q=2) logistic regression.

Upper variable x in R^p holds per-feature log-regularization weights; the
lower variable y_i in R^{q*p} holds agent i's classifier weights, stored
class-major (all p feature weights of class 0, then class 1).

    g_i(x, y) = train cross-entropy + (1/(qp)) sum_{k,r} exp(x_r) y_{kr}^2
    f_i(x, y) = validation cross-entropy

Stochastic queries sample uniform minibatches; second-order queries are
analytic Hessian-vector products (softmax Hessian plus the diagonal
exp(x_r) regularizer), never materialized matrices. x is clamped to
[-30, 30] before any exp() and clamping is flagged via a warning plus a
counter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from decbilevel.numerics import LinearSolveError, RngStream, cg_solve, draw_uniform_ints
from decbilevel.problems.base import ExactOracle, ProblemConstants
from decbilevel.problems.datasets import Dataset, shard_dataset

_Q = 2
_X_CLAMP = 30.0


@dataclass(frozen=True)
class _Batch:
    idx: np.ndarray


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


def _ce_value(w: np.ndarray, feats: np.ndarray, labels: np.ndarray) -> float:
    z = feats @ w.T
    z = z - np.max(z, axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=1))
    return float(np.mean(lse - z[np.arange(len(labels)), labels]))


def _ce_grad(w: np.ndarray, feats: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # Row k of the result is the class-k weight gradient: mean (s_k - [k==b]) a.
    probs = _softmax(feats @ w.T)
    probs[np.arange(len(labels)), labels] -= 1.0
    return probs.T @ feats / len(labels)


def _ce_hvp(w: np.ndarray, v: np.ndarray, feats: np.ndarray) -> np.ndarray:
    # (diag(s) - s s^T) applied per sample to V a, pushed back through a.
    probs = _softmax(feats @ w.T)
    t = feats @ v.T
    inner = probs * t - probs * np.sum(probs * t, axis=1, keepdims=True)
    return inner.T @ feats / feats.shape[0]


class LogisticHyperoptOracle(ExactOracle):
    def __init__(self, m: int, dataset: Dataset, batch_size: int | None,
                 s: RngStream, shuffle: bool = True):
        if batch_size is not None and batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if shuffle:
            order = s.lane_stream("shuffle").generator.permutation(dataset.n)
            dataset = Dataset(dataset.features[order], dataset.labels[order])
        self.shards = shard_dataset(dataset, m)
        for i, sh in enumerate(self.shards):
            if min(len(sh.y_train), len(sh.y_val), len(sh.y_test)) < 1:
                raise ValueError(f"agent {i} has an empty shard")
        self.m = m
        self.p = dataset.p
        self.d_up = self.p
        self.d_low = _Q * self.p
        self.batch_size = batch_size
        self.clamp_events = 0
        self._clamp_warned = False
        self._warm: dict[int, np.ndarray] = {}
        r = max(
            float(np.max(np.linalg.norm(sh.x_train, axis=1), initial=0.0))
            for sh in self.shards
        )
        r = max(r, max(
            float(np.max(np.linalg.norm(sh.x_val, axis=1), initial=0.0))
            for sh in self.shards
        ))
        r = max(r, 1e-12)
        qp = _Q * self.p
        w_hi = (2.0 / qp) * np.exp(_X_CLAMP)
        w_lo = (2.0 / qp) * np.exp(-_X_CLAMP)
        c_fy = np.sqrt(2.0) * r
        # Conservative analytic bounds over the clamp box and unit weight
        # radius; finite so the step-size/K utilities stay usable, loose by
        # design at the box edges.
        self.constants = ProblemConstants(
            mu_g=w_lo,
            L_g=r * r / 2.0 + w_hi,
            L_fx=0.0,
            L_fy=r * r / 2.0,
            C_fy=c_fy,
            C_gxy=w_hi,
            L_gxy=2.0 * w_hi,
            L_gyy=r ** 3 + w_hi,
            sigma_f=0.0 if batch_size is None else 2.0 * c_fy / np.sqrt(batch_size),
            sigma_g=0.0 if batch_size is None else 2.0 * c_fy / np.sqrt(batch_size),
        )

    # helpers ------------------------------------------------------------

    def _clamp_x(self, x: np.ndarray) -> np.ndarray:
        if np.any(np.abs(x) > _X_CLAMP):
            self.clamp_events += 1
            if not self._clamp_warned:
                warnings.warn(
                    f"log-regularization weights clamped to [-{_X_CLAMP}, {_X_CLAMP}] "
                    "to guard exp overflow",
                    RuntimeWarning,
                )
                self._clamp_warned = True
            return np.clip(x, -_X_CLAMP, _X_CLAMP)
        return x

    def _reg_weights(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self._clamp_x(x))

    def _w(self, y: np.ndarray) -> np.ndarray:
        return y.reshape(_Q, self.p)

    def _train(self, agent: int, sample):
        sh = self.shards[agent]
        if sample is None:
            return sh.x_train, sh.y_train
        return sh.x_train[sample.idx], sh.y_train[sample.idx]

    def _val(self, agent: int, sample):
        sh = self.shards[agent]
        if sample is None:
            return sh.x_val, sh.y_val
        return sh.x_val[sample.idx], sh.y_val[sample.idx]

    # stochastic queries -------------------------------------------------

    def draw_upper_sample(self, agent: int, s: RngStream):
        n = len(self.shards[agent].y_val)
        size = n if self.batch_size is None else self.batch_size
        return _Batch(idx=draw_uniform_ints(s, n, size))

    def draw_lower_sample(self, agent: int, s: RngStream):
        n = len(self.shards[agent].y_train)
        size = n if self.batch_size is None else self.batch_size
        return _Batch(idx=draw_uniform_ints(s, n, size))

    def grad_fx(self, agent, x, y, sample):
        return np.zeros(self.p)

    def grad_fy(self, agent, x, y, sample):
        feats, labels = self._val(agent, sample)
        return _ce_grad(self._w(y), feats, labels).ravel()

    def grad_gy(self, agent, x, y, sample):
        feats, labels = self._train(agent, sample)
        w = self._w(y)
        reg = (2.0 / (_Q * self.p)) * w * self._reg_weights(x)[None, :]
        return (_ce_grad(w, feats, labels) + reg).ravel()

    def hvp_gyy(self, agent, x, y, sample, vec):
        feats, _ = self._train(agent, sample)
        v = self._w(vec)
        reg = (2.0 / (_Q * self.p)) * v * self._reg_weights(x)[None, :]
        return (_ce_hvp(self._w(y), v, feats) + reg).ravel()

    def hvp_gxy(self, agent, x, y, sample, vec):
        # Only the regularizer couples x and y, so this is data-independent:
        # result_r = (2/(qp)) exp(x_r) sum_k y_{kr} v_{kr}.
        w = self._w(y)
        v = self._w(vec)
        return (2.0 / (_Q * self.p)) * self._reg_weights(x) * np.sum(w * v, axis=0)

    # objective values ---------------------------------------------------

    def f_value(self, agent, x, y) -> float:
        sh = self.shards[agent]
        return _ce_value(self._w(y), sh.x_val, sh.y_val)

    def g_value(self, agent, x, y) -> float:
        sh = self.shards[agent]
        w = self._w(y)
        reg = float(np.sum(self._reg_weights(x)[None, :] * w * w)) / (_Q * self.p)
        return _ce_value(w, sh.x_train, sh.y_train) + reg

    def test_accuracy(self, agent, y) -> float:
        sh = self.shards[agent]
        pred = np.argmax(sh.x_test @ self._w(y).T, axis=1)
        return float(np.mean(pred == sh.y_test))

    # exact interface ----------------------------------------------------

    def _local_smoothness(self, agent: int, x: np.ndarray) -> float:
        feats = self.shards[agent].x_train
        ce_l = 0.5 * float(np.mean(np.sum(feats * feats, axis=1)))
        return ce_l + (2.0 / (_Q * self.p)) * float(np.max(self._reg_weights(x)))

    def y_star(self, agent, x, tol: float = 1e-10, max_iter: int = 10**6):
        """Full-batch gradient descent with step 1/L to grad norm <= tol.

        Warm-started from the last solution returned for this agent.
        """
        y = self._warm.get(agent)
        y = np.zeros(self.d_low) if y is None else y.copy()
        step = 1.0 / self._local_smoothness(agent, x)
        for _ in range(max_iter):
            grad = self.grad_gy(agent, x, y, None)
            if float(np.linalg.norm(grad)) <= tol:
                self._warm[agent] = y.copy()
                return y
            y = y - step * grad
        achieved = float(np.linalg.norm(self.grad_gy(agent, x, y, None)))
        raise LinearSolveError(
            f"inner solve hit {max_iter} iterations (grad norm {achieved:.3e} > {tol})"
        )

    def hypergrad_exact(self, agent, x):
        ys = self.y_star(agent, x)
        gy_f = self.grad_fy(agent, x, ys, None)
        if float(np.linalg.norm(gy_f)) == 0.0:
            return np.zeros(self.p)
        w = cg_solve(lambda v: self.hvp_gyy(agent, x, ys, None, v), gy_f, tol=1e-10)
        return -self.hvp_gxy(agent, x, ys, None, w)

    def upper_value(self, agent, x) -> float:
        return self.f_value(agent, x, self.y_star(agent, x))

    def global_min(self):
        raise NotImplementedError("no closed-form minimizer for the logistic problem")


def logistic_hyperopt_problem(m: int, dataset: Dataset, batch_size: int | None,
                              s: RngStream, shuffle: bool = True) -> LogisticHyperoptOracle:
    """Shard the dataset over m agents and build the hyperopt oracle.

    batch_size=None means full-batch (noiseless) queries.
    """
    return LogisticHyperoptOracle(m, dataset, batch_size, s, shuffle=shuffle)
