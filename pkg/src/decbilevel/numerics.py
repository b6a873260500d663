"""Dense linear-algebra kernels and counter-based random streams.

Vectors and symmetric matrices are plain float64 numpy arrays; the helpers
here add the validation and the two pieces every other module leans on: a
hand-rolled cyclic-Jacobi symmetric eigensolver and an order-independent
RNG stream addressed by (seed, lane).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def as_vector(entries, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite float64 1-D array, optionally checking its length."""
    v = np.asarray(entries, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dim {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_sym_matrix(entries) -> np.ndarray:
    """Coerce to a finite float64 m×m array, requiring exact stored symmetry."""
    a = np.asarray(entries, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not exactly symmetric as stored")
    return a


def _splitmix64(z: int) -> int:
    # Finalizer of the SplitMix64 generator: a fixed 64-bit bijection with
    # good avalanche, used here as the documented key mixer.
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _fold_str(tag: str) -> int:
    # FNV-1a over UTF-8 bytes: stable across platforms and sessions,
    # unlike builtin hash().
    acc = 0xCBF29CE484222325
    for b in tag.encode("utf-8"):
        acc = ((acc ^ b) * 0x100000001B3) & _MASK64
    return acc


class RngStream:
    """Deterministic random stream addressed by a seed and a lane.

    The lane is any tuple of integers and short strings — typically
    (agent index, iteration index, purpose tag). The underlying generator
    is counter-based (Philox) keyed by a SplitMix64 hash chain over the
    seed and lane coordinates, so the draws for a given (seed, lane) are
    identical no matter in what order lanes are visited, which processes
    they are visited from, or which algorithm requests them.

    Each stream is owned by one logical task; draws advance only that
    stream. Mixer (fixed): key_acc starts at 0, then for each of
    [seed, *lane] the accumulator is updated as
    splitmix64(acc XOR coord), with string coordinates first folded to
    64 bits by FNV-1a over their UTF-8 bytes.
    """

    def __init__(self, seed: int, lane: tuple = ()):
        self.seed = int(seed)
        self.lane = tuple(lane)
        acc = _splitmix64(self.seed & _MASK64)
        for coord in self.lane:
            if isinstance(coord, str):
                part = _fold_str(coord)
            else:
                part = int(coord) & _MASK64
            acc = _splitmix64(acc ^ part)
        self._key = acc
        self._gen: np.random.Generator | None = None

    def lane_stream(self, *coords) -> "RngStream":
        """Child stream for an extended lane; does not advance this stream."""
        return RngStream(self.seed, self.lane + coords)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(np.random.Philox(key=self._key))
        return self._gen

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, lane={self.lane})"


def draw_gaussian(s: RngStream, dim: int, sigma: float) -> np.ndarray:
    """dim i.i.d. N(0, sigma^2) draws from stream s."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if dim < 0:
        raise ValueError(f"dim must be >= 0, got {dim}")
    if sigma == 0.0:
        # Degenerate noise: do not advance the counter so that sigma=0 runs
        # are bit-identical regardless of how many noise sites exist.
        return np.zeros(dim)
    return sigma * s.generator.standard_normal(dim)


def draw_uniform_int(s: RngStream, k_max: int) -> int:
    """One uniform draw from {0, ..., k_max-1}."""
    if k_max <= 0:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if k_max == 1:
        return 0
    return int(s.generator.integers(0, k_max))


def draw_uniform_ints(s: RngStream, k_max: int, n: int) -> np.ndarray:
    """Batch variant of draw_uniform_int: n draws from {0, ..., k_max-1}."""
    if k_max <= 0:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if k_max == 1:
        return np.zeros(n, dtype=np.int64)
    return s.generator.integers(0, k_max, size=n)


class LinearSolveError(RuntimeError):
    """Iterative linear solve failed to reach the requested residual."""


def cg_solve(apply_a, b: np.ndarray, tol: float = 1e-10, max_iter: int | None = None,
             x0: np.ndarray | None = None) -> np.ndarray:
    """Conjugate gradient for SPD operators given only matrix-vector products.

    Returns x with ||A x - b|| <= tol (absolute residual). apply_a must be
    symmetric positive definite on the relevant subspace.
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if max_iter is None:
        # CG terminates in n exact-arithmetic steps; slack for rounding.
        max_iter = 10 * n + 50
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply_a(x)
    if np.linalg.norm(r) <= tol:
        return x
    p = r.copy()
    rs = float(r @ r)
    for _ in range(max_iter):
        ap = apply_a(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            raise LinearSolveError(
                f"operator not positive definite along search direction (pAp={denom})"
            )
        step = rs / denom
        x = x + step * p
        r = r - step * ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol:
            # Recompute the true residual to guard against drift.
            true_res = float(np.linalg.norm(b - apply_a(x)))
            if true_res <= 10 * tol:
                return x
            r = b - apply_a(x)
            rs_new = float(r @ r)
            p = r.copy()
            rs = rs_new
            continue
        p = r + (rs_new / rs) * p
        rs = rs_new
    res = float(np.linalg.norm(b - apply_a(x)))
    raise LinearSolveError(
        f"conjugate gradient did not reach residual {tol} in {max_iter} iterations "
        f"(achieved {res:.3e})"
    )


def sym_eigvals(a) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, descending, via cyclic Jacobi.

    Accuracy target 1e-10 relative; intended for consensus matrices and
    other desk-scale (m <= 1e3) symmetric operators.
    """
    a = as_sym_matrix(a)
    m = a.shape[0]
    if m == 1:
        return a[0].copy()
    w = a.copy()
    scale = np.max(np.abs(w))
    if scale == 0.0:
        return np.zeros(m)
    # Sweep until the off-diagonal Frobenius norm is negligible relative to
    # the matrix scale; 50 sweeps is far beyond Jacobi's quadratic-phase
    # needs for m <= 1e3.
    tol = 1e-14 * scale
    for _ in range(50):
        off = np.sqrt(np.sum(np.tril(w, -1) ** 2) * 2.0)
        if off <= tol:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = w[p, q]
                if abs(apq) <= tol / (m * m):
                    continue
                # Classic stable rotation: theta = cot(2*phi), t = tan(phi).
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s_ = t * c
                rot_p = w[:, p].copy()
                rot_q = w[:, q].copy()
                w[:, p] = c * rot_p - s_ * rot_q
                w[:, q] = s_ * rot_p + c * rot_q
                rot_p = w[p, :].copy()
                rot_q = w[q, :].copy()
                w[p, :] = c * rot_p - s_ * rot_q
                w[q, :] = s_ * rot_p + c * rot_q
                w[p, q] = 0.0
                w[q, p] = 0.0
    vals = np.diag(w).copy()
    vals[::-1].sort()
    return vals
