"""Vector-valued Any Kernel predictor over a box of outcomes.

    S_t(p) = sum_{i<t} K((x_t, p), (x_i, p_i)) (y_i - p_i)

Each round looks for p in the box with sup_y (y - p)^T S_t(p) <= eps_t.  The
box makes the sup a closed form and the projection a clamp.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .binary import _Weights, make_rng
from .kernels import Kernel, KernelDomainError, RowStore
from .transcript import PredictionDistribution, ProtocolError, Round, Transcript


class OutcomeBox:
    """Axis-aligned box lower <= y <= upper."""

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        if lower.shape != upper.shape or not np.all(lower < upper):
            raise ValueError("box needs lower < upper componentwise")
        self.lower = lower
        self.upper = upper

    def __repr__(self):
        return f"OutcomeBox({self.lower.tolist()}, {self.upper.tolist()})"

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def clamp(self, p) -> np.ndarray:
        return np.minimum(np.maximum(p, self.lower), self.upper)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def vertices(self) -> np.ndarray:
        d = self.dim
        corners = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
        return np.where(corners == 1, self.upper, self.lower)


def vi_residual(p, s, box: OutcomeBox) -> float:
    """sup over y in the box of (y - p)^T s, by coordinatewise maximization."""
    p = np.asarray(p, dtype=float)
    s = np.asarray(s, dtype=float)
    return float(np.sum(np.maximum((box.upper - p) * s, (box.lower - p) * s)))


# ---------------------------------------------------------------------------
# matrix-valued kernels


class MatrixKernel:
    """K((x, p), (x', p')) is a d x d matrix with K(z, z') = K(z', z)^T, block PSD."""

    dim: int
    uses_p: bool = True
    op_norm_bound: float | None = None

    def evaluate(self, z, z2) -> np.ndarray:
        raise NotImplementedError

    def new_state(self) -> "MatrixHistory":
        raise NotImplementedError

    def describe(self) -> str:
        return f"({type(self).__name__})"


class MatrixHistory:
    def append(self, x, p, r) -> None:
        raise NotImplementedError

    def apply(self, x, p) -> np.ndarray:
        """sum_i K((x, p), z_i) r_i."""
        raise NotImplementedError


class ScalarMatrixKernel(MatrixKernel):
    """k(z, z') A for a scalar kernel k and a fixed PSD matrix A."""

    def __init__(self, kernel: Kernel, matrix):
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        if A.shape[0] != A.shape[1] or not np.array_equal(A, A.T):
            raise KernelDomainError("matrix factor must be square and symmetric")
        if np.linalg.eigvalsh(A)[0] < -1e-12 * (1 + np.trace(A)):
            raise KernelDomainError("matrix factor must be PSD")
        self.kernel = kernel
        self.matrix = A
        self.dim = A.shape[0]
        self.uses_p = kernel.uses_p
        op = float(np.linalg.eigvalsh(A)[-1])
        self.op_norm_bound = None if kernel.diag_bound is None else kernel.diag_bound * op

    def evaluate(self, z, z2):
        return self.kernel(z, z2) * self.matrix

    def new_state(self):
        return _ScalarMatrixHistory(self)

    def describe(self):
        return f"(matrix {self.kernel.describe()} {self.matrix.tolist()})"


class _ScalarMatrixHistory(MatrixHistory):
    def __init__(self, mk: ScalarMatrixKernel):
        self.mk = mk
        self.store = mk.kernel.new_store()
        self.residuals = RowStore()

    def append(self, x, p, r):
        k = self.mk.kernel
        self.store.append(k.encode(x, p if k.uses_p else None))
        self.residuals.append(r)

    def apply(self, x, p):
        if self.residuals.n == 0:
            return np.zeros(self.mk.dim)
        k = self.mk.kernel
        kv = k.cross(k.encode(x, p if k.uses_p else None), self.store.view())
        return self.mk.matrix @ (self.residuals.view().T @ kv)


class FiniteVectorFamilyKernel(MatrixKernel):
    """sum_j c_j(z) c_j(z')^T for d-vector-valued functions c_j of (x, p)."""

    def __init__(self, family: Sequence[Callable], dim: int, m: float, uses_p: bool = True):
        self.family = tuple(family)
        self.dim = int(dim)
        self.uses_p = uses_p
        self.op_norm_bound = float(m)

    def columns(self, x, p) -> np.ndarray:
        """d x n matrix whose columns are c_j(x, p)."""
        if not self.family:
            return np.zeros((self.dim, 0))
        return np.column_stack([np.asarray(c(x, p), dtype=float).reshape(self.dim) for c in self.family])

    def evaluate(self, z, z2):
        return self.columns(*z) @ self.columns(*z2).T

    def new_state(self):
        return _FamilyHistory(self)

    def describe(self):
        return f"(vector-family {len(self.family)})"


class _FamilyHistory(MatrixHistory):
    def __init__(self, mk: FiniteVectorFamilyKernel):
        self.mk = mk
        self.totals = np.zeros(len(mk.family))

    def append(self, x, p, r):
        self.totals = self.totals + self.mk.columns(x, p).T @ np.asarray(r, dtype=float)

    def apply(self, x, p):
        return self.mk.columns(x, p) @ self.totals


class MatrixSumKernel(MatrixKernel):
    def __init__(self, kernels: Sequence[MatrixKernel]):
        if not kernels:
            raise ValueError("sum of no matrix kernels")
        dims = {k.dim for k in kernels}
        if len(dims) != 1:
            raise KernelDomainError("matrix kernels must share a dimension")
        self.kernels = tuple(kernels)
        self.dim = dims.pop()
        self.uses_p = any(k.uses_p for k in kernels)
        bounds = [k.op_norm_bound for k in kernels]
        self.op_norm_bound = None if any(b is None for b in bounds) else float(sum(bounds))

    def evaluate(self, z, z2):
        return sum(k.evaluate(z, z2) for k in self.kernels)

    def new_state(self):
        return _SumHistory([k.new_state() for k in self.kernels])

    def describe(self):
        return "(matrix-sum " + " ".join(k.describe() for k in self.kernels) + ")"


class _SumHistory(MatrixHistory):
    def __init__(self, parts):
        self.parts = parts

    def append(self, x, p, r):
        for part in self.parts:
            part.append(x, p, r)

    def apply(self, x, p):
        return sum(part.apply(x, p) for part in self.parts)


def scalar_matrix_kernel(kernel: Kernel, matrix) -> ScalarMatrixKernel:
    return ScalarMatrixKernel(kernel, matrix)


def finite_vector_family_kernel(family, dim: int, m: float, uses_p: bool = True):
    return FiniteVectorFamilyKernel(family, dim, m, uses_p)


def block_gram(mk: MatrixKernel, points) -> np.ndarray:
    """The nd x nd matrix of blocks K(z_a, z_b)."""
    n, d = len(points), mk.dim
    G = np.zeros((n * d, n * d))
    for a in range(n):
        for b in range(n):
            G[a * d:(a + 1) * d, b * d:(b + 1) * d] = mk.evaluate(points[a], points[b])
    return G


# ---------------------------------------------------------------------------
# predictor


class VectorPredictor:
    """Point predictions p_t in a box with (near) zero variational-inequality residual."""

    mode = "vector"

    def __init__(self, kernel: MatrixKernel, box: OutcomeBox, seed=0, max_iter: int = 500):
        if kernel.dim != box.dim:
            raise KernelDomainError("kernel and box dimensions differ")
        self.kernel = kernel
        self.box = box
        self.max_iter = int(max_iter)
        self.rng = make_rng(seed)
        self.history = kernel.new_state()
        self.max_op_norm = 0.0
        self._rounds = _Weights()
        self.transcript = Transcript(seed=seed if isinstance(seed, int) else None,
                                     kernel=kernel.describe(), mode=self.mode)
        self.transcript.meta.update(lower=box.lower.tolist(), upper=box.upper.tolist())

    @property
    def t(self) -> int:
        return self._rounds.n + 1

    def epsilon(self) -> float:
        if self.max_op_norm <= 0.0:
            return math.inf
        return 1.0 / (10.0 * self.t ** 3 * self.max_op_norm)

    def s_vec_function(self, x, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.box.dim,):
            raise KernelDomainError(f"prediction must have shape ({self.box.dim},)")
        return np.asarray(self.history.apply(x, p), dtype=float)

    def _note_diag(self, x, p):
        K = self.kernel.evaluate((x, p), (x, p))
        norm = float(np.linalg.eigvalsh(0.5 * (K + K.T))[-1])
        if norm > self.max_op_norm:
            self.max_op_norm = norm

    def predict(self, x) -> PredictionDistribution:
        box = self.box
        if not self.kernel.uses_p:
            s = self.s_vec_function(x, box.midpoint())
            p = np.where(s > 0, box.upper, np.where(s < 0, box.lower, box.midpoint()))
            return PredictionDistribution.point(p, s_q=s, branch="closed-form",
                                                residual=vi_residual(p, s, box),
                                                eps=self.epsilon(), evaluations=1)
        return self._solve(x)

    def _solve(self, x) -> PredictionDistribution:
        box = self.box
        evaluations = 0

        def residual_at(p):
            nonlocal evaluations
            evaluations += 1
            s = self.s_vec_function(x, p)
            return vi_residual(p, s, box), s

        p = box.midpoint()
        self._note_diag(x, p)
        eps = self.epsilon()
        best_r, best_s = residual_at(p)
        best_p = p
        if best_r <= eps:
            return self._point(best_p, best_s, best_r, eps, "projected", evaluations, False)
        s = best_s
        diam = box.diameter
        for k in range(1, self.max_iter + 1):
            norm = float(np.linalg.norm(s))
            if norm == 0.0:
                break
            p = box.clamp(p + diam / (norm * math.sqrt(k)) * s)
            r, s = residual_at(p)
            if r < best_r:
                best_p, best_r, best_s = p, r, s
            if r <= eps:
                break
            if k % 25 == 0 or k == self.max_iter:
                polished = self._polish(x, best_p)
                if polished is not None:
                    evaluations += polished[3]
                    if polished[1] < best_r:
                        best_p, best_r, best_s = polished[0], polished[1], polished[2]
                if best_r <= eps:
                    break
        self._note_diag(x, best_p)
        eps = self.epsilon()
        return self._point(best_p, best_s, best_r, eps, "projected", evaluations, best_r > eps)

    def _polish(self, x, start):
        """Root-find the natural map p - clamp(p + S(p)) from a good iterate."""
        box = self.box
        count = [0]

        def natural(p):
            count[0] += 1
            return p - box.clamp(p + self.s_vec_function(x, box.clamp(p)))

        try:
            sol = optimize.root(natural, start, method="hybr")
        except (ValueError, np.linalg.LinAlgError):
            return None
        p = box.clamp(sol.x)
        s = self.s_vec_function(x, p)
        return p, vi_residual(p, s, box), s, count[0] + 1

    def _point(self, p, s, r, eps, branch, evaluations, approximate):
        return PredictionDistribution.point(np.asarray(p, dtype=float), s_q=s, residual=r,
                                            eps=eps, branch=branch, evaluations=evaluations,
                                            approximate=approximate)

    def update(self, x, p, y) -> None:
        p = np.asarray(p, dtype=float)
        self.history.append(x, p, np.asarray(y, dtype=float) - p)
        self._rounds.append(0.0)
        self._note_diag(x, p)

    def step(self, x, nature) -> Round:
        t = self.t
        dist = self.predict(x)
        y = np.asarray(nature(x, dist), dtype=float)
        if y.shape != (self.box.dim,) or not self.box.contains(y):
            raise ProtocolError("vector outcome outside the box", t)
        p = dist.sample(self.rng.random())
        self.update(x, p, y)
        rnd = Round(t=t, x=x, dist=dist, p=p, y=y)
        self.transcript.append(rnd)
        return rnd


def vector_bound(transcript: Transcript, kernel: MatrixKernel, probe, weight) -> tuple:
    """(error, bound) for the representer probe f = K(., probe) weight.

    error = sum_t (y_t - p_t)^T f(z_t); bound = ||f|| sqrt(sum_t r_t^T K(z_t, z_t) r_t + 2 sum_t max(res_t, 0)).
    """
    weight = np.asarray(weight, dtype=float)
    norm_sq = float(weight @ kernel.evaluate(probe, probe) @ weight)
    error = 0.0
    energy = 0.0
    slack = 0.0
    for rnd in transcript:
        z = (rnd.x, np.asarray(rnd.p, dtype=float))
        r = np.asarray(rnd.y, dtype=float) - z[1]
        error += float(r @ kernel.evaluate(z, probe) @ weight)
        energy += float(r @ kernel.evaluate(z, z) @ r)
        slack += max(float(rnd.dist.residual), 0.0)
    return error, math.sqrt(max(norm_sq, 0.0)) * math.sqrt(energy + 2.0 * slack)
