"""Kernels over (features, prediction) pairs.

Every kernel works on *encodings*: ``encode(x, p)`` turns a point into the
numbers the kernel needs, and ``cross(e, E)`` evaluates the kernel between one
encoded point and a stack of encoded points.  The online predictors keep the
history as a stack of encodings, so a round costs one vectorised pass over the
history instead of ``t`` Python-level kernel calls.

``bind(x, E, w)`` returns a closure ``p -> (sum_i w_i k((x, p), z_i), k((x, p), (x, p)))``.
Kernels with structure (constant, grid, Sobolev, finite families, products with
a prediction-free factor) override it so that each probe during bisection is
cheap.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

_E = math.e
_SOBOLEV_DENOM = 2.0 * (_E - 1.0 / _E)
#: sup of the unit-interval Sobolev kernel's diagonal, attained at p = 0 and p = 1
SOBOLEV_DIAG_MAX = math.cosh(1.0) / math.sinh(1.0)


class KernelDomainError(ValueError):
    """Raised when a kernel receives an argument outside its domain."""


class Point(NamedTuple):
    features: Any
    prediction: Any


Binding = Callable[[Any], "tuple[float, float]"]


class RowStore:
    """Growable stack of equal-length float rows."""

    __slots__ = ("_buf", "n")

    def __init__(self):
        self._buf = None
        self.n = 0

    def append(self, row) -> None:
        row = np.asarray(row, dtype=float).ravel()
        if self._buf is None:
            self._buf = np.empty((16, row.size))
        elif self.n == self._buf.shape[0]:
            grown = np.empty((2 * self._buf.shape[0], self._buf.shape[1]))
            grown[: self.n] = self._buf[: self.n]
            self._buf = grown
        self._buf[self.n] = row
        self.n += 1

    def view(self) -> np.ndarray:
        if self._buf is None:
            return np.empty((0, 0))
        return self._buf[: self.n]


class TupleStore:
    """Store for composite kernels: one child store per component."""

    __slots__ = ("children", "n")

    def __init__(self, children):
        self.children = tuple(children)
        self.n = 0

    def append(self, enc) -> None:
        for store, part in zip(self.children, enc):
            store.append(part)
        self.n += 1

    def view(self):
        return CompositeView((store.view() for store in self.children), self.n)


class CompositeView(tuple):
    """Per-component views that also know how many rows they hold."""

    def __new__(cls, parts, rows: int):
        view = super().__new__(cls, parts)
        view.rows = int(rows)
        return view


def view_rows(E) -> int:
    """Number of stored encodings in a store view."""
    if isinstance(E, CompositeView):
        return E.rows
    if isinstance(E, tuple):
        return view_rows(E[0]) if E else 0
    return len(E)


class Kernel:
    """Base class.  Subclasses implement ``encode`` and ``cross``."""

    continuous_in_p: bool = True
    uses_p: bool = True
    diag_bound: float | None = None
    cost_hint: float = 1.0

    def encode(self, x, p):
        raise NotImplementedError

    def cross(self, e, E) -> np.ndarray:
        raise NotImplementedError

    def new_store(self):
        return RowStore()

    def single(self, e):
        """Stack a single encoding so it can be passed as ``E``."""
        return np.asarray(e, dtype=float).reshape(1, -1)

    def __call__(self, z, z2) -> float:
        e2 = self.encode(*z2)
        return float(self.cross(self.encode(*z), self.single(e2))[0])

    def diag(self, x, p) -> float:
        e = self.encode(x, p)
        return float(self.cross(e, self.single(e))[0])

    def bind(self, x, E, w) -> Binding:
        if not self.uses_p:
            e = self.encode(x, None)
            value = float(self.cross(e, E) @ w)
            d = float(self.cross(e, self.single(e))[0])
            return lambda p: (value, d)

        def evaluate(p):
            e = self.encode(x, p)
            return float(self.cross(e, E) @ w), float(self.cross(e, self.single(e))[0])

        return evaluate

    def constant_norm(self) -> float | None:
        """RKHS norm of the constant function 1, when it is known to lie in the space."""
        return None

    def describe(self) -> str:
        return f"({type(self).__name__})"

    def __repr__(self) -> str:
        return self.describe()


def _pick(on: str, x, p):
    return p if on == "p" else x


def _check_on(on: str) -> str:
    if on not in ("x", "p"):
        raise ValueError(f"'on' must be 'x' or 'p', got {on!r}")
    return on


# ---------------------------------------------------------------------------
# scalar catalog


class ConstantKernel(Kernel):
    uses_p = False

    def __init__(self, c: float = 1.0):
        if c < 0:
            raise KernelDomainError(f"constant kernel needs c >= 0, got {c}")
        self.c = float(c)
        self.diag_bound = self.c

    def encode(self, x, p):
        return np.empty(0)

    def cross(self, e, E):
        return np.full(len(E), self.c)

    def bind(self, x, E, w):
        value = self.c * float(np.sum(w))
        return lambda p: (value, self.c)

    def constant_norm(self):
        return 1.0 / math.sqrt(self.c) if self.c > 0 else None

    def describe(self):
        return f"(const {self.c!r})"


def _sobolev_values(a, b):
    return (np.exp(a) + np.exp(-a)) * (np.exp(1.0 - b) + np.exp(b - 1.0)) / _SOBOLEV_DENOM


def sobolev_unit_kernel(p: float, p2: float) -> float:
    """Reproducing kernel of W^{1,2}([0, 1]); values lie in (0, 3)."""
    for v in (p, p2):
        if not 0.0 <= v <= 1.0:
            raise KernelDomainError(f"Sobolev kernel argument {v} outside [0, 1]")
    a, b = min(p, p2), max(p, p2)
    return float(_sobolev_values(a, b))


class SobolevKernel(Kernel):
    """Unit-interval Sobolev kernel applied to the prediction, rescaled from [lo, hi]."""

    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if not hi > lo:
            raise ValueError("need hi > lo")
        self.lo, self.hi = float(lo), float(hi)
        self.diag_bound = SOBOLEV_DIAG_MAX

    def _scaled(self, p) -> float:
        p = float(p)
        if not self.lo <= p <= self.hi:
            raise KernelDomainError(f"Sobolev kernel argument {p} outside [{self.lo}, {self.hi}]")
        if self.lo == 0.0 and self.hi == 1.0:
            return p
        return min(1.0, max(0.0, (p - self.lo) / (self.hi - self.lo)))

    def encode(self, x, p):
        return np.array([self._scaled(p)])

    def cross(self, e, E):
        col = E[:, 0]
        s = e[0]
        return _sobolev_values(np.minimum(s, col), np.maximum(s, col))

    def bind(self, x, E, w):
        col = E[:, 0]
        order = np.argsort(col, kind="stable")
        s_sorted = col[order]
        w_sorted = np.asarray(w, dtype=float)[order]
        left = w_sorted * (np.exp(s_sorted) + np.exp(-s_sorted))
        right = w_sorted * (np.exp(1.0 - s_sorted) + np.exp(s_sorted - 1.0))
        left_cum = np.concatenate(([0.0], np.cumsum(left)))
        right_cum = np.concatenate(([0.0], np.cumsum(right)))
        right_total = right_cum[-1]

        def evaluate(p):
            s = self._scaled(p)
            g = math.exp(s) + math.exp(-s)
            h = math.exp(1.0 - s) + math.exp(s - 1.0)
            idx = int(np.searchsorted(s_sorted, s, side="right"))
            value = (h * left_cum[idx] + g * (right_total - right_cum[idx])) / _SOBOLEV_DENOM
            return value, g * h / _SOBOLEV_DENOM

        return evaluate

    def constant_norm(self):
        return 1.0

    def describe(self):
        if self.lo == 0.0 and self.hi == 1.0:
            return "(sobolev)"
        return f"(sobolev {self.lo!r} {self.hi!r})"


def grid_bin(p: float, n_bins: int, lo: float = 0.0, hi: float = 1.0) -> int:
    """Index of the half-open bin [r/N, (r+1)/N) holding p; the top bin is closed."""
    if n_bins < 1:
        raise KernelDomainError("bin count must be >= 1")
    if not lo <= p <= hi:
        raise KernelDomainError(f"grid argument {p} outside [{lo}, {hi}]")
    s = (p - lo) / (hi - lo) if (lo, hi) != (0.0, 1.0) else p
    r = min(int(math.floor(s * n_bins)), n_bins - 1)
    # floor(s * N) can be off by one at bin edges; settle it against r / N directly
    if r + 1 < n_bins and s >= (r + 1) / n_bins:
        r += 1
    elif r > 0 and s < r / n_bins:
        r -= 1
    return r


def grid_bin_kernel(p: float, p2: float, n_bins: int) -> float:
    return 1.0 if grid_bin(p, n_bins) == grid_bin(p2, n_bins) else 0.0


class GridKernel(Kernel):
    """1 when both predictions fall into the same of ``n_bins`` equal bins over [lo, hi]."""

    continuous_in_p = False
    diag_bound = 1.0

    def __init__(self, n_bins: int, lo: float = 0.0, hi: float = 1.0):
        if int(n_bins) < 1:
            raise KernelDomainError("bin count must be >= 1")
        self.n_bins = int(n_bins)
        self.lo, self.hi = float(lo), float(hi)

    def bin_of(self, p) -> int:
        return grid_bin(float(p), self.n_bins, self.lo, self.hi)

    def encode(self, x, p):
        return np.array([float(self.bin_of(p))])

    def cross(self, e, E):
        return (E[:, 0] == e[0]).astype(float)

    def bind(self, x, E, w):
        sums = np.bincount(E[:, 0].astype(np.int64), weights=w, minlength=self.n_bins)

        def evaluate(p):
            return float(sums[self.bin_of(p)]), 1.0

        return evaluate

    def constant_norm(self):
        return math.sqrt(self.n_bins)

    def describe(self):
        if (self.lo, self.hi) == (0.0, 1.0):
            return f"(grid {self.n_bins})"
        return f"(grid {self.n_bins} {self.lo!r} {self.hi!r})"


class LinearKernel(Kernel):
    """1 + <p, p'> on the prediction (or on the features with ``on='x'``)."""

    def __init__(self, on: str = "p"):
        self.on = _check_on(on)
        self.uses_p = on == "p"
        self.diag_bound = 2.0 if on == "p" else None

    def encode(self, x, p):
        return np.atleast_1d(np.asarray(_pick(self.on, x, p), dtype=float)).ravel()

    def cross(self, e, E):
        return 1.0 + E @ e

    def bind(self, x, E, w):
        if not self.uses_p:
            return super().bind(x, E, w)
        total = float(np.sum(w))
        moment = E.T @ w

        def evaluate(p):
            e = self.encode(x, p)
            return total + float(e @ moment), 1.0 + float(e @ e)

        return evaluate

    def constant_norm(self):
        return 1.0

    def describe(self):
        return "(linear)" if self.on == "p" else "(linear-x)"


class PolynomialKernel(Kernel):
    """(1 + <x, x'>)^degree."""

    def __init__(self, degree: int, on: str = "x", bound: float | None = None):
        if int(degree) < 0:
            raise KernelDomainError("degree must be >= 0")
        self.degree = int(degree)
        self.on = _check_on(on)
        self.uses_p = on == "p"
        self.diag_bound = bound

    def encode(self, x, p):
        return np.atleast_1d(np.asarray(_pick(self.on, x, p), dtype=float)).ravel()

    def cross(self, e, E):
        return (1.0 + E @ e) ** self.degree

    def constant_norm(self):
        return 1.0

    def describe(self):
        return f"(poly {self.degree})" if self.on == "x" else f"(poly-p {self.degree})"


class LaplaceKernel(Kernel):
    """exp(-scale * ||a - a'||_1); on the prediction by default."""

    diag_bound = 1.0

    def __init__(self, on: str = "p", scale: float = 1.0):
        if scale <= 0:
            raise KernelDomainError("scale must be positive")
        self.on = _check_on(on)
        self.uses_p = on == "p"
        self.scale = float(scale)

    def encode(self, x, p):
        return np.atleast_1d(np.asarray(_pick(self.on, x, p), dtype=float)).ravel()

    def cross(self, e, E):
        return np.exp(-self.scale * np.abs(E - e).sum(axis=1))

    def describe(self):
        name = "laplace" if self.on == "p" else "laplace-x"
        return f"({name})" if self.scale == 1.0 else f"({name} {self.scale!r})"


class GaussianKernel(Kernel):
    """exp(-gamma * ||a - a'||^2); on the features by default."""

    diag_bound = 1.0

    def __init__(self, on: str = "x", gamma: float = 1.0):
        if gamma <= 0:
            raise KernelDomainError("gamma must be positive")
        self.on = _check_on(on)
        self.uses_p = on == "p"
        self.gamma = float(gamma)

    def encode(self, x, p):
        return np.atleast_1d(np.asarray(_pick(self.on, x, p), dtype=float)).ravel()

    def cross(self, e, E):
        return np.exp(-self.gamma * ((E - e) ** 2).sum(axis=1))

    def describe(self):
        name = "gaussian" if self.on == "x" else "gaussian-p"
        return f"({name})" if self.gamma == 1.0 else f"({name} {self.gamma!r})"


def _check_pm1(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all((arr == 1.0) | (arr == -1.0)):
        raise KernelDomainError("low-degree kernel needs entries in {-1, +1}")
    return arr


def _elementary_sum(z: np.ndarray, degree: int) -> np.ndarray:
    """sum_{k<=degree} e_k(z) row-wise, where e_k are elementary symmetric polynomials."""
    rows = z.shape[0]
    e = [np.ones(rows)] + [np.zeros(rows) for _ in range(degree)]
    for j in range(z.shape[1]):
        col = z[:, j]
        for k in range(min(j + 1, degree), 0, -1):
            e[k] = e[k] + col * e[k - 1]
    return np.sum(e, axis=0)


def low_degree_boolean_kernel(x, x2, d: int) -> float:
    """sum over |S| <= d of prod_{i in S} x_i x2_i, the empty set included."""
    a, b = _check_pm1(x), _check_pm1(x2)
    if a.size != b.size:
        raise KernelDomainError("length mismatch")
    if d < 0 or d > a.size:
        raise KernelDomainError(f"degree {d} outside [0, {a.size}]")
    return float(_elementary_sum((a * b)[None, :], d)[0])


class LowDegreeBooleanKernel(Kernel):
    uses_p = False

    def __init__(self, degree: int, n: int | None = None):
        self.degree = int(degree)
        self.n = n
        if n is not None:
            if self.degree > n:
                raise KernelDomainError(f"degree {degree} exceeds n = {n}")
            self.diag_bound = float(sum(math.comb(n, k) for k in range(self.degree + 1)))
        self.cost_hint = float((n or 1) * max(self.degree, 1))

    def encode(self, x, p):
        arr = _check_pm1(x)
        if self.degree > arr.size or (self.n is not None and arr.size != self.n):
            raise KernelDomainError("dimension or degree mismatch")
        return arr

    def cross(self, e, E):
        return _elementary_sum(E * e, self.degree)

    def constant_norm(self):
        return 1.0

    def describe(self):
        if self.n is None:
            return f"(lowdeg {self.degree})"
        return f"(lowdeg {self.degree} {self.n})"


class FiniteFamilyKernel(Kernel):
    """sum_i f_i(z) f_i(z') for a finite family of functions of (x, p)."""

    def __init__(
        self,
        family: Sequence[Callable[[Any, Any], float]],
        m: float,
        continuous_in_p: bool = False,
        uses_p: bool = True,
        name: str = "family",
    ):
        self.family = tuple(family)
        self.diag_bound = float(m)
        self.continuous_in_p = continuous_in_p
        self.uses_p = uses_p
        self.name = name
        self.cost_hint = float(max(len(self.family), 1))

    def encode(self, x, p):
        return np.array([float(f(x, p)) for f in self.family])

    def cross(self, e, E):
        if not self.family:
            return np.zeros(len(E))
        return E @ e

    def bind(self, x, E, w):
        if not self.family:
            return lambda p: (0.0, 0.0)
        totals = E.T @ w
        if not self.uses_p:
            e = self.encode(x, None)
            value, d = float(e @ totals), float(e @ e)
            return lambda p: (value, d)

        def evaluate(p):
            e = self.encode(x, p)
            return float(e @ totals), float(e @ e)

        return evaluate

    def describe(self):
        return f"({self.name} {len(self.family)})"


def finite_family_kernel(family, z, z2) -> float:
    return float(sum(f(*z) * f(*z2) for f in family))


# ---------------------------------------------------------------------------
# combinators


def _sum_or_none(values):
    return None if any(v is None for v in values) else float(sum(values))


def _prod_or_none(values):
    return None if any(v is None for v in values) else float(math.prod(values))


class SumKernel(Kernel):
    def __init__(self, kernels: Sequence[Kernel]):
        self.kernels = tuple(kernels)
        self.continuous_in_p = all(k.continuous_in_p for k in self.kernels)
        self.uses_p = any(k.uses_p for k in self.kernels)
        self.diag_bound = _sum_or_none([k.diag_bound for k in self.kernels]) if self.kernels else 0.0
        self.cost_hint = float(sum(k.cost_hint for k in self.kernels))

    def encode(self, x, p):
        return tuple(k.encode(x, p if k.uses_p else None) for k in self.kernels)

    def cross(self, e, E):
        total = np.zeros(view_rows(E))
        for k, ek, Ek in zip(self.kernels, e, E):
            total = total + k.cross(ek, Ek)
        return total

    def new_store(self):
        return TupleStore(k.new_store() for k in self.kernels)

    def single(self, e):
        return tuple(k.single(ek) for k, ek in zip(self.kernels, e))

    def __call__(self, z, z2):
        if not self.kernels:
            return 0.0
        return super().__call__(z, z2)

    def diag(self, x, p):
        return float(sum(k.diag(x, p) for k in self.kernels))

    def bind(self, x, E, w):
        binds = [k.bind(x, Ek, w) for k, Ek in zip(self.kernels, E)]

        def evaluate(p):
            value = 0.0
            d = 0.0
            for b in binds:
                v, dd = b(p)
                value += v
                d += dd
            return value, d

        return evaluate

    def constant_norm(self):
        norms = [n for n in (k.constant_norm() for k in self.kernels) if n is not None]
        return min(norms) if norms else None

    def describe(self):
        return "(sum " + " ".join(k.describe() for k in self.kernels) + ")"


class ProductKernel(Kernel):
    def __init__(self, kernels: Sequence[Kernel]):
        if not kernels:
            raise ValueError("product of no kernels")
        self.kernels = tuple(kernels)
        self.continuous_in_p = all(k.continuous_in_p for k in self.kernels)
        self.uses_p = any(k.uses_p for k in self.kernels)
        self.diag_bound = _prod_or_none([k.diag_bound for k in self.kernels])
        self.cost_hint = float(sum(k.cost_hint for k in self.kernels))

    def encode(self, x, p):
        return tuple(k.encode(x, p if k.uses_p else None) for k in self.kernels)

    def cross(self, e, E):
        total = np.ones(view_rows(E))
        for k, ek, Ek in zip(self.kernels, e, E):
            total = total * k.cross(ek, Ek)
        return total

    def new_store(self):
        return TupleStore(k.new_store() for k in self.kernels)

    def single(self, e):
        return tuple(k.single(ek) for k, ek in zip(self.kernels, e))

    def diag(self, x, p):
        return float(math.prod(k.diag(x, p) for k in self.kernels))

    def bind(self, x, E, w):
        fixed = [i for i, k in enumerate(self.kernels) if not k.uses_p]
        moving = [i for i, k in enumerate(self.kernels) if k.uses_p]
        weights = np.asarray(w, dtype=float)
        fixed_diag = 1.0
        for i in fixed:
            k = self.kernels[i]
            e = k.encode(x, None)
            weights = weights * k.cross(e, E[i])
            fixed_diag *= float(k.cross(e, k.single(e))[0])
        if not moving:
            value = float(np.sum(weights))
            return lambda p: (value, fixed_diag)
        if len(moving) == 1:
            i = moving[0]
            inner = self.kernels[i].bind(x, E[i], weights)

            def evaluate(p):
                v, d = inner(p)
                return v, d * fixed_diag

            return evaluate

        def evaluate_general(p):
            prod = weights
            d = fixed_diag
            for i in moving:
                k = self.kernels[i]
                e = k.encode(x, p)
                prod = prod * k.cross(e, E[i])
                d *= float(k.cross(e, k.single(e))[0])
            return float(np.sum(prod)), d

        return evaluate_general

    def constant_norm(self):
        norms = [k.constant_norm() for k in self.kernels]
        return None if any(n is None for n in norms) else float(math.prod(norms))

    def describe(self):
        return "(product " + " ".join(k.describe() for k in self.kernels) + ")"


class ScaledKernel(Kernel):
    def __init__(self, c: float, kernel: Kernel):
        if c < 0:
            raise KernelDomainError(f"scale factor must be >= 0, got {c}")
        self.c = float(c)
        self.kernel = kernel
        self.continuous_in_p = kernel.continuous_in_p
        self.uses_p = kernel.uses_p
        self.diag_bound = None if kernel.diag_bound is None else self.c * kernel.diag_bound
        self.cost_hint = kernel.cost_hint

    def encode(self, x, p):
        return self.kernel.encode(x, p)

    def cross(self, e, E):
        return self.c * self.kernel.cross(e, E)

    def new_store(self):
        return self.kernel.new_store()

    def single(self, e):
        return self.kernel.single(e)

    def bind(self, x, E, w):
        inner = self.kernel.bind(x, E, w)
        c = self.c

        def evaluate(p):
            v, d = inner(p)
            return c * v, c * d

        return evaluate

    def constant_norm(self):
        n = self.kernel.constant_norm()
        if n is None or self.c == 0:
            return None
        return n / math.sqrt(self.c)

    def describe(self):
        return f"(scale {self.c!r} {self.kernel.describe()})"


class ComposedKernel(Kernel):
    """k(phi(z), phi(z')) for a map phi from the new domain into the base kernel's domain.

    ``phi`` takes ``(x, p)`` and returns ``(x', p')``.  Continuity of phi in p is
    the caller's declaration; ``uses_p=False`` promises that phi ignores p.
    """

    def __init__(
        self,
        base: Kernel,
        phi: Callable[[Any, Any], tuple],
        phi_continuous: bool = True,
        uses_p: bool = True,
        name: str = "phi",
    ):
        self.base = base
        self.phi = phi
        self.continuous_in_p = base.continuous_in_p and phi_continuous
        self.uses_p = uses_p
        self.diag_bound = base.diag_bound
        self.cost_hint = base.cost_hint + 1.0
        self.name = name

    def encode(self, x, p):
        return self.base.encode(*self.phi(x, p))

    def cross(self, e, E):
        return self.base.cross(e, E)

    def new_store(self):
        return self.base.new_store()

    def single(self, e):
        return self.base.single(e)

    def constant_norm(self):
        return self.base.constant_norm()

    def describe(self):
        return f"(compose {self.name} {self.base.describe()})"


def combine(op: str, *kernels: Kernel, c: float | None = None, phi=None, **options) -> Kernel:
    """Build a kernel from others: ``sum``, ``product``, ``scale`` (needs c) or ``compose`` (needs phi)."""
    if op == "sum":
        return SumKernel(kernels)
    if op == "product":
        return ProductKernel(kernels)
    if op == "scale":
        if c is None or len(kernels) != 1:
            raise ValueError("scale takes one kernel and a factor c")
        return ScaledKernel(c, kernels[0])
    if op == "compose":
        if phi is None or len(kernels) != 1:
            raise ValueError("compose takes one kernel and a map phi")
        return ComposedKernel(kernels[0], phi, **options)
    raise ValueError(f"unknown combinator {op!r}")


def zero_kernel() -> Kernel:
    return SumKernel(())


# ---------------------------------------------------------------------------
# Gram matrices


class GramMatrix(NamedTuple):
    entries: np.ndarray
    points: tuple


def gram_matrix(kernel: Kernel, points: Sequence) -> GramMatrix:
    points = tuple(Point(*z) for z in points)
    store = kernel.new_store()
    encodings = [kernel.encode(*z) for z in points]
    for e in encodings:
        store.append(e)
    n = len(points)
    if n == 0:
        return GramMatrix(np.zeros((0, 0)), points)
    E = store.view()
    K = np.empty((n, n))
    for i, e in enumerate(encodings):
        K[i] = kernel.cross(e, E)
    return GramMatrix(K, points)


def psd_margin(K: np.ndarray, tol: float = 1e-8) -> float:
    """min eigenvalue + tol * (1 + trace); nonnegative means the matrix passes."""
    K = np.asarray(K, dtype=float)
    if K.size == 0:
        return 0.0
    sym = 0.5 * (K + K.T)
    return float(np.linalg.eigvalsh(sym)[0] + tol * (1.0 + np.trace(sym)))


def is_psd(K: np.ndarray, tol: float = 1e-8) -> bool:
    return psd_margin(K, tol) >= 0.0


def brute_force_low_degree(x, x2, d: int) -> float:
    """Subset enumeration; exponential, for tests and small inputs."""
    z = np.asarray(x, dtype=float) * np.asarray(x2, dtype=float)
    total = 0.0
    for k in range(d + 1):
        for subset in combinations(range(z.size), k):
            total += float(np.prod(z[list(subset)])) if subset else 1.0
    return total
