# ./tools/loop_tools.py
import logging
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from tools.errors import (
    DegreeNotDivisibleError,
    DimensionMismatchError,
    TopNotIdentityError,
    TruncationTooSmallError,
    ZeroElementError,
)
from tools.linalg_tools import commutator, freeze
from tools.markov_tools import split

logger = logging.getLogger(__name__)

ExponentWindow = Tuple[int, int]


class LoopElement:
    """
    Matrix Laurent polynomial sum_j X_j lambda^j with finite support.

    Coefficients are stored as a dictionary {exponent: N x N matrix}; exact
    zero matrices are pruned so the support is always the set of keys.
    Instances are immutable.
    """

    __slots__ = ("_coeffs", "_n")

    def __init__(self, coeffs: Optional[Mapping[int, np.ndarray]] = None, n: Optional[int] = None):
        cleaned: Dict[int, np.ndarray] = {}
        for j, c in (coeffs or {}).items():
            c = np.asarray(c, dtype=float)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise DimensionMismatchError(f"coefficient at lambda^{j} has shape {c.shape}")
            if n is None:
                n = c.shape[0]
            elif c.shape[0] != n:
                raise DimensionMismatchError(f"coefficient at lambda^{j} has size {c.shape[0]}, expected {n}")
            if np.any(c):
                cleaned[int(j)] = freeze(c)
        if n is None:
            raise DimensionMismatchError("the matrix size of an empty loop element must be given")
        self._coeffs = MappingProxyType(dict(sorted(cleaned.items())))
        self._n = int(n)

    @classmethod
    def zero(cls, n: int) -> "LoopElement":
        return cls({}, n)

    @classmethod
    def identity(cls, n: int, exponent: int = 0) -> "LoopElement":
        return cls({exponent: np.eye(n)}, n)

    @classmethod
    def monomial(cls, A, exponent: int) -> "LoopElement":
        return cls({exponent: A})

    @property
    def coeffs(self) -> Mapping[int, np.ndarray]:
        return self._coeffs

    @property
    def n(self) -> int:
        return self._n

    @property
    def support(self) -> List[int]:
        return list(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def coeff(self, j: int) -> np.ndarray:
        c = self._coeffs.get(j)
        return np.zeros((self._n, self._n)) if c is None else c

    def _check(self, other: "LoopElement"):
        if not isinstance(other, LoopElement):
            raise TypeError(f"expected a LoopElement, got {type(other).__name__}")
        if other.n != self._n:
            raise DimensionMismatchError(f"loop elements of sizes {self._n} and {other.n}")

    def __add__(self, other: "LoopElement") -> "LoopElement":
        self._check(other)
        out = dict(self._coeffs)
        for j, c in other.coeffs.items():
            out[j] = out[j] + c if j in out else c
        return LoopElement(out, self._n)

    def __neg__(self) -> "LoopElement":
        return LoopElement({j: -c for j, c in self._coeffs.items()}, self._n)

    def __sub__(self, other: "LoopElement") -> "LoopElement":
        return self + (-other)

    def __mul__(self, scalar: float) -> "LoopElement":
        return LoopElement({j: scalar * c for j, c in self._coeffs.items()}, self._n)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "LoopElement":
        return self * (1.0 / scalar)

    def shift(self, k: int) -> "LoopElement":
        """Multiply by lambda^k."""
        return LoopElement({j + k: c for j, c in self._coeffs.items()}, self._n)

    def truncate(self, lo: Optional[int] = None, hi: Optional[int] = None) -> "LoopElement":
        return LoopElement(
            {j: c for j, c in self._coeffs.items() if (lo is None or j >= lo) and (hi is None or j <= hi)},
            self._n,
        )

    def evaluate(self, lam: float) -> np.ndarray:
        out = np.zeros((self._n, self._n))
        for j, c in self._coeffs.items():
            out += lam**j * c
        return out

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(c * c) for c in self._coeffs.values())))

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(c))) for c in self._coeffs.values()), default=0.0)

    def __repr__(self) -> str:
        return f"LoopElement(n={self._n}, support={self.support})"


def loop_mul(X: LoopElement, Y: LoopElement) -> LoopElement:
    X._check(Y)
    out: Dict[int, np.ndarray] = {}
    for j, a in X.coeffs.items():
        for k, b in Y.coeffs.items():
            out[j + k] = out[j + k] + a @ b if j + k in out else a @ b
    return LoopElement(out, X.n)


def loop_bracket(X: LoopElement, Y: LoopElement) -> LoopElement:
    X._check(Y)
    out: Dict[int, np.ndarray] = {}
    for j, a in X.coeffs.items():
        for k, b in Y.coeffs.items():
            c = commutator(a, b)
            out[j + k] = out[j + k] + c if j + k in out else c
    return LoopElement(out, X.n)


def pairing(X: LoopElement, Y: LoopElement) -> float:
    """Residue pairing: coefficient of lambda^-1 in tr(X(lambda) Y(lambda))."""
    X._check(Y)
    total = 0.0
    for j, a in X.coeffs.items():
        b = Y.coeffs.get(-1 - j)
        if b is not None:
            total += float(np.sum(a * b.T))
    return total


def bracket_pairing(W: LoopElement, X: LoopElement, Y: LoopElement) -> float:
    """pairing(W, [X, Y]) using only the bracket coefficients the pairing reads."""
    W._check(X)
    X._check(Y)
    total = 0.0
    for j, w in W.coeffs.items():
        s = -1 - j
        for a, x in X.coeffs.items():
            y = Y.coeffs.get(s - a)
            if y is not None:
                total += float(np.sum(w * commutator(x, y).T))
    return total


def project_plus(X: LoopElement) -> LoopElement:
    out = {j: c for j, c in X.coeffs.items() if j >= 1}
    if 0 in X.coeffs:
        out[0] = split(X.coeffs[0]).m_part
    return LoopElement(out, X.n)


def project_minus(X: LoopElement) -> LoopElement:
    out = {j: c for j, c in X.coeffs.items() if j <= -1}
    if 0 in X.coeffs:
        out[0] = split(X.coeffs[0]).e_part
    return LoopElement(out, X.n)


def loop_r_map(X: LoopElement) -> LoopElement:
    return 0.5 * (project_plus(X) - project_minus(X))


def loop_r_bracket(X: LoopElement, Y: LoopElement) -> LoopElement:
    """[X, Y]_R = [R X, Y] + [X, R Y]."""
    return loop_bracket(loop_r_map(X), Y) + loop_bracket(X, loop_r_map(Y))


def degree(X: LoopElement) -> int:
    if X.is_zero():
        raise ZeroElementError("the zero loop element has no degree")
    return X.support[-1]


def valuation(X: LoopElement) -> int:
    if X.is_zero():
        raise ZeroElementError("the zero loop element has no valuation")
    return X.support[0]


def loop_power(X: LoopElement, n: int) -> LoopElement:
    if n < 0:
        raise ValueError(f"loop_power needs n >= 0, got {n}")
    out = LoopElement.identity(X.n)
    base = X
    # square-and-multiply; all factors are powers of X so the order is irrelevant
    while n:
        if n & 1:
            out = loop_mul(out, base)
        n >>= 1
        if n:
            base = loop_mul(base, base)
    return out


def _series_mul(a: List[np.ndarray], b: List[np.ndarray], order: int) -> List[np.ndarray]:
    out = [np.zeros_like(a[0]) for _ in range(order + 1)]
    for i, ai in enumerate(a[: order + 1]):
        for j, bj in enumerate(b[: order + 1 - i]):
            out[i + j] += ai @ bj
    return out


def _series_pow(a: List[np.ndarray], p: int, order: int) -> List[np.ndarray]:
    out = [np.eye(a[0].shape[0])] + [np.zeros_like(a[0]) for _ in range(order)]
    for _ in range(p):
        out = _series_mul(out, a, order)
    return out


def _series_inverse(a: List[np.ndarray], order: int) -> List[np.ndarray]:
    # a[0] = I
    inv = [np.eye(a[0].shape[0])]
    for j in range(1, order + 1):
        inv.append(-sum(a[i] @ inv[j - i] for i in range(1, j + 1)))
    return inv


def fractional_power_series(X: LoopElement, p: int, q: int, order: int, tol: float = 1e-12) -> LoopElement:
    """
    Formal power X^(p/q) normalized to top coefficient I.

    Writing X = lambda^d (I + T(t)) with t = lambda^-1, the root series
    S = sum_j S_j t^j with S_0 = I solves S^q = (I + T)^p through t^order:
    the t^j coefficient of S^q is q S_j plus terms built from S_0..S_(j-1).

    Args:
        X: element whose top coefficient is the identity
        p: integer exponent numerator
        q: positive exponent denominator
        order: number of terms kept below the top
        tol: max-abs tolerance on the top coefficient being I

    Returns:
        LoopElement supported on [d p / q - order, d p / q]
    """
    if q < 1:
        raise ValueError(f"q must be positive, got {q}")
    if order < 1:
        raise TruncationTooSmallError(f"truncation order must be at least 1, got {order}")
    d = degree(X)
    if np.max(np.abs(X.coeffs[d] - np.eye(X.n))) > tol:
        raise TopNotIdentityError(f"top coefficient at lambda^{d} is not the identity")
    if (d * p) % q:
        raise DegreeNotDivisibleError(f"degree {d} times {p} is not divisible by {q}")

    t = [np.eye(X.n)] + [X.coeff(d - j) for j in range(1, order + 1)]
    if p < 0:
        t = _series_inverse(t, order)
    w = _series_pow(t, abs(p), order)

    s = [np.eye(X.n)]
    for j in range(1, order + 1):
        partial = s + [np.zeros((X.n, X.n))] * (order + 1 - len(s))
        lower = _series_pow(partial, q, j)
        s.append((w[j] - lower[j]) / q)

    top = d * p // q
    return LoopElement({top - j: c for j, c in enumerate(s)}, X.n)


def trace_series(X: LoopElement) -> Dict[int, float]:
    return {j: float(np.trace(c)) for j, c in X.coeffs.items()}


def trace_invariants(
    X: LoopElement,
    m_max: int,
    window: Optional[ExponentWindow] = None,
) -> List[Tuple[int, int, float]]:
    """
    Lambda-coefficients of tr(X^m) for m = 1..m_max.

    Without a window every exponent of [m val(X), m deg(X)] is reported,
    zeros included, so the list layout depends only on the support of X.
    """
    if m_max < 1:
        raise ValueError(f"m_max must be at least 1, got {m_max}")
    if X.is_zero():
        return []
    lo, hi = valuation(X), degree(X)
    out: List[Tuple[int, int, float]] = []
    power = LoopElement.identity(X.n)
    for m in range(1, m_max + 1):
        power = loop_mul(power, X)
        traces = trace_series(power)
        a, b = window if window is not None else (m * lo, m * hi)
        out.extend((m, e, traces.get(e, 0.0)) for e in range(b, a - 1, -1))
    return out


def ad_invariance_defect(X: LoopElement, Y: LoopElement, W: LoopElement) -> float:
    return abs(pairing(X, loop_bracket(Y, W)) - pairing(loop_bracket(X, Y), W))


def in_plus_subalgebra(X: LoopElement, atol: float = 1e-12) -> bool:
    if any(j < 0 for j in X.support):
        return False
    return bool(np.all(np.abs(X.coeff(0).sum(axis=0)) <= atol * max(1.0, X.max_abs())))


def in_minus_subalgebra(X: LoopElement, atol: float = 1e-12) -> bool:
    if any(j > 0 for j in X.support):
        return False
    c = X.coeff(0)
    return bool(np.all(np.abs(c - np.diag(np.diag(c))) <= atol * max(1.0, X.max_abs())))


def random_loop_element(rng: np.random.Generator, n: int, exponents: Iterable[int], low: int = -5, high: int = 5) -> LoopElement:
    """Integer-entry element used for the polynomial-identity checks."""
    return LoopElement({j: rng.integers(low, high, endpoint=True, size=(n, n)).astype(float) for j in exponents}, n)
