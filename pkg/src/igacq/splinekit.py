"""Univariate spline tools: Bernstein and B-spline bases, knot insertion,
degree elevation, Bezier extraction and Greville abscissae.

Coefficient maps follow one convention throughout: a matrix ``M`` of shape
``(n_old, n_new)`` relates the bases by ``N_old = M @ N_new``, so control
variables transform as ``c_new = M.T @ c_old``. Rows of ``M.T`` are convex
combinations.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

KNOT_TOL = 1e-12


class SplineDomainError(ValueError):
    """Raised when a parameter lies outside the unit interval."""


class MultiplicityError(ValueError):
    """Raised when a knot would exceed multiplicity ``p + 1``."""


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector on [0, 1] stored as breakpoints and multiplicities."""

    degree: int
    breakpoints: tuple[float, ...]
    multiplicities: tuple[int, ...]

    def __post_init__(self):
        p = self.degree
        bp, m = self.breakpoints, self.multiplicities
        if p < 0:
            raise ValueError("degree must be nonnegative")
        if len(bp) < 2 or len(bp) != len(m):
            raise ValueError("need at least two breakpoints with one multiplicity each")
        if abs(bp[0]) > KNOT_TOL or abs(bp[-1] - 1.0) > KNOT_TOL:
            raise ValueError("knot vector must span [0, 1]")
        if any(b - a <= KNOT_TOL for a, b in zip(bp[:-1], bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if m[0] != p + 1 or m[-1] != p + 1:
            raise ValueError("knot vector must be open (end multiplicity p + 1)")
        if any(mi < 1 or mi > p + 1 for mi in m[1:-1]):
            raise MultiplicityError("interior multiplicities must lie in [1, p + 1]")

    @classmethod
    def from_knots(cls, knots, degree: int) -> "KnotVector":
        """Build from a full (repeated) knot sequence."""
        knots = np.asarray(knots, dtype=float)
        if np.any(np.diff(knots) < -KNOT_TOL):
            raise ValueError("knots must be nondecreasing")
        bps: list[float] = []
        mults: list[int] = []
        for u in knots:
            if bps and abs(u - bps[-1]) < KNOT_TOL:
                mults[-1] += 1
            else:
                bps.append(float(u))
                mults.append(1)
        return cls(degree, tuple(bps), tuple(mults))

    @classmethod
    def uniform(cls, degree: int, n_spans: int, multiplicity: int = 1) -> "KnotVector":
        """Open knot vector with ``n_spans`` equal spans."""
        bps = tuple(float(u) for u in np.linspace(0.0, 1.0, n_spans + 1))
        mults = (degree + 1,) + (multiplicity,) * (n_spans - 1) + (degree + 1,)
        return cls(degree, bps, mults)

    @property
    def knots(self) -> np.ndarray:
        return np.repeat(np.asarray(self.breakpoints), self.multiplicities)

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return int(sum(self.multiplicities)) - self.degree - 1

    @property
    def n_spans(self) -> int:
        return len(self.breakpoints) - 1

    def multiplicity_of(self, u: float) -> int:
        for b, m in zip(self.breakpoints, self.multiplicities):
            if abs(b - u) < KNOT_TOL:
                return m
        return 0

    def span_of(self, x: float) -> int:
        """Index of the nonempty span containing ``x`` (last span for x = 1)."""
        bp = np.asarray(self.breakpoints)
        k = int(np.searchsorted(bp, x, side="right")) - 1
        return min(max(k, 0), len(bp) - 2)


@dataclass(frozen=True)
class ExtractionOperator:
    """Relation ``N = matrix @ B`` between a B-spline basis and a finer basis.

    For Bezier extraction the columns are the per-span Bernstein polynomials,
    ordered span by span.
    """

    matrix: np.ndarray
    source: KnotVector
    target: KnotVector

    @property
    def n_segments(self) -> int:
        return self.target.n_spans

    @property
    def coefficient_map(self) -> np.ndarray:
        """Map from source control variables to target control variables."""
        return self.matrix.T

    def local(self, span: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (global basis indices, local block) for one Bezier span.

        The block ``C`` satisfies ``N[idx] = C @ B_span`` on that span.
        """
        p = self.source.degree
        cols = self.matrix[:, span * (p + 1):(span + 1) * (p + 1)]
        idx = np.nonzero(np.any(np.abs(cols) > 0.0, axis=1))[0]
        return idx, cols[idx]


@dataclass(frozen=True)
class GrevilleSet:
    abscissae: np.ndarray


def _check_unit(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(x < -KNOT_TOL) or np.any(x > 1.0 + KNOT_TOL):
        raise SplineDomainError(f"{name} outside [0, 1]")
    return np.clip(x, 0.0, 1.0)


def bernstein_eval_all(d: int, x, derivative: bool = False):
    """Evaluate all Bernstein polynomials of degree ``d``.

    Parameters
    ----------
    d : int
        Polynomial degree.
    x : float or array_like
        Evaluation points in [0, 1].
    derivative : bool
        If True also return first derivatives.

    Returns
    -------
    ndarray
        Shape ``(..., d + 1)`` values, or a pair ``(values, derivatives)``.
    """
    x = _check_unit(x)
    vals = _bernstein(d, x)
    if not derivative:
        return vals
    if d == 0:
        return vals, np.zeros_like(vals)
    low = _bernstein(d - 1, x)
    der = np.zeros_like(vals)
    der[..., :-1] -= d * low
    der[..., 1:] += d * low
    return vals, der


def _bernstein(d: int, x: np.ndarray) -> np.ndarray:
    # de Casteljau style triangular recursion, stable for all x in [0, 1]
    out = np.zeros(x.shape + (d + 1,))
    out[..., 0] = 1.0
    t = x[..., None]
    for k in range(1, d + 1):
        prev = out[..., :k].copy()
        out[..., :k + 1] = 0.0
        out[..., :k] += (1.0 - t) * prev
        out[..., 1:k + 1] += t * prev
    return out


def bspline_eval_all(kv: KnotVector, x: float) -> np.ndarray:
    """Dense vector of all B-spline values at ``x`` (Cox-de Boor triangle)."""
    x = float(_check_unit(x))
    p = kv.degree
    U = kv.knots
    n = kv.n
    # index of last knot <= x, restricted to the valid range
    k = int(np.searchsorted(U, x, side="right")) - 1
    k = min(max(k, p), n - 1)
    N = np.zeros(p + 1)
    N[0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = x - U[k + 1 - j]
        right[j] = U[k + j] - x
        saved = 0.0
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    out = np.zeros(n)
    out[k - p:k + 1] = N
    return out


def knot_insert(kv: KnotVector, u: float) -> tuple[KnotVector, ExtractionOperator]:
    """Insert ``u`` once (Boehm). Returns the new knot vector and relation."""
    p = kv.degree
    if not (KNOT_TOL < u < 1.0 - KNOT_TOL):
        raise SplineDomainError("inserted knot must lie in (0, 1)")
    s = kv.multiplicity_of(u)
    if s >= p + 1:
        raise MultiplicityError(f"knot {u} already has multiplicity {p + 1}")
    U = kv.knots
    n = kv.n
    k = int(np.searchsorted(U, u + KNOT_TOL, side="right")) - 1
    M = np.zeros((n + 1, n))  # coefficient map c_new = M c_old
    for i in range(n + 1):
        if i <= k - p:
            M[i, i] = 1.0
        elif i <= k - s:
            alpha = (u - U[i]) / (U[i + p] - U[i])
            M[i, i] = alpha
            M[i, i - 1] = 1.0 - alpha
        else:
            M[i, i - 1] = 1.0
    new_knots = np.sort(np.append(U, u))
    if s > 0:
        new_knots[np.abs(new_knots - u) < KNOT_TOL] = [b for b in kv.breakpoints if abs(b - u) < KNOT_TOL][0]
    new_kv = KnotVector.from_knots(new_knots, p)
    return new_kv, ExtractionOperator(M.T, kv, new_kv)


def refine_operator(kv: KnotVector, insert) -> tuple[KnotVector, ExtractionOperator]:
    """Insert several knots in turn; compose the single-insertion relations."""
    mat = np.eye(kv.n)
    cur = kv
    for u in insert:
        cur, op = knot_insert(cur, float(u))
        mat = mat @ op.matrix
    return cur, ExtractionOperator(mat, kv, cur)


def bezier_extraction(kv: KnotVector) -> ExtractionOperator:
    """Composite insertion raising every interior multiplicity to ``p + 1``."""
    p = kv.degree
    todo = []
    for b, m in zip(kv.breakpoints[1:-1], kv.multiplicities[1:-1]):
        todo.extend([b] * (p + 1 - m))
    return refine_operator(kv, todo)[1]


def bezier_elevate(ctrl: np.ndarray, times: int = 1) -> np.ndarray:
    """Raise the degree of one Bezier segment, one order at a time.

    ``ctrl`` has shape ``(p + 1, dim)``; rational data must be homogeneous.
    """
    P = np.asarray(ctrl, dtype=float)
    for _ in range(times):
        p = P.shape[0] - 1
        Q = np.empty((p + 2,) + P.shape[1:])
        Q[0] = P[0]
        Q[-1] = P[-1]
        for i in range(1, p + 1):
            a = i / (p + 1.0)
            Q[i] = a * P[i - 1] + (1.0 - a) * P[i]
        P = Q
    return P


def degree_elevate(ctrl: np.ndarray, weights: np.ndarray | None, kv: KnotVector,
                   target_degree: int):
    """Elevate a (rational) spline curve to ``target_degree``.

    Each Bezier segment is elevated in homogeneous coordinates; the result is
    then expressed on the knot vector whose multiplicities all grow by the
    degree increment, which keeps the original continuity.

    Returns
    -------
    (ctrl, weights, KnotVector)
    """
    p = kv.degree
    if target_degree < p:
        raise ValueError("target degree must not be below the current degree")
    ctrl = np.asarray(ctrl, dtype=float)
    if weights is None:
        weights = np.ones(ctrl.shape[0])
    if target_degree == p:
        return ctrl.copy(), np.asarray(weights, float).copy(), kv
    dp = target_degree - p
    hom = np.concatenate([ctrl * weights[:, None], weights[:, None]], axis=1)
    ext = bezier_extraction(kv)
    seg = ext.coefficient_map @ hom
    pieces = [bezier_elevate(seg[e * (p + 1):(e + 1) * (p + 1)], dp) for e in range(kv.n_spans)]
    bez_new = np.concatenate(pieces, axis=0)
    new_kv = KnotVector(target_degree, kv.breakpoints, tuple(m + dp for m in kv.multiplicities))
    # the elevated function lies in the new space, so the overdetermined
    # system below is consistent and its least-squares solution is exact
    E = bezier_extraction(new_kv).coefficient_map
    new_hom, *_ = np.linalg.lstsq(E, bez_new, rcond=None)
    w = new_hom[:, -1]
    return new_hom[:, :-1] / w[:, None], w, new_kv


def greville_abscissae(kv: KnotVector) -> GrevilleSet:
    """Averages of ``p`` consecutive knots. Degree 0 uses span midpoints."""
    p = kv.degree
    U = kv.knots
    if p == 0:
        g = 0.5 * (U[:-1] + U[1:])
    else:
        c = np.cumsum(np.concatenate([[0.0], U]))
        g = (c[p + 1:p + 1 + kv.n] - c[1:1 + kv.n]) / p
    return GrevilleSet(np.asarray(g))


def bernstein_product_coefficients(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Bernstein coefficients of the product of two tensor Bernstein forms.

    ``a`` and ``b`` have shape ``(p + 1, q + 1)`` and ``(r + 1, t + 1)``.
    """
    p, q = a.shape[0] - 1, a.shape[1] - 1
    r, t = b.shape[0] - 1, b.shape[1] - 1
    out = np.zeros((p + r + 1, q + t + 1))
    for i in range(p + 1):
        for j in range(q + 1):
            for k in range(r + 1):
                for l in range(t + 1):
                    f = (comb(p, i) * comb(r, k) / comb(p + r, i + k)
                         * comb(q, j) * comb(t, l) / comb(q + t, j + l))
                    out[i + k, j + l] += f * a[i, j] * b[k, l]
    return out
