"""Gauss rules, element-pair classification and singular quadrature.

Singular rules are built in canonical reference coordinates:

* identical pair: ``x, y`` range over the same square;
* edge pair: the shared edge is ``x2 = y2 = 0`` with ``x1 = y1`` on it;
* vertex pair: the shared corner is ``x = y = (0, 0)``.

Each element is brought into canonical position by one of the eight
symmetries of the unit square.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

DEFAULT_ORDER = 20


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_rule(n: int = DEFAULT_ORDER, d: int = 2) -> QuadRule:
    """Tensor Gauss-Legendre rule with ``n`` points per direction on [0,1]^d.

    Points are ordered with the first coordinate running fastest.
    """
    if n < 1:
        raise ValueError("quadrature order must be positive")
    x, w = _gauss01(n)
    if d == 1:
        return QuadRule(x[:, None].copy(), w.copy())
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgr = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel(order="F") for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel(order="F") for g in wgr], axis=1), axis=1)
    return QuadRule(pts, wts)


class PairClass(Enum):
    SEPARATED = "separated"
    VERTEX = "vertex"
    EDGE = "edge"
    IDENTICAL = "identical"


_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


@dataclass(frozen=True)
class SquareMap:
    """Affine symmetry ``x = origin + u * d1 + v * d2`` of the unit square."""

    origin: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def __call__(self, uv: np.ndarray) -> np.ndarray:
        return self.origin + uv[:, :1] * self.d1 + uv[:, 1:2] * self.d2


IDENTITY_MAP = SquareMap(np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def _inward(origin: np.ndarray, d1: np.ndarray) -> np.ndarray:
    other = np.array([1.0, 0.0]) if d1[0] == 0.0 else np.array([0.0, 1.0])
    axis = int(np.argmax(other))
    return other if origin[axis] == 0.0 else -other


def _map_from(c0: int, c1: int | None) -> SquareMap:
    o = _CORNERS[c0]
    if c1 is None:
        d1 = np.array([1.0, 0.0]) if o[0] == 0.0 else np.array([-1.0, 0.0])
    else:
        d1 = _CORNERS[c1] - o
    return SquareMap(o.copy(), d1, _inward(o, d1))


@dataclass(frozen=True)
class PairInfo:
    kind: PairClass
    map_x: SquareMap
    map_y: SquareMap


def classify_pair(vertex_ids: np.ndarray, e: int, f: int) -> PairInfo:
    """Classify an element pair from shared corner ids.

    ``vertex_ids`` is the ``(n_el, 4)`` table of corner ids.
    """
    if e == f:
        return PairInfo(PairClass.IDENTICAL, IDENTITY_MAP, IDENTITY_MAP)
    ve, vf = list(vertex_ids[e]), list(vertex_ids[f])
    shared = [v for v in ve if v in vf]
    if len(shared) == 0:
        return PairInfo(PairClass.SEPARATED, IDENTITY_MAP, IDENTITY_MAP)
    if len(shared) == 1:
        v = shared[0]
        return PairInfo(PairClass.VERTEX, _map_from(ve.index(v), None), _map_from(vf.index(v), None))
    if len(shared) == 2:
        P, Q = shared
        return PairInfo(PairClass.EDGE, _map_from(ve.index(P), ve.index(Q)),
                        _map_from(vf.index(P), vf.index(Q)))
    raise ValueError(f"elements {e} and {f} share {len(shared)} corners")


@lru_cache(maxsize=None)
def canonical_rule(kind: PairClass, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sauter-Schwab type rule ``(x, y, w)`` in canonical coordinates.

    The weights integrate over ``[0,1]^2 x [0,1]^2`` and sum to one.
    """
    g, gw = _gauss01(n)
    G = np.stack(np.meshgrid(g, g, g, g, indexing="ij"), -1).reshape(-1, 4)
    W = np.prod(np.stack(np.meshgrid(gw, gw, gw, gw, indexing="ij"), -1).reshape(-1, 4), axis=1)
    xi, e1, e2, e3 = G.T
    xs, ys, ws = [], [], []
    if kind is PairClass.IDENTICAL:
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                for swap in (False, True):
                    a, b = (xi * e1, xi) if swap else (xi, xi * e1)
                    x1 = (a if s1 < 0 else 0.0) + (1.0 - a) * e2
                    x2 = (b if s2 < 0 else 0.0) + (1.0 - b) * e3
                    xs.append(np.stack([x1, x2], 1))
                    ys.append(np.stack([x1 + s1 * a, x2 + s2 * b], 1))
                    ws.append(W * xi * (1.0 - a) * (1.0 - b))
    elif kind is PairClass.EDGE:
        for s in (1.0, -1.0):
            for k in range(3):
                if k == 0:
                    a, x2, y2 = xi, xi * e1, xi * e2
                elif k == 1:
                    x2, a, y2 = xi, xi * e1, xi * e2
                else:
                    y2, a, x2 = xi, xi * e1, xi * e2
                x1 = (a if s < 0 else 0.0) + (1.0 - a) * e3
                xs.append(np.stack([x1, x2], 1))
                ys.append(np.stack([x1 + s * a, y2], 1))
                ws.append(W * xi ** 2 * (1.0 - a))
    elif kind is PairClass.VERTEX:
        for k in range(4):
            c = [xi * e1, xi * e2, xi * e3]
            c.insert(k, xi)
            xs.append(np.stack([c[0], c[1]], 1))
            ys.append(np.stack([c[2], c[3]], 1))
            ws.append(W * xi ** 3)
    else:
        x = gauss_rule(n, 2)
        X = np.repeat(x.points, len(x.weights), axis=0)
        Y = np.tile(x.points, (len(x.weights), 1))
        return X, Y, np.outer(x.weights, x.weights).ravel()
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def pair_rule(info: PairInfo, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature points in the actual reference coordinates of both elements."""
    x, y, w = canonical_rule(info.kind, n)
    return info.map_x(x), info.map_y(y), w


def duffy_rule_2d(point, n: int) -> QuadRule:
    """Rule on [0,1]^2 resolving a point singularity at ``point``.

    The square is cut into up to four rectangles at the point and each
    rectangle into two triangles with apex at the point; each triangle is
    pulled back by the Duffy map.
    """
    s, t = float(point[0]), float(point[1])
    g, gw = _gauss01(n)
    XI, ETA = np.meshgrid(g, g, indexing="ij")
    WW = np.outer(gw, gw)
    XI, ETA, WW = XI.ravel(), ETA.ravel(), WW.ravel()
    P = np.array([s, t])
    pts, wts = [], []
    for xs in ((0.0, s), (s, 1.0)):
        for ys in ((0.0, t), (t, 1.0)):
            if xs[1] - xs[0] < 1e-15 or ys[1] - ys[0] < 1e-15:
                continue
            corners = [np.array([xs[0], ys[0]]), np.array([xs[1], ys[0]]),
                       np.array([xs[1], ys[1]]), np.array([xs[0], ys[1]])]
            k = int(np.argmin([np.linalg.norm(c - P) for c in corners]))
            # the remaining corners in cyclic order form two triangles with apex P
            ring = corners[k + 1:] + corners[:k]
            for A, B in zip(ring[:-1], ring[1:]):
                det = abs((A[0] - P[0]) * (B[1] - A[1]) - (A[1] - P[1]) * (B[0] - A[0]))
                q = P + XI[:, None] * ((A - P) + ETA[:, None] * (B - A))
                pts.append(q)
                wts.append(WW * XI * det)
    return QuadRule(np.concatenate(pts), np.concatenate(wts))


def duffy_integrate(integrand, kind, n: int = DEFAULT_ORDER) -> complex:
    """Integrate a singular integrand with the matching Duffy-type rule.

    ``kind`` is either a 2-vector (point singularity in [0,1]^2, integrand
    called with points ``(P, 2)``) or a ``PairInfo``/``PairClass`` for a
    4-dimensional pair integral (integrand called with ``x, y``).
    """
    if isinstance(kind, PairClass):
        kind = PairInfo(kind, IDENTITY_MAP, IDENTITY_MAP)
    if isinstance(kind, PairInfo):
        if kind.kind is PairClass.SEPARATED:
            raise ValueError("separated pairs need no singular rule; use gauss_rule")
        x, y, w = pair_rule(kind, n)
        return complex(np.sum(w * integrand(x, y)))
    rule = duffy_rule_2d(kind, n)
    return complex(np.sum(rule.weights * integrand(rule.points)))
