"""Multipatch NURBS surfaces, Bezier elements and glued spline spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .splinekit import (
    KNOT_TOL,
    KnotVector,
    bernstein_eval_all,
    bernstein_product_coefficients,
    bezier_extraction,
    degree_elevate,
    greville_abscissae,
    refine_operator,
)

MATCH_TOL = 1e-10
SINGULAR_J = 1e-14


class GeometryError(ValueError):
    """Malformed or non-watertight geometry."""


class SingularMapError(ArithmeticError):
    """Degenerate surface Jacobian."""


@dataclass(frozen=True)
class Patch:
    """Tensor-product NURBS patch on [0, 1]^2.

    ``ctrl`` has shape ``(n1, n2, 3)`` and ``weights`` shape ``(n1, n2)``.
    """

    kv1: KnotVector
    kv2: KnotVector
    ctrl: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n1, n2 = self.kv1.n, self.kv2.n
        if self.ctrl.shape != (n1, n2, 3) or self.weights.shape != (n1, n2):
            raise GeometryError(
                f"control grid {self.ctrl.shape[:2]} does not match knot vectors ({n1}, {n2})")
        if np.any(self.weights <= 0.0):
            raise GeometryError("patch weights must be strictly positive")

    @property
    def degrees(self) -> tuple[int, int]:
        return self.kv1.degree, self.kv2.degree

    @property
    def homogeneous(self) -> np.ndarray:
        return np.concatenate([self.ctrl * self.weights[..., None], self.weights[..., None]], axis=-1)

    @classmethod
    def from_homogeneous(cls, kv1, kv2, hom) -> "Patch":
        w = hom[..., 3]
        return cls(kv1, kv2, hom[..., :3] / w[..., None], w.copy())

    def evaluate(self, u, v) -> np.ndarray:
        """Points on the patch for parameter arrays ``u``, ``v``."""
        from .splinekit import bspline_eval_all

        u = np.atleast_1d(np.asarray(u, float))
        v = np.atleast_1d(np.asarray(v, float))
        Nu = np.array([bspline_eval_all(self.kv1, t) for t in u])
        Nv = np.array([bspline_eval_all(self.kv2, t) for t in v])
        h = np.einsum("pi,pj,ijk->pk", Nu, Nv, self.homogeneous)
        return h[:, :3] / h[:, 3:]

    def edge_polygon(self, edge: int) -> np.ndarray:
        """Homogeneous control polygon of an edge in increasing parameter.

        Edges: 0 is v = 0, 1 is u = 1, 2 is v = 1, 3 is u = 0.
        """
        h = self.homogeneous
        return {0: h[:, 0], 1: h[-1, :], 2: h[:, -1], 3: h[0, :]}[edge]

    def edge_knots(self, edge: int) -> KnotVector:
        return self.kv1 if edge in (0, 2) else self.kv2

    def flipped(self) -> "Patch":
        """Reverse the first parametric direction (turns the normal around)."""
        kv = self.kv1
        kv_r = KnotVector(kv.degree, tuple(1.0 - b for b in reversed(kv.breakpoints)),
                          tuple(reversed(kv.multiplicities)))
        return Patch(kv_r, self.kv2, self.ctrl[::-1].copy(), self.weights[::-1].copy())


@dataclass(frozen=True)
class ExtractedElement:
    """Rational Bezier element; ``cw`` is the homogeneous net ``(p+1, p+1, 4)``."""

    index: int
    patch: int
    e1: int
    e2: int
    cw: np.ndarray
    span1: tuple[float, float]
    span2: tuple[float, float]

    @property
    def sizes(self) -> tuple[float, float]:
        return self.span1[1] - self.span1[0], self.span2[1] - self.span2[0]

    def to_patch(self, x) -> np.ndarray:
        """Map element reference coordinates to patch parameters."""
        x = np.asarray(x, float)
        h1, h2 = self.sizes
        return np.stack([self.span1[0] + h1 * x[..., 0], self.span2[0] + h2 * x[..., 1]], axis=-1)


@dataclass(frozen=True)
class Interface:
    patch_a: int
    edge_a: int
    patch_b: int
    edge_b: int
    reversed: bool


@dataclass
class MultipatchBoundary:
    patches: list[Patch]
    elements: list[ExtractedElement]
    interfaces: list[Interface]
    dirichlet_patches: frozenset = frozenset({0})
    level: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def degree(self) -> int:
        return self.patches[0].kv1.degree

    @property
    def diameter(self) -> float:
        pts = np.concatenate([p.ctrl.reshape(-1, 3) for p in self.patches])
        return float(np.linalg.norm(pts.max(0) - pts.min(0)))

    @property
    def nets(self) -> np.ndarray:
        """Stacked homogeneous element nets ``(n_el, p+1, p+1, 4)``."""
        if "nets" not in self._cache:
            self._cache["nets"] = np.stack([e.cw for e in self.elements])
        return self._cache["nets"]

    def patch_elements(self, patches) -> np.ndarray:
        patches = set(patches)
        return np.array([e.index for e in self.elements if e.patch in patches], dtype=int)

    @property
    def dirichlet_elements(self) -> np.ndarray:
        return self.patch_elements(self.dirichlet_patches)

    @property
    def neumann_elements(self) -> np.ndarray:
        return self.patch_elements(set(range(len(self.patches))) - set(self.dirichlet_patches))

    def with_dirichlet(self, patches) -> "MultipatchBoundary":
        patches = frozenset(int(p) for p in patches)
        if any(p < 0 or p >= len(self.patches) for p in patches):
            raise GeometryError("Dirichlet patch index out of range")
        return replace(self, dirichlet_patches=patches, _cache={})

    def vertex_ids(self) -> np.ndarray:
        """Shared ids of element corners, shape ``(n_el, 4)``.

        Corner order: (0,0), (1,0), (0,1), (1,1) in reference coordinates.
        """
        if "vertex_ids" not in self._cache:
            nets = self.nets
            corners = nets[:, [0, -1, 0, -1], [0, 0, -1, -1], :]
            pts = (corners[..., :3] / corners[..., 3:]).reshape(-1, 3)
            self._cache["vertex_ids"] = _cluster(pts, MATCH_TOL * self.diameter).reshape(-1, 4)
        return self._cache["vertex_ids"]

    def bounding_spheres(self) -> tuple[np.ndarray, np.ndarray]:
        """Centres and radii enclosing each element (convex hull property)."""
        if "spheres" not in self._cache:
            nets = self.nets
            pts = nets[..., :3] / nets[..., 3:]
            pts = pts.reshape(len(nets), -1, 3)
            c = pts.mean(axis=1)
            r = np.linalg.norm(pts - c[:, None], axis=2).max(axis=1)
            self._cache["spheres"] = (c, r)
        return self._cache["spheres"]


def _cluster(points: np.ndarray, tol: float) -> np.ndarray:
    """Label points so that points closer than ``tol`` share a label."""
    tree = cKDTree(points)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    n = len(points)
    graph = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else sp.coo_matrix((n, n))
    _, labels = sp.csgraph.connected_components(graph, directed=False)
    # relabel in order of first appearance for determinism
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[labels]


class Frame(NamedTuple):
    position: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    normal: np.ndarray
    J: np.ndarray


def eval_nets(nets: np.ndarray, x: np.ndarray, check: bool = True) -> Frame:
    """Evaluate rational Bezier maps of several elements at shared points.

    Parameters
    ----------
    nets : ndarray, shape (n_el, p+1, p+1, 4)
        Homogeneous control nets.
    x : ndarray, shape (P, 2)
        Reference coordinates.

    Returns
    -------
    Frame
        Arrays of shape ``(n_el, P, 3)`` (``J`` is ``(n_el, P)``).
    """
    x = np.asarray(x, float).reshape(-1, 2)
    p = nets.shape[1] - 1
    Bu = bernstein_eval_all(p, x[:, 0])
    Bv = bernstein_eval_all(p, x[:, 1])
    Du = bernstein_eval_all(p - 1, x[:, 0])
    Dv = bernstein_eval_all(p - 1, x[:, 1])
    # forward-difference nets of the homogeneous control points
    d1 = p * (nets[:, 1:, :, :] - nets[:, :-1, :, :])
    d2 = p * (nets[:, :, 1:, :] - nets[:, :, :-1, :])
    A = np.einsum("pi,pj,eijk->epk", Bu, Bv, nets)
    A1 = np.einsum("pi,pj,eijk->epk", Du, Bv, d1)
    A2 = np.einsum("pi,pj,eijk->epk", Bu, Dv, d2)
    w = A[..., 3:]
    pos = A[..., :3] / w
    t1 = (A1[..., :3] - A1[..., 3:] * pos) / w
    t2 = (A2[..., :3] - A2[..., 3:] * pos) / w
    nrm = np.cross(t1, t2)
    J = np.linalg.norm(nrm, axis=-1)
    if check and np.any(J < SINGULAR_J):
        raise SingularMapError("surface Jacobian below 1e-14")
    nrm = nrm / np.where(J > 0, J, 1.0)[..., None]
    return Frame(pos, t1, t2, nrm, J)


def eval_points(nets: np.ndarray, elems: np.ndarray, x: np.ndarray, check: bool = True) -> Frame:
    """Evaluate element ``elems[k]`` at point ``x[k]`` for every k."""
    x = np.asarray(x, float).reshape(-1, 2)
    sub = nets[elems]
    p = nets.shape[1] - 1
    Bu = bernstein_eval_all(p, x[:, 0])
    Bv = bernstein_eval_all(p, x[:, 1])
    Du = bernstein_eval_all(p - 1, x[:, 0])
    Dv = bernstein_eval_all(p - 1, x[:, 1])
    d1 = p * (sub[:, 1:] - sub[:, :-1])
    d2 = p * (sub[:, :, 1:] - sub[:, :, :-1])
    A = np.einsum("pi,pj,pijk->pk", Bu, Bv, sub)
    A1 = np.einsum("pi,pj,pijk->pk", Du, Bv, d1)
    A2 = np.einsum("pi,pj,pijk->pk", Bu, Dv, d2)
    w = A[:, 3:]
    pos = A[:, :3] / w
    t1 = (A1[:, :3] - A1[:, 3:] * pos) / w
    t2 = (A2[:, :3] - A2[:, 3:] * pos) / w
    nrm = np.cross(t1, t2)
    J = np.linalg.norm(nrm, axis=-1)
    if check and np.any(J < SINGULAR_J):
        raise SingularMapError("surface Jacobian below 1e-14")
    return Frame(pos, t1, t2, nrm / np.where(J > 0, J, 1.0)[:, None], J)


def element_frame(e: ExtractedElement, x) -> Frame:
    """Position, tangents, unit normal and surface measure on one element."""
    x = np.asarray(x, float)
    single = x.ndim == 1
    if np.any(x < -KNOT_TOL) or np.any(x > 1 + KNOT_TOL):
        raise ValueError("reference point outside [0, 1]^2")
    f = eval_nets(e.cw[None], x.reshape(-1, 2))
    f = Frame(*(a[0] for a in f))
    if single:
        f = Frame(*(a[0] for a in f))
    return f


def project_points(nets: np.ndarray, elems, targets: np.ndarray, iters: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Closest points on elements ``elems[k]`` to ``targets[k]``, clamped to [0, 1]^2.

    Coarse sampling followed by projected Gauss-Newton, vectorised over pairs.
    Returns reference coordinates ``(K, 2)`` and distances ``(K,)``.
    """
    elems = np.asarray(elems, int).reshape(-1)
    targets = np.asarray(targets, float).reshape(-1, 3)
    if len(elems) == 0:
        return np.zeros((0, 2)), np.zeros(0)
    g = np.linspace(0.0, 1.0, 7)
    grid = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    uniq, inv = np.unique(elems, return_inverse=True)
    samples = eval_nets(nets[uniq], grid, check=False).position  # (n_u, 49, 3)
    dist = np.linalg.norm(samples[inv] - targets[:, None, :], axis=2)
    x = grid[np.argmin(dist, axis=1)].copy()
    active = np.ones(len(elems), bool)
    for _ in range(iters):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        f = eval_points(nets, elems[idx], x[idx], check=False)
        r = f.position - targets[idx]
        Jm = np.stack([f.t1, f.t2], axis=2)  # (k, 3, 2)
        JtJ = np.einsum("kai,kaj->kij", Jm, Jm)
        Jtr = np.einsum("kai,ka->ki", Jm, r)
        step = -np.linalg.solve(JtJ, Jtr[..., None])[..., 0]
        xn = np.clip(x[idx] + step, 0.0, 1.0)
        done = np.linalg.norm(xn - x[idx], axis=1) < 1e-14
        x[idx] = xn
        active[idx[done]] = False
    d = np.linalg.norm(eval_points(nets, elems, x, check=False).position - targets, axis=1)
    return x, d


def project_point(net: np.ndarray, target: np.ndarray, iters: int = 30) -> tuple[np.ndarray, float]:
    """Closest point on one element to ``target``, clamped to [0, 1]^2."""
    x, d = project_points(net[None], [0], np.asarray(target, float)[None], iters)
    return x[0], float(d[0])


# ---------------------------------------------------------------------------
# construction and I/O


def _elevate_patch(patch: Patch, pg: int) -> Patch:
    hom = patch.homogeneous
    kv1, kv2 = patch.kv1, patch.kv2
    if kv1.degree < pg:
        rows = []
        for j in range(hom.shape[1]):
            c, w, nkv = degree_elevate(hom[:, j, :3] / hom[:, j, 3:], hom[:, j, 3], kv1, pg)
            rows.append(np.concatenate([c * w[:, None], w[:, None]], axis=1))
        hom = np.stack(rows, axis=1)
        kv1 = nkv
    if kv2.degree < pg:
        cols = []
        for i in range(hom.shape[0]):
            c, w, nkv = degree_elevate(hom[i, :, :3] / hom[i, :, 3:], hom[i, :, 3], kv2, pg)
            cols.append(np.concatenate([c * w[:, None], w[:, None]], axis=1))
        hom = np.stack(cols, axis=0)
        kv2 = nkv
    return Patch.from_homogeneous(kv1, kv2, hom)


def _refine_patch(patch: Patch) -> Patch:
    hom = patch.homogeneous
    out = []
    kvs = []
    for kv in (patch.kv1, patch.kv2):
        mids = [0.5 * (a + b) for a, b in zip(kv.breakpoints[:-1], kv.breakpoints[1:])]
        kvs.append(refine_operator(kv, mids))
    (kv1, op1), (kv2, op2) = kvs
    hom = np.einsum("ai,ijk->ajk", op1.coefficient_map, hom)
    hom = np.einsum("bj,ajk->abk", op2.coefficient_map, hom)
    return Patch.from_homogeneous(kv1, kv2, hom)


def _extract_elements(patches: list[Patch]) -> list[ExtractedElement]:
    elements = []
    for tau, patch in enumerate(patches):
        p = patch.kv1.degree
        C1 = bezier_extraction(patch.kv1).coefficient_map
        C2 = bezier_extraction(patch.kv2).coefficient_map
        hom = np.einsum("ai,ijk->ajk", C1, patch.homogeneous)
        hom = np.einsum("bj,ajk->abk", C2, hom)
        b1, b2 = patch.kv1.breakpoints, patch.kv2.breakpoints
        n1, n2 = len(b1) - 1, len(b2) - 1
        for e2 in range(n2):
            for e1 in range(n1):
                net = hom[e1 * (p + 1):(e1 + 1) * (p + 1), e2 * (p + 1):(e2 + 1) * (p + 1)].copy()
                elements.append(ExtractedElement(
                    index=len(elements), patch=tau, e1=e1, e2=e2, cw=net,
                    span1=(b1[e1], b1[e1 + 1]), span2=(b2[e2], b2[e2 + 1])))
    return elements


def _detect_interfaces(patches: list[Patch]) -> list[Interface]:
    pts = np.concatenate([p.ctrl.reshape(-1, 3) for p in patches])
    tol = MATCH_TOL * float(np.linalg.norm(pts.max(0) - pts.min(0)))
    edges = [(t, k) for t in range(len(patches)) for k in range(4)]
    matched: dict[tuple[int, int], Interface] = {}
    for i, (ta, ka) in enumerate(edges):
        if (ta, ka) in matched:
            continue
        pa = patches[ta].edge_polygon(ka)
        xa = pa[:, :3] / pa[:, 3:]
        for tb, kb in edges[i + 1:]:
            if (tb, kb) in matched or tb == ta:
                continue
            pb = patches[tb].edge_polygon(kb)
            if pb.shape != pa.shape:
                continue
            xb = pb[:, :3] / pb[:, 3:]
            for rev in (False, True):
                xr = xb[::-1] if rev else xb
                wr = pb[::-1, 3] if rev else pb[:, 3]
                if (np.max(np.linalg.norm(xa - xr, axis=1)) < tol
                        and np.max(np.abs(pa[:, 3] - wr)) < 1e-10 * np.max(np.abs(wr))):
                    itf = Interface(ta, ka, tb, kb, rev)
                    matched[(ta, ka)] = itf
                    matched[(tb, kb)] = itf
                    break
            if (ta, ka) in matched:
                break
        if (ta, ka) not in matched:
            raise GeometryError(f"unmatched edge {ka} of patch {ta}: surface is not watertight")
    seen = []
    for itf in matched.values():
        if itf not in seen:
            seen.append(itf)
    return seen


def _orient(patches: list[Patch]) -> list[Patch]:
    """Flip patches whose normal points towards the control-point centroid."""
    centre = np.concatenate([p.ctrl.reshape(-1, 3) for p in patches]).mean(axis=0)
    xg, wg = np.polynomial.legendre.leggauss(8)
    xg = 0.5 * (xg + 1)
    wg = 0.5 * wg
    out = []
    for patch in patches:
        els = _extract_elements([patch])
        nets = np.stack([e.cw for e in els])
        grid = np.stack(np.meshgrid(xg, xg, indexing="ij"), -1).reshape(-1, 2)
        ww = np.outer(wg, wg).ravel()
        f = eval_nets(nets, grid)
        vol = np.sum(np.einsum("epk,epk->ep", f.position - centre, f.normal) * f.J * ww)
        out.append(patch.flipped() if vol < 0 else patch)
    return out


def assemble_boundary(patches: list[Patch], dirichlet=(0,), level: int = 0) -> MultipatchBoundary:
    """Validate, equalise degrees, orient and extract a multipatch surface."""
    pg = max(max(p.degrees) for p in patches)
    patches = [_elevate_patch(p, pg) for p in patches]
    patches = _orient(patches)
    interfaces = _detect_interfaces(patches)
    elements = _extract_elements(patches)
    return MultipatchBoundary(patches, elements, interfaces, frozenset(dirichlet), level)


def refine_uniform(b: MultipatchBoundary, levels: int) -> MultipatchBoundary:
    """Bisect every knot span ``levels`` times in both directions."""
    if levels < 0:
        raise ValueError("levels must be nonnegative")
    patches = b.patches
    for _ in range(levels):
        patches = [_refine_patch(p) for p in patches]
    return MultipatchBoundary(patches, _extract_elements(patches), list(b.interfaces),
                              b.dirichlet_patches, b.level + levels)


_ROTATIONS = [
    np.eye(3),
    np.array([[1, 0, 0], [0, -1, 0], [0, 0, -1]], float),   # -z
    np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], float),    # +x
    np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]], float),    # -x
    np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]], float),    # +y
    np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], float),    # -y
]


def sphere6_patches() -> list[Patch]:
    """Unit sphere from six rational Bezier patches of degree (4, 4).

    A rational biquadratic planar patch bounded by four circular arcs is
    lifted to the sphere by inverse stereographic projection; the arcs map to
    the great circles through the cube edges. The remaining faces are rotated
    copies.
    """
    a = (math.sqrt(3.0) - 1.0) / 2.0
    xm = a + a * a / (a + 1.0)
    wm = (a + 1.0) / math.sqrt(2.0)
    P = np.zeros((3, 3, 2))
    W = np.ones((3, 3))
    for i, x in enumerate((-a, 0.0, a)):
        for j, y in enumerate((-a, 0.0, a)):
            P[i, j] = (x, y)
    P[1, 0] = (0.0, -xm)
    P[1, 2] = (0.0, xm)
    P[0, 1] = (-xm, 0.0)
    P[2, 1] = (xm, 0.0)
    P[1, 1] = (0.0, 0.0)
    W[1, 0] = W[1, 2] = W[0, 1] = W[2, 1] = wm
    W[1, 1] = wm * wm
    X = W * P[..., 0]
    Y = W * P[..., 1]
    D = W
    DD = bernstein_product_coefficients(D, D)
    XX = bernstein_product_coefficients(X, X)
    YY = bernstein_product_coefficients(Y, Y)
    hom = np.stack([
        2 * bernstein_product_coefficients(X, D),
        2 * bernstein_product_coefficients(Y, D),
        DD - XX - YY,
        DD + XX + YY,
    ], axis=-1)
    kv = KnotVector(4, (0.0, 1.0), (5, 5))
    patches = []
    for R in _ROTATIONS:
        h = hom.copy()
        h[..., :3] = hom[..., :3] @ R.T
        patches.append(Patch.from_homogeneous(kv, kv, h))
    return patches


def cube6_patches(half: float = 1.0) -> list[Patch]:
    """Cube ``[-half, half]^3`` from six bilinear patches (unoriented)."""
    kv = KnotVector(1, (0.0, 1.0), (2, 2))
    patches = []
    for axis in range(3):
        for sgn in (-1.0, 1.0):
            u_ax, v_ax = [k for k in range(3) if k != axis]
            ctrl = np.zeros((2, 2, 3))
            for i in range(2):
                for j in range(2):
                    ctrl[i, j, axis] = sgn * half
                    ctrl[i, j, u_ax] = (2 * i - 1) * half
                    ctrl[i, j, v_ax] = (2 * j - 1) * half
            patches.append(Patch(kv, kv, ctrl, np.ones((2, 2))))
    return patches


def parse_multipatch(text: str) -> list[Patch]:
    """Parse the plain-text multipatch format.

    Each block reads ``patch <id>``, ``degree p1 p2``, ``knots1 ...``,
    ``knots2 ...`` followed by ``n1*n2`` lines ``x y z w`` with the second
    index running slowest. Cartesian coordinates are stored, not weighted.
    """
    lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    patches = []
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "patch":
            raise GeometryError(f"expected 'patch', got '{lines[i]}'")
        try:
            deg = lines[i + 1].split()
            k1 = lines[i + 2].split()
            k2 = lines[i + 3].split()
            if deg[0] != "degree" or k1[0] != "knots1" or k2[0] != "knots2":
                raise GeometryError(f"malformed header for patch {head[1]}")
            p1, p2 = int(deg[1]), int(deg[2])
            kv1 = KnotVector.from_knots([float(v) for v in k1[1:]], p1)
            kv2 = KnotVector.from_knots([float(v) for v in k2[1:]], p2)
        except (IndexError, ValueError) as exc:
            raise GeometryError(f"malformed patch block near line '{lines[i]}': {exc}") from exc
        n1, n2 = kv1.n, kv2.n
        rows = lines[i + 4:i + 4 + n1 * n2]
        if len(rows) != n1 * n2:
            raise GeometryError(f"patch {head[1]}: expected {n1 * n2} control points")
        data = np.array([[float(v) for v in r.split()] for r in rows])
        if data.shape[1] != 4:
            raise GeometryError(f"patch {head[1]}: control lines need 'x y z w'")
        data = data.reshape(n2, n1, 4).transpose(1, 0, 2)
        patches.append(Patch(kv1, kv2, data[..., :3].copy(), data[..., 3].copy()))
        i += 4 + n1 * n2
    if not patches:
        raise GeometryError("no patches found")
    return patches


def format_multipatch(patches: list[Patch]) -> str:
    out = []
    for t, p in enumerate(patches):
        out.append(f"patch {t}")
        out.append(f"degree {p.kv1.degree} {p.kv2.degree}")
        out.append("knots1 " + " ".join(repr(float(u)) for u in p.kv1.knots))
        out.append("knots2 " + " ".join(repr(float(u)) for u in p.kv2.knots))
        for j in range(p.kv2.n):
            for i in range(p.kv1.n):
                x, y, z = p.ctrl[i, j]
                out.append(" ".join(repr(float(v)) for v in (x, y, z, p.weights[i, j])))
    return "\n".join(out) + "\n"


def load_multipatch(source: str, dirichlet=(0,)) -> MultipatchBoundary:
    """Load ``builtin:sphere6``, ``builtin:cube6`` or a multipatch text file."""
    if source in ("builtin:sphere6", "unit-sphere-6patch"):
        patches = sphere6_patches()
    elif source == "builtin:cube6":
        patches = cube6_patches()
    else:
        patches = parse_multipatch(Path(source).read_text())
    return assemble_boundary(patches, dirichlet)


# ---------------------------------------------------------------------------
# discrete spaces


@dataclass
class DiscreteSpace:
    """Spline space on a multipatch surface.

    On every element ``e`` the supported global functions ``idx[e]`` satisfy
    ``N[idx[e]] = C[e] @ B`` with ``B`` the tensor Bernstein basis ordered as
    ``a = a2 * (p + 1) + a1``.
    """

    boundary: MultipatchBoundary
    degree: int
    continuous: bool
    knots: list[tuple[KnotVector, KnotVector]]
    dof_maps: list[np.ndarray]
    idx: np.ndarray
    C: np.ndarray
    n_dofs: int

    @property
    def nloc(self) -> int:
        return (self.degree + 1) ** 2

    @property
    def T(self) -> sp.csr_matrix:
        """Global coefficients to element Bernstein coefficients."""
        nel, nl = self.idx.shape
        rows = (np.arange(nel)[:, None, None] * nl + np.arange(nl)[None, None, :]).repeat(nl, 1)
        cols = np.broadcast_to(self.idx[:, :, None], rows.shape)
        return sp.csr_matrix((self.C.ravel(), (rows.ravel(), cols.ravel())),
                             shape=(nel * nl, self.n_dofs))

    @property
    def G(self) -> sp.csr_matrix:
        """Patch-local to global summation matrix (entries 0 or 1)."""
        cols = np.concatenate([m.T.ravel() for m in self.dof_maps])
        return sp.csr_matrix((np.ones(len(cols)), (np.arange(len(cols)), cols)),
                             shape=(len(cols), self.n_dofs))

    @property
    def scatter(self) -> sp.csr_matrix:
        """Sum local rows ``(e, i)`` into global dofs ``idx[e, i]``."""
        nel, nl = self.idx.shape
        return sp.csr_matrix((np.ones(nel * nl), (np.arange(nel * nl), self.idx.ravel())),
                             shape=(nel * nl, self.n_dofs))

    def support(self, k: int) -> np.ndarray:
        return np.nonzero(np.any(self.idx == k, axis=1))[0]

    def dofs_on(self, elements) -> np.ndarray:
        """Dofs whose support meets the given elements."""
        return np.unique(self.idx[np.asarray(elements, int)])

    def basis(self, x: np.ndarray, derivatives: bool = False):
        """Tensor Bernstein values ``(P, nloc)`` at reference points."""
        x = np.asarray(x, float).reshape(-1, 2)
        p = self.degree
        if derivatives:
            bu, du = bernstein_eval_all(p, x[:, 0], True)
            bv, dv = bernstein_eval_all(p, x[:, 1], True)
            B = (bv[:, :, None] * bu[:, None, :]).reshape(len(x), -1)
            B1 = (bv[:, :, None] * du[:, None, :]).reshape(len(x), -1)
            B2 = (dv[:, :, None] * bu[:, None, :]).reshape(len(x), -1)
            return B, B1, B2
        bu = bernstein_eval_all(p, x[:, 0])
        bv = bernstein_eval_all(p, x[:, 1])
        return (bv[:, :, None] * bu[:, None, :]).reshape(len(x), -1)

    def local_values(self, elems, x: np.ndarray) -> np.ndarray:
        """Values of supported functions: ``out[k, i] = N_{idx[elems[k], i]}(x[k])``."""
        B = self.basis(x)
        return np.einsum("pa,pia->pi", B, self.C[np.asarray(elems)])

    def evaluate(self, coeffs: np.ndarray, elems, x: np.ndarray) -> np.ndarray:
        vals = self.local_values(elems, x)
        return np.einsum("pi,pi...->p...", vals, coeffs[self.idx[np.asarray(elems)]])


def build_space(b: MultipatchBoundary, degree: int, continuous: bool = True) -> DiscreteSpace:
    """Continuous (glued) or patchwise discontinuous spline space."""
    if continuous and degree < 1:
        raise ValueError("continuous spaces need degree >= 1")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    p = degree
    knots = []
    ext = []
    for patch in b.patches:
        kvs = tuple(KnotVector(p, kv.breakpoints, (p + 1,) + (1,) * (kv.n_spans - 1) + (p + 1,))
                    for kv in (patch.kv1, patch.kv2))
        knots.append(kvs)
        ext.append(tuple(bezier_extraction(kv) for kv in kvs))

    dof_maps = []
    if continuous:
        anchors, owners = [], []
        for tau, (kv1, kv2) in enumerate(knots):
            g1 = greville_abscissae(kv1).abscissae
            g2 = greville_abscissae(kv2).abscissae
            U, V = np.meshgrid(g1, g2, indexing="ij")
            pts = _patch_points(b.patches[tau], U.ravel(), V.ravel())
            anchors.append(pts)
            I1, I2 = np.meshgrid(np.arange(kv1.n), np.arange(kv2.n), indexing="ij")
            owners.append(np.stack([np.full(I1.size, tau), I1.ravel(), I2.ravel()], 1))
        pts = np.concatenate(anchors)
        own = np.concatenate(owners)
        labels = _cluster(pts, MATCH_TOL * b.diameter)
        for lab in np.unique(labels):
            members = own[labels == lab]
            if len(np.unique(members[:, 0])) != len(members):
                raise GeometryError("ambiguous anchor match inside one patch")
        # number dofs patch by patch with the second index running slowest
        order = np.lexsort((own[:, 1], own[:, 2], own[:, 0]))
        new_label = {}
        for k in order:
            lab = labels[k]
            if lab not in new_label:
                new_label[lab] = len(new_label)
        glob = np.array([new_label[lab] for lab in labels])
        start = 0
        for kv1, kv2 in knots:
            n = kv1.n * kv2.n
            dof_maps.append(glob[start:start + n].reshape(kv1.n, kv2.n))
            start += n
        n_dofs = len(new_label)
    else:
        start = 0
        for kv1, kv2 in knots:
            dof_maps.append(start + np.arange(kv1.n * kv2.n).reshape(kv2.n, kv1.n).T)
            start += kv1.n * kv2.n
        n_dofs = start

    nl = (p + 1) ** 2
    idx = np.zeros((b.n_elements, nl), dtype=int)
    C = np.zeros((b.n_elements, nl, nl))
    for e in b.elements:
        i1, c1 = ext[e.patch][0].local(e.e1)
        i2, c2 = ext[e.patch][1].local(e.e2)
        C[e.index] = np.kron(c2, c1)
        dm = dof_maps[e.patch]
        idx[e.index] = dm[i1[None, :], i2[:, None]].ravel()
    return DiscreteSpace(b, p, continuous, knots, dof_maps, idx, C, n_dofs)


def _patch_points(patch: Patch, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return patch.evaluate(u, v)


@dataclass(frozen=True)
class CollocationPoint:
    index: int
    element: int
    ref: np.ndarray
    position: np.ndarray


def collocation_points(space: DiscreteSpace) -> list[CollocationPoint]:
    """Greville anchors of every global dof with a deterministic owner.

    The owner is the lowest-index element containing the point.
    """
    b = space.boundary
    first: dict[int, list] = {}
    for tau, ((kv1, kv2), dm) in enumerate(zip(space.knots, space.dof_maps)):
        g1 = greville_abscissae(kv1).abscissae
        g2 = greville_abscissae(kv2).abscissae
        for i2 in range(kv2.n):
            for i1 in range(kv1.n):
                first.setdefault(int(dm[i1, i2]), []).append((tau, g1[i1], g2[i2]))
    elem_lookup = {(e.patch, e.e1, e.e2): e for e in b.elements}
    out = []
    for k in range(space.n_dofs):
        best = None
        for tau, u, v in first[k]:
            kv1, kv2 = b.patches[tau].kv1, b.patches[tau].kv2
            for s1 in _spans_containing(kv1, u):
                for s2 in _spans_containing(kv2, v):
                    e = elem_lookup[(tau, s1, s2)]
                    if best is None or e.index < best[0].index:
                        best = (e, u, v)
        e, u, v = best
        ref = np.array([(u - e.span1[0]) / (e.span1[1] - e.span1[0]),
                        (v - e.span2[0]) / (e.span2[1] - e.span2[0])])
        ref = np.clip(ref, 0.0, 1.0)
        pos = element_frame(e, ref).position
        out.append(CollocationPoint(k, e.index, ref, pos))
    return out


def _spans_containing(kv: KnotVector, u: float) -> list[int]:
    bp = kv.breakpoints
    return [s for s in range(len(bp) - 1) if bp[s] - KNOT_TOL <= u <= bp[s + 1] + KNOT_TOL]
