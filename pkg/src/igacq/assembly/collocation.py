"""Collocation assembly of the single and double layer operators.

Rows are indexed by collocation points, columns by the dofs of a trial
space (times three components in the elastic case). Elements within
``near_factor`` element diameters of a point are integrated with the
Duffy rule centred at the projection of the point onto the element; all
other elements use tensor Gauss quadrature.

The free term is obtained from the constant identity of the static double
layer evaluated with the same rules, so that the strongly singular part of
the elastic double layer is regularised consistently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DiscreteSpace, MultipatchBoundary, project_points
from ..kernels import ACOUSTIC, Material, elasto_pointwise, elasto_rows, helmholtz_pointwise, helmholtz_rows
from ..quadrature import duffy_rule_2d
from .quaddata import element_quadrature, flat_net, space_quadrature, tensor_bernstein, tensor_frame

STATIC_S = 1e-8
PROBLEMS = ("acoustic", "elastic")


@dataclass(frozen=True)
class PointSet:
    """Collocation points with an owning element and reference coordinates."""

    position: np.ndarray
    element: np.ndarray
    ref: np.ndarray

    def __len__(self) -> int:
        return len(self.position)

    @classmethod
    def from_points(cls, pts) -> "PointSet":
        pts = list(pts)
        return cls(np.array([p.position for p in pts]).reshape(-1, 3),
                   np.array([p.element for p in pts], int),
                   np.array([p.ref for p in pts]).reshape(-1, 2))


@dataclass
class _NearData:
    pair_point: np.ndarray   # (n_pairs,)
    pair_elem: np.ndarray    # (n_pairs,)
    start: np.ndarray        # (n_pairs,) offsets into the point arrays
    point: np.ndarray        # (P,) collocation point per quadrature point
    X: np.ndarray
    N: np.ndarray
    W: np.ndarray
    phi: dict


def near_pairs(boundary: MultipatchBoundary, points: PointSet, near_factor: float):
    """Element-point pairs closer than ``near_factor`` element diameters.

    Returns the pair list ``(i, f, ref)`` with the projection ``ref`` of point
    ``i`` onto element ``f``.
    """
    centres, radii = boundary.bounding_spheres()
    nets = boundary.nets
    P = points.position
    gap = np.linalg.norm(P[:, None, :] - centres[None], axis=2) - radii[None]
    ii, ff = np.nonzero(gap < near_factor * 2.0 * radii[None])
    own = ff == points.element[ii]
    ref, d = project_points(nets, ff, P[ii])
    ref[own] = points.ref[ii[own]]
    keep = own | (d < near_factor * 2.0 * radii[ff])
    return [(int(i), int(f), r) for i, f, r in zip(ii[keep], ff[keep], ref[keep])]


class CollocationAssembler:
    """Reusable collocation assembler for fixed points and trial spaces.

    Parameters
    ----------
    spaces : dict
        Named trial spaces on one boundary.
    points : PointSet
    problem : {"acoustic", "elastic"}
    order : int
        Gauss points per direction on well separated elements.
    singular_order : int
        Points per direction on each Duffy triangle.
    near_factor : float
        Near-field radius in element diameters.
    """

    def __init__(self, spaces: dict[str, DiscreteSpace], points: PointSet, problem: str = "acoustic",
                 material: Material = ACOUSTIC, order: int = 10, singular_order: int = 8,
                 near_factor: float = 1.0, chunk: int | None = None):
        if problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        first = next(iter(spaces.values()))
        self.boundary = first.boundary
        self.spaces = dict(spaces)
        self.points = points
        self.problem = problem
        self.material = material
        self.order = order
        self.singular_order = singular_order
        self.eq = element_quadrature(self.boundary, order)
        self.phi = {k: space_quadrature(sp, self.eq).phi for k, sp in spaces.items()}
        nel, nq = self.eq.J.shape
        if chunk is None:
            per_point = nel * nq * (9 if problem == "elastic" else 1) * 16 * 2
            chunk = int(max(1, min(len(points), 2.0e8 // per_point)))
        self.chunk = chunk
        pairs = near_pairs(self.boundary, points, near_factor)
        self.skip = np.zeros((len(points), nel), dtype=np.bool_)
        for i, f, _ in pairs:
            self.skip[i, f] = True
        self.near = self._near_data(pairs)
        self._free: dict[str, np.ndarray] = {}

    # -- setup -------------------------------------------------------------

    def _near_data(self, pairs) -> _NearData:
        nets = self.boundary.nets
        gdeg = nets.shape[1] - 1
        Xs, Ns, Ws, pts, starts = [], [], [], [], []
        phis = {k: [] for k in self.spaces}
        offset = 0
        for i, f, ref in pairs:
            rule = duffy_rule_2d(ref, self.singular_order)
            fr = tensor_frame(flat_net(nets[f]), *tensor_bernstein(gdeg, rule.points))
            Xs.append(fr.position)
            Ns.append(fr.normal)
            Ws.append(fr.J * rule.weights)
            pts.append(np.full(len(rule.weights), i))
            for k, sp in self.spaces.items():
                phis[k].append(tensor_bernstein(sp.degree, rule.points)[0] @ sp.C[f].T)
            starts.append(offset)
            offset += len(rule.weights)
        cat = (lambda a, shape: np.concatenate(a) if a else np.zeros(shape))
        return _NearData(np.array([p[0] for p in pairs], int), np.array([p[1] for p in pairs], int),
                         np.array(starts, int), cat(pts, (0,)).astype(int), cat(Xs, (0, 3)), cat(Ns, (0, 3)),
                         cat(Ws, (0,)), {k: cat(v, (0, self.spaces[k].nloc)) for k, v in phis.items()})

    @property
    def n_rows(self) -> int:
        return len(self.points) * (3 if self.problem == "elastic" else 1)

    def n_cols(self, key: str) -> int:
        return self.spaces[key].n_dofs * (3 if self.problem == "elastic" else 1)

    # -- assembly ----------------------------------------------------------

    def assemble(self, s: complex, requests: dict[str, tuple[str, str]]) -> dict[str, np.ndarray]:
        """Assemble ``{name: (kind, trial)}`` with kind ``V`` or ``K``."""
        for kind, _ in requests.values():
            if kind not in ("V", "K"):
                raise ValueError("collocation supports the kinds V and K")
        s = complex(s)
        out = {name: np.zeros((self.n_rows, self.n_cols(trial)), complex)
               for name, (kind, trial) in requests.items()}
        self._regular(s, requests, out)
        self._near(s, requests, out)
        return out

    def _regular(self, s, requests, out):
        eq = self.eq
        nel, nq = eq.J.shape
        wJ = np.ascontiguousarray(eq.wJ)
        kinds = {k for k, _ in requests.values()}
        m = len(self.points)
        elastic = self.problem == "elastic"
        mat = self.material
        scat = {key: self.spaces[key].scatter.T.tocsr() for _, key in requests.values()}
        for a in range(0, m, self.chunk):
            b = min(m, a + self.chunk)
            X = np.ascontiguousarray(self.points.position[a:b])
            skip = np.ascontiguousarray(self.skip[a:b])
            mc = b - a
            if elastic:
                shape = (nel, mc, 3, 3, nq)
                G = {k: np.empty(shape, complex) if k in kinds else np.empty((1, 1, 1, 1, 1), complex)
                     for k in ("V", "K")}
                elasto_rows(X, eq.X, eq.N, wJ, s, mat.rho, mat.c1, mat.c2, mat.lam, mat.mu, skip,
                            "V" in kinds, "K" in kinds, G["V"], G["K"])
            else:
                G = {k: np.empty((nel, mc, nq), complex) if k in kinds else np.empty((1, 1, 1), complex)
                     for k in ("V", "K")}
                helmholtz_rows(X, eq.X, eq.N, wJ, s, float(mat.c), skip, "V" in kinds, "K" in kinds,
                               G["V"], G["K"])
            for name, (kind, key) in requests.items():
                phi = self.phi[key]
                nloc = phi.shape[2]
                n = self.spaces[key].n_dofs
                g = G[kind].reshape(nel, -1, nq)
                R = np.matmul(g.real, phi) + 1j * np.matmul(g.imag, phi)  # (nel, rows, nloc)
                if elastic:
                    R = R.reshape(nel, mc, 3, 3, nloc).transpose(1, 2, 3, 0, 4).reshape(mc * 9, nel * nloc)
                    blk = (scat[key] @ R.T).T.reshape(mc, 3, 3, n).transpose(0, 1, 3, 2).reshape(mc * 3, n * 3)
                    out[name][3 * a:3 * b] += blk
                else:
                    R = R.transpose(1, 0, 2).reshape(mc, nel * nloc)
                    out[name][a:b] += (scat[key] @ R.T).T

    def _near(self, s, requests, out):
        nd = self.near
        if len(nd.W) == 0:
            return
        X = np.ascontiguousarray(self.points.position[nd.point])
        P = len(nd.W)
        mat = self.material
        kinds = {k for k, _ in requests.values()}
        if self.problem == "elastic":
            U = np.empty((P, 3, 3), complex)
            T = np.empty((P, 3, 3), complex)
            elasto_pointwise(X, nd.X, nd.N, s, mat.rho, mat.c1, mat.c2, mat.lam, mat.mu, True, U, T)
            kern = {"V": U * nd.W[:, None, None], "K": T * nd.W[:, None, None]}
        else:
            U = np.empty(P, complex)
            Ky = np.empty(P, complex)
            Kx = np.empty(P, complex)
            helmholtz_pointwise(X, nd.X, nd.N, nd.N, s, float(mat.c), U, Ky, Kx)
            kern = {"V": U * nd.W, "K": Ky * nd.W}
        for name, (kind, key) in requests.items():
            phi = nd.phi[key]
            dofs = self.spaces[key].idx[nd.pair_elem]  # (n_pairs, nloc)
            rows = np.broadcast_to(nd.pair_point[:, None], dofs.shape)
            A = out[name]
            if self.problem == "elastic":
                vals = np.add.reduceat(kern[kind][:, :, :, None] * phi[:, None, None, :], nd.start, axis=0)
                A4 = A.reshape(len(self.points), 3, -1, 3)
                for i in range(3):
                    for j in range(3):
                        np.add.at(A4[:, i, :, j], (rows, dofs), vals[:, i, j, :])
            else:
                vals = np.add.reduceat(kern[kind][:, None] * phi, nd.start, axis=0)
                np.add.at(A, (rows, dofs), vals)

    # -- free term ---------------------------------------------------------

    def point_values(self, key: str) -> np.ndarray:
        """``(n_points, n_dofs)`` values of the trial basis at the collocation points."""
        sp = self.spaces[key]
        out = np.zeros((len(self.points), sp.n_dofs))
        vals = sp.local_values(self.points.element, self.points.ref)
        np.add.at(out, (np.arange(len(self.points))[:, None].repeat(sp.nloc, 1), sp.idx[self.points.element]),
                  vals)
        return out

    def free_term(self, key: str) -> np.ndarray:
        """Free-term blocks ``c_i = -sum_j K_0[i, j]`` (scalar or 3x3 per point)."""
        if key not in self._free:
            K0 = self.assemble(STATIC_S, {"K": ("K", key)})["K"]
            if self.problem == "elastic":
                m = len(self.points)
                c = -K0.reshape(m, 3, -1, 3).sum(axis=2).real
            else:
                c = -K0.sum(axis=1).real
            self._free[key] = c
        return self._free[key]

    def free_term_matrix(self, key: str) -> np.ndarray:
        """Matrix of ``u -> c_i u_h(x_i)`` on the trial space ``key``."""
        vals = self.point_values(key)
        c = self.free_term(key)
        if self.problem == "elastic":
            m, n = vals.shape
            return np.einsum("iab,ij->iajb", c, vals).reshape(3 * m, 3 * n)
        return c[:, None] * vals
