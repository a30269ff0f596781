"""Batched Galerkin assembly of the acoustic layer operators.

Regular element pairs are integrated with a tensor Gauss rule. For one
test element the kernel is tabulated against the points of all elements
and contracted with precomputed basis stacks by batched matrix products.
Pairs sharing a vertex, an edge or the whole element are removed from the
regular sweep and integrated with the four-dimensional singular rules.

Operator kinds (``test`` row space, ``trial`` column space):

``V``  ``<U phi_j, psi_i>``
``K``  ``<dU/dn_y phi_j, psi_i>``
``Kp`` ``<dU/dn_x phi_j, psi_i>``
``W``  ``<U curl phi_j, curl psi_i> + (s/c)^2 <U (n_x . n_y) phi_j, psi_i>``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DiscreteSpace
from ..kernels import ACOUSTIC, Material, helmholtz_blocks, helmholtz_pointwise
from ..quadrature import classify_pair, pair_rule
from .quaddata import element_quadrature, flat_net, space_quadrature, tensor_bernstein, tensor_frame

KINDS = ("V", "K", "Kp", "W")
_KERNEL_OF = {"V": "u", "K": "ky", "Kp": "kx", "W": "u"}


@dataclass(frozen=True)
class Request:
    """One operator to assemble: ``kind`` between spaces named ``test`` and ``trial``."""

    name: str
    kind: str
    test: str
    trial: str


def neighbour_pairs(vertex_ids: np.ndarray) -> list[tuple[int, int]]:
    """Unordered pairs ``e <= f`` sharing at least one corner."""
    by_vertex: dict[int, list[int]] = {}
    for e, row in enumerate(vertex_ids):
        for v in row:
            by_vertex.setdefault(int(v), []).append(e)
    pairs = set()
    for elems in by_vertex.values():
        for e in elems:
            for f in elems:
                if e <= f:
                    pairs.add((e, f))
    for e in range(len(vertex_ids)):
        pairs.add((e, e))
    return sorted(pairs)


class GalerkinAssembler:
    """Reusable Galerkin assembler for a fixed mesh and set of spaces.

    Parameters
    ----------
    spaces : dict
        Named discrete spaces on one boundary.
    order : int
        Gauss points per direction for regular pairs.
    singular_order : int
        Points per direction in the singular pair rules.
    """

    def __init__(self, spaces: dict[str, DiscreteSpace], order: int = 12, singular_order: int = 6,
                 material: Material = ACOUSTIC):
        first = next(iter(spaces.values()))
        self.boundary = first.boundary
        if any(sp.boundary is not self.boundary for sp in spaces.values()):
            raise ValueError("all spaces must live on the same boundary")
        self.spaces = dict(spaces)
        self.material = material
        self.order = order
        self.singular_order = singular_order
        self.eq = element_quadrature(self.boundary, order)
        self.sq = {k: space_quadrature(sp, self.eq, curls=sp.continuous) for k, sp in spaces.items()}
        vid = self.boundary.vertex_ids()
        self.pairs = [(e, f, classify_pair(vid, e, f)) for e, f in neighbour_pairs(vid)]
        nel = self.boundary.n_elements
        self.singular_of: list[list[int]] = [[] for _ in range(nel)]
        for e, f, _ in self.pairs:
            self.singular_of[e].append(f)
            if f != e:
                self.singular_of[f].append(e)
        self._stacks: dict = {}
        self._rules: dict = {}

    # -- basis stacks ------------------------------------------------------

    def _stack(self, key: str, kind: str) -> np.ndarray:
        """Weighted basis stack ``(n_el, nq, ncomp * nloc)`` (complex for trial use)."""
        tag = (key, "W" if kind == "W" else "S")
        if tag not in self._stacks:
            sq = self.sq[key]
            eq = self.eq
            if kind == "W":
                if sq.curl is None:
                    raise ValueError("hypersingular form needs a continuous space")
                c = sq.curl * eq.w[None, :, None, None]
                nrm = sq.phi[..., None] * (eq.N * eq.wJ[..., None])[:, :, None, :]
                st = np.concatenate([c, nrm], axis=-1)  # (nel, nq, nloc, 6)
                st = np.ascontiguousarray(st.transpose(0, 1, 3, 2))  # (nel, nq, 6, nloc)
            else:
                st = (sq.phi * self.eq.wJ[..., None])[:, :, None, :]
            self._stacks[tag] = st
        return self._stacks[tag]

    def _trial_stack(self, key: str, kind: str) -> np.ndarray:
        tag = (key, kind == "W", "trial")
        if tag not in self._stacks:
            st = self._stack(key, kind)
            nel, nq = st.shape[:2]
            self._stacks[tag] = st.reshape(nel, nq, -1).astype(complex)
        return self._stacks[tag]

    # -- assembly ----------------------------------------------------------

    def assemble(self, s: complex, requests: list[Request]) -> dict[str, np.ndarray]:
        """Dense operator matrices for one Laplace parameter."""
        for r in requests:
            if r.kind not in KINDS:
                raise ValueError(f"unknown operator kind {r.kind!r}")
        s = complex(s)
        c = float(self.material.c)
        k2 = (s / c) ** 2
        out = {r.name: np.zeros((self.spaces[r.test].n_dofs, self.spaces[r.trial].n_dofs), complex)
               for r in requests}
        self._regular(s, c, k2, requests, out)
        self._singular(s, c, k2, requests, out)
        return out

    def _regular(self, s, c, k2, requests, out):
        eq = self.eq
        nel, nq = eq.J.shape
        want = {_KERNEL_OF[r.kind] for r in requests}
        G = {k: np.zeros((nel, nq, nq), complex) for k in ("u", "ky", "kx")}
        dummy = np.zeros((1, 1, 1), complex)
        trial = {r.name: self._trial_stack(r.trial, r.kind) for r in requests}
        scat = {key: self.spaces[key].scatter.T.tocsr() for key in {r.trial for r in requests}}
        skip = np.zeros(nel, dtype=np.bool_)
        for e in range(nel):
            skip[:] = False
            skip[self.singular_of[e]] = True
            helmholtz_blocks(eq.X[e], eq.X, eq.N[e], eq.N, s, c, skip, "u" in want, "ky" in want, "kx" in want,
                             G["u"] if "u" in want else dummy, G["ky"] if "ky" in want else dummy,
                             G["kx"] if "kx" in want else dummy)
            for r in requests:
                tst = self._stack(r.test, r.kind)[e]  # (nq, ncomp, nla)
                if r.kind == "W":
                    tst = tst.astype(complex)
                    tst[:, 3:] *= k2
                ncomp, nla = tst.shape[1:]
                T1 = G[_KERNEL_OF[r.kind]] @ trial[r.name]  # (nel, nq, ncomp * nlb)
                T1 = T1.reshape(nel, nq * ncomp, -1)
                blocks = tst.reshape(nq * ncomp, nla).T @ T1  # (nel, nla, nlb)
                rows = blocks.transpose(1, 0, 2).reshape(nla, -1)
                contrib = scat[r.trial] @ rows.T  # (n_trial, nla)
                out[r.name][self.spaces[r.test].idx[e]] += contrib.T

    def _rule(self, info, degrees):
        key = (info.kind, tuple(info.map_x.origin), tuple(info.map_x.d1), tuple(info.map_x.d2),
               tuple(info.map_y.origin), tuple(info.map_y.d1), tuple(info.map_y.d2))
        if key not in self._rules:
            xr, yr, w = pair_rule(info, self.singular_order)
            tabs = {}
            for d in degrees:
                tx, ty = tensor_bernstein(d, xr), tensor_bernstein(d, yr)
                # derivative-and-value stacks (P, 3, nB) ordered (d1, d2, value)
                sx = np.stack([tx[1], tx[2], tx[0]], axis=1)
                sy = np.stack([ty[1], ty[2], ty[0]], axis=1)
                tabs[d] = (tx, ty, sx, sy)
            self._rules[key] = (w, tabs)
        return self._rules[key]

    def _singular(self, s, c, k2, requests, out):
        nets = self.boundary.nets
        gdeg = nets.shape[1] - 1
        flat = [flat_net(net) for net in nets]
        keys = sorted({r.test for r in requests} | {r.trial for r in requests})
        degrees = {gdeg} | {self.spaces[k].degree for k in keys}
        has_w = any(r.kind == "W" for r in requests)
        for e, f, info in self.pairs:
            w, tabs = self._rule(info, degrees)
            fx = tensor_frame(flat[e], *tabs[gdeg][0])
            fy = tensor_frame(flat[f], *tabs[gdeg][1])
            P = len(w)
            U = np.empty(P, complex)
            Ky = np.empty(P, complex)
            Kx = np.empty(P, complex)
            helmholtz_pointwise(fx.position, fy.position, fx.normal, fy.normal, s, c, U, Ky, Kx)
            wJJ = w * fx.J * fy.J
            kern = {"u": U * wJJ, "ky": Ky * wJJ, "kx": Kx * wJJ}
            if has_w:
                uw = U * w
                m = np.empty((P, 3, 3))
                m[:, 0, 0] = np.einsum("pi,pi->p", fx.t2, fy.t2)
                m[:, 0, 1] = -np.einsum("pi,pi->p", fx.t2, fy.t1)
                m[:, 1, 0] = -np.einsum("pi,pi->p", fx.t1, fy.t2)
                m[:, 1, 1] = np.einsum("pi,pi->p", fx.t1, fy.t1)
                m[:, :2, 2] = 0.0
                m[:, 2, :2] = 0.0
                m[:, 2, 2] = np.einsum("pi,pi->p", fx.normal, fy.normal) * fx.J * fy.J
                scale = np.ones(3, complex)
                scale[2] = k2
                Wc = m * uw[:, None, None] * scale[None, :, None]
                Wp = (np.ascontiguousarray(Wc.real), np.ascontiguousarray(Wc.imag))
                WpT = (np.ascontiguousarray(Wp[0].transpose(0, 2, 1)), np.ascontiguousarray(Wp[1].transpose(0, 2, 1)))
            swap = {"u": "u", "ky": "kx", "kx": "ky"}
            for r in requests:
                A = out[r.name]
                sa, sb = self.spaces[r.test], self.spaces[r.trial]
                ta, tb = tabs[sa.degree], tabs[sb.degree]
                kk = _KERNEL_OF[r.kind]
                if r.kind == "W":
                    bern = _quadratic_form(ta[2], Wp, tb[3])
                else:
                    bern = _weighted_product(ta[0][0], kern[kk], tb[1][0])
                A[np.ix_(sa.idx[e], sb.idx[f])] += sa.C[e] @ bern @ sb.C[f].T
                if f == e:
                    continue
                if r.kind == "W":
                    bern = _quadratic_form(ta[3], WpT, tb[2])
                else:
                    bern = _weighted_product(ta[1][0], kern[swap[kk]], tb[0][0])
                A[np.ix_(sa.idx[f], sb.idx[e])] += sa.C[f] @ bern @ sb.C[e].T


def _weighted_product(a: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum_p a[p, i] w[p] b[p, j]`` for real ``a, b`` and complex ``w``."""
    return (a * w.real[:, None]).T @ b + 1j * ((a * w.imag[:, None]).T @ b)


def _quadratic_form(a: np.ndarray, W: tuple[np.ndarray, np.ndarray], b: np.ndarray) -> np.ndarray:
    """``sum_{p,c,d} a[p,c,i] W[p,c,d] b[p,d,j]`` with ``W`` given as (real, imag)."""
    a2 = a.reshape(-1, a.shape[2]).T
    nb = b.shape[2]
    re = a2 @ np.matmul(W[0], b).reshape(-1, nb)
    im = a2 @ np.matmul(W[1], b).reshape(-1, nb)
    return re + 1j * im
