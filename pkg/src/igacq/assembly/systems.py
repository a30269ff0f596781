"""Per-frequency systems: mass matrices, projections, mixed and indirect solves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from ..geometry import DiscreteSpace, MultipatchBoundary, build_space, collocation_points
from ..kernels import ACOUSTIC, Material, elasto_matrix, helmholtz_matrix
from .collocation import CollocationAssembler, PointSet
from .galerkin import GalerkinAssembler, Request
from .quaddata import ElementQuadrature, element_quadrature, space_quadrature

PIVOT_TOL = 1e-14
ERROR_ORDER = 20


class SingularSystemError(ArithmeticError):
    """Numerically singular frequency system."""


class UnsupportedOperatorError(ValueError):
    """Operator not available for the requested formulation."""


@dataclass
class BoundaryOperatorMatrix:
    kind: str
    s: complex
    data: np.ndarray
    test: DiscreteSpace | PointSet
    trial: DiscreteSpace
    formulation: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass
class FrequencySolveResult:
    """Dirichlet and Neumann coefficients of one frequency solve."""

    s: complex
    dirichlet: np.ndarray
    neumann: np.ndarray


# ---------------------------------------------------------------------------
# single operators


def assemble_operator(kind: str, s: complex, test: DiscreteSpace | PointSet, trial: DiscreteSpace,
                      formulation: str = "galerkin", problem: str = "acoustic",
                      material: Material = ACOUSTIC, order: int = 12, singular_order: int = 6
                      ) -> BoundaryOperatorMatrix:
    """Assemble one operator; ``test`` is a space (Galerkin) or a point set (collocation).

    Kinds: ``V``, ``K``, ``Kp`` and ``D`` (hypersingular) in Galerkin form,
    ``V`` and ``K`` in collocation form.
    """
    if formulation == "galerkin":
        if problem != "acoustic":
            raise UnsupportedOperatorError("Galerkin assembly is available for the acoustic problem only")
        gk = {"D": "W"}.get(kind, kind)
        ga = GalerkinAssembler({"test": test, "trial": trial}, order, singular_order, material)
        A = ga.assemble(s, [Request("A", gk, "test", "trial")])["A"]
    elif formulation == "collocation":
        if kind not in ("V", "K"):
            raise UnsupportedOperatorError(f"collocation provides V and K, not {kind}")
        ca = CollocationAssembler({"trial": trial}, test, problem, material, order, max(singular_order, 8))
        A = ca.assemble(s, {"A": (kind, "trial")})["A"]
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    return BoundaryOperatorMatrix(kind, complex(s), A, test, trial, formulation)


def assemble_free_term(space: DiscreteSpace, points: PointSet, problem: str = "acoustic",
                       material: Material = ACOUSTIC, order: int = 10, singular_order: int = 8) -> np.ndarray:
    """Free-term coefficients at the points (scalar or 3x3 blocks)."""
    ca = CollocationAssembler({"u": space}, points, problem, material, order, singular_order)
    return ca.free_term("u")


# ---------------------------------------------------------------------------
# mass matrices and projections


def mass_matrix(a: DiscreteSpace, b: DiscreteSpace, eq: ElementQuadrature, elements=None) -> np.ndarray:
    """``M[i, j] = int phi_i psi_j`` over the given elements (all by default)."""
    elements = np.arange(a.boundary.n_elements) if elements is None else np.asarray(elements, int)
    pa = space_quadrature(a, eq).phi[elements]
    pb = space_quadrature(b, eq).phi[elements]
    blocks = np.einsum("epi,ep,epj->eij", pa, eq.wJ[elements], pb)
    M = np.zeros((a.n_dofs, b.n_dofs))
    ia = a.idx[elements]
    ib = b.idx[elements]
    np.add.at(M, (ia[:, :, None], ib[:, None, :]), blocks)
    return M


def load_vector(space: DiscreteSpace, values: np.ndarray, eq: ElementQuadrature, elements=None) -> np.ndarray:
    """``f[i] = int g phi_i`` from ``values`` of ``g`` at ``eq`` points ``(n_el, nq[, k])``."""
    elements = np.arange(space.boundary.n_elements) if elements is None else np.asarray(elements, int)
    phi = space_quadrature(space, eq).phi[elements]
    v = values[elements]
    extra = v.shape[2:]
    v = v.reshape(v.shape[0], v.shape[1], -1)
    loc = np.einsum("epi,ep,epk->eik", phi, eq.wJ[elements], v)
    out = np.zeros((space.n_dofs, loc.shape[2]), dtype=loc.dtype)
    np.add.at(out, space.idx[elements], loc)
    return out.reshape((space.n_dofs,) + extra)


class Projector:
    """L2 projection onto the dofs supported on a set of elements.

    Data functions take ``(x, n)`` arrays of shape ``(P, 3)`` and return
    ``(P,)`` or ``(P, k)`` values.
    """

    def __init__(self, space: DiscreteSpace, elements=None, order: int = 12):
        self.space = space
        self.elements = np.arange(space.boundary.n_elements) if elements is None else np.asarray(elements, int)
        self.eq = element_quadrature(space.boundary, order)
        self.dofs = space.dofs_on(self.elements)
        M = mass_matrix(space, space, self.eq, self.elements)[np.ix_(self.dofs, self.dofs)]
        try:
            self._chol = sla.cho_factor(M)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("singular mass matrix") from exc
        self.mass = M

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature points and normals on the projection elements, ``(n_e * nq, 3)``."""
        return self.eq.X[self.elements].reshape(-1, 3), self.eq.N[self.elements].reshape(-1, 3)

    def project_values(self, values: np.ndarray) -> np.ndarray:
        """Coefficients on ``self.dofs`` from values ``(n_e * nq[, k])`` at :meth:`points`."""
        nq = self.eq.n_points
        full = np.zeros((self.space.boundary.n_elements, nq) + values.shape[1:], dtype=values.dtype)
        full[self.elements] = values.reshape((len(self.elements), nq) + values.shape[1:])
        f = load_vector(self.space, full, self.eq, self.elements)[self.dofs]
        if np.iscomplexobj(f):
            return sla.cho_solve(self._chol, f.real) + 1j * sla.cho_solve(self._chol, f.imag)
        return sla.cho_solve(self._chol, f)

    def project(self, func: Callable) -> np.ndarray:
        x, n = self.points()
        return self.project_values(np.asarray(func(x, n)))


def assemble_mass_and_rhs(space: DiscreteSpace, func: Callable, elements=None, order: int = 12):
    """Mass matrix and load vector of ``func`` restricted to ``elements``.

    Returns ``(M, f, dofs)`` with ``M`` and ``f`` restricted to the dofs
    supported on the elements.
    """
    pr = Projector(space, elements, order)
    x, n = pr.points()
    nq = pr.eq.n_points
    vals = np.asarray(func(x, n))
    full = np.zeros((space.boundary.n_elements, nq) + vals.shape[1:], dtype=vals.dtype)
    full[pr.elements] = vals.reshape((len(pr.elements), nq) + vals.shape[1:])
    f = load_vector(space, full, pr.eq, pr.elements)[pr.dofs]
    return pr.mass, f, pr.dofs


# ---------------------------------------------------------------------------
# solves


def solve_frequency(A: np.ndarray, b: np.ndarray, s: complex = 0j) -> np.ndarray:
    """Dense LU solve with a pivot check."""
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"system matrix is not square: {A.shape}")
    lu, piv = sla.lu_factor(A, check_finite=True)
    scale = np.abs(A).max() if A.size else 1.0
    pmin = np.abs(np.diag(lu)).min() if A.size else 1.0
    if pmin < PIVOT_TOL * scale:
        cond = np.linalg.cond(A)
        raise SingularSystemError(f"singular system at s={complex(s):.6g}: condition estimate {cond:.3e}")
    return sla.lu_solve((lu, piv), b)


@dataclass
class MixedSplit:
    """Dof bookkeeping of a mixed problem.

    ``Dset`` are the Dirichlet-space dofs touching the Dirichlet part and
    ``F`` the remaining (unknown) ones; ``ND`` and ``NN`` split the
    discontinuous Neumann space by patch.
    """

    space_d: DiscreteSpace
    space_n: DiscreteSpace
    D_el: np.ndarray
    N_el: np.ndarray
    Dset: np.ndarray
    F: np.ndarray
    ND: np.ndarray
    NN: np.ndarray

    @classmethod
    def build(cls, boundary: MultipatchBoundary, degree: int) -> "MixedSplit":
        sd = build_space(boundary, degree, True)
        sn = build_space(boundary, degree - 1, False)
        D_el = boundary.dirichlet_elements
        N_el = boundary.neumann_elements
        Dset = sd.dofs_on(D_el)
        F = np.setdiff1d(np.arange(sd.n_dofs), Dset)
        return cls(sd, sn, D_el, N_el, Dset, F, sn.dofs_on(D_el), sn.dofs_on(N_el))

    def collocation_points(self) -> PointSet:
        """Anchors of the unknown Dirichlet dofs and of the unknown Neumann dofs."""
        cd = collocation_points(self.space_d)
        cn = collocation_points(self.space_n)
        return PointSet.from_points([cd[k] for k in self.F] + [cn[k] for k in self.ND])


def _blocks(idx: np.ndarray, ncomp: int) -> np.ndarray:
    return (ncomp * idx[:, None] + np.arange(ncomp)[None, :]).ravel()


class MixedProblem:
    """Mixed Dirichlet-Neumann problem on a split boundary.

    Parameters
    ----------
    formulation : {"collocation", "galerkin"}
    problem : {"acoustic", "elastic"}
    """

    def __init__(self, boundary: MultipatchBoundary, degree: int, formulation: str = "collocation",
                 problem: str = "acoustic", material: Material = ACOUSTIC, order: int = 10,
                 singular_order: int | None = None, near_factor: float = 1.0):
        if problem == "elastic" and formulation != "collocation":
            raise UnsupportedOperatorError("the elastic problem is solved by collocation only")
        if formulation not in ("collocation", "galerkin"):
            raise ValueError(f"unknown formulation {formulation!r}")
        self.split = MixedSplit.build(boundary, degree)
        self.formulation = formulation
        self.problem = problem
        self.ncomp = 3 if problem == "elastic" else 1
        sp = self.split
        if formulation == "collocation":
            self.points = sp.collocation_points()
            self.asm = CollocationAssembler({"d": sp.space_d, "n": sp.space_n}, self.points, problem, material,
                                            order, singular_order or 8, near_factor)
            self._free = self.asm.free_term_matrix("d")
        else:
            self.asm = GalerkinAssembler({"d": sp.space_d, "n": sp.space_n}, order, singular_order or 5, material)
            self._mass_nd = mass_matrix(sp.space_n, sp.space_d, self.asm.eq)
            self._mass_dn = self._mass_nd.T.copy()
        self.proj_d = Projector(sp.space_d, sp.D_el)
        self.proj_n = Projector(sp.space_n, sp.N_el)

    @property
    def n_data(self) -> int:
        return self.ncomp * (len(self.split.Dset) + len(self.split.NN))

    def data_vector(self, gd: np.ndarray, gn: np.ndarray) -> np.ndarray:
        """Stack projected data ``gd (|Dset|[, 3])`` and ``gn (|NN|[, 3])``."""
        return np.concatenate([np.asarray(gd).ravel(), np.asarray(gn).ravel()])

    def project_data(self, dirichlet: Callable, neumann: Callable) -> np.ndarray:
        return self.data_vector(self.proj_d.project(dirichlet), self.proj_n.project(neumann))

    def system(self, s: complex):
        """System matrix and the map from the data vector to the right-hand side."""
        sp = self.split
        c = self.ncomp
        if self.formulation == "collocation":
            ops = self.asm.assemble(s, {"V": ("V", "n"), "K": ("K", "d")})
            V, K = ops["V"], ops["K"] + self._free
            A = np.hstack([-V[:, _blocks(sp.ND, c)], K[:, _blocks(sp.F, c)]])
            R = np.hstack([-K[:, _blocks(sp.Dset, c)], V[:, _blocks(sp.NN, c)]])
            return A, R
        ops = self.asm.assemble(s, [Request("V", "V", "n", "n"), Request("K", "K", "n", "d"),
                                    Request("W", "W", "d", "d")])
        V, K, W = ops["V"], ops["K"], ops["W"]
        Kp = K.T
        half_m = 0.5 * self._mass_nd
        ND, NN, F, Ds = sp.ND, sp.NN, sp.F, sp.Dset
        A = np.block([[V[np.ix_(ND, ND)], -(K + half_m)[np.ix_(ND, F)]],
                      [(Kp - 0.5 * self._mass_dn)[np.ix_(F, ND)], W[np.ix_(F, F)]]])
        R = np.block([[(half_m + K)[np.ix_(ND, Ds)], -V[np.ix_(ND, NN)]],
                      [-W[np.ix_(F, Ds)], (0.5 * self._mass_dn - Kp)[np.ix_(F, NN)]]])
        return A, R

    def solve(self, s: complex, data: np.ndarray) -> np.ndarray:
        """Unknowns ``[q*; u*]`` for one or several data columns."""
        A, R = self.system(s)
        return solve_frequency(A, R @ data, s)

    def full_fields(self, data: np.ndarray, unknowns: np.ndarray) -> FrequencySolveResult:
        """Dirichlet and Neumann coefficient vectors on the whole boundary."""
        sp = self.split
        c = self.ncomp
        nD = c * len(sp.Dset)
        nq = c * len(sp.ND)
        extra = data.shape[1:]
        u = np.zeros((c * sp.space_d.n_dofs,) + extra, dtype=complex)
        q = np.zeros((c * sp.space_n.n_dofs,) + extra, dtype=complex)
        u[_blocks(sp.Dset, c)] = data[:nD]
        q[_blocks(sp.NN, c)] = data[nD:]
        q[_blocks(sp.ND, c)] = unknowns[:nq]
        u[_blocks(sp.F, c)] = unknowns[nq:]
        return FrequencySolveResult(0j, u, q)


INDIRECT = {
    "slp": ("V", False),
    "dlp": ("K", True),
    "adlp": ("Kp", False),
    "hyp": ("W", True),
}


class IndirectProblem:
    """Indirect Galerkin formulation with one layer operator.

    ``slp`` solves ``V psi = g``, ``dlp`` ``(1/2 + K) phi = g``, ``adlp``
    ``(-1/2 + K') psi = g`` and ``hyp`` ``-W phi = g``.
    """

    def __init__(self, boundary: MultipatchBoundary, degree: int, kind: str, order: int = 8,
                 singular_order: int = 5, material: Material = ACOUSTIC):
        if kind not in INDIRECT:
            raise ValueError(f"kind must be one of {tuple(INDIRECT)}")
        op, continuous = INDIRECT[kind]
        self.kind = kind
        self.op = op
        self.space = build_space(boundary, degree if continuous else degree - 1, continuous)
        self.asm = GalerkinAssembler({"x": self.space}, order, singular_order, material)
        self.mass = mass_matrix(self.space, self.space, self.asm.eq)
        self.projector = Projector(self.space, order=order)

    def matrix(self, s: complex) -> np.ndarray:
        A = self.asm.assemble(s, [Request("A", self.op, "x", "x")])["A"]
        if self.kind == "dlp":
            A = A + 0.5 * self.mass
        elif self.kind == "adlp":
            A = A - 0.5 * self.mass
        elif self.kind == "hyp":
            A = -A
        return A

    def load(self, func: Callable) -> np.ndarray:
        """Galerkin right-hand side ``<g, phi_i>`` of a data function."""
        return self.mass @ self.projector.project(func)

    def solve(self, s: complex, rhs: np.ndarray) -> np.ndarray:
        return solve_frequency(self.matrix(s), rhs, s)


# ---------------------------------------------------------------------------
# representation formula


class NearBoundaryError(ValueError):
    """Evaluation point too close to the boundary for regular quadrature."""


def evaluate_interior(x, s: complex, space_d: DiscreteSpace, u: np.ndarray, space_n: DiscreteSpace,
                      q: np.ndarray, problem: str = "acoustic", material: Material = ACOUSTIC,
                      order: int = ERROR_ORDER) -> np.ndarray:
    """Field ``V q - K u`` at points off the boundary.

    ``u`` and ``q`` are coefficient vectors (``(n, 3)`` in the elastic case).
    """
    x = np.asarray(x, float).reshape(-1, 3)
    b = space_d.boundary
    eq = element_quadrature(b, order)
    centres, radii = b.bounding_spheres()
    gap = np.linalg.norm(x[:, None] - centres[None], axis=2) - radii[None]
    if np.any(gap < 2.0 * radii[None] * 0.5):
        raise NearBoundaryError("evaluation point closer than an element size to the boundary")
    Y = eq.X.reshape(-1, 3)
    NY = eq.N.reshape(-1, 3)
    w = eq.wJ.reshape(-1)
    uh = np.einsum("epi,ei...->ep...", space_quadrature(space_d, eq).phi, np.asarray(u)[space_d.idx])
    qh = np.einsum("epi,ei...->ep...", space_quadrature(space_n, eq).phi, np.asarray(q)[space_n.idx])
    if problem == "elastic":
        m = material
        Uk = np.empty((len(x), len(Y), 3, 3), complex)
        Tk = np.empty_like(Uk)
        elasto_matrix(x, Y, NY, complex(s), m.rho, m.c1, m.c2, m.lam, m.mu, Uk, Tk)
        qv = qh.reshape(-1, 3) * w[:, None]
        uv = uh.reshape(-1, 3) * w[:, None]
        return np.einsum("pyab,yb->pa", Uk, qv) - np.einsum("pyab,yb->pa", Tk, uv)
    Uk = np.empty((len(x), len(Y)), complex)
    Ky = np.empty_like(Uk)
    Kx = np.empty_like(Uk)
    helmholtz_matrix(x, Y, np.zeros_like(x), NY, complex(s), float(material.c), Uk, Ky, Kx)
    return Uk @ (qh.reshape(-1) * w) - Ky @ (uh.reshape(-1) * w)
