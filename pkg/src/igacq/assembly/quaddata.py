"""Element quadrature data shared by all assembly routines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import SINGULAR_J, DiscreteSpace, Frame, MultipatchBoundary, SingularMapError, eval_nets
from ..quadrature import gauss_rule
from ..splinekit import bernstein_eval_all


@dataclass
class ElementQuadrature:
    """Tensor Gauss data on every element.

    Arrays are indexed ``(element, point, ...)``; ``wJ`` holds the surface
    measure times the Gauss weight.
    """

    order: int
    ref: np.ndarray
    w: np.ndarray
    X: np.ndarray
    N: np.ndarray
    J: np.ndarray
    t1: np.ndarray
    t2: np.ndarray

    @property
    def wJ(self) -> np.ndarray:
        return self.J * self.w[None, :]

    @property
    def n_points(self) -> int:
        return len(self.w)


def element_quadrature(boundary: MultipatchBoundary, order: int) -> ElementQuadrature:
    rule = gauss_rule(order, 2)
    fr = eval_nets(boundary.nets, rule.points)
    return ElementQuadrature(order, rule.points, rule.weights, fr.position, fr.normal, fr.J, fr.t1, fr.t2)


def global_values(space: DiscreteSpace, B: np.ndarray, elems=None) -> np.ndarray:
    """Supported global basis values from tensor Bernstein values.

    ``B`` has shape ``(P, nloc)`` (shared points) and the result
    ``(n_el, P, nloc)``; with ``elems`` given, ``B`` is pointwise and the
    result is ``(P, nloc)``.
    """
    if elems is None:
        return np.einsum("pa,eia->epi", B, space.C)
    return np.einsum("pa,pia->pi", B, space.C[elems])


@dataclass
class SpaceQuadrature:
    """Basis data of one space on an :class:`ElementQuadrature`.

    ``phi`` are function values; ``curl`` the surface curl scaled by the
    surface measure (``J curl phi = d1 phi t2 - d2 phi t1``), both shaped
    ``(n_el, n_q, nloc[, 3])``.
    """

    space: DiscreteSpace
    phi: np.ndarray
    curl: np.ndarray | None = None
    _stacks: dict = field(default_factory=dict, repr=False)


def space_quadrature(space: DiscreteSpace, eq: ElementQuadrature, curls: bool = False) -> SpaceQuadrature:
    if curls:
        B, B1, B2 = space.basis(eq.ref, derivatives=True)
        phi = global_values(space, B)
        d1 = global_values(space, B1)
        d2 = global_values(space, B2)
        curl = d1[..., None] * eq.t2[:, :, None, :] - d2[..., None] * eq.t1[:, :, None, :]
        return SpaceQuadrature(space, phi, curl)
    return SpaceQuadrature(space, global_values(space, space.basis(eq.ref)))


def tensor_bernstein(degree: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tensor Bernstein values and first derivatives, ordered ``a2 * (p+1) + a1``."""
    bu, du = bernstein_eval_all(degree, x[:, 0], True)
    bv, dv = bernstein_eval_all(degree, x[:, 1], True)
    P = len(x)
    B = (bv[:, :, None] * bu[:, None, :]).reshape(P, -1)
    B1 = (bv[:, :, None] * du[:, None, :]).reshape(P, -1)
    B2 = (dv[:, :, None] * bu[:, None, :]).reshape(P, -1)
    return B, B1, B2


def flat_net(net: np.ndarray) -> np.ndarray:
    """Homogeneous net ``(p+1, p+1, 4)`` in tensor-basis order."""
    return net.transpose(1, 0, 2).reshape(-1, 4)


def tensor_frame(net_flat: np.ndarray, B: np.ndarray, B1: np.ndarray, B2: np.ndarray) -> Frame:
    """Geometry of one element from precomputed tensor Bernstein values."""
    A = B @ net_flat
    A1 = B1 @ net_flat
    A2 = B2 @ net_flat
    w = A[:, 3:]
    pos = A[:, :3] / w
    t1 = (A1[:, :3] - A1[:, 3:] * pos) / w
    t2 = (A2[:, :3] - A2[:, 3:] * pos) / w
    nrm = np.cross(t1, t2)
    J = np.linalg.norm(nrm, axis=1)
    if np.any(J < SINGULAR_J):
        raise SingularMapError("surface Jacobian below 1e-14")
    return Frame(pos, t1, t2, nrm / J[:, None], J)
