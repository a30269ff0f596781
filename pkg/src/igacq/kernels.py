"""Laplace-domain fundamental solutions for the scalar wave equation and for
isotropic elastodynamics, with their normal derivatives and tractions.

The scalar kernel is ``U(r) = exp(-s r / c) / (4 pi r)``. The elastic kernel
is the Laplace transform of the Stokes solution,

    U = [(3 g g - I) h(s r) + g g E1 / c1^2 + (I - g g) E2 / c2^2] / (4 pi rho r)

with ``g = (x - y) / r``, ``E_a = exp(-s r / c_a)`` and

    h(z) = e^{-z/c1} (1/(c1 z) + 1/z^2) - e^{-z/c2} (1/(c2 z) + 1/z^2).

Batch kernels are compiled with numba; the single-point functions wrap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

FOUR_PI = 4.0 * math.pi
_SERIES_RADIUS = 0.25
_SERIES_TERMS = 24


@dataclass(frozen=True)
class Material:
    """Wave speeds and density. ``c`` is the acoustic speed; ``c1``/``c2``
    are the pressure and shear speeds."""

    c: float = 1.0
    rho: float = 1.0
    c1: float = 1.0
    c2: float = 1.0 / math.sqrt(2.0)

    def __post_init__(self):
        if min(self.c, self.rho, self.c1, self.c2) <= 0.0:
            raise ValueError("wave speeds and density must be positive")
        if self.c1 <= self.c2:
            raise ValueError("the pressure speed c1 must exceed the shear speed c2")

    @classmethod
    def from_moduli(cls, bulk: float, mu: float, rho: float = 1.0) -> "Material":
        """Elastic material from the bulk and shear moduli."""
        c1 = math.sqrt((bulk + 4.0 * mu / 3.0) / rho)
        c2 = math.sqrt(mu / rho)
        return cls(c=math.sqrt(bulk / rho), rho=rho, c1=c1, c2=c2)

    @property
    def mu(self) -> float:
        return self.rho * self.c2 ** 2

    @property
    def lam(self) -> float:
        return self.rho * (self.c1 ** 2 - 2.0 * self.c2 ** 2)


ACOUSTIC = Material()
ELASTIC = Material()


class KernelDomainError(ValueError):
    """Raised for coincident source and field points."""


# ---------------------------------------------------------------------------
# scalar kernel


@nb.njit(cache=True, fastmath=False)
def helmholtz_matrix(X, Y, NX, NY, s, c, out_u, out_ky, out_kx):
    """Fill ``U``, ``dU/dn_y`` and ``dU/dn_x`` for all pairs ``(X[i], Y[j])``."""
    m, n = X.shape[0], Y.shape[0]
    k = s / c
    for i in range(m):
        x0, x1, x2 = X[i, 0], X[i, 1], X[i, 2]
        for j in range(n):
            d0 = Y[j, 0] - x0
            d1 = Y[j, 1] - x1
            d2 = Y[j, 2] - x2
            r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            u = np.exp(-k * r) / (FOUR_PI * r)
            out_u[i, j] = u
            up = -(1.0 / r + k) * u / r
            out_ky[i, j] = up * (d0 * NY[j, 0] + d1 * NY[j, 1] + d2 * NY[j, 2])
            out_kx[i, j] = -up * (d0 * NX[i, 0] + d1 * NX[i, 1] + d2 * NX[i, 2])


@nb.njit(cache=True)
def helmholtz_blocks(Xe, Y, NX, NY, s, c, skip, want_u, want_ky, want_kx, out_u, out_ky, out_kx):
    """Kernels between the points ``Xe`` of one element and all element points.

    ``Y`` and ``NY`` have shape ``(n_el, nq, 3)``; outputs ``(n_el, len(Xe), nq)``.
    Elements flagged in ``skip`` get zero blocks.
    """
    k = s / c
    nel, nq = Y.shape[0], Y.shape[1]
    for f in range(nel):
        if skip[f]:
            for i in range(Xe.shape[0]):
                for j in range(nq):
                    if want_u:
                        out_u[f, i, j] = 0.0
                    if want_ky:
                        out_ky[f, i, j] = 0.0
                    if want_kx:
                        out_kx[f, i, j] = 0.0
            continue
        for i in range(Xe.shape[0]):
            x0, x1, x2 = Xe[i, 0], Xe[i, 1], Xe[i, 2]
            for j in range(nq):
                d0 = Y[f, j, 0] - x0
                d1 = Y[f, j, 1] - x1
                d2 = Y[f, j, 2] - x2
                r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                u = np.exp(-k * r) / (FOUR_PI * r)
                if want_u:
                    out_u[f, i, j] = u
                up = -(1.0 / r + k) * u / r
                if want_ky:
                    out_ky[f, i, j] = up * (d0 * NY[f, j, 0] + d1 * NY[f, j, 1] + d2 * NY[f, j, 2])
                if want_kx:
                    out_kx[f, i, j] = -up * (d0 * NX[i, 0] + d1 * NX[i, 1] + d2 * NX[i, 2])


@nb.njit(cache=True)
def helmholtz_pointwise(X, Y, NX, NY, s, c, out_u, out_ky, out_kx):
    """Kernels for matched pairs ``(X[p], Y[p])``."""
    k = s / c
    for p in range(X.shape[0]):
        d0 = Y[p, 0] - X[p, 0]
        d1 = Y[p, 1] - X[p, 1]
        d2 = Y[p, 2] - X[p, 2]
        r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        u = np.exp(-k * r) / (FOUR_PI * r)
        out_u[p] = u
        up = -(1.0 / r + k) * u / r
        out_ky[p] = up * (d0 * NY[p, 0] + d1 * NY[p, 1] + d2 * NY[p, 2])
        out_kx[p] = -up * (d0 * NX[p, 0] + d1 * NX[p, 1] + d2 * NX[p, 2])


def helmholtz_kernels(xdiff, n_x, n_y, s: complex, mat: Material = ACOUSTIC) -> dict:
    """Kernel values for one point pair with ``xdiff = x - y``.

    Returns ``U``, ``dU/dn_y`` and ``dU/dn_x``.
    """
    xdiff = np.asarray(xdiff, float)
    r = float(np.linalg.norm(xdiff))
    if r == 0.0:
        raise KernelDomainError("kernel evaluated at r = 0")
    X = xdiff[None, :].copy()
    Y = np.zeros((1, 3))
    u = np.zeros(1, complex)
    ky = np.zeros(1, complex)
    kx = np.zeros(1, complex)
    helmholtz_pointwise(X, Y, np.asarray(n_x, float)[None], np.asarray(n_y, float)[None],
                        complex(s), float(mat.c), u, ky, kx)
    return {"U": complex(u[0]), "dU_dny": complex(ky[0]), "dU_dnx": complex(kx[0])}


def helmholtz_hypersingular_parts(xdiff, n_x, n_y, s: complex, mat: Material = ACOUSTIC) -> dict:
    """Factors of the regularised hypersingular form.

    The bilinear form is ``int int U (curl u . curl v) + (s/c)^2 U (n_x . n_y) u v``;
    this returns ``U`` and ``(s/c)^2 U``.
    """
    k = helmholtz_kernels(xdiff, n_x, n_y, s, mat)
    return {"U": k["U"], "k2U": (complex(s) / mat.c) ** 2 * k["U"]}


# ---------------------------------------------------------------------------
# elastic kernel


@nb.njit(cache=True)
def _h_and_dh(z, c1, c2):
    if abs(z) < _SERIES_RADIUS:
        h = 0j
        dh = 0j
        zp = 1.0 + 0j  # z^(n-2)
        zq = 1.0 + 0j  # z^(n-3)
        fact = 2.0
        i1 = 1.0 / (c1 * c1)
        i2 = 1.0 / (c2 * c2)
        for n in range(2, _SERIES_TERMS + 2):
            coef = (1.0 - n) / fact * (i1 - i2)
            if n % 2 == 1:
                coef = -coef
            h += coef * zp
            if n >= 3:
                dh += coef * (n - 2) * zq
            zq = zp
            zp *= z
            fact *= n + 1
            i1 /= c1
            i2 /= c2
        return h, dh
    e1 = np.exp(-z / c1)
    e2 = np.exp(-z / c2)
    h = e1 * (1.0 / (c1 * z) + 1.0 / (z * z)) - e2 * (1.0 / (c2 * z) + 1.0 / (z * z))
    dh = (e1 * (-1.0 / (c1 * c1 * z) - 2.0 / (c1 * z * z) - 2.0 / (z * z * z))
          - e2 * (-1.0 / (c2 * c2 * z) - 2.0 / (c2 * z * z) - 2.0 / (z * z * z)))
    return h, dh


@nb.njit(cache=True)
def _elasto_AB(r, s, rho, c1, c2):
    z = s * r
    h, dh = _h_and_dh(z, c1, c2)
    E1 = np.exp(-s * r / c1)
    E2 = np.exp(-s * r / c2)
    pre = 1.0 / (FOUR_PI * rho * r)
    A = pre * (E2 / (c2 * c2) - h)
    B = pre * (3.0 * h + E1 / (c1 * c1) - E2 / (c2 * c2))
    Ap = pre * (-s / c2 * E2 / (c2 * c2) - s * dh) - A / r
    Bp = pre * (3.0 * s * dh - s / c1 * E1 / (c1 * c1) + s / c2 * E2 / (c2 * c2)) - B / r
    return A, B, Ap, Bp


@nb.njit(cache=True)
def _elasto_fill(g, n, r, A, B, Ap, Bp, lam, mu, sign, U, T):
    # U[i, j] and T[i, j] = sign * (traction component j of column i)
    gn = g[0] * n[0] + g[1] * n[1] + g[2] * n[2]
    a1 = Ap + B / r
    a2 = 2.0 * (Bp - 2.0 * B / r)
    a3 = 2.0 * B / r
    dv = Ap + Bp + 2.0 * B / r
    for i in range(3):
        for j in range(3):
            dij = 1.0 if i == j else 0.0
            U[i, j] = A * dij + B * g[i] * g[j]
            T[i, j] = sign * (lam * n[j] * g[i] * dv
                              + mu * (a1 * gn * dij + a2 * g[i] * g[j] * gn
                                      + a1 * n[i] * g[j] + a3 * n[j] * g[i]))


@nb.njit(cache=True)
def elasto_pointwise(X, Y, N, s, rho, c1, c2, lam, mu, at_y, out_u, out_t):
    """Elastic kernels for matched pairs.

    With ``at_y`` the traction is taken at ``y`` with normal ``N[p]`` (double
    layer, ``out_t[p, i, j]`` = component ``j`` for a unit force along ``i``);
    otherwise at ``x`` (adjoint double layer).
    """
    g = np.empty(3)
    n = np.empty(3)
    for p in range(X.shape[0]):
        r = 0.0
        for k in range(3):
            g[k] = X[p, k] - Y[p, k]
            r += g[k] * g[k]
        r = math.sqrt(r)
        for k in range(3):
            g[k] /= r
            n[k] = N[p, k]
        A, B, Ap, Bp = _elasto_AB(r, s, rho, c1, c2)
        _elasto_fill(g, n, r, A, B, Ap, Bp, lam, mu, -1.0 if at_y else 1.0, out_u[p], out_t[p])


@nb.njit(cache=True)
def elasto_matrix(X, Y, NY, s, rho, c1, c2, lam, mu, out_u, out_t):
    """Elastic single and double layer kernels for all pairs ``(X[i], Y[j])``."""
    g = np.empty(3)
    n = np.empty(3)
    for i in range(X.shape[0]):
        for j in range(Y.shape[0]):
            r = 0.0
            for k in range(3):
                g[k] = X[i, k] - Y[j, k]
                r += g[k] * g[k]
            r = math.sqrt(r)
            for k in range(3):
                g[k] /= r
                n[k] = NY[j, k]
            A, B, Ap, Bp = _elasto_AB(r, s, rho, c1, c2)
            _elasto_fill(g, n, r, A, B, Ap, Bp, lam, mu, -1.0, out_u[i, j], out_t[i, j])


def elasto_kernels(xdiff, n_x, n_y, s: complex, mat: Material = ELASTIC) -> dict:
    """Elastic kernels for one pair with ``xdiff = x - y``.

    ``T_y[k, l]`` is component ``k`` of the traction at ``y`` (normal
    ``n_y``) of the displacement field ``U[:, l]``; ``T_x`` is the analogue at
    ``x`` with normal ``n_x``.
    """
    xdiff = np.asarray(xdiff, float)
    if float(np.linalg.norm(xdiff)) == 0.0:
        raise KernelDomainError("kernel evaluated at r = 0")
    args = (complex(s), mat.rho, mat.c1, mat.c2, mat.lam, mat.mu)
    X = xdiff[None].copy()
    Y = np.zeros((1, 3))
    U = np.zeros((1, 3, 3), complex)
    Ty = np.zeros((1, 3, 3), complex)
    Tx = np.zeros((1, 3, 3), complex)
    elasto_pointwise(X, Y, np.asarray(n_y, float)[None], *args, True, U, Ty)
    elasto_pointwise(X, Y, np.asarray(n_x, float)[None], *args, False, U, Tx)
    return {"U": U[0], "T_y": Ty[0].T.copy(), "T_x": Tx[0].T.copy()}


# ---------------------------------------------------------------------------
# weighted row blocks for collocation


@nb.njit(cache=True)
def helmholtz_rows(X, Y, NY, W, s, c, skip, want_u, want_ky, out_u, out_ky):
    """Weighted kernels ``(n_el, m, nq)`` from points ``X`` to all element points.

    ``W`` are the surface quadrature weights ``(n_el, nq)``; pairs flagged in
    ``skip[i, f]`` are set to zero.
    """
    k = s / c
    nel, nq = Y.shape[0], Y.shape[1]
    for f in range(nel):
        for i in range(X.shape[0]):
            if skip[i, f]:
                for j in range(nq):
                    if want_u:
                        out_u[f, i, j] = 0.0
                    if want_ky:
                        out_ky[f, i, j] = 0.0
                continue
            x0, x1, x2 = X[i, 0], X[i, 1], X[i, 2]
            for j in range(nq):
                d0 = Y[f, j, 0] - x0
                d1 = Y[f, j, 1] - x1
                d2 = Y[f, j, 2] - x2
                r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                u = np.exp(-k * r) / (FOUR_PI * r) * W[f, j]
                if want_u:
                    out_u[f, i, j] = u
                if want_ky:
                    up = -(1.0 / r + k) * u / r
                    out_ky[f, i, j] = up * (d0 * NY[f, j, 0] + d1 * NY[f, j, 1] + d2 * NY[f, j, 2])


@nb.njit(cache=True)
def elasto_rows(X, Y, NY, W, s, rho, c1, c2, lam, mu, skip, want_u, want_t, out_u, out_t):
    """Weighted elastic kernels ``(n_el, m, 3, 3, nq)`` (see :func:`helmholtz_rows`)."""
    nel, nq = Y.shape[0], Y.shape[1]
    g = np.empty(3)
    n = np.empty(3)
    Ub = np.empty((3, 3), dtype=np.complex128)
    Tb = np.empty((3, 3), dtype=np.complex128)
    for f in range(nel):
        for i in range(X.shape[0]):
            if skip[i, f]:
                for a in range(3):
                    for b in range(3):
                        for j in range(nq):
                            if want_u:
                                out_u[f, i, a, b, j] = 0.0
                            if want_t:
                                out_t[f, i, a, b, j] = 0.0
                continue
            for j in range(nq):
                r = 0.0
                for k in range(3):
                    g[k] = X[i, k] - Y[f, j, k]
                    r += g[k] * g[k]
                r = math.sqrt(r)
                for k in range(3):
                    g[k] /= r
                    n[k] = NY[f, j, k]
                A, B, Ap, Bp = _elasto_AB(r, s, rho, c1, c2)
                _elasto_fill(g, n, r, A, B, Ap, Bp, lam, mu, -1.0, Ub, Tb)
                w = W[f, j]
                for a in range(3):
                    for b in range(3):
                        if want_u:
                            out_u[f, i, a, b, j] = Ub[a, b] * w
                        if want_t:
                            out_t[f, i, a, b, j] = Tb[a, b] * w
