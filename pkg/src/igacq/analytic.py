"""Closed-form reference solutions.

* the spherically symmetric excitation ``g(t) Y00`` on the unit sphere and the
  exact layer densities of the four indirect problems, with their Laplace
  symbols;
* the retarded acoustic bump and its flux;
* Laplace-domain point-source solutions for the elliptic studies;
* the time-domain elastodynamic Stokes solution driven by a Gaussian pulse.

Indirect problems on the unit sphere (``c = 1``, interior side):

    V psi = g,   (1/2 + K) phi = g,   (-1/2 + K') psi = g,   -W phi = g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from .kernels import Material, elasto_pointwise, helmholtz_pointwise

Y00 = 1.0 / (2.0 * math.sqrt(math.pi))
INDIRECT_KINDS = ("slp", "dlp", "adlp", "hyp")


@dataclass(frozen=True)
class PulseParams:
    """Parameters of the reference solutions."""

    ell: int = 13
    c: float = 1.0
    a: float = 0.1
    b: float = 100.0
    source: tuple = (1.5, 1.5, 1.5)
    direction: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be a positive integer")
        if self.a <= 0:
            raise ValueError("pulse parameter a must be positive")


# ---------------------------------------------------------------------------
# spherical excitation and indirect densities


def time_factor(t, ell: int, c: float = 1.0, derivative: bool = False):
    """``(c t)^ell exp(-c t)`` for ``t >= 0`` and zero before."""
    t = np.asarray(t, float)
    tp = np.maximum(c * t, 0.0)
    val = tp ** ell * np.exp(-tp)
    if not derivative:
        return np.where(t > 0, val, 0.0)
    der = c * (ell * tp ** (ell - 1) - tp ** ell) * np.exp(-tp)
    return np.where(t > 0, val, 0.0), np.where(t > 0, der, 0.0)


def excitation_g(t, params: PulseParams = PulseParams()):
    """Boundary datum ``g(t) Y00`` and its time derivative."""
    g, dg = time_factor(t, params.ell, params.c, derivative=True)
    return Y00 * g, Y00 * dg


def _ckl(k: int, l: int) -> float:
    return math.comb(k, l - 1) * 2.0 ** (k - l + 1) / math.factorial(k - l + 1)


def _integrate(fun, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    val, _ = quad(fun, a, b, epsabs=1e-12, epsrel=1e-13, limit=200)
    return val


def indirect_density(kind: str, t: float, params: PulseParams = PulseParams()) -> float:
    """Exact density of an indirect problem on the unit sphere.

    ``kind`` is one of ``slp``, ``dlp``, ``adlp``, ``hyp``. The value
    includes the ``Y00`` normalisation (the constant ``1/sqrt(pi)`` is
    ``2 Y00``).
    """
    if kind not in INDIRECT_KINDS:
        raise ValueError(f"unknown indirect kind '{kind}'")
    t = float(t)
    if t <= 0.0:
        return 0.0
    ell = params.ell

    def g(u):
        return float(time_factor(u, ell))

    def dg(u):
        return float(time_factor(u, ell, derivative=True)[1])

    kmax = int(math.floor(t / 2.0))
    pre = 1.0 / math.sqrt(math.pi)
    if kind == "slp":
        return pre * sum(dg(t - 2 * k) for k in range(kmax + 1))
    if kind == "adlp":
        total = 0.0
        for k in range(kmax + 1):
            total -= g(t - 2 * k)
            total += _integrate(lambda tau: math.exp(2 * k - tau) * g(t - tau), 2 * k, t)
        return pre * total
    if kind == "dlp":
        total = 0.0
        for k in range(kmax + 1):
            coeffs = [(l, _ckl(k, l)) for l in range(1, k + 2)]

            def integrand(tau, k=k, coeffs=coeffs):
                u = tau - 2 * k
                poly = sum(c * u ** (k - l + 1) for l, c in coeffs)
                return poly * math.exp(u) * dg(t - tau)

            total += (-1) ** k * _integrate(integrand, 2 * k, t)
        return pre * total
    # hyp
    total = -_integrate(lambda tau: g(t - tau) * math.cosh(tau), 0.0, t)
    for k in range(1, kmax + 1):
        coeffs = [(l, (k - l + 1) / (2.0 * k) * _ckl(k, l)) for l in range(1, k + 1)]

        def integrand(tau, k=k, coeffs=coeffs):
            u = tau - 2 * k
            poly = sum(c * u ** (k - l + 1) for l, c in coeffs)
            return poly * math.exp(u) * dg(t - tau)

        total += (-1) ** (k + 1) * _integrate(integrand, 2 * k, t)
    return pre * total


def layer_symbol(kind: str, s: complex) -> complex:
    """Eigenvalue of the indirect operator on constants on the unit sphere.

    The operators are ``V``, ``1/2 + K``, ``-1/2 + K'`` and ``-W`` (wave
    speed 1).
    """
    s = complex(s)
    e = np.exp(-2.0 * s)
    if kind == "slp":
        return (1.0 - e) / (2.0 * s)
    if kind == "dlp":
        return (s - 1.0 + (s + 1.0) * e) / (2.0 * s)
    if kind == "adlp":
        return -(s + 1.0) * (1.0 - e) / (2.0 * s)
    if kind == "hyp":
        return -(s + 1.0) * (s - 1.0 + (s + 1.0) * e) / (2.0 * s)
    raise ValueError(f"unknown indirect kind '{kind}'")


def single_layer_symbol(s: complex) -> complex:
    return layer_symbol("slp", s)


def double_layer_symbol(s: complex) -> complex:
    """Eigenvalue of ``K`` (and ``K'``) on constants."""
    return layer_symbol("dlp", s) - 0.5


def hypersingular_symbol(s: complex) -> complex:
    """Eigenvalue of ``W`` on constants."""
    return -layer_symbol("hyp", s)


# ---------------------------------------------------------------------------
# acoustic bump


def acoustic_reference(x, n, t, params: PulseParams = PulseParams(ell=9)) -> tuple[np.ndarray, np.ndarray]:
    """Retarded bump ``p = H(tau) tau^ell exp(-tau) / r`` with ``tau = t - r/c``.

    Returns pressure and flux ``dp/dn`` at points ``x`` (``(P, 3)``) with
    normals ``n``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    n = np.atleast_2d(np.asarray(n, float))
    d = x - np.asarray(params.source, float)
    r = np.linalg.norm(d, axis=1)
    if np.any(r <= 0.0):
        raise ValueError("reference evaluated at the source point")
    tau = t - r / params.c
    f, df = time_factor(tau, params.ell, 1.0, derivative=True)
    p = f / r
    dpdr = -df / (params.c * r) - f / r ** 2
    q = dpdr * np.einsum("pk,pk->p", d, n) / r
    return p, q


def laplace_acoustic_reference(x, n, s: complex, source=(1.5, 1.5, 1.5),
                               mat: Material = Material()) -> tuple[np.ndarray, np.ndarray]:
    """Point-source solution ``U(x - s_pt)`` and its normal derivative."""
    x = np.atleast_2d(np.asarray(x, float))
    n = np.ascontiguousarray(np.atleast_2d(np.asarray(n, float)))
    src = np.broadcast_to(np.asarray(source, float), x.shape).copy()
    p = np.empty(len(x), complex)
    q = np.empty(len(x), complex)
    qy = np.empty(len(x), complex)
    helmholtz_pointwise(np.ascontiguousarray(x), src, n, n, complex(s), float(mat.c), p, qy, q)
    return p, q


def laplace_elasto_reference(x, n, s: complex, source=(1.5, 1.5, 1.5), direction=(1.0, 1.0, 1.0),
                             mat: Material = Material()) -> tuple[np.ndarray, np.ndarray]:
    """Displacement ``U(x - s_pt) d`` and its traction at ``x``."""
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, float)))
    n = np.ascontiguousarray(np.atleast_2d(np.asarray(n, float)))
    src = np.broadcast_to(np.asarray(source, float), x.shape).copy()
    d = np.asarray(direction, float)
    U = np.empty((len(x), 3, 3), complex)
    T = np.empty((len(x), 3, 3), complex)
    elasto_pointwise(x, src, n, complex(s), mat.rho, mat.c1, mat.c2, mat.lam, mat.mu, False, U, T)
    # T[p, l, k] is component k for the force direction l
    return U @ d, np.einsum("plk,l->pk", T, d)


# ---------------------------------------------------------------------------
# elastodynamic Stokes solution


def _pulse(tau, a, b, derivative=False):
    f = np.exp(-a * (tau - a * b) ** 2)
    if derivative:
        return f, -2.0 * a * (tau - a * b) * f
    return f


def elasto_integral_I(r, t, params: PulseParams = PulseParams(), mat: Material = Material()):
    """``int_{1/c1}^{1/c2} lambda F(t - lambda r) d lambda`` in closed form."""
    a, b = params.a, params.b
    c1, c2 = mat.c1, mat.c2
    r = np.asarray(r, float)
    q1 = math.sqrt(a) / c1 * (a * b * c1 + r - c1 * t)
    q2 = math.sqrt(a) / c2 * (a * b * c2 + r - c2 * t)
    return 1.0 / (2.0 * a * r ** 2) * (
        np.exp(-q1 ** 2) - np.exp(-q2 ** 2)
        + math.sqrt(a * math.pi) * (a * b - t) * (erf(q1) - erf(q2)))


def _stokes_AB(r, t, params: PulseParams, mat: Material):
    c1, c2, rho = mat.c1, mat.c2, mat.rho
    I = elasto_integral_I(r, t, params, mat)
    F1, D1 = _pulse(t - r / c1, params.a, params.b, True)
    F2, D2 = _pulse(t - r / c2, params.a, params.b, True)
    dI = (F2 / c2 ** 2 - F1 / c1 ** 2) / r - 2.0 * I / r
    pre = 1.0 / (4.0 * math.pi * rho)
    A = pre * (-I / r + F2 / (c2 ** 2 * r))
    B = pre * (3.0 * I / r + F1 / (c1 ** 2 * r) - F2 / (c2 ** 2 * r))
    dF1 = -D1 / c1
    dF2 = -D2 / c2
    Ap = pre * (I / r ** 2 - dI / r + dF2 / (c2 ** 2 * r) - F2 / (c2 ** 2 * r ** 2))
    Bp = pre * (-3.0 * I / r ** 2 + 3.0 * dI / r + dF1 / (c1 ** 2 * r) - F1 / (c1 ** 2 * r ** 2)
                - dF2 / (c2 ** 2 * r) + F2 / (c2 ** 2 * r ** 2))
    return A, B, Ap, Bp


def elasto_reference(x, n, t, params: PulseParams = PulseParams(), mat: Material = Material()):
    """Displacement ``U(x - s_pt, t) d`` and traction at ``x`` with normal ``n``.

    ``U = A(r, t) I + B(r, t) g g`` is the Stokes solution of a point force
    with the Gaussian time profile ``F``; the traction follows from Hooke's
    law applied to the closed-form radial derivatives of ``A`` and ``B``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    n = np.atleast_2d(np.asarray(n, float))
    d = np.asarray(params.direction, float)
    rv = x - np.asarray(params.source, float)
    r = np.linalg.norm(rv, axis=1)
    if np.any(r <= 0.0):
        raise ValueError("reference evaluated at the source point")
    g = rv / r[:, None]
    A, B, Ap, Bp = _stokes_AB(r, t, params, mat)
    gd = g @ d
    u = A[:, None] * d + (B * gd)[:, None] * g
    lam, mu = mat.lam, mat.mu
    gn = np.einsum("pk,pk->p", g, n)
    nd = n @ d
    a1 = Ap + B / r
    a2 = 2.0 * (Bp - 2.0 * B / r)
    a3 = 2.0 * B / r
    dv = Ap + Bp + 2.0 * B / r
    # traction component k of the field U[:, l] d_l at x (derivatives in x)
    tr = (lam * dv * gd)[:, None] * n \
        + mu * ((a1 * gn)[:, None] * d + (a2 * gd * gn)[:, None] * g
                + (a1 * nd)[:, None] * g + (a3 * gd)[:, None] * n)
    return u, tr
