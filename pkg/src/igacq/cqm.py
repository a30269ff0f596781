"""Runge-Kutta convolution quadrature with Radau IIA methods.

A causal convolution ``u = f(d/dt) g`` is approximated on ``N`` steps of
size ``dt`` by evaluating the transfer function ``f(s)`` at the eigenvalues
of ``Delta(z) / dt`` for ``z`` on a circle of radius ``R``:

    Delta(z) = (A + z / (1 - z) 1 b^T)^{-1}.

Stage samples are transformed by a weighted DFT, solved independently per
frequency and transformed back. Real data give conjugate-symmetric spectra,
so only ``floor(L/2) + 1`` frequencies are solved.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import mpmath as mp
import numpy as np

COND_LIMIT = 1e12
MAX_RETRIES = 3


class CqmError(ValueError):
    """Invalid convolution quadrature configuration."""


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def stages(self) -> int:
        return len(self.c)

    @property
    def order(self) -> int:
        return 2 * self.stages - 1

    @property
    def stage_order(self) -> int:
        return self.stages


@lru_cache(maxsize=None)
def _radau_mp(m: int, dps: int = 50):
    with mp.workdps(dps):
        def shifted_legendre(n):
            # coefficients of P_n(2x - 1), lowest power first
            return [(-1) ** (n + k) * mp.binomial(n, k) * mp.binomial(n + k, k) for k in range(n + 1)]

        pm = shifted_legendre(m)
        pl = shifted_legendre(m - 1) + [mp.mpf(0)]
        poly = [a - b for a, b in zip(pm, pl)]
        roots = mp.polyroots(poly[::-1], maxsteps=200, extraprec=2 * dps)
        c = sorted(mp.re(r) for r in roots)
        c[-1] = mp.mpf(1)
        V = mp.matrix(m, m)
        for j in range(m):
            for k in range(m):
                V[j, k] = c[j] ** k
        Vi = V ** -1
        A = mp.matrix(m, m)
        for i in range(m):
            for j in range(m):
                A[i, j] = sum(c[i] ** (k + 1) / (k + 1) * Vi[k, j] for k in range(m))
        b = [sum(mp.mpf(1) / (k + 1) * Vi[k, j] for k in range(m)) for j in range(m)]
        return ([[float(A[i, j]) for j in range(m)] for i in range(m)],
                [float(v) for v in b], [float(v) for v in c])


def butcher_radau_iia(m: int) -> ButcherTableau:
    """Radau IIA tableau with ``m`` stages (collocation at right Radau points)."""
    if not isinstance(m, (int, np.integer)) or m < 1 or m > 5:
        raise CqmError("Radau IIA tableaux are provided for 1 <= m <= 5")
    if m == 1:
        return ButcherTableau(np.array([[1.0]]), np.array([1.0]), np.array([1.0]))
    A, b, c = _radau_mp(int(m))
    return ButcherTableau(np.array(A), np.array(b), np.array(c))


def stability_function(tab: ButcherTableau, z: complex) -> complex:
    """``R(z) = 1 + z b^T (I - z A)^{-1} 1``."""
    m = tab.stages
    one = np.ones(m)
    return complex(1.0 + z * tab.b @ np.linalg.solve(np.eye(m) - z * tab.A, one))


def characteristic_delta(tab: ButcherTableau, z: complex) -> np.ndarray:
    """``Delta(z) = (A + z / (1 - z) 1 b^T)^{-1}`` for ``|z| < 1``."""
    if abs(z) >= 1.0:
        raise CqmError("characteristic function needs |z| < 1")
    m = tab.stages
    M = tab.A + (z / (1.0 - z)) * np.outer(np.ones(m), tab.b)
    return np.linalg.inv(M.astype(complex))


@dataclass(frozen=True)
class CqmConfig:
    """Time grid and contour parameters. ``L`` defaults to ``N`` and ``R`` to
    ``eps^(1 / (2N))``."""

    N: int
    dt: float
    stages: int = 3
    L: int | None = None
    R: float | None = None
    eps: float = 1e-14

    def __post_init__(self):
        if self.N < 1:
            raise CqmError("N must be positive")
        if self.dt <= 0:
            raise CqmError("dt must be positive")
        if self.L is not None and self.L < self.N:
            raise CqmError("L must be at least N")
        if self.R is not None and not (0.0 < self.R < 1.0):
            raise CqmError("contour radius must lie in (0, 1)")

    @property
    def n_freq(self) -> int:
        return self.L if self.L is not None else self.N

    @property
    def radius(self) -> float:
        return self.R if self.R is not None else self.eps ** (1.0 / (2.0 * self.N))

    @property
    def tableau(self) -> ButcherTableau:
        return butcher_radau_iia(self.stages)

    def stage_times(self) -> np.ndarray:
        """Stage times ``t_n + c_j dt``, shape ``(N, m)``."""
        c = self.tableau.c
        return (np.arange(self.N)[:, None] + c[None, :]) * self.dt

    def step_times(self) -> np.ndarray:
        """Step end points ``(n + 1) dt`` read from the last stage."""
        return (np.arange(self.N) + 1.0) * self.dt


@dataclass(frozen=True)
class FrequencyProblem:
    """Decoupled stage system ``Delta(R zeta^l) / dt = E diag(s) E^{-1}``."""

    index: int
    s: np.ndarray
    E: np.ndarray
    Einv: np.ndarray
    radius: float


def _spectral(tab, z, dt):
    M = characteristic_delta(tab, z) / dt
    lam, E = np.linalg.eig(M)
    return lam, E, np.linalg.cond(E)


def frequency_problems(cfg: CqmConfig) -> list[FrequencyProblem]:
    """Laplace parameters for frequencies ``0..floor(L/2)``.

    If an eigenvector basis is ill conditioned the radius is enlarged by 1%
    and the whole set recomputed (at most three times).
    """
    tab = cfg.tableau
    L = cfg.n_freq
    R = cfg.radius
    for _attempt in range(MAX_RETRIES + 1):
        probs = []
        worst = 0.0
        for l in range(L // 2 + 1):
            z = R * np.exp(2j * np.pi * l / L)
            lam, E, cond = _spectral(tab, z, cfg.dt)
            worst = max(worst, cond)
            probs.append(FrequencyProblem(l, lam, E, np.linalg.inv(E), R))
        if worst <= COND_LIMIT:
            return probs
        R = min(R * 1.01, 1.0 - 1e-12)
    raise CqmError(f"stage eigenbasis condition {worst:.2e} exceeds {COND_LIMIT:.0e}; choose another R")


def weighted_dft(x: np.ndarray, R: float, L: int, inverse: bool = False, n_out: int | None = None,
                 use_fft: bool | None = None) -> np.ndarray:
    """Weighted transform pair along axis 0.

    Forward: ``X_l = sum_n R^n x_n zeta^(n l)``, ``l = 0..L-1``.
    Inverse: ``x_n = R^(-n) / L sum_l X_l zeta^(-n l)``, ``n = 0..n_out-1``.
    The FFT is used when the lengths agree; otherwise the sums are direct.
    """
    x = np.asarray(x)
    if inverse:
        n_out = L if n_out is None else n_out
        if use_fft is None:
            use_fft = x.shape[0] == L
        if use_fft:
            y = np.fft.fft(x, axis=0)[:n_out] / L
        else:
            n = np.arange(n_out)
            l = np.arange(x.shape[0])
            W = np.exp(-2j * np.pi * np.outer(n, l) / L)
            y = np.tensordot(W, x, axes=(1, 0)) / L
        scale = R ** (-np.arange(n_out, dtype=float))
        return y * scale.reshape((-1,) + (1,) * (x.ndim - 1))
    N = x.shape[0]
    scale = R ** np.arange(N, dtype=float)
    y = x * scale.reshape((-1,) + (1,) * (x.ndim - 1))
    if use_fft is None:
        use_fft = N == L
    if use_fft:
        pad = np.zeros((L,) + x.shape[1:], dtype=complex)
        pad[:N] = y
        return np.fft.ifft(pad, axis=0) * L
    l = np.arange(L)
    W = np.exp(2j * np.pi * np.outer(l, np.arange(N)) / L)
    return np.tensordot(W, y, axes=(1, 0))


def march(cfg: CqmConfig, solver: Callable[[complex, np.ndarray], np.ndarray], data: np.ndarray,
          problems: list[FrequencyProblem] | None = None, full_spectrum: bool = False) -> np.ndarray:
    """Apply ``f(d/dt)`` to stage-sampled data.

    Parameters
    ----------
    cfg : CqmConfig
    solver : callable
        ``solver(s, rhs)`` returns ``f(s) rhs`` for a complex vector ``rhs``.
    data : ndarray, shape (N, m) or (N, m, k)
        Real data sampled at the stage times.
    full_spectrum : bool
        Solve every frequency instead of using conjugate symmetry.

    Returns
    -------
    ndarray, shape (N, m, k_out)
        Stage values of the result; ``[:, -1]`` are step end values.
    """
    data = np.asarray(data, float)
    scalar = data.ndim == 2
    if scalar:
        data = data[..., None]
    N, m = data.shape[:2]
    if N != cfg.N or m != cfg.stages:
        raise CqmError(f"data shape {data.shape[:2]} does not match (N, m) = ({cfg.N}, {cfg.stages})")
    if problems is None:
        problems = frequency_problems(cfg)
    R = problems[0].radius
    L = cfg.n_freq
    tab = cfg.tableau
    hat = weighted_dft(data, R, L)
    if full_spectrum:
        out = None
        for l in range(L):
            if l < len(problems):
                pr = problems[l]
                s, E, Ei = pr.s, pr.E, pr.Einv
            else:
                s, E, _ = _spectral(tab, R * np.exp(2j * np.pi * l / L), cfg.dt)
                Ei = np.linalg.inv(E)
            res = _solve_stages(solver, s, E, Ei, hat[l])
            if out is None:
                out = np.zeros((L,) + res.shape, complex)
            out[l] = res
        vals = weighted_dft(out, R, L, inverse=True, n_out=N).real
    else:
        out = None
        for pr in problems:
            res = _solve_stages(solver, pr.s, pr.E, pr.Einv, hat[pr.index])
            if out is None:
                out = np.zeros((len(problems),) + res.shape, complex)
            out[pr.index] = res
        w = np.full(len(problems), 2.0)
        w[0] = 1.0
        if L % 2 == 0:
            w[-1] = 1.0
        n = np.arange(N)
        l = np.arange(len(problems))
        W = w[None, :] * np.exp(-2j * np.pi * np.outer(n, l) / L)
        vals = np.tensordot(W, out, axes=(1, 0)).real / L
        vals *= (R ** (-n.astype(float))).reshape((-1,) + (1,) * (vals.ndim - 1))
    return vals[..., 0] if scalar and vals.shape[-1] == 1 else vals


def _solve_stages(solver, s, E, Ei, ghat):
    # ghat: (m, k) -> decoupled (m, k) -> solutions recombined
    gs = np.tensordot(Ei, ghat, axes=(1, 0))
    sols = [np.asarray(solver(complex(s[j]), gs[j]), complex) for j in range(len(s))]
    return np.tensordot(E, np.stack(sols), axes=(1, 0))
