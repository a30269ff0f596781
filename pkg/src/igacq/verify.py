"""Error norms, convergence rates and CSV output of convergence studies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly.quaddata import element_quadrature, space_quadrature
from .geometry import DiscreteSpace, MultipatchBoundary

ERROR_ORDER = 20
CSV_COLUMNS = ("level", "elements", "N", "dt", "dofs_D", "dofs_N", "error", "rate")


class VerificationError(ValueError):
    """Error norm undefined for the given data."""


@dataclass(frozen=True)
class BoundaryField:
    """Coefficients of a discrete field; ``coeffs`` is ``(n_dofs[, k])``."""

    space: DiscreteSpace
    coeffs: np.ndarray


class _Sampler:
    """Quadrature points, weights and basis values on a set of elements."""

    def __init__(self, boundary: MultipatchBoundary, order: int, elements=None):
        self.elements = (np.arange(boundary.n_elements) if elements is None
                         else np.asarray(elements, int))
        eq = element_quadrature(boundary, order)
        self.eq = eq
        self.X = eq.X[self.elements].reshape(-1, 3)
        self.N = eq.N[self.elements].reshape(-1, 3)
        self.w = eq.wJ[self.elements].reshape(-1)
        self._phi: dict[int, np.ndarray] = {}

    def values(self, f: BoundaryField) -> np.ndarray:
        key = id(f.space)
        if key not in self._phi:
            self._phi[key] = space_quadrature(f.space, self.eq).phi[self.elements]
        phi = self._phi[key]
        c = np.asarray(f.coeffs)
        vals = np.einsum("epi,ei...->ep...", phi, c[f.space.idx[self.elements]])
        return vals.reshape((-1,) + c.shape[1:])

    def sq_norm(self, v: np.ndarray) -> float:
        a = np.abs(v) ** 2
        if a.ndim > 1:
            a = a.reshape(len(self.w), -1).sum(axis=1)
        return float(np.sum(a * self.w))


def _field_values(sampler: _Sampler, f) -> np.ndarray:
    if isinstance(f, BoundaryField):
        return sampler.values(f)
    return np.asarray(f(sampler.X, sampler.N))


def l2_boundary_error(f_exact: Callable, f_h, boundary: MultipatchBoundary, order: int = ERROR_ORDER,
                      elements=None) -> float:
    """Relative ``L2`` error on the boundary.

    Parameters
    ----------
    f_exact : callable
        ``f(x, n)`` on point and normal arrays ``(P, 3)``.
    f_h : BoundaryField or callable
        Approximation, discrete or given pointwise.
    order : int
        Gauss points per direction on each element.
    """
    smp = _Sampler(boundary, order, elements)
    fe = _field_values(smp, f_exact)
    fh = _field_values(smp, f_h).reshape(fe.shape)
    den = smp.sq_norm(fe)
    if den == 0.0:
        raise VerificationError("reference field has zero L2 norm")
    return math.sqrt(smp.sq_norm(fh - fe) / den)


@dataclass
class SpaceTimeError:
    """Combined error with the per-step terms it was built from.

    ``global_relative`` is ``sqrt(sum |f - f_h|^2 / sum |f|^2)`` over the same
    steps, a diagnostic that weights steps by the size of the field.
    """

    value: float
    times: np.ndarray
    relative: np.ndarray
    skipped: np.ndarray
    global_relative: float


def spacetime_error(exact: Callable, approx: np.ndarray, space: DiscreteSpace, dt: float, times=None,
                    elements=None, order: int = ERROR_ORDER, details: bool = False):
    """Discrete space-time error ``sqrt(dt * sum_n |f - f_h|^2 / |f|^2)``.

    Parameters
    ----------
    exact : callable
        ``exact(x, n, t)`` returning values at points ``(P, 3)``.
    approx : ndarray, shape (n_steps, n_dofs[, k])
        Coefficients at the times ``times`` (default ``(n + 1) dt``).
    details : bool
        Return a :class:`SpaceTimeError` instead of the value.

    Steps where the exact field has zero norm are skipped.
    """
    approx = np.asarray(approx)
    times = (np.arange(len(approx)) + 1.0) * dt if times is None else np.asarray(times, float)
    if len(times) != len(approx):
        raise VerificationError("one time per approximation step is required")
    smp = _Sampler(space.boundary, order, elements)
    rel = np.zeros(len(times))
    skipped = np.zeros(len(times), bool)
    num = den_total = 0.0
    for k, t in enumerate(times):
        fe = np.asarray(exact(smp.X, smp.N, t))
        den = smp.sq_norm(fe)
        if den == 0.0:
            skipped[k] = True
            continue
        fh = smp.values(BoundaryField(space, approx[k])).reshape(fe.shape)
        err = smp.sq_norm(fh - fe)
        rel[k] = err / den
        num += err
        den_total += den
    if skipped.all():
        raise VerificationError("exact field vanishes at every step")
    value = math.sqrt(dt * rel.sum())
    if details:
        return SpaceTimeError(value, times, np.sqrt(rel), skipped, math.sqrt(num / den_total))
    return value


# ---------------------------------------------------------------------------
# studies


@dataclass(frozen=True)
class LevelResult:
    level: int
    elements: int
    N: int
    dt: float
    dofs_D: int
    dofs_N: int
    error: float


@dataclass
class StudyResult:
    """Errors of one quantity over a refinement sequence."""

    quantity: str = "error"
    rows: list[LevelResult] = field(default_factory=list)

    def add(self, row: LevelResult) -> None:
        if self.rows and row.level <= self.rows[-1].level:
            raise VerificationError("levels must be strictly increasing")
        if not row.error > 0.0:
            raise VerificationError(f"error at level {row.level} must be positive, got {row.error}")
        self.rows.append(row)

    @property
    def levels(self) -> np.ndarray:
        return np.array([r.level for r in self.rows], int)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])


def convergence_rates(result: StudyResult | np.ndarray, levels=None) -> tuple[np.ndarray, float]:
    """Pairwise rates and the least-squares rate of ``log2`` error versus level.

    ``h`` halves per level, so a rate ``r`` means error ``~ h^r``.
    """
    if isinstance(result, StudyResult):
        errors, levels = result.errors, result.levels
    else:
        errors = np.asarray(result, float)
        levels = np.arange(len(errors)) if levels is None else np.asarray(levels, float)
    if len(errors) < 2:
        raise VerificationError("at least two levels are needed for a rate")
    le = np.log2(errors)
    lv = np.asarray(levels, float)
    pair = -(np.diff(le) / np.diff(lv))
    slope = np.polyfit(lv, le, 1)[0]
    return pair, float(-slope)


def _csv_text(result: StudyResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    prev = None
    for r in result.rows:
        rate = "" if prev is None else f"{-math.log2(r.error / prev.error) / (r.level - prev.level):.6f}"
        w.writerow([r.level, r.elements, r.N, repr(float(r.dt)), r.dofs_D, r.dofs_N, f"{r.error:.12e}", rate])
        prev = r
    return buf.getvalue()


def emit_csv(result: StudyResult, path) -> None:
    """Write the study table with a header line and LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_csv_text(result))
