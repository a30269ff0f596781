"""Command-line driver for convergence studies.

Subcommands::

    igacq study <config> [--levels 0,1,2] [--degree p] [--stages m] [--output DIR]
    igacq geometry validate <file>
    igacq tableau print <m>

A config is a plain ``key = value`` file with a single ``[study]`` section.
Shipped configs live in ``igacq/configs`` and may be given by name.
"""

from __future__ import annotations

import argparse
import configparser
import io
import logging
import sys
import time
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytic
from .assembly import IndirectProblem, MixedProblem, SingularSystemError, UnsupportedOperatorError
from .cqm import CqmConfig, CqmError, butcher_radau_iia, march
from .geometry import GeometryError, MultipatchBoundary, load_multipatch, refine_uniform
from .kernels import ACOUSTIC, ELASTIC
from .verify import (BoundaryField, LevelResult, StudyResult, VerificationError, convergence_rates, emit_csv,
                     l2_boundary_error, spacetime_error)

log = logging.getLogger("igacq")

PROBLEMS = ("acoustic", "elastic")
FORMULATIONS = ("collocation", "galerkin", "indirect-slp", "indirect-dlp", "indirect-adlp", "indirect-hyp",
                "elliptic")
SCHEMES = ("collocation", "galerkin")
MAX_DESK_LEVEL = 3

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


class ConfigError(ValueError):
    """Invalid study configuration; the message names the field."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class StudyConfig:
    """One convergence study.

    ``formulation`` selects the time-domain mixed problem (``collocation`` or
    ``galerkin``), an indirect problem or the single-frequency ``elliptic``
    problem, which is discretised with ``scheme``.
    """

    name: str = "study"
    problem: str = "acoustic"
    formulation: str = "collocation"
    scheme: str = "collocation"
    geometry: str = "builtin:sphere6"
    levels: tuple[int, ...] = (0, 1, 2)
    degrees: tuple[int, ...] = (2,)
    stages: int = 3
    steps: int = 2
    dt: float = 5.0
    s: complex = 1 + 1j
    dirichlet_patches: tuple[int, ...] = (0,)
    output: str = "results"
    order: int = 10
    singular_order: int = 0
    radius: float = 0.0
    contour_factor: int = 1
    ell: int = 0

    def validate(self, allow_large: bool = False) -> "StudyConfig":
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.problem not in PROBLEMS:
            bad("problem", f"must be one of {PROBLEMS}")
        if self.formulation not in FORMULATIONS:
            bad("formulation", f"must be one of {FORMULATIONS}")
        if self.scheme not in SCHEMES:
            bad("scheme", f"must be one of {SCHEMES}")
        mode = self.scheme if self.formulation == "elliptic" else self.formulation
        if self.problem == "elastic" and mode != "collocation":
            bad("formulation", "the elastic problem supports collocation only")
        if not self.levels or any(b <= a for a, b in zip(self.levels, self.levels[1:])) or min(self.levels) < 0:
            bad("levels", "must be a nonempty increasing list of nonnegative integers")
        if max(self.levels) > MAX_DESK_LEVEL and not allow_large:
            bad("levels", f"levels above {MAX_DESK_LEVEL} need --allow-large")
        if not self.degrees or min(self.degrees) < 1:
            bad("degrees", "degrees must be positive")
        if self.stages < 1:
            bad("stages", "must be positive")
        if self.steps < 1:
            bad("steps", "must be positive")
        if self.dt <= 0:
            bad("dt", "must be positive")
        if not 0.0 <= self.radius < 1.0:
            bad("radius", "must lie in (0, 1), or be 0 for the default")
        if self.contour_factor < 1:
            bad("contour_factor", "must be at least 1")
        if self.order < 1 or self.singular_order < 0:
            bad("order", "quadrature orders must be positive")
        return self

    @property
    def time_domain(self) -> bool:
        return self.formulation != "elliptic"


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, complex):
        return repr(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(kind, text: str, name: str):
    text = text.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is complex:
            return complex(text.replace(" ", ""))
        if kind == "ints":
            return tuple(_parse_levels(text))
        return text
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {text!r}") from exc


_KINDS = {f.name: (f.type if f.type in ("int", "float", "complex", "str") else "ints") for f in fields(StudyConfig)}
_TYPES = {"int": int, "float": float, "complex": complex, "str": str, "ints": "ints"}


def _parse_levels(text: str) -> list[int]:
    """``"0,1,2"`` or ``"0-2"``."""
    out: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def parse_config(text: str) -> StudyConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax: {exc}") from exc
    if not cp.has_section("study"):
        raise ConfigError("study: missing [study] section")
    known = {f.name for f in fields(StudyConfig)}
    values = {}
    for key, raw in cp.items("study"):
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
        values[key] = _parse_value(_TYPES[_KINDS[key]], raw, key)
    return StudyConfig(**values)


def serialize_config(cfg: StudyConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["study"] = {f.name: _format_value(getattr(cfg, f.name)) for f in fields(StudyConfig)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def shipped_configs() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("igacq.configs").iterdir() if p.name.endswith(".cfg"))


def load_config(ref: str) -> StudyConfig:
    """Config from a file path or the name of a shipped config."""
    path = Path(ref)
    if path.is_file():
        return parse_config(path.read_text())
    name = ref[:-4] if ref.endswith(".cfg") else ref
    res = resources.files("igacq.configs").joinpath(name + ".cfg")
    if res.is_file():
        return parse_config(res.read_text())
    raise ConfigError(f"config: no file or shipped config named {ref!r}")


# ---------------------------------------------------------------------------
# studies


@dataclass
class StudyOutput:
    """Study tables keyed ``(degree, quantity)`` and the files written."""

    config: StudyConfig
    results: dict[tuple[int, str], StudyResult] = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)

    def table(self, degree: int, quantity: str) -> StudyResult:
        return self.results.setdefault((degree, quantity), StudyResult(quantity))

    def rates(self, degree: int, quantity: str):
        return convergence_rates(self.results[(degree, quantity)])


def _material(problem: str):
    return ELASTIC if problem == "elastic" else ACOUSTIC


def _cqm(cfg: StudyConfig, level: int) -> CqmConfig:
    N = cfg.steps * 2 ** level
    L = cfg.contour_factor * N
    return CqmConfig(N, cfg.dt / 2 ** level, cfg.stages, L=L, R=cfg.radius or None)


def _elliptic_level(cfg, out, b, p, level):
    s = complex(cfg.s)
    mat = _material(cfg.problem)
    if cfg.problem == "elastic":
        def ref(x, n):
            return analytic.laplace_elasto_reference(x, n, s, mat=mat)
    else:
        def ref(x, n):
            return analytic.laplace_acoustic_reference(x, n, s, mat=mat)
    mp = MixedProblem(b, p, cfg.scheme, cfg.problem, mat, order=cfg.order,
                      singular_order=cfg.singular_order or None)
    data = mp.project_data(lambda x, n: ref(x, n)[0], lambda x, n: ref(x, n)[1])
    res = mp.full_fields(data, mp.solve(s, data))
    sp = mp.split
    c = mp.ncomp
    u = res.dirichlet.reshape(-1, c) if c == 3 else res.dirichlet
    q = res.neumann.reshape(-1, c) if c == 3 else res.neumann
    e_d = l2_boundary_error(lambda x, n: ref(x, n)[0], BoundaryField(sp.space_d, u), b, elements=sp.N_el)
    e_n = l2_boundary_error(lambda x, n: ref(x, n)[1], BoundaryField(sp.space_n, q), b, elements=sp.D_el)
    common = dict(level=level, elements=b.n_elements, N=0, dt=0.0,
                  dofs_D=c * sp.space_d.n_dofs, dofs_N=c * sp.space_n.n_dofs)
    out.table(p, "dirichlet").add(LevelResult(error=e_d, **common))
    out.table(p, "neumann").add(LevelResult(error=e_n, **common))


def _indirect_level(cfg, out, b, p, level):
    kind = cfg.formulation.split("-", 1)[1]
    params = analytic.PulseParams(ell=cfg.ell or 13)
    cq = _cqm(cfg, level)
    ip = IndirectProblem(b, p, kind, order=cfg.order, singular_order=cfg.singular_order or 5)
    load = ip.load(lambda x, n: np.full(len(x), analytic.Y00))
    g = analytic.time_factor(cq.stage_times(), params.ell, params.c)
    dens = march(cq, ip.solve, g[..., None] * load[None, None, :])[:, -1]
    exact_t = {t: analytic.indirect_density(kind, t, params) for t in cq.step_times()}

    def exact(x, n, t):
        return np.full(len(x), exact_t[t])

    err = spacetime_error(exact, dens, ip.space, cq.dt, details=True)
    sym = march(cq, lambda s, r: r / analytic.layer_symbol(kind, s), g * analytic.Y00)[:, -1]
    sym_coeffs = np.repeat(sym[:, None], ip.space.n_dofs, axis=1)
    ref = spacetime_error(exact, sym_coeffs, ip.space, cq.dt, details=True)
    nd = ip.space.n_dofs
    common = dict(level=level, elements=b.n_elements, N=cq.N, dt=cq.dt,
                  dofs_D=nd if ip.space.continuous else 0, dofs_N=0 if ip.space.continuous else nd)
    out.table(p, "density").add(LevelResult(error=err.value, **common))
    out.table(p, "density_global").add(LevelResult(error=err.global_relative, **common))
    out.table(p, "symbol").add(LevelResult(error=ref.value, **common))
    out.table(p, "symbol_global").add(LevelResult(error=ref.global_relative, **common))


def _stage_data(proj, func, times, ncomp):
    """Projected coefficients for every stage time, ``(N, m, n_dofs * ncomp)``."""
    x, n = proj.points()
    vals = np.stack([func(x, n, t) for t in times.ravel()], axis=-1)  # (P[, 3], K)
    coeffs = proj.project_values(vals)  # (n_dofs[, 3], K)
    coeffs = coeffs.reshape(-1, coeffs.shape[-1]).T
    return coeffs.reshape(times.shape + (-1,))


def _mixed_level(cfg, out, b, p, level):
    mat = _material(cfg.problem)
    cq = _cqm(cfg, level)
    if cfg.problem == "elastic":
        params = analytic.PulseParams()

        def ref(x, n, t):
            return analytic.elasto_reference(x, n, t, params, mat)
    else:
        params = analytic.PulseParams(ell=cfg.ell or 9)

        def ref(x, n, t):
            return analytic.acoustic_reference(x, n, t, params)

    mp = MixedProblem(b, p, cfg.formulation, cfg.problem, mat, order=cfg.order,
                      singular_order=cfg.singular_order or None)
    c = mp.ncomp
    times = cq.stage_times()
    gd = _stage_data(mp.proj_d, lambda x, n, t: ref(x, n, t)[0], times, c)
    gn = _stage_data(mp.proj_n, lambda x, n, t: ref(x, n, t)[1], times, c)
    data = np.concatenate([gd, gn], axis=-1)
    unknowns = march(cq, mp.solve, data)[:, -1]  # (N, n_unknowns)
    res = mp.full_fields(data[:, -1].T, unknowns.T)
    sp = mp.split
    u = res.dirichlet.real.T.reshape(cq.N, sp.space_d.n_dofs, c)
    q = res.neumann.real.T.reshape(cq.N, sp.space_n.n_dofs, c)
    if c == 1:
        u, q = u[..., 0], q[..., 0]
    e_d = spacetime_error(lambda x, n, t: ref(x, n, t)[0], u, sp.space_d, cq.dt, elements=sp.N_el, details=True)
    e_n = spacetime_error(lambda x, n, t: ref(x, n, t)[1], q, sp.space_n, cq.dt, elements=sp.D_el, details=True)
    common = dict(level=level, elements=b.n_elements, N=cq.N, dt=cq.dt,
                  dofs_D=c * sp.space_d.n_dofs, dofs_N=c * sp.space_n.n_dofs)
    out.table(p, "dirichlet").add(LevelResult(error=e_d.value, **common))
    out.table(p, "neumann").add(LevelResult(error=e_n.value, **common))
    out.table(p, "dirichlet_global").add(LevelResult(error=e_d.global_relative, **common))
    out.table(p, "neumann_global").add(LevelResult(error=e_n.global_relative, **common))


def run_study(cfg: StudyConfig, output: str | Path | None = None, allow_large: bool = False) -> StudyOutput:
    """Run every degree and level of a study and write one CSV per table.

    Files are named ``<name>_p<degree>_<quantity>.csv`` inside ``output``
    (``cfg.output`` by default); pass ``output=""`` to skip writing.
    """
    cfg.validate(allow_large)
    base = load_multipatch(cfg.geometry, cfg.dirichlet_patches)
    result = StudyOutput(cfg)
    if cfg.formulation == "elliptic":
        step = _elliptic_level
    elif cfg.formulation.startswith("indirect-"):
        step = _indirect_level
    else:
        step = _mixed_level
    for p in cfg.degrees:
        for level in cfg.levels:
            t0 = time.perf_counter()
            b = refine_uniform(base, level)
            try:
                step(cfg, result, b, p, level)
            except (SingularSystemError, CqmError, VerificationError) as exc:
                raise type(exc)(f"{cfg.name} p={p} level={level}: {exc}") from exc
            log.info("%s p=%d level=%d done in %.1f s", cfg.name, p, level, time.perf_counter() - t0)
    target = cfg.output if output is None else output
    if target:
        d = Path(target)
        d.mkdir(parents=True, exist_ok=True)
        for (p, quantity), tab in sorted(result.results.items()):
            path = d / f"{cfg.name}_p{p}_{quantity}.csv"
            emit_csv(tab, path)
            result.files.append(path)
    return result


# ---------------------------------------------------------------------------
# command line


def _set_threads(n: int | None) -> None:
    if not n:
        return
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _cmd_study(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.levels:
        changes["levels"] = tuple(_parse_levels(args.levels))
    if args.degree:
        changes["degrees"] = (args.degree,)
    if args.stages:
        changes["stages"] = args.stages
    if args.output:
        changes["output"] = args.output
    cfg = replace(cfg, **changes)
    _set_threads(args.threads)
    res = run_study(cfg, allow_large=args.allow_large)
    for (p, quantity), tab in sorted(res.results.items()):
        errs = " ".join(f"{e:.3e}" for e in tab.errors)
        rates = ""
        if len(tab.rows) > 1:
            pair, fit = convergence_rates(tab)
            rates = " rates " + " ".join(f"{r:.2f}" for r in pair) + f" fit {fit:.2f}"
        print(f"p={p} {quantity}: {errs}{rates}")
    for f in res.files:
        print(f"wrote {f}")
    return EXIT_OK


def _cmd_geometry(args) -> int:
    b: MultipatchBoundary = load_multipatch(args.file)
    area = _boundary_area(b)
    print(f"patches {len(b.patches)} elements {b.n_elements} interfaces {len(b.interfaces)} "
          f"degree {b.degree} area {area:.12g}")
    return EXIT_OK


def _boundary_area(b: MultipatchBoundary) -> float:
    from .assembly import element_quadrature

    return float(element_quadrature(b, 8).wJ.sum())


def _cmd_tableau(args) -> int:
    tab = butcher_radau_iia(args.m)
    np.set_printoptions(precision=16, suppress=False)
    print(f"Radau IIA, {tab.stages} stages, order {tab.order}, stage order {tab.stage_order}")
    print("A =")
    print(tab.A)
    print("b =", tab.b)
    print("c =", tab.c)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="igacq", description="IGA boundary elements with convolution quadrature")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="run a convergence study")
    st.add_argument("config", help="config file or shipped config name")
    st.add_argument("--levels", help="levels, e.g. 0,1,2 or 0-2")
    st.add_argument("--degree", type=int, help="single spline degree")
    st.add_argument("--stages", type=int, help="Radau IIA stages")
    st.add_argument("--threads", type=int, help="cap on worker threads")
    st.add_argument("--output", help="output directory for CSV files")
    st.add_argument("--allow-large", action="store_true", help=f"permit levels above {MAX_DESK_LEVEL}")
    st.set_defaults(func=_cmd_study)

    ge = sub.add_parser("geometry", help="geometry utilities")
    gsub = ge.add_subparsers(dest="action", required=True)
    gv = gsub.add_parser("validate", help="load and check a multipatch file")
    gv.add_argument("file")
    gv.set_defaults(func=_cmd_geometry)

    tb = sub.add_parser("tableau", help="Butcher tableaux")
    tsub = tb.add_subparsers(dest="action", required=True)
    tp = tsub.add_parser("print", help="print the Radau IIA tableau")
    tp.add_argument("m", type=int)
    tp.set_defaults(func=_cmd_tableau)
    return ap


def _category(exc: BaseException) -> tuple[str, int]:
    if isinstance(exc, ConfigError):
        return "config", EXIT_CONFIG
    if isinstance(exc, GeometryError):
        return "geometry", EXIT_GEOMETRY
    if isinstance(exc, (SingularSystemError, CqmError, VerificationError, UnsupportedOperatorError,
                        ArithmeticError)):
        return "numeric", EXIT_NUMERIC
    if isinstance(exc, OSError):
        return "io", EXIT_IO
    return "internal", EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # reported with a machine-readable category
        cat, code = _category(exc)
        print(f"error[{cat}]: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
