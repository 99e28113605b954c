"""Convergence study on the manufactured solution and its CSV/SVG reports."""
from __future__ import annotations

import csv
import math
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .assembly import Discretization, ParameterSet
from .estimators import error_norms, estimate
from .mesh import build_two_square_mesh
from .mms import ExactSolution, interface_residuals, random_interior_points, verify_sources_fd
from .timeloop import TimeGrid, run_time_loop

CSV_COLUMNS = ("level", "n", "h_max", "ndof", "err_d_linf", "err_J_linf", "err_u_l2", "err_J_l2",
               "ERR_e", "E_d", "E_d_dt", "E_J", "E_up", "eta_time", "eta_ok", "I_eff")
SVG_SERIES = ("ERR_e", "eta_ok", "E_d", "E_d_dt", "E_J", "E_up")


@dataclass(frozen=True)
class ConvergenceConfig:
    levels: int = 4
    n0: int = 4
    dt: float = 1e-7
    t_final: float = 5e-7
    alpha_e: float = 0.5
    jump: str = "traction"
    include_eta_data: bool = False
    initial_displacement: str = "elastic_solve"
    parallel: bool = False
    source_check_points: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("a convergence study needs at least two levels")
        if self.n0 < 1:
            raise ValueError("n0 must be a positive integer")
        TimeGrid(self.t_final, self.dt)

    @property
    def ns(self) -> list:
        return [self.n0 * 2 ** k for k in range(self.levels)]

    @property
    def params(self) -> ParameterSet:
        return ParameterSet.unit(alpha_e=self.alpha_e)


@dataclass
class ConvergenceRow:
    level: int
    n: int
    h_max: float
    ndof: int
    err_d_linf: float
    err_J_linf: float
    err_u_l2: float
    err_J_l2: float
    ERR_e: float
    E_d: float
    E_d_dt: float
    E_J: float
    E_up: float
    eta_time: float
    eta_ok: float
    I_eff: float
    wall_time: float = 0.0
    galerkin_max: float = 0.0
    solver_residual_max: float = 0.0
    div_u_l2: float = 0.0
    eta_data: float | None = None
    interface_residual: float = 0.0


class SourceCheckError(RuntimeError):
    pass


def check_sources(exact: ExactSolution, n_points: int = 100, seed: int = 0, t: float = 0.0,
                  tol: float = 1e-5, div_tol: float = 1e-10) -> dict:
    """Finite-difference gate on the manufactured sources; raises on failure."""
    pts = random_interior_points(n_points, np.random.default_rng(seed))
    r = verify_sources_fd(exact, t, pts)
    worst = {k: float(np.max(r[k] / r["scale_" + k])) for k in ("el", "J", "f")}
    worst["div"] = float(np.max(r["div"]))
    bad = [k for k in ("el", "J", "f") if worst[k] > tol]
    if worst["div"] > div_tol:
        bad.append("div")
    if bad:
        raise SourceCheckError(f"manufactured sources fail the finite-difference check: {bad} ({worst})")
    return worst


def run_level(config: ConvergenceConfig, level: int) -> ConvergenceRow:
    n = config.ns[level]
    start = time.perf_counter()
    exact = ExactSolution(config.params)
    mesh = build_two_square_mesh(n)
    disc = Discretization(mesh, exact.params)
    grid = TimeGrid(config.t_final, config.dt)
    try:
        traj = run_time_loop(disc, grid, exact.sources(), exact.fields, exact.fields,
                             initial_displacement=config.initial_displacement)
    except RuntimeError as exc:
        raise RuntimeError(f"level {level} (n={n}): {exc}") from exc
    rep = estimate(traj, exact.sources(), jump=config.jump, exact=exact,
                   include_eta_data=config.include_eta_data)
    err = error_norms(traj, exact)
    ys = np.linspace(0.0, 0.5, 2 * n + 1)
    iface = max(max(interface_residuals(exact, t, ys).values()) for t in grid.nodes)
    return ConvergenceRow(
        level=level, n=n, h_max=float(mesh.diameters.max()), ndof=disc.ndofs,
        err_d_linf=err.err_d_linf, err_J_linf=err.err_J_linf, err_u_l2=err.err_u_l2, err_J_l2=err.err_J_l2,
        ERR_e=err.ERR_e, E_d=rep.E_d, E_d_dt=rep.E_d_dt, E_J=rep.E_J, E_up=rep.E_up,
        eta_time=rep.eta_time, eta_ok=rep.eta_ok, I_eff=err.efficiency(rep.eta_ok),
        wall_time=time.perf_counter() - start, galerkin_max=max(traj.galerkin),
        solver_residual_max=max(traj.residuals), div_u_l2=err.div_u_l2, eta_data=rep.eta_data,
        interface_residual=iface,
    )


def run_convergence_study(config: ConvergenceConfig = ConvergenceConfig()) -> list:
    """One row per refinement level; refuses to start if the source gate fails."""
    if config.source_check_points:
        check_sources(ExactSolution(config.params), config.source_check_points, config.seed)
    levels = range(config.levels)
    if config.parallel:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(run_level, [config] * config.levels, levels))
    return [run_level(config, k) for k in levels]


def rates(rows, key: str) -> list:
    """Observed orders ``log2(q_coarse / q_fine)`` between consecutive rows."""
    vals = [getattr(r, key) for r in rows]
    return [math.log2(a / b) if a > 0 and b > 0 else float("nan") for a, b in zip(vals, vals[1:])]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return path


def read_csv(path) -> list:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))


def write_svg(rows, path, width: int = 640, height: int = 480) -> Path:
    """Log-log chart of the error and estimator series against ``h_max``."""
    path = Path(path)
    margin = 60
    hs = np.array([r.h_max for r in rows])
    series = {k: np.array([getattr(r, k) for r in rows]) for k in SVG_SERIES}
    pos = np.concatenate([v[v > 0] for v in series.values()])
    lx = np.log10(hs)
    ly_lo, ly_hi = np.log10(pos.min()), np.log10(pos.max())
    lx_lo, lx_hi = lx.min(), lx.max()
    if lx_hi == lx_lo:
        lx_hi = lx_lo + 1.0
    if ly_hi == ly_lo:
        ly_hi = ly_lo + 1.0

    def sx(v):
        return margin + (v - lx_lo) / (lx_hi - lx_lo) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - ly_lo) / (ly_hi - ly_lo) * (height - 2 * margin)

    colors = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height))
    ET.SubElement(svg, "rect", x=str(margin), y=str(margin), width=str(width - 2 * margin),
                  height=str(height - 2 * margin), fill="none", stroke="#888888")
    ET.SubElement(svg, "text", x=str(width // 2), y=str(height - 15), **{"text-anchor": "middle"}).text = "h_max (log)"
    ET.SubElement(svg, "text", x="15", y=str(height // 2),
                  transform=f"rotate(-90 15 {height // 2})", **{"text-anchor": "middle"}).text = "squared quantity (log)"
    for k, (name, vals) in enumerate(series.items()):
        ok = vals > 0
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lx[ok], np.log10(vals[ok])))
        ET.SubElement(svg, "polyline", points=pts, fill="none", stroke=colors[k % len(colors)],
                      **{"stroke-width": "2", "data-series": name})
        ET.SubElement(svg, "text", x=str(width - margin + 5), y=str(margin + 15 * (k + 1)),
                      fill=colors[k % len(colors)], **{"font-size": "11"}).text = name
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
    return path


def emit_report(rows, path, fmt: str = "csv") -> Path:
    if not rows:
        raise ValueError("no rows to report")
    if fmt == "csv":
        return write_csv(rows, path)
    if fmt == "svg":
        return write_svg(rows, path)
    raise ValueError(f"format must be 'csv' or 'svg', got {fmt!r}")


def rows_as_dicts(rows) -> list:
    return [asdict(r) for r in rows]


ROW_FIELDS = tuple(f.name for f in fields(ConvergenceRow))
