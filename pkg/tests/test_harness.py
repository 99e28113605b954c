import xml.etree.ElementTree as ET

import numpy as np
import pytest

from stokesmpe import harness
from stokesmpe.harness import (CSV_COLUMNS, ConvergenceConfig, SourceCheckError, check_sources,
                               emit_report, rates, read_csv, run_convergence_study)
from stokesmpe.mms import ExactSolution


@pytest.fixture(scope="module")
def rows():
    return run_convergence_study(ConvergenceConfig(levels=2, n0=2, source_check_points=20))


def test_row_count_and_sums(rows):
    assert [r.n for r in rows] == [2, 4]
    for r in rows:
        assert r.ERR_e == pytest.approx(r.err_d_linf + r.err_J_linf + r.err_u_l2 + r.err_J_l2, rel=1e-13)
        assert r.eta_ok == pytest.approx(r.E_d + r.E_d_dt + r.E_J + r.E_up, rel=1e-13)
        assert r.I_eff == pytest.approx(r.eta_ok / r.ERR_e)
        assert r.galerkin_max <= 1e-9
        assert r.interface_residual < 1e-12


def test_csv(rows, tmp_path):
    a = emit_report(rows, tmp_path / "a.csv", "csv")
    b = emit_report(rows, tmp_path / "b.csv", "csv")
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert len(CSV_COLUMNS) == 16 and CSV_COLUMNS[-1] == "I_eff"
    back = read_csv(a)
    assert float(back[1]["ERR_e"]) == rows[1].ERR_e


def test_svg(rows, tmp_path):
    path = emit_report(rows, tmp_path / "plot.svg", "svg")
    root = ET.parse(path).getroot()
    lines = root.findall("{http://www.w3.org/2000/svg}polyline")
    assert len(lines) == len(harness.SVG_SERIES)
    assert {p.get("data-series") for p in lines} == set(harness.SVG_SERIES)


def test_report_errors(rows, tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_report(rows, tmp_path / "x.txt", "txt")
    with pytest.raises(OSError):
        emit_report(rows, tmp_path / "missing" / "x.csv")


def test_rates(rows):
    r = rates(rows, "ERR_e")
    assert len(r) == 1 and r[0] > 3


def test_config_validation():
    with pytest.raises(ValueError):
        ConvergenceConfig(levels=1)
    with pytest.raises(ValueError):
        ConvergenceConfig(dt=0.3, t_final=1.0)
    assert ConvergenceConfig().ns == [4, 8, 16, 32]


def test_source_gate(monkeypatch):
    assert check_sources(ExactSolution(), 10)["div"] <= 1e-10

    class Broken(ExactSolution):
        def f_f(self, t, x):
            return super().f_f(t, x) - 1.0

    with pytest.raises(SourceCheckError):
        check_sources(Broken(), 10)
    monkeypatch.setattr(harness, "ExactSolution", Broken)
    with pytest.raises(SourceCheckError):
        run_convergence_study(ConvergenceConfig(levels=2, n0=1))


def test_parallel_matches_serial(rows):
    par = run_convergence_study(ConvergenceConfig(levels=2, n0=2, parallel=True, source_check_points=0))
    for a, b in zip(rows, par):
        assert a.ERR_e == b.ERR_e and a.eta_ok == b.eta_ok


def test_level_failure_names_level(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("solver broke")

    monkeypatch.setattr(harness, "run_time_loop", boom)
    with pytest.raises(RuntimeError, match="level 0"):
        harness.run_level(ConvergenceConfig(levels=2, n0=1), 0)
    assert np.isnan(rates([type("R", (), {"x": 0.0})(), type("R", (), {"x": 1.0})()], "x")[0])
