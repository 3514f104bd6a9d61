import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dqpt_sim.analysis import ObservableSeries, PhaseDiagram, detect_critical_times, observable_series
from dqpt_sim.constants import TWO_PI
from dqpt_sim.hamiltonian import FieldQuenchBuilder, FieldSchedule, make_chain_geometry
from dqpt_sim.metrology import FisherSeries
from dqpt_sim.plotting import render_comparison, render_svg
from dqpt_sim.propagation import TimeGrid, evolve_static
from dqpt_sim.spin import SpinRegister, basis_state

SVG = "{http://www.w3.org/2000/svg}"


def fig2_series():
    reg = SpinRegister(2)
    b = FieldQuenchBuilder(make_chain_geometry(2, TWO_PI * 2e3), FieldSchedule.constant(100, 50), reg)
    traj = evolve_static(b(0.0), basis_state("↓↓", reg), TimeGrid.span(20e-6, 10e-9), reg)
    return observable_series(traj)


def gids(path):
    root = ET.parse(path).getroot()
    return [el.get("id") for el in root.iter() if el.get("id")]


def test_fig2_layout_and_markers(tmp_path):
    s = fig2_series()
    crit = detect_critical_times(s.p_down, s.p_up, s.times)
    path = render_svg(s, tmp_path / "f.svg", crit.switch_times)
    ids = gids(path)
    assert "trace-lambda" in ids and "trace-mz" in ids
    assert not any(i.startswith("trace-concurrence") for i in ids)
    markers = [i for i in ids if i.startswith("critical-") and i.count("-") == 1]
    assert len(markers) == len(crit.switch_times) == 5
    root = ET.parse(path).getroot()
    assert len([g for g in root.iter(SVG + "g") if (g.get("id") or "").startswith("axes_")]) == 2


def test_single_point_series_has_no_data_paths(tmp_path):
    s = ObservableSeries(np.array([0.0]), np.array([1.0]), np.array([0.0]), np.array([0.0]),
                         np.array([-0.5]), 2)
    path = render_svg(s, tmp_path / "one.svg")
    ids = gids(path)
    assert ET.parse(path).getroot().tag == SVG + "svg"
    assert not any(i.startswith("trace-") for i in ids)


def test_svg_is_byte_reproducible(tmp_path):
    s = fig2_series()
    a = render_svg(s, tmp_path / "a.svg", [2.4e-6]).read_bytes()
    b = render_svg(s, tmp_path / "b.svg", [2.4e-6]).read_bytes()
    assert a == b


def test_other_renderers(tmp_path):
    t = np.linspace(0, 1e-6, 5)
    fs = FisherSeries(t, np.full(5, 0.5), t ** 2, 1.0, 1.0, 0.0)
    assert "trace-fi" in gids(render_svg(fs, tmp_path / "fi.svg"))
    flags = np.array([[False, True], [True, True]])
    pd = PhaseDiagram(np.array([0.0, 100.0]), np.array([5.0, 50.0]), flags, np.where(flags, 1e-6, np.nan),
                      np.array([[-0.5, 0.0], [0.1, 0.0]]), 20e-6)
    assert "trace-dqpt" in gids(render_svg(pd, tmp_path / "pd.svg"))
    cmp_ids = gids(render_comparison(t, {"a": t, "b": 2 * t}, tmp_path / "c.svg", ylabel="y"))
    assert "trace-a" in cmp_ids and "trace-b" in cmp_ids
    with pytest.raises(TypeError):
        render_svg([1, 2], tmp_path / "x.svg")
