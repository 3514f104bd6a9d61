import json
import math

import numpy as np
import pytest

from dqpt_sim.analysis import ObservableSeries, PhaseDiagram
from dqpt_sim.io import Table, series_columns, write_json, write_series_csv
from dqpt_sim.metrology import FisherSeries


def series(concurrence=None):
    t = np.linspace(0, 1e-6, 4)
    return ObservableSeries(t, np.array([1.0, 0.5, 0.25, 0.0]), np.array([0.0, 0.25, 0.5, 1.0]),
                            np.array([0.0, 0.3, 0.4, 0.0]), np.array([-0.5, -0.1, 0.1, 0.5]), 2,
                            concurrence=concurrence)


def test_observable_csv_format(tmp_path):
    path = write_series_csv(series(), tmp_path / "s.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert lines[0] == "t_us,p_down,p_up,lambda,mz"
    assert len(lines) == 5
    assert lines[2].split(",")[0] == "0.333333333333"


def test_optional_column_only_when_present(tmp_path):
    with_c = write_series_csv(series(np.array([0, 0.1, 0.2, 0.3])), tmp_path / "c.csv")
    assert with_c.read_text().splitlines()[0].endswith(",concurrence")
    assert "concurrence" not in series_columns(series())


def test_rewrite_is_byte_identical(tmp_path):
    a = write_series_csv(series(), tmp_path / "a.csv").read_bytes()
    b = write_series_csv(series(), tmp_path / "a.csv").read_bytes()
    assert a == b


def test_phase_diagram_rows(tmp_path):
    flags = np.array([[False, True, True], [False, True, False], [False, False, True]])
    tc = np.where(flags, 2.4e-6, np.nan)
    pd = PhaseDiagram(np.array([0.0, 100.0, 200.0]), np.array([5.0, 50.0, 95.0]), flags, tc,
                      np.zeros((3, 3)), 20e-6)
    lines = write_series_csv(pd, tmp_path / "pd.csv").read_text().splitlines()
    assert lines[0] == "bx_G,bz_G,dqpt_flag,first_tc_us,mean_mz"
    assert len(lines) == 10
    assert lines[1] == "0,5,0,nan,0"
    assert lines[2] == "0,50,1,2.4,0"


def test_fisher_columns(tmp_path):
    t = np.array([0.0, 1e-6])
    fs = FisherSeries(t, np.array([1.0, 0.5]), np.array([0.0, 1e-12]), 1.0, 1.0, 0.0)
    lines = write_series_csv(fs, tmp_path / "f.csv").read_text().splitlines()
    assert lines == ["t_us,p_up,fi_us2,t2_us2", "0,1,0,0", "1,0.5,1,1"]


def test_table_and_errors(tmp_path):
    write_series_csv(Table({"a": [1, 2], "b": [True, False]}), tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,1\n2,0\n"
    with pytest.raises(ValueError):
        write_series_csv(Table({"a": [1], "b": [1, 2]}), tmp_path / "bad.csv")
    with pytest.raises(TypeError):
        write_series_csv([1, 2], tmp_path / "bad.csv")
    with pytest.raises(OSError):
        write_series_csv(series(), tmp_path / "missing" / "x.csv")


def test_json_round_trip(tmp_path):
    data = {"b": [1.0 / 3.0, np.float64(2.5e-7)], "a": {"flag": np.bool_(True), "n": np.int64(4)},
            "bad": math.nan, "arr": np.array([1.0, 2.0])}
    path = write_json(data, tmp_path / "s.json")
    back = json.loads(path.read_text())
    assert back["b"][0] == 1.0 / 3.0 and back["b"][1] == 2.5e-7
    assert back["a"] == {"flag": True, "n": 4}
    assert back["bad"] is None
    assert back["arr"] == [1.0, 2.0]
    assert list(back) == sorted(back)
