import numpy as np
import pytest

from girthkit.errors import InsufficientCorrespondence, InvalidParam
from girthkit.harness import (BenchmarkReport, BenchmarkRow,
                              default_shape_suite, emit_report,
                              report_from_json, report_to_csv, report_to_json,
                              run_calibration_trial, run_measurement_sweep)
from girthkit.synth import ShapeSpec


@pytest.fixture(scope="module")
def small_sweep():
    shapes = [ShapeSpec(kind="cube", size=15.0),
              ShapeSpec(kind="cylinder", radius=25.0, height=50.0,
                        segments=128)]
    return run_measurement_sweep(shapes, [100, 1000], h=5.0, seed=0)


def test_sweep_rows_sorted(small_sweep):
    keys = [(r.shape, r.ray_count) for r in small_sweep.rows]
    assert keys == sorted(keys)
    assert len(small_sweep.rows) == 4


def test_sweep_error_decreases(small_sweep):
    s = small_sweep.summary()
    assert s[1000]["perimeter"] < s[100]["perimeter"]


def test_sweep_empty_ray_counts():
    report = run_measurement_sweep([ShapeSpec(kind="cube", size=15.0)], [])
    assert report.rows == ()


def test_sweep_validation():
    with pytest.raises(InvalidParam):
        run_measurement_sweep([], [100])
    with pytest.raises(InvalidParam):
        run_measurement_sweep(default_shape_suite(), [4])


def test_single_row_report_csv():
    row = BenchmarkRow(shape="cube_15", ray_count=100, perimeter_est=59.0,
                       perimeter_true=60.0, area_est=224.0, area_true=225.0,
                       volume_est=3374.0, volume_true=3375.0)
    text = report_to_csv(BenchmarkReport(rows=(row,)))
    lines = text.strip().split("\n")
    assert len(lines) == 2
    assert lines[0].startswith("shape,ray_count,perimeter_est")
    assert "cube_15" in lines[1]


def test_report_determinism(small_sweep, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_report(small_sweep, a, format="csv")
    emit_report(small_sweep, b, format="csv")
    assert a.read_bytes() == b.read_bytes()
    ja, jb = tmp_path / "a.json", tmp_path / "b.json"
    emit_report(small_sweep, ja, format="json")
    emit_report(small_sweep, jb, format="json")
    assert ja.read_bytes() == jb.read_bytes()


def test_report_excludes_wall_time(small_sweep, tmp_path):
    p = tmp_path / "r.csv"
    emit_report(small_sweep, p)
    assert "wall" not in p.read_text()
    assert "wall" not in report_to_json(small_sweep)


def test_json_roundtrip(small_sweep):
    back = report_from_json(report_to_json(small_sweep))
    assert back == BenchmarkReport(rows=small_sweep.rows,
                                   seed=small_sweep.seed,
                                   slice_h=small_sweep.slice_h)


def test_unknown_format(small_sweep, tmp_path):
    with pytest.raises(InvalidParam):
        emit_report(small_sweep, tmp_path / "x.bin", format="parquet")


def test_calibration_trial_too_few_positions():
    with pytest.raises(InsufficientCorrespondence):
        run_calibration_trial(positions=2)
