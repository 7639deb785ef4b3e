import math

import numpy as np
import pytest

from bevloc.metrics import (
    FrameResult,
    aggregate,
    make_frame_result,
    orientation_error,
    position_error,
    summary_lines,
    write_frames_csv,
)
from bevloc.synth import Pose


def _p(x=0.0, y=0.0, theta=0.0):
    return Pose(x, y, theta)


class TestPositionError:
    def test_identity(self):
        assert position_error(_p(3.0, 4.0), _p(3.0, 4.0)) == 0.0

    def test_pythagorean_triple(self):
        assert position_error(_p(3.0, 4.0), _p(0.0, 0.0)) == 5.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = _p(*rng.uniform(-50, 50, 2))
            b = _p(*rng.uniform(-50, 50, 2))
            assert position_error(a, b) == position_error(b, a)


class TestOrientationError:
    def test_wraparound(self):
        assert orientation_error(_p(theta=math.radians(179)),
                                 _p(theta=math.radians(-179))) == pytest.approx(2.0)

    def test_identity(self):
        assert orientation_error(_p(theta=1.0), _p(theta=1.0)) == 0.0

    def test_antipodal_maximum(self):
        assert orientation_error(_p(theta=0.0), _p(theta=math.pi)) == pytest.approx(180.0)

    def test_bounded_by_180(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = _p(theta=float(rng.uniform(-math.pi, math.pi)))
            b = _p(theta=float(rng.uniform(-math.pi, math.pi)))
            assert 0.0 <= orientation_error(a, b) <= 180.0

    def test_invariant_to_full_turns_before_wrapping(self):
        from bevloc.synth import wrap_angle
        rng = np.random.default_rng(2)
        for _ in range(50):
            t1, t2 = rng.uniform(-math.pi, math.pi, 2)
            base = orientation_error(_p(theta=float(t1)), _p(theta=float(t2)))
            spun = orientation_error(_p(theta=wrap_angle(float(t1) + 2 * math.pi)),
                                     _p(theta=float(t2)))
            assert spun == pytest.approx(base, abs=1e-9)


def _result(pos_err, ang_err=0.0, seed=0):
    return FrameResult(gt=_p(), est=_p(pos_err), position_error=pos_err,
                       orientation_error=ang_err, solve_time=0.01, seed=seed)


class TestAggregate:
    def test_all_zero_errors(self):
        report = aggregate([_result(0.0) for _ in range(4)])
        assert all(v == 1.0 for v in report.recall_at_m.values())
        assert all(v == 1.0 for v in report.recall_at_deg.values())
        assert report.ape_mean == 0.0 and report.aoe_mean == 0.0

    def test_hand_counted_example(self):
        report = aggregate([_result(e) for e in (0.5, 1.5, 3.0, 20.0)])
        assert report.recall_at_m[1.0] == 0.25
        assert report.recall_at_m[2.0] == 0.5
        assert report.recall_at_m[5.0] == 0.75
        assert report.recall_at_m[10.0] == 0.75
        assert report.ape_mean == pytest.approx(6.25)
        assert report.frame_count == 4

    def test_strict_inequality_at_threshold(self):
        report = aggregate([_result(1.0), _result(0.999)])
        assert report.recall_at_m[1.0] == 0.5

    def test_recall_monotone_in_threshold(self):
        rng = np.random.default_rng(3)
        results = [_result(float(e), float(a)) for e, a in
                   zip(rng.exponential(3.0, 100), rng.uniform(0, 180, 100))]
        report = aggregate(results, pos_thresholds=(0.5, 1, 2, 5, 10, 1e9),
                           deg_thresholds=(1, 2, 5, 10, 180.1))
        rm = [report.recall_at_m[t] for t in (0.5, 1, 2, 5, 10, 1e9)]
        assert rm == sorted(rm) and rm[-1] == 1.0
        rd = [report.recall_at_deg[t] for t in (1, 2, 5, 10, 180.1)]
        assert rd == sorted(rd) and rd[-1] == 1.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        results = [_result(float(e), float(a)) for e, a in
                   zip(rng.exponential(2.0, 30), rng.uniform(0, 30, 30))]
        fwd = aggregate(results)
        rev = aggregate(results[::-1])
        assert fwd.ape_mean == pytest.approx(rev.ape_mean, rel=1e-12)
        assert fwd.aoe_mean == pytest.approx(rev.aoe_mean, rel=1e-12)
        assert fwd.recall_at_m == rev.recall_at_m

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_medians_reported(self):
        report = aggregate([_result(e) for e in (1.0, 2.0, 100.0)])
        assert report.ape_median == 2.0
        assert report.ape_mean == pytest.approx(103.0 / 3.0)


class TestCsv:
    def test_layout_and_summary_block(self, tmp_path):
        results = [make_frame_result(_p(0.0, 0.0, 0.1), _p(3.0, 4.0, 0.1),
                                     solve_time=0.5, seed=42)]
        report = aggregate(results, config={"k": 16})
        path = tmp_path / "frames.csv"
        write_frames_csv(path, results, report)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("seed,gt_x,gt_y")
        row = lines[1].split(",")
        assert row[0] == "42"
        assert float(row[7]) == pytest.approx(5.0)
        summary = [l for l in lines if l.startswith("#")]
        assert "# recall@1m,0.000000" in summary
        assert "# config,k,16" in summary
        assert any(l.startswith("# ape_median_m,") for l in summary)

    def test_frame_rows_match_count(self, tmp_path):
        results = [make_frame_result(_p(), _p(float(i)), seed=i) for i in range(7)]
        report = aggregate(results)
        path = tmp_path / "frames.csv"
        write_frames_csv(path, results, report)
        lines = path.read_text().splitlines()
        data_rows = [l for l in lines if l and not l.startswith("#")][1:]
        assert len(data_rows) == 7
        assert len(summary_lines(report)) >= 11
