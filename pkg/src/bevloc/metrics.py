"""Per-frame localization errors and dataset-level aggregation.

Recall@t counts frames with error strictly below the threshold.  The
headline aggregate errors are arithmetic means; medians go into the CSV as
well for robustness checks but are not the headline numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .synth import Pose

POSITION_THRESHOLDS_M = (1.0, 2.0, 5.0, 10.0)
ORIENTATION_THRESHOLDS_DEG = (1.0, 2.0, 5.0, 10.0)


def position_error(est: Pose, gt: Pose) -> float:
    """Euclidean distance in meters."""
    return math.hypot(est.x - gt.x, est.y - gt.y)


def orientation_error(est: Pose, gt: Pose) -> float:
    """Absolute heading difference in degrees, wrapped into [0, 180]."""
    d = abs(est.theta - gt.theta) % (2.0 * math.pi)
    return math.degrees(min(d, 2.0 * math.pi - d))


@dataclass(frozen=True)
class FrameResult:
    gt: Pose
    est: Pose
    position_error: float
    orientation_error: float
    solve_time: float = 0.0
    seed: int = 0


def make_frame_result(gt: Pose, est: Pose, solve_time: float = 0.0, seed: int = 0) -> FrameResult:
    return FrameResult(gt=gt, est=est,
                       position_error=position_error(est, gt),
                       orientation_error=orientation_error(est, gt),
                       solve_time=solve_time, seed=seed)


@dataclass(frozen=True)
class MetricsReport:
    recall_at_m: dict
    recall_at_deg: dict
    ape_mean: float
    aoe_mean: float
    ape_median: float
    aoe_median: float
    frame_count: int
    config: dict = field(default_factory=dict)


def aggregate(results, pos_thresholds=POSITION_THRESHOLDS_M,
              deg_thresholds=ORIENTATION_THRESHOLDS_DEG, config: dict | None = None) -> MetricsReport:
    """Recall curves plus mean/median absolute errors over a frame set."""
    results = list(results)
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    pos = np.array([r.position_error for r in results])
    ang = np.array([r.orientation_error for r in results])
    n = len(results)
    return MetricsReport(
        recall_at_m={t: float(np.count_nonzero(pos < t)) / n for t in pos_thresholds},
        recall_at_deg={t: float(np.count_nonzero(ang < t)) / n for t in deg_thresholds},
        ape_mean=float(pos.mean()),
        aoe_mean=float(ang.mean()),
        ape_median=float(np.median(pos)),
        aoe_median=float(np.median(ang)),
        frame_count=n,
        config=dict(config or {}),
    )


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def write_frames_csv(path, results, report: MetricsReport) -> None:
    """One row per frame plus a '#'-prefixed summary block; numeric fields
    use fixed precision so reruns diff cleanly (solve_time excepted, being
    wall time)."""
    lines = ["seed,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,"
             "position_error_m,orientation_error_deg,solve_time_s"]
    for r in results:
        lines.append(",".join([
            str(r.seed),
            _fmt(r.gt.x), _fmt(r.gt.y), _fmt(r.gt.theta),
            _fmt(r.est.x), _fmt(r.est.y), _fmt(r.est.theta),
            _fmt(r.position_error), _fmt(r.orientation_error), _fmt(r.solve_time),
        ]))
    lines.extend(summary_lines(report))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_lines(report: MetricsReport) -> list[str]:
    lines = [f"# frames,{report.frame_count}"]
    for t, v in sorted(report.recall_at_m.items()):
        lines.append(f"# recall@{t:g}m,{_fmt(v)}")
    for t, v in sorted(report.recall_at_deg.items()):
        lines.append(f"# recall@{t:g}deg,{_fmt(v)}")
    lines.append(f"# ape_mean_m,{_fmt(report.ape_mean)}")
    lines.append(f"# ape_median_m,{_fmt(report.ape_median)}")
    lines.append(f"# aoe_mean_deg,{_fmt(report.aoe_mean)}")
    lines.append(f"# aoe_median_deg,{_fmt(report.aoe_median)}")
    for key in sorted(report.config):
        lines.append(f"# config,{key},{report.config[key]}")
    return lines
