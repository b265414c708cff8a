"""Accuracy and coverage metrics: confusion matrix, IoU, spatial coverage.

mIoU follows the common convention of excluding classes with zero union
(neither predicted nor present) from the mean.  Coverage measures how much
of the scanner's angular field of view has received at least one detection
by a given tick, normalized by the cells occupied over the full scan, which
is what makes a stream "spatially complete" long before it is dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assemble import CumulativeOutput
from .geometry import camera_basis
from .scanner import scan_meta_fov
from .stream import PointStream


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """C x C counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray

    @classmethod
    def from_labels(cls, gt, pred, class_count: int) -> "ConfusionMatrix":
        gt = np.asarray(gt, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if gt.shape != pred.shape:
            raise MetricsError("ground truth and prediction lengths differ")
        if len(gt) and (gt.min() < 0 or gt.max() >= class_count
                        or pred.min() < 0 or pred.max() >= class_count):
            raise MetricsError("labels outside [0, class_count)")
        counts = np.bincount(gt * class_count + pred,
                             minlength=class_count * class_count)
        return cls(counts.reshape(class_count, class_count))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def iou(self) -> tuple[np.ndarray, float]:
        """Per-class IoU (NaN where the union is empty) and their mean."""
        tp = np.diag(self.counts).astype(float)
        union = self.counts.sum(axis=0) + self.counts.sum(axis=1) - tp
        with np.errstate(invalid="ignore", divide="ignore"):
            per_class = np.where(union > 0, tp / union, np.nan)
        included = ~np.isnan(per_class)
        if not included.any():
            raise MetricsError("no class has a nonzero union")
        return per_class, float(per_class[included].mean())


def miou(output: CumulativeOutput) -> tuple[np.ndarray, float]:
    """Per-class IoU and mIoU of a cumulative output (error when empty)."""
    if len(output) == 0:
        raise MetricsError("cannot evaluate an empty output")
    cm = ConfusionMatrix.from_labels(output.gt_labels, output.pred_labels,
                                     output.class_count)
    return cm.iou()


def miou_by_origin(output: CumulativeOutput) -> dict[int, float]:
    """Scale-local mIoU: points grouped by the scale that predicted them."""
    result = {}
    for s in np.unique(output.origin_scales):
        mask = output.origin_scales == s
        cm = ConfusionMatrix.from_labels(output.gt_labels[mask],
                                         output.pred_labels[mask],
                                         output.class_count)
        result[int(s)] = cm.iou()[1]
    return result


def cost_of_scalability(baseline_miou: float, scalable_final_miou: float) -> float:
    """Baseline minus scalable mIoU, in percentage points (negative when the
    scalable method wins)."""
    if not (0.0 <= baseline_miou <= 1.0 and 0.0 <= scalable_final_miou <= 1.0):
        raise MetricsError("mIoU operands must lie in [0, 1]")
    return (baseline_miou - scalable_final_miou) * 100.0


def coverage(stream: PointStream, t: int, grid_resolution: int = 16) -> float:
    """Fraction of the scan's angular grid reached by tick ``t``.

    Cells are an equally spaced grid over the scanner's deflection range,
    reconstructed from the stream's scanner metadata.  Normalization is
    against the cells occupied over the whole stream, so the value reaches
    1.0 at the final timestamp regardless of rays that never hit anything.
    """
    if grid_resolution < 1:
        raise MetricsError("grid_resolution must be >= 1")
    if len(stream) == 0:
        return 0.0
    cells = _occupied_cells(stream, grid_resolution)
    denom = len(np.unique(cells))
    num = len(np.unique(cells[stream.timestamps <= t]))
    return num / denom


def coverage_curve(stream: PointStream, ticks, grid_resolution: int = 16) -> list[tuple[int, float]]:
    return [(int(t), coverage(stream, int(t), grid_resolution)) for t in ticks]


def _occupied_cells(stream: PointStream, g: int) -> np.ndarray:
    position, target, amp_x, amp_y = scan_meta_fov(stream.meta)
    right, up, forward = camera_basis(position, target)
    rel = stream.positions.astype(float) - position
    rel /= np.linalg.norm(rel, axis=1, keepdims=True)
    thy = np.arcsin(np.clip(rel @ up, -1.0, 1.0))
    thx = np.arctan2(rel @ right, rel @ forward)
    ix = np.clip(((thx + amp_x) / (2 * amp_x) * g).astype(np.int64), 0, g - 1)
    iy = np.clip(((thy + amp_y) / (2 * amp_y) * g).astype(np.int64), 0, g - 1)
    return ix * g + iy


@dataclass
class MetricsReport:
    """Everything a run produces, ready for JSON/CSV serialization."""

    scale_miou: list[float]                 # cumulative outputs, scales 1..K
    scale_miou_unrefined: list[float] | None
    origin_miou: dict[int, float]           # final scale, split by origin
    per_class_iou: dict[str, float]         # final scale, NaN classes omitted
    baseline_miou: float
    cost_of_scalability_pct: float
    latency: dict = field(default_factory=dict)
    coverage_curve: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scale_miou": self.scale_miou,
            "scale_miou_unrefined": self.scale_miou_unrefined,
            "origin_miou": {str(k): v for k, v in self.origin_miou.items()},
            "per_class_iou": self.per_class_iou,
            "baseline_miou": self.baseline_miou,
            "cost_of_scalability_pct": self.cost_of_scalability_pct,
            "latency": self.latency,
            "coverage_curve": [[t, c] for t, c in self.coverage_curve],
        }

    def to_csv(self) -> str:
        rows = ["metric,scale,value"]
        for i, v in enumerate(self.scale_miou, start=1):
            rows.append(f"miou,{i},{v!r}")
        if self.scale_miou_unrefined is not None:
            for i, v in enumerate(self.scale_miou_unrefined, start=1):
                rows.append(f"miou_unrefined,{i},{v!r}")
        for name, v in self.per_class_iou.items():
            rows.append(f"iou_{name},,{v!r}")
        rows.append(f"baseline_miou,,{self.baseline_miou!r}")
        rows.append(f"cost_of_scalability_pct,,{self.cost_of_scalability_pct!r}")
        for key, v in sorted(self.latency.items()):
            if isinstance(v, (int, float)):
                rows.append(f"latency_{key},,{v!r}")
        for t, c in self.coverage_curve:
            rows.append(f"coverage,{t},{c!r}")
        return "\n".join(rows) + "\n"
