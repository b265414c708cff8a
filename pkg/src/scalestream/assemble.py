"""Cumulative outputs: per-scale predictions merged back into capture order.

The cumulative output at scale ``i`` concatenates the (refined) predictions
of scales ``1..i``.  Because partitions are contiguous stream slices, that
concatenation is exactly the stream prefix with ``t <= cuts[i-1]``; each
point also carries its ground-truth label, origin scale and timestamp so
reports can decompose accuracy by scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .partition import Partition
from .stream import PointStream
from .update import ScalePrediction


class AssembleError(ValueError):
    pass


@dataclass(frozen=True)
class CumulativeOutput:
    scale: int
    positions: np.ndarray
    pred_labels: np.ndarray
    gt_labels: np.ndarray
    origin_scales: np.ndarray
    timestamps: np.ndarray
    class_count: int

    def __len__(self) -> int:
        return len(self.pred_labels)


def assemble(predictions: Sequence[ScalePrediction],
             partitions: Sequence[Partition],
             stream: PointStream) -> CumulativeOutput:
    """Build the cumulative output for scale ``i = len(predictions)``.

    Every prediction must already be refined to level ``i``; anything less
    means stale labels would leak into evaluation, so it is an error.
    """
    if not predictions:
        raise AssembleError("need at least one scale prediction")
    i = len(predictions)
    if len(partitions) < i:
        raise AssembleError(f"{i} predictions but only {len(partitions)} partitions")
    for j, pred in enumerate(predictions, start=1):
        if pred.scale != j:
            raise AssembleError(f"expected scale {j} at position {j}, got {pred.scale}")
        if pred.level != i:
            raise AssembleError(
                f"scale {j} is at refinement level {pred.level}, expected {i}")
        if len(pred) != partitions[j - 1].count:
            raise AssembleError(
                f"scale {j} has {len(pred)} labels for a partition of "
                f"{partitions[j - 1].count} points")

    n = sum(p.count for p in partitions[:i])
    pred_labels = (np.concatenate([p.labels for p in predictions])
                   if n else np.zeros(0, dtype=np.int64))
    origin = (np.concatenate([np.full(len(p), p.scale, dtype=np.int64)
                              for p in predictions])
              if n else np.zeros(0, dtype=np.int64))
    return CumulativeOutput(
        scale=i,
        positions=stream.positions[:n],
        pred_labels=pred_labels,
        gt_labels=stream.labels[:n],
        origin_scales=origin,
        timestamps=stream.timestamps[:n],
        class_count=stream.class_count,
    )


def cumulative_csv(output: CumulativeOutput) -> str:
    """CSV rendering: ``x,y,z,t,origin_scale,pred,gt`` per point."""
    lines = ["x,y,z,t,origin_scale,pred,gt"]
    pos = output.positions
    for r in range(len(output)):
        coords = ",".join(np.format_float_positional(pos[r, a], trim="-")
                          for a in range(3))
        lines.append(f"{coords},{int(output.timestamps[r])},"
                     f"{int(output.origin_scales[r])},"
                     f"{int(output.pred_labels[r])},{int(output.gt_labels[r])}")
    return "\n".join(lines) + "\n"
