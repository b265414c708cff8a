"""Joint acquisition and processing: scheduling, timelines, latency metrics.

A scalable run launches each scale's predictor as soon as its partition has
been acquired (and, when the fusion dependency is on, as soon as the
previous scale's context exists).  When a scale completes, the update
cascade refines every lower scale before the cumulative output for that
scale is published.  The non-scalable baseline can only start once the whole
cloud is acquired.

Two backends share one contract:

* ``overlap="full"`` / ``overlap="none"``: a deterministic discrete-event
  simulation; "full" overlaps processing with acquisition as the gates
  allow (unlimited workers), "none" serializes everything after acquisition.
* ``overlap="measured"``: a real threaded executor that sleeps through
  acquisition and records wall-clock instants.

Label outputs are bit-identical across all backends and timing parameters;
scheduling only ever affects the timeline.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assemble import CumulativeOutput, assemble
from .partition import PartitionSpec, partition
from .predictors import PredictorConfig, ScaleContext, predict, predict_full
from .stream import PointStream
from .update import ScalePrediction, UpdateConfig, cascade_step

PARTITION_READY = "partition_ready"
SCALE_START = "scale_start"
SCALE_DONE = "scale_done"
REFINE_DONE = "refine_done"
CUMULATIVE_AVAILABLE = "cumulative_available"
BASELINE_START = "baseline_start"
BASELINE_DONE = "baseline_done"

OVERLAP_MODES = ("full", "none", "measured")


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimingModel:
    """Acquisition speed and stage-cost model.

    ``tick_duration`` converts stream ticks to seconds.  Stage costs are an
    affine function of point count, optionally overridden per scale (or for
    the baseline / per refine) with explicit values, which is what the
    closed-form timeline tests use.  The baseline's per-point cost carries a
    ``baseline_factor`` because the non-scalable reference runs one large
    model over the full cloud while the scales run small per-branch jobs.
    ``fusion_dependency`` gates scale ``i`` on scale ``i-1``'s context,
    matching predictors that consume previous scales' side information.
    """

    tick_duration: float = 1e-5
    predict_fixed: float = 0.005
    predict_per_point: float = 1e-5
    baseline_factor: float = 2.0
    refine_fixed: float = 0.001
    refine_per_point: float = 2e-7
    overlap: str = "full"
    fusion_dependency: bool = True
    predict_overrides: tuple[float, ...] | None = None
    baseline_override: float | None = None
    refine_override: float | None = None

    def __post_init__(self):
        if self.tick_duration <= 0:
            raise PipelineError("tick_duration must be positive")
        for v in (self.predict_fixed, self.predict_per_point,
                  self.baseline_factor, self.refine_fixed, self.refine_per_point):
            if v < 0:
                raise PipelineError("stage durations must be non-negative")
        if self.overlap not in OVERLAP_MODES:
            raise PipelineError(f"overlap must be one of {OVERLAP_MODES}")

    def predict_duration(self, n_points: int, scale: int | None = None) -> float:
        """Synthetic duration of one predictor job (scale=None: baseline)."""
        if scale is None:
            if self.baseline_override is not None:
                return self.baseline_override
            return (self.predict_fixed
                    + self.baseline_factor * self.predict_per_point * n_points)
        if self.predict_overrides is not None:
            if scale > len(self.predict_overrides):
                raise PipelineError(f"no predict override for scale {scale}")
            return self.predict_overrides[scale - 1]
        return self.predict_fixed + self.predict_per_point * n_points

    def refine_duration(self, n_lower: int, n_upper: int) -> float:
        if self.refine_override is not None:
            return self.refine_override
        return self.refine_fixed + self.refine_per_point * (n_lower + n_upper)


@dataclass(frozen=True)
class TimelineEvent:
    kind: str
    scale: int                 # 0 for baseline events
    instant: float             # seconds from scan start
    arrival: int | None = None  # refine events: the scale whose arrival triggered it


@dataclass
class Timeline:
    events: list[TimelineEvent] = field(default_factory=list)

    def add(self, kind: str, scale: int, instant: float, arrival: int | None = None):
        if instant < 0:
            raise PipelineError(f"negative instant for {kind}({scale}): {instant}")
        self.events.append(TimelineEvent(kind, scale, float(instant), arrival))

    def instant(self, kind: str, scale: int = 0) -> float:
        for e in self.events:
            if e.kind == kind and e.scale == scale:
                return e.instant
        raise PipelineError(f"timeline has no {kind} event for scale {scale}")

    def select(self, kind: str) -> list[TimelineEvent]:
        return [e for e in self.events if e.kind == kind]

    def scales(self) -> list[int]:
        return sorted({e.scale for e in self.select(SCALE_START)})

    def to_dict(self) -> dict:
        return {"events": [
            {"kind": e.kind, "scale": e.scale, "instant": e.instant,
             **({"arrival": e.arrival} if e.arrival is not None else {})}
            for e in self.events]}

    @classmethod
    def from_dict(cls, data: dict) -> "Timeline":
        tl = cls()
        for e in data["events"]:
            tl.add(e["kind"], e["scale"], e["instant"], e.get("arrival"))
        return tl


@dataclass(frozen=True)
class LatencyMetrics:
    """Post-acquisition latency bounds and derived ratios.

    ``post_acq_lower`` assumes every stage except the last scale's job and
    final cascade hides under acquisition; ``post_acq_upper`` is the serial
    sum of all stage durations (nothing hidden).  Any real run lands between
    the two.  ``speedup`` compares the run's own post-acquisition residual
    against the baseline's processing time; ``first_prediction_fraction`` is
    the instant of the first cumulative output over that same baseline time.
    """

    acquisition_end: float
    post_acq: float
    post_acq_lower: float
    post_acq_upper: float
    baseline_processing: float
    speedup: float
    first_prediction_fraction: float
    scale_available: tuple[float, ...]
    predict_durations: tuple[float, ...]
    refine_total: float

    def to_dict(self) -> dict:
        return {
            "acquisition_end": self.acquisition_end,
            "post_acq": self.post_acq,
            "post_acq_lower": self.post_acq_lower,
            "post_acq_upper": self.post_acq_upper,
            "baseline_processing": self.baseline_processing,
            "speedup": self.speedup,
            "first_prediction_fraction": self.first_prediction_fraction,
            "scale_available": list(self.scale_available),
            "predict_durations": list(self.predict_durations),
            "refine_total": self.refine_total,
        }


def _validate(stream: PointStream, predictor_cfg: PredictorConfig,
              update_cfg: UpdateConfig | None, timing: TimingModel):
    if predictor_cfg.variant == "seeded-knn" and not timing.fusion_dependency:
        raise PipelineError(
            "seeded-knn consumes previous-scale context; fusion_dependency "
            "cannot be disabled for it")


def _advance(preds: list[ScalePrediction], level: int) -> list[ScalePrediction]:
    # identity update: raise refinement levels without touching labels
    return [replace(p, level=level) for p in preds]


def _publish_ctx(partitions, preds, update_cfg, ctx_pred):
    """Context handed to the next scale: the refined cumulative cloud when
    the update module runs, otherwise the predictor's own cumulative one."""
    if update_cfg is None:
        return ctx_pred
    i = len(preds)
    positions = np.concatenate([partitions[j].positions for j in range(i)])
    labels = np.concatenate([p.labels for p in preds])
    return ScaleContext(positions, labels)


def run_scalable(stream: PointStream, spec: PartitionSpec,
                 predictor_cfg: PredictorConfig,
                 update_cfg: UpdateConfig | None,
                 timing: TimingModel,
                 ) -> tuple[list[CumulativeOutput], Timeline]:
    """Execute the resolution-scalable pipeline over a stream.

    Returns one cumulative output per scale plus the event timeline.
    ``update_cfg=None`` disables the refinement cascade (predictions keep
    their original labels, as in a pipeline without an update module).
    """
    _validate(stream, predictor_cfg, update_cfg, timing)
    parts = partition(stream, spec)
    if timing.overlap == "measured":
        return _run_real(stream, parts, predictor_cfg, update_cfg, timing)
    return _run_sim(stream, parts, predictor_cfg, update_cfg, timing)


def _run_sim(stream, parts, predictor_cfg, update_cfg, timing):
    K = len(parts)
    tl = Timeline()
    ready = [p.interval[1] * timing.tick_duration for p in parts]
    for i, r in enumerate(ready, start=1):
        tl.add(PARTITION_READY, i, r)

    outputs = []
    preds: list[ScalePrediction] = []
    ctx = None
    acq_end = ready[-1]
    clock = acq_end  # running clock for the serialized ("none") schedule
    prev_avail = 0.0
    for i in range(1, K + 1):
        part = parts[i - 1]
        gated_ctx = ctx if (timing.fusion_dependency and i > 1) else None
        labels, ctx_pred = predict(part, gated_ctx, predictor_cfg, stream.class_count)
        arrived = ScalePrediction(i, part.positions, labels, level=i)
        refine_sizes: list[tuple[int, int, int]] = []
        if update_cfg is not None:
            preds = cascade_step(
                preds, arrived, update_cfg,
                on_refine=lambda s, nl, nu, _dt: refine_sizes.append((s, nl, nu)))
        else:
            preds = _advance(preds, i) + [arrived]
        outputs.append(assemble(preds, parts, stream))
        ctx = _publish_ctx(parts, preds, update_cfg, ctx_pred)

        pd = timing.predict_duration(part.count, scale=i)
        if timing.overlap == "none":
            start = clock
        else:
            start = max(ready[i - 1], prev_avail if timing.fusion_dependency else 0.0)
        done = start + pd
        tl.add(SCALE_START, i, start)
        tl.add(SCALE_DONE, i, done)
        t = done if timing.overlap == "none" else max(done, prev_avail)
        for lower_scale, n_lower, n_upper in refine_sizes:
            t += timing.refine_duration(n_lower, n_upper)
            tl.add(REFINE_DONE, lower_scale, t, arrival=i)
        tl.add(CUMULATIVE_AVAILABLE, i, t)
        prev_avail = t
        clock = t
    return outputs, tl


def _run_real(stream, parts, predictor_cfg, update_cfg, timing):
    K = len(parts)
    ready = [p.interval[1] * timing.tick_duration for p in parts]
    base = time.monotonic()

    def now() -> float:
        return time.monotonic() - base

    def sleep_until(target: float):
        while (dt := target - now()) > 0:
            time.sleep(min(dt, 0.05))

    ctx_ready = [threading.Event() for _ in range(K + 1)]
    published = [threading.Event() for _ in range(K + 1)]
    ctx_box: list = [None] * (K + 1)
    preds_box: list = [[]] + [None] * K
    outputs: list = [None] * K
    event_rows: list[list[TimelineEvent]] = [[] for _ in range(K)]
    failures: list[BaseException] = []
    published[0].set()
    ctx_ready[0].set()

    def worker(i: int):
        try:
            rows = event_rows[i - 1]
            sleep_until(ready[i - 1])
            if timing.fusion_dependency and i > 1:
                ctx_ready[i - 1].wait()
                gated_ctx = ctx_box[i - 1]
            else:
                gated_ctx = None
            start = now()
            part = parts[i - 1]
            labels, ctx_pred = predict(part, gated_ctx, predictor_cfg,
                                       stream.class_count)
            done = now()
            rows.append(TimelineEvent(SCALE_START, i, start))
            rows.append(TimelineEvent(SCALE_DONE, i, done))

            published[i - 1].wait()
            preds = preds_box[i - 1]
            arrived = ScalePrediction(i, part.positions, labels, level=i)
            if update_cfg is not None:
                preds = cascade_step(
                    preds, arrived, update_cfg,
                    on_refine=lambda s, nl, nu, _dt: rows.append(
                        TimelineEvent(REFINE_DONE, s, now(), arrival=i)))
            else:
                preds = _advance(preds, i) + [arrived]
            outputs[i - 1] = assemble(preds, parts, stream)
            preds_box[i] = preds
            ctx_box[i] = _publish_ctx(parts, preds, update_cfg, ctx_pred)
            rows.append(TimelineEvent(CUMULATIVE_AVAILABLE, i, now()))
            ctx_ready[i].set()
            published[i].set()
        except BaseException as exc:  # propagate to the caller after join
            failures.append(exc)
            ctx_ready[i].set()
            published[i].set()

    threads = [threading.Thread(target=worker, args=(i,), name=f"scale-{i}")
               for i in range(1, K + 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        raise failures[0]

    tl = Timeline()
    for i, r in enumerate(ready, start=1):
        tl.add(PARTITION_READY, i, r)
    for rows in event_rows:
        for e in rows:
            tl.add(e.kind, e.scale, e.instant, e.arrival)
    return outputs, tl


def run_baseline(stream: PointStream, predictor_cfg: PredictorConfig,
                 timing: TimingModel) -> tuple[CumulativeOutput, Timeline]:
    """Non-scalable reference: wait for the full cloud, predict once.

    The baseline starts at the acquisition end (max timestamp times tick
    duration); in measured mode its duration is the wall-clock time of the
    full-cloud prediction, otherwise the synthetic cost model's value.  An
    empty stream completes immediately.
    """
    start = max(stream.max_timestamp, 0) * timing.tick_duration if len(stream) else 0.0
    t0 = time.perf_counter()
    labels = predict_full(stream.positions, stream.labels, predictor_cfg,
                          stream.class_count)
    measured = time.perf_counter() - t0
    if len(stream) == 0:
        duration = 0.0
    elif timing.overlap == "measured":
        duration = measured
    else:
        duration = timing.predict_duration(len(stream), scale=None)

    output = CumulativeOutput(
        scale=1,
        positions=stream.positions,
        pred_labels=labels,
        gt_labels=stream.labels,
        origin_scales=np.ones(len(stream), dtype=np.int64),
        timestamps=stream.timestamps,
        class_count=stream.class_count,
    )
    tl = Timeline()
    tl.add(BASELINE_START, 0, start)
    tl.add(BASELINE_DONE, 0, start + duration)
    return output, tl


def _refine_durations(tl: Timeline, scale_done: dict[int, float],
                      cum_avail: dict[int, float]) -> dict[int, list[float]]:
    """Reconstruct per-arrival refine durations from event instants."""
    by_arrival: dict[int, list[TimelineEvent]] = {}
    for e in tl.select(REFINE_DONE):
        if e.arrival is None:
            raise PipelineError("refine event lacks its arrival tag")
        by_arrival.setdefault(e.arrival, []).append(e)
    durations: dict[int, list[float]] = {}
    for arrival, events in by_arrival.items():
        events = sorted(events, key=lambda e: e.instant)
        prev = max(scale_done[arrival], cum_avail.get(arrival - 1, 0.0))
        durations[arrival] = []
        for e in events:
            durations[arrival].append(e.instant - prev)
            prev = e.instant
    return durations


def latency_metrics(scalable: Timeline, baseline: Timeline) -> LatencyMetrics:
    """Derive the latency report from a scalable and a baseline timeline."""
    scales = scalable.scales()
    if not scales:
        raise PipelineError("scalable timeline contains no scale events")
    K = scales[-1]
    if scales != list(range(1, K + 1)):
        raise PipelineError(f"timeline is missing scales: found {scales}")
    try:
        ready = {i: scalable.instant(PARTITION_READY, i) for i in scales}
        start = {i: scalable.instant(SCALE_START, i) for i in scales}
        done = {i: scalable.instant(SCALE_DONE, i) for i in scales}
        avail = {i: scalable.instant(CUMULATIVE_AVAILABLE, i) for i in scales}
        b_start = baseline.instant(BASELINE_START, 0)
        b_done = baseline.instant(BASELINE_DONE, 0)
    except PipelineError as exc:
        raise PipelineError(f"incomplete timeline: {exc}") from exc

    pd = tuple(done[i] - start[i] for i in scales)
    refines = _refine_durations(scalable, done, avail)
    refine_total = sum(sum(v) for v in refines.values())
    acq_end = ready[K]
    post_acq = avail[K] - acq_end
    lower = pd[K - 1] + sum(refines.get(K, []))
    upper = sum(pd) + refine_total
    baseline_processing = b_done - b_start
    if baseline_processing > 0:
        speedup = 1.0 - post_acq / baseline_processing
        first_fraction = avail[1] / baseline_processing
    elif post_acq == 0.0:
        speedup = 0.0
        first_fraction = 0.0
    else:
        raise PipelineError("baseline processing time is zero but the "
                            "scalable run has nonzero residual latency")
    return LatencyMetrics(
        acquisition_end=acq_end,
        post_acq=post_acq,
        post_acq_lower=lower,
        post_acq_upper=upper,
        baseline_processing=baseline_processing,
        speedup=speedup,
        first_prediction_fraction=first_fraction,
        scale_available=tuple(avail[i] for i in scales),
        predict_durations=pd,
        refine_total=refine_total,
    )
