"""
Per-frame orchestration of both channels, temporal averaging and fusion, and
persistence of the per-frame detection records.
"""
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
import time

from django.conf import settings

from .core import BBox2D, Channel, rasterize_roi
from .exceptions import GroundNotFoundError, ResultsWriteError
from .fusion import Detection, TemporalWindow, fuse_by_center_nms, gate_by_roi, scaled_threshold, temporal_average
from .rgb import detect_rgb
from .signals import frame_processed, run_finished
from .stereo import detect_stereo

logger = logging.getLogger(__name__)

DETECTIONS_DIR = 'detections'
TIMINGS_DIR = 'timings'
SUMMARY_FILE = 'summary.json'
MANIFEST_FILE = 'partial_manifest.json'
STAGES = ('rgb', 'stereo', 'temporal', 'fusion', 'total')


def _ms(start):
    return (time.perf_counter() - start) * 1000.0


def _for_width(distance, width):
    return scaled_threshold(distance, width, settings.OBSTACLES_FUSION_REFERENCE_WIDTH)


class StreamState:
    """Temporal windows of one camera stream, one per channel."""

    def __init__(self, rgb, stereo):
        self.rgb = rgb
        self.stereo = stereo

    @classmethod
    def from_config(cls, cfg, width=None):
        fusion = cfg.fusion
        radius = _for_width(fusion.match_radius, width or cfg.camera.width)

        def window():
            return TemporalWindow(fusion.window, radius, fusion.min_presence)
        return cls(window(), window())

    def snapshot(self):
        return StreamState(self.rgb.snapshot(), self.stereo.snapshot())


@dataclass(frozen=True)
class ChannelOutput:
    frame_id: int
    width: int
    rgb_boxes: tuple
    stereo_boxes: tuple
    ground_found: bool
    timings: dict
    elapsed_ms: float


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    rgb_boxes: tuple = ()
    stereo_boxes: tuple = ()
    rgb_averaged: tuple = ()
    stereo_averaged: tuple = ()
    detections: tuple = ()
    ground_found: bool = True
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def alarm(self):
        return bool(self.detections)


def detect_channels(bundle, cfg, roi_mask=None):
    """Run both detectors on one frame. Pure: safe to call for many frames at once."""
    start = time.perf_counter()
    if roi_mask is None:
        roi_mask = rasterize_roi(cfg.roi, bundle.rgb.width, bundle.rgb.height)

    stage = time.perf_counter()
    rgb_boxes = detect_rgb(bundle.rgb, cfg.roi, cfg.preproc, cfg.graphseg, cfg.extract, roi_mask=roi_mask)
    timings = {'rgb': _ms(stage)}

    stage = time.perf_counter()
    ground_found = True
    try:
        stereo_boxes = detect_stereo(bundle.rgb, bundle.disparity, cfg.camera, roi_mask, cfg.stereo_params())
    except GroundNotFoundError as e:
        logger.debug("frame %06d: %s", bundle.frame_id, e)
        stereo_boxes, ground_found = [], False
    timings['stereo'] = _ms(stage)

    return ChannelOutput(bundle.frame_id, bundle.rgb.width, tuple(rgb_boxes), tuple(stereo_boxes),
                         ground_found, timings, _ms(start))


def finish_frame(channels, cfg, state, roi_mask):
    """Temporal averaging and fusion; must see a stream's frames in order."""
    start = time.perf_counter()
    timings = dict(channels.timings)

    stage = time.perf_counter()
    rgb_averaged = temporal_average(state.rgb, channels.rgb_boxes)
    stereo_averaged = temporal_average(state.stereo, channels.stereo_boxes)
    timings['temporal'] = _ms(stage)

    stage = time.perf_counter()
    threshold = _for_width(cfg.fusion.dist_threshold, channels.width)
    fused = fuse_by_center_nms(rgb_averaged, stereo_averaged, threshold, cfg.fusion.priority_order)
    detections = gate_by_roi(fused, roi_mask)
    timings['fusion'] = _ms(stage)
    timings['total'] = channels.elapsed_ms + _ms(start)

    result = FrameResult(
        frame_id=channels.frame_id,
        rgb_boxes=channels.rgb_boxes,
        stereo_boxes=channels.stereo_boxes,
        rgb_averaged=tuple(rgb_averaged),
        stereo_averaged=tuple(stereo_averaged),
        detections=tuple(detections),
        ground_found=channels.ground_found,
        timings=timings,
    )
    logger.debug("frame %06d: %s", result.frame_id,
                 ', '.join(f"{stage}={timings[stage]:.1f}ms" for stage in STAGES))
    frame_processed.send(sender=FrameResult, result=result)
    return result


def process_frame(bundle, cfg, state, roi_mask=None):
    if roi_mask is None:
        roi_mask = rasterize_roi(cfg.roi, bundle.rgb.width, bundle.rgb.height)
    return finish_frame(detect_channels(bundle, cfg, roi_mask), cfg, state, roi_mask)


def run_sequence(bundles, cfg, threads=None, state=None):
    """Process a stream of FrameBundles in order, yielding FrameResults.

    With several threads the two detectors run ahead on upcoming frames;
    averaging and fusion still consume frames strictly in order, so results
    do not depend on the thread count.
    """
    threads = threads or cfg.runtime.threads
    state = state or StreamState.from_config(cfg)
    masks = {}

    def mask_for(bundle):
        size = (bundle.rgb.width, bundle.rgb.height)
        if size not in masks:
            masks[size] = rasterize_roi(cfg.roi, *size)
        return masks[size]

    if threads <= 1:
        for bundle in bundles:
            yield process_frame(bundle, cfg, state, mask_for(bundle))
        return

    with ThreadPoolExecutor(max_workers=threads) as executor:
        pending = deque()
        for bundle in bundles:
            mask = mask_for(bundle)
            pending.append((executor.submit(detect_channels, bundle, cfg, mask), mask))
            if len(pending) >= 2 * threads:
                future, mask = pending.popleft()
                yield finish_frame(future.result(), cfg, state, mask)
        while pending:
            future, mask = pending.popleft()
            yield finish_frame(future.result(), cfg, state, mask)


# Records

def _box_list(boxes):
    return [list(b.coords) for b in boxes]


def _averaged_list(boxes):
    return [{'bbox': list(b.coords), 'frames_present': b.frames_present} for b in boxes]


def result_to_record(result):
    return {
        'schema': settings.OBSTACLES_RECORD_SCHEMA,
        'frame_id': result.frame_id,
        'alarm': result.alarm,
        'ground_found': result.ground_found,
        'rgb_boxes': _box_list(result.rgb_boxes),
        'stereo_boxes': _box_list(result.stereo_boxes),
        'rgb_averaged': _averaged_list(result.rgb_averaged),
        'stereo_averaged': _averaged_list(result.stereo_averaged),
        'detections': [
            {
                'bbox': list(d.bbox.coords),
                'channel': d.bbox.channel.value,
                'sources': sorted(s.value for s in d.sources),
                'frames_present': d.frames_present,
            }
            for d in result.detections
        ],
    }


def record_to_result(record, timings=None):
    def boxes(items, channel):
        return tuple(BBox2D(*coords, channel=channel) for coords in items)

    def averaged(items, channel):
        return tuple(BBox2D(*item['bbox'], channel=channel, frames_present=item['frames_present'])
                     for item in items)

    detections = tuple(
        Detection(BBox2D(*d['bbox'], channel=d['channel'], frames_present=d['frames_present']),
                  frozenset(d['sources']), d['frames_present'])
        for d in record['detections']
    )
    return FrameResult(
        frame_id=record['frame_id'],
        rgb_boxes=boxes(record['rgb_boxes'], Channel.RGB),
        stereo_boxes=boxes(record['stereo_boxes'], Channel.STEREO),
        rgb_averaged=averaged(record['rgb_averaged'], Channel.RGB),
        stereo_averaged=averaged(record['stereo_averaged'], Channel.STEREO),
        detections=detections,
        ground_found=record['ground_found'],
        timings=dict(timings or {}),
    )


def dumps(document):
    return json.dumps(document, sort_keys=True, indent=2) + '\n'


@dataclass
class RunSummary:
    frame_count: int = 0
    alarm_frames: int = 0
    frame_ids: list = field(default_factory=list)
    mean_timings_ms: dict = field(default_factory=dict)
    issues: list = field(default_factory=list)

    def to_dict(self):
        return {
            'schema': settings.OBSTACLES_RECORD_SCHEMA,
            'frame_count': self.frame_count,
            'alarm_frames': self.alarm_frames,
            'frame_ids': self.frame_ids,
            'mean_timings_ms': {stage: round(ms, 3) for stage, ms in sorted(self.mean_timings_ms.items())},
            'issues': [issue.to_dict() for issue in self.issues],
        }


def write_results(results, out_dir, issues=None):
    """Write one detection record and one timing record per frame plus a run summary.

    ``issues`` may be a list that keeps growing while ``results`` is consumed
    (a dataset Sequence's issue list); it is read once all frames are written.
    On an I/O failure a partial manifest of the files already written is left
    next to them and ResultsWriteError is raised.
    """
    out_dir = Path(out_dir)
    manifest = []
    summary = RunSummary()
    totals = {}
    try:
        (out_dir / DETECTIONS_DIR).mkdir(parents=True, exist_ok=True)
        (out_dir / TIMINGS_DIR).mkdir(parents=True, exist_ok=True)
        for result in results:
            name = f"{result.frame_id:06d}.json"
            for sub, document in ((DETECTIONS_DIR, result_to_record(result)),
                                  (TIMINGS_DIR, {'frame_id': result.frame_id, 'timings_ms': result.timings})):
                path = out_dir / sub / name
                path.write_text(dumps(document), encoding='utf-8')
                manifest.append(f"{sub}/{name}")
            summary.frame_count += 1
            summary.alarm_frames += int(result.alarm)
            summary.frame_ids.append(result.frame_id)
            for stage, ms in result.timings.items():
                totals[stage] = totals.get(stage, 0.0) + ms

        if summary.frame_count:
            summary.mean_timings_ms = {stage: ms / summary.frame_count for stage, ms in totals.items()}
        summary.issues = list(issues or [])
        (out_dir / SUMMARY_FILE).write_text(dumps(summary.to_dict()), encoding='utf-8')
        manifest.append(SUMMARY_FILE)
    except OSError as e:
        try:
            (out_dir / MANIFEST_FILE).write_text(dumps({'written': manifest}), encoding='utf-8')
        except OSError:
            logger.error("could not write partial manifest to %s", out_dir)
        raise ResultsWriteError(f"writing results to {out_dir} failed: {e}", manifest) from e

    run_finished.send(sender=RunSummary, summary=summary)
    return summary


def read_frame_result(out_dir, frame_id):
    out_dir = Path(out_dir)
    name = f"{frame_id:06d}.json"
    record = json.loads((out_dir / DETECTIONS_DIR / name).read_text(encoding='utf-8'))
    timings_path = out_dir / TIMINGS_DIR / name
    timings = {}
    if timings_path.exists():
        timings = json.loads(timings_path.read_text(encoding='utf-8'))['timings_ms']
    return record_to_result(record, timings)


def load_results(out_dir):
    out_dir = Path(out_dir)
    ids = sorted(int(p.stem) for p in (out_dir / DETECTIONS_DIR).glob('*.json'))
    return [read_frame_result(out_dir, frame_id) for frame_id in ids]
