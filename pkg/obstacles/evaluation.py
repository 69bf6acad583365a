"""
Scoring of detector output against synthetic ground truth.
"""
from dataclasses import dataclass
import logging

import numpy as np

from .core import Channel, bbox_iou
from .exceptions import EvaluationError, ParameterError

logger = logging.getLogger(__name__)


def channel_boxes(result, channel=Channel.FUSED):
    """The boxes a result reports for one channel: final detections or a channel's averaged boxes."""
    channel = Channel(channel)
    if channel is Channel.FUSED:
        return [d.bbox for d in result.detections]
    if channel is Channel.RGB:
        return list(result.rgb_averaged)
    return list(result.stereo_averaged)


def match_boxes(detections, truths, iou_threshold):
    """Greedy one-to-one matching by descending IoU.

    Returns ``(pairs, unmatched_detections, unmatched_truths)`` where ``pairs``
    holds ``(detection_index, truth_index, iou)``. Ties are broken by box
    coordinates so the outcome does not depend on list order. Pairs below the
    threshold would only be visited after every pair above it, so dropping
    them up front matches the same boxes as thresholding after the greedy pass.
    """
    candidates = []
    for i, det in enumerate(detections):
        for j, truth in enumerate(truths):
            iou = bbox_iou(det, truth)
            if iou >= iou_threshold and iou > 0:
                candidates.append((-iou, det.coords, truth.coords, i, j))
    candidates.sort()

    used_det, used_truth, pairs = set(), set(), []
    for neg_iou, _, _, i, j in candidates:
        if i in used_det or j in used_truth:
            continue
        used_det.add(i)
        used_truth.add(j)
        pairs.append((i, j, -neg_iou))
    unmatched_det = [i for i in range(len(detections)) if i not in used_det]
    unmatched_truth = [j for j in range(len(truths)) if j not in used_truth]
    return pairs, unmatched_det, unmatched_truth


@dataclass(frozen=True)
class FrameScore:
    frame_id: int
    tp: int
    fp: int
    fn: int
    ious: tuple = ()

    def to_dict(self):
        return {'frame_id': self.frame_id, 'tp': self.tp, 'fp': self.fp, 'fn': self.fn,
                'ious': [round(v, 6) for v in self.ious]}


@dataclass(frozen=True)
class EvaluationReport:
    channel: Channel
    iou_threshold: float
    frames: tuple

    @property
    def tp(self):
        return sum(f.tp for f in self.frames)

    @property
    def fp(self):
        return sum(f.fp for f in self.frames)

    @property
    def fn(self):
        return sum(f.fn for f in self.frames)

    @property
    def detection_rate(self):
        """TP / (TP + FN); None when the scored frames hold no truth boxes."""
        positives = self.tp + self.fn
        return self.tp / positives if positives else None

    @property
    def fp_per_frame(self):
        return self.fp / len(self.frames) if self.frames else 0.0

    @property
    def mean_iou(self):
        ious = [v for f in self.frames for v in f.ious]
        return float(np.mean(ious)) if ious else None

    def to_dict(self):
        return {
            'channel': self.channel.value,
            'iou_threshold': self.iou_threshold,
            'frame_count': len(self.frames),
            'tp': self.tp,
            'fp': self.fp,
            'fn': self.fn,
            'detection_rate': self.detection_rate,
            'fp_per_frame': self.fp_per_frame,
            'mean_iou': self.mean_iou,
            'frames': [f.to_dict() for f in self.frames],
        }

    def table(self):
        def fmt(value):
            return '-' if value is None else f"{value:.3f}"

        rows = [
            ('channel', self.channel.value),
            ('iou threshold', f"{self.iou_threshold:.2f}"),
            ('frames', str(len(self.frames))),
            ('true positives', str(self.tp)),
            ('false positives', str(self.fp)),
            ('false negatives', str(self.fn)),
            ('detection rate', fmt(self.detection_rate)),
            ('FP per frame', fmt(self.fp_per_frame)),
            ('mean IoU (TP)', fmt(self.mean_iou)),
        ]
        width = max(len(name) for name, _ in rows)
        return '\n'.join(f"{name.ljust(width)}  {value}" for name, value in rows)


def score_frame(frame_id, detections, truth_boxes, iou_threshold, obstacle_ids=None):
    """Score one frame.

    With ``obstacle_ids`` only the listed obstacles count as positives; a
    detection matched to any other obstacle is neither a TP nor an FP.
    """
    truths = [t.bbox for t in truth_boxes]
    pairs, unmatched_det, unmatched_truth = match_boxes(detections, truths, iou_threshold)

    def scored(j):
        return obstacle_ids is None or truth_boxes[j].obstacle_id in obstacle_ids

    tp_pairs = [(i, j, iou) for i, j, iou in pairs if scored(j)]
    fn = sum(1 for j in unmatched_truth if scored(j))
    return FrameScore(frame_id, len(tp_pairs), len(unmatched_det), fn, tuple(iou for _, _, iou in tp_pairs))


def evaluate(results, truth, iou_threshold=0.5, channel=Channel.FUSED, obstacle_ids=None, start_frame=0):
    """Score FrameResults against GroundTruthFrames with matching frame ids.

    ``start_frame`` drops earlier frames from scoring (temporal warm-up).
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ParameterError(f"iou threshold must lie in (0, 1], got {iou_threshold}")
    channel = Channel(channel)
    by_id = {r.frame_id: r for r in results}
    truth_by_id = {t.frame_id: t for t in truth}
    if by_id.keys() != truth_by_id.keys():
        missing_results = sorted(truth_by_id.keys() - by_id.keys())
        missing_truth = sorted(by_id.keys() - truth_by_id.keys())
        raise EvaluationError(f"frame ids differ: no result for {missing_results[:10]}, "
                              f"no truth for {missing_truth[:10]}")
    if obstacle_ids is not None:
        obstacle_ids = frozenset(obstacle_ids)

    frames = tuple(
        score_frame(frame_id, channel_boxes(by_id[frame_id], channel), truth_by_id[frame_id].boxes,
                    iou_threshold, obstacle_ids)
        for frame_id in sorted(by_id)
        if frame_id >= start_frame
    )
    report = EvaluationReport(channel, iou_threshold, frames)
    logger.info("evaluated %d frames on %s: TP=%d FP=%d FN=%d", len(frames), channel.value,
                report.tp, report.fp, report.fn)
    return report
