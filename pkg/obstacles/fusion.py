"""
Temporal box averaging per channel and centre-distance fusion of both channels.
"""
from collections import deque
from dataclasses import dataclass
import logging
import math

from .core import BBox2D, Channel, bbox_union, center_distance, center_in_mask
from .exceptions import ParameterError

logger = logging.getLogger(__name__)

DEFAULT_PRIORITY = (Channel.STEREO, Channel.RGB)


@dataclass(frozen=True)
class Detection:
    bbox: BBox2D
    sources: frozenset
    frames_present: int = 1

    def __post_init__(self):
        sources = frozenset(Channel(s) for s in self.sources)
        if not sources:
            raise ParameterError("a detection needs at least one source channel")
        if self.frames_present < 1:
            raise ParameterError("frames_present must be >= 1")
        object.__setattr__(self, 'sources', sources)


class TemporalWindow:
    """The last ``size`` per-frame box lists of one channel of one stream.

    Not thread-safe: exactly one caller feeds frames, in order.
    """

    def __init__(self, size=5, match_radius=40.0, min_presence=3):
        if size < 1:
            raise ParameterError("window size must be >= 1")
        if match_radius <= 0:
            raise ParameterError("match_radius must be positive")
        if not 1 <= min_presence <= size:
            raise ParameterError(f"min_presence must lie in 1..{size}, got {min_presence}")
        self.size = size
        self.match_radius = match_radius
        self.min_presence = min_presence
        self.frames = deque(maxlen=size)

    def __len__(self):
        return len(self.frames)

    def push(self, boxes):
        self.frames.append(tuple(boxes))

    def snapshot(self):
        clone = TemporalWindow(self.size, self.match_radius, self.min_presence)
        clone.frames.extend(self.frames)
        return clone

    def chains(self):
        """Chain boxes across the buffered frames, oldest first.

        Each frame's boxes are matched to the existing chains by globally
        greedy nearest centre within ``match_radius``; a chain takes at most
        one box per frame and is compared by its most recent box.
        """
        chains = []
        for boxes in self.frames:
            candidates = sorted(
                (center_distance(chain[-1], box), c, b)
                for c, chain in enumerate(chains)
                for b, box in enumerate(boxes)
                if center_distance(chain[-1], box) <= self.match_radius
            )
            used_chains, used_boxes = set(), set()
            for _, c, b in candidates:
                if c in used_chains or b in used_boxes:
                    continue
                chains[c].append(boxes[b])
                used_chains.add(c)
                used_boxes.add(b)
            chains.extend([box] for b, box in enumerate(boxes) if b not in used_boxes)
        return chains


def _round_half_up(value):
    return math.floor(value + 0.5)


def _mean_box(chain):
    n = len(chain)
    coords = [_round_half_up(sum(getattr(b, name) for b in chain) / n)
              for name in ('x_min', 'y_min', 'x_max', 'y_max')]
    return BBox2D(*coords, channel=chain[-1].channel, frames_present=n)


def temporal_average(win, new_boxes):
    """Push this frame's boxes and return the mean box of every chain seen in
    at least ``min_presence`` buffered frames."""
    win.push(new_boxes)
    averaged = [_mean_box(chain) for chain in win.chains() if len(chain) >= win.min_presence]
    return sorted(averaged, key=lambda b: b.coords)


def _priority_key(box, priority):
    rank = priority.index(box.channel) if box.channel in priority else len(priority)
    return (rank, -box.area, box.coords)


def fuse_by_center_nms(rgb_boxes, stereo_boxes, dist_threshold, priority=DEFAULT_PRIORITY):
    """Greedy non-maximum suppression keyed on box-centre distance.

    Boxes are visited by channel priority, then larger area first. An
    accepted box absorbs every remaining box whose centre is strictly closer
    than ``dist_threshold`` to its own centre; the detection spans the union
    of all absorbed boxes.
    """
    priority = tuple(Channel(p) for p in priority)
    pending = sorted(list(rgb_boxes) + list(stereo_boxes), key=lambda b: _priority_key(b, priority))
    consumed = [False] * len(pending)
    detections = []
    for i, anchor in enumerate(pending):
        if consumed[i]:
            continue
        consumed[i] = True
        members = [anchor]
        for j in range(i + 1, len(pending)):
            if not consumed[j] and center_distance(anchor, pending[j]) < dist_threshold:
                consumed[j] = True
                members.append(pending[j])
        bbox = anchor
        for other in members[1:]:
            bbox = bbox_union(bbox, other)
        sources = frozenset(m.channel for m in members)
        if len(sources) == 1:
            bbox = bbox.with_channel(anchor.channel)
        frames_present = max(m.frames_present for m in members)
        detections.append(Detection(bbox, sources, frames_present))
    return detections


def gate_by_roi(dets, roi_mask):
    return [d for d in dets if center_in_mask(d.bbox, roi_mask)]


def scaled_threshold(dist_threshold, width, reference_width):
    """Scale a distance expressed for ``reference_width`` frames to ``width``."""
    return dist_threshold * width / reference_width
