"""
Monocular obstacle channel.

The frame is blended with its inverse (Pegtop soft light) to flatten local
illumination, converted to HSV with boosted saturation, median filtered and
segmented with Felzenszwalb-Huttenlocher graph segmentation. Segments inside
the ROI become obstacle boxes unless they are the ground segment or share
its colour.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
from numba import jit
from scipy import ndimage

from .core import BBox2D, Channel, ImageHSV, ImageRGB, LabelMap, center_in_mask, rasterize_roi
from .decorators import odd_kernel_required
from .exceptions import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraphSegParams:
    sigma: float = 0.6
    k: float = 1074.0
    min_size: int = 185

    def __post_init__(self):
        if self.sigma < 0 or self.k <= 0 or self.min_size < 1:
            raise ParameterError("graph segmentation needs sigma >= 0, k > 0 and min_size >= 1")


@dataclass(frozen=True)
class PreprocParams:
    saturation_gain: float = 1.5
    median_kernel: int = 5
    erosion_kernel: int = 7
    apply_erosion: bool = False
    dilation_kernel: int = 7
    apply_dilation: bool = False

    def __post_init__(self):
        if self.saturation_gain <= 0:
            raise ParameterError("saturation_gain must be positive")
        for name in ('median_kernel', 'erosion_kernel', 'dilation_kernel'):
            kernel = getattr(self, name)
            if kernel < 1 or kernel % 2 == 0:
                raise ParameterError(f"{name} must be an odd integer >= 1, got {kernel}")


@dataclass(frozen=True)
class ExtractParams:
    min_area: int = 64
    max_area_fraction: float = 0.25
    ground_tolerance: float = 12.0

    def __post_init__(self):
        if self.min_area < 1 or not 0 < self.max_area_fraction <= 1:
            raise ParameterError("min_area must be >= 1 and max_area_fraction in (0, 1]")
        if self.ground_tolerance < 0:
            raise ParameterError("ground_tolerance must be non-negative")


def _pegtop_table():
    a = np.arange(256, dtype=np.float64) / 255.0
    b = 1.0 - a
    blended = (1.0 - 2.0 * b) * a * a + 2.0 * b * a
    return np.floor(255.0 * blended + 0.5).astype(np.uint8)


PEGTOP_TABLE = _pegtop_table()


def pegtop_softlight(img):
    """Blend every channel with its inverse copy: (1-2b)a^2 + 2ba with b = 1-a."""
    return ImageRGB(PEGTOP_TABLE[img.pixels])


def rgb_to_hsv(img):
    rgb = img.pixels.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=2)
    spread = v - rgb.min(axis=2)
    safe_v = np.where(v > 0, v, 1.0)
    s = np.where(v > 0, spread / safe_v, 0.0)

    safe_spread = np.where(spread > 0, spread, 1.0)
    h = np.select(
        [spread == 0, v == r, v == g],
        [0.0, 60.0 * (g - b) / safe_spread, 120.0 + 60.0 * (b - r) / safe_spread],
        default=240.0 + 60.0 * (r - g) / safe_spread,
    )
    h = np.where(h < 0, h + 360.0, h) + 0.0
    return ImageHSV(np.stack([h, s, v], axis=2))


def boost_saturation(img, gain):
    if gain <= 0:
        raise ParameterError(f"saturation gain must be positive, got {gain}")
    pixels = img.pixels.copy()
    pixels[..., 1] = np.minimum(1.0, gain * pixels[..., 1])
    return ImageHSV(pixels)


def hsv_cone(img):
    """Embed HSV as (255*S*cos H, 255*S*sin H, V) so hue wraps smoothly and grays have no hue."""
    hue = np.deg2rad(img.hue)
    chroma = 255.0 * img.saturation
    return np.stack([chroma * np.cos(hue), chroma * np.sin(hue), img.value], axis=2)


@odd_kernel_required
def median_filter(raster, kernel):
    """Per-channel kernel x kernel median with edge replication."""
    raster = np.asarray(raster)
    if raster.size == 0:
        raise ParameterError("median_filter needs a non-empty raster")
    if kernel == 1:
        return raster.copy()
    size = (kernel, kernel) + (1,) * (raster.ndim - 2)
    return ndimage.median_filter(raster, size=size, mode='nearest')


def gaussian_smooth(raster, sigma):
    raster = np.asarray(raster, dtype=np.float64)
    if sigma == 0:
        return raster.copy()
    radius = max(1, math.ceil(3.0 * sigma))
    if raster.ndim == 2:
        return ndimage.gaussian_filter(raster, sigma, mode='nearest', radius=radius)
    return np.stack([ndimage.gaussian_filter(raster[..., c], sigma, mode='nearest', radius=radius)
                     for c in range(raster.shape[2])], axis=2)


def grid_edges(features):
    """8-neighbourhood edges of a (H, W, C) raster in Kruskal order.

    Returns (src, tgt, weight) with src < tgt, sorted by weight and then by
    (src, tgt) so ties resolve the same way on every run.
    """
    height, width = features.shape[:2]
    index = np.arange(height * width).reshape(height, width)

    # per pixel: right, down-left, down, down-right, i.e. ascending target index
    offsets = np.array([1, width - 1, width, width + 1])
    valid = np.zeros((height, width, 4), dtype=bool)
    weights = np.zeros((height, width, 4))
    neighbours = [
        ((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
        ((slice(None, -1), slice(1, None)), (slice(1, None), slice(None, -1))),
        ((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
        ((slice(None, -1), slice(None, -1)), (slice(1, None), slice(1, None))),
    ]
    for direction, (here, there) in enumerate(neighbours):
        diff = features[here] - features[there]
        valid[here + (direction,)] = True
        weights[here + (direction,)] = np.sqrt(np.sum(diff * diff, axis=2))

    src = np.broadcast_to(index[..., None], valid.shape)[valid]
    tgt = (index[..., None] + offsets)[valid]
    weight = weights[valid]
    # edges are already in (src, tgt) order, so a stable sort settles ties
    order = np.argsort(weight, kind='stable')
    return src[order], tgt[order], weight[order]


@jit(nopython=True, nogil=True, cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        up = parent[x]
        parent[x] = root
        x = up
    return root


@jit(nopython=True, nogil=True, cache=True)
def _join(parent, rank, size, a, b):
    if rank[a] > rank[b]:
        a, b = b, a
    parent[a] = b
    size[b] += size[a]
    if rank[a] == rank[b]:
        rank[b] += 1
    return b


@jit(nopython=True, nogil=True, cache=True)
def _segment_graph(num_vertices, src, tgt, weight, k, min_size):
    parent = np.arange(num_vertices)
    rank = np.zeros(num_vertices, dtype=np.int64)
    size = np.ones(num_vertices, dtype=np.int64)
    threshold = np.full(num_vertices, k, dtype=np.float64)

    for e in range(src.shape[0]):
        a = _find(parent, src[e])
        b = _find(parent, tgt[e])
        if a != b and weight[e] <= threshold[a] and weight[e] <= threshold[b]:
            root = _join(parent, rank, size, a, b)
            threshold[root] = weight[e] + k / size[root]

    # the first surviving edge of a small component is its cheapest neighbour
    for e in range(src.shape[0]):
        a = _find(parent, src[e])
        b = _find(parent, tgt[e])
        if a != b and (size[a] < min_size or size[b] < min_size):
            _join(parent, rank, size, a, b)

    roots = np.empty(num_vertices, dtype=np.int64)
    for v in range(num_vertices):
        roots[v] = _find(parent, v)
    return roots


def graph_segment(raster, params):
    """Felzenszwalb-Huttenlocher segmentation of a (H, W) or (H, W, C) raster."""
    features = np.asarray(raster, dtype=np.float64)
    if features.ndim == 2:
        features = features[..., None]
    height, width = features.shape[:2]
    if height < 2 or width < 2:
        raise ParameterError(f"graph_segment needs at least a 2x2 image, got {width}x{height}")

    smoothed = gaussian_smooth(features, params.sigma)
    src, tgt, weight = grid_edges(smoothed)
    roots = _segment_graph(height * width, src, tgt, weight, float(params.k), int(params.min_size))
    labels = LabelMap.from_raster(roots.reshape(height, width))
    logger.debug("graph_segment %dx%d: %d segments", width, height, labels.num_labels)
    return labels


def _as_raster(labels):
    if isinstance(labels, LabelMap):
        raster = labels.labels.copy()
        if labels.background is not None:
            raster[raster == labels.background] = -1
        return raster
    return np.asarray(labels)


@odd_kernel_required
def morphological_erode(labels, kernel):
    """Keep a pixel's label only where its whole kernel neighbourhood shares it.

    Pixels on segment boundaries become background: the ``background`` id of
    a returned LabelMap, ``-1`` for plain integer rasters and ``False`` for
    boolean masks.
    """
    raster = _as_raster(labels)
    if raster.dtype == bool:
        return ndimage.minimum_filter(raster, size=kernel, mode='nearest')
    low = ndimage.minimum_filter(raster, size=kernel, mode='nearest')
    high = ndimage.maximum_filter(raster, size=kernel, mode='nearest')
    eroded = np.where((low == raster) & (high == raster), raster, -1)
    if isinstance(labels, LabelMap):
        return LabelMap.from_raster(eroded)
    return eroded


@odd_kernel_required
def morphological_dilate(labels, kernel):
    """Grow surviving segments back over background pixels.

    A background pixel takes the highest segment id found in its kernel
    neighbourhood; segment pixels never change.
    """
    raster = _as_raster(labels)
    if raster.dtype == bool:
        return ndimage.maximum_filter(raster, size=kernel, mode='nearest')
    grown = ndimage.maximum_filter(raster, size=kernel, mode='nearest')
    dilated = np.where(raster < 0, grown, raster)
    if isinstance(labels, LabelMap):
        return LabelMap.from_raster(dilated)
    return dilated


def segment_means(labels, features):
    """Mean feature vector of every segment, shape (num_labels, C)."""
    flat = np.asarray(features, dtype=np.float64).reshape(labels.labels.size, -1)
    ids = labels.labels.ravel()
    sums = np.stack([np.bincount(ids, weights=flat[:, c], minlength=labels.num_labels)
                     for c in range(flat.shape[1])], axis=1)
    return sums / np.maximum(labels.sizes(), 1)[:, None]


def extract_obstacle_bboxes(labels, roi_mask, min_area=64, max_area_fraction=0.25, features=None,
                            ground_tolerance=0.0):
    """Tight boxes of the non-ground segments whose centre pixel lies in the ROI.

    The largest segment intersecting the ROI (lowest id on ties) is the ground
    and never reported. When ``features`` is given, every segment whose mean
    feature lies within ``ground_tolerance`` (Euclidean) of the ground's mean
    is ground as well.
    """
    roi_mask = np.asarray(roi_mask, dtype=bool)
    if roi_mask.shape != labels.labels.shape:
        raise ParameterError("label map and ROI mask differ in size")
    if ground_tolerance < 0:
        raise ParameterError(f"ground_tolerance must be non-negative, got {ground_tolerance}")
    if not roi_mask.any():
        return []

    raster = labels.labels
    sizes = labels.sizes()
    in_roi = np.bincount(raster[roi_mask], minlength=labels.num_labels)
    candidates = in_roi > 0
    if labels.background is not None:
        candidates[labels.background] = False
    if not candidates.any():
        return []
    ground = int(np.argmax(np.where(candidates, sizes, -1)))

    is_ground = np.zeros(labels.num_labels, dtype=bool)
    is_ground[ground] = True
    if features is not None:
        if np.shape(features)[:2] != raster.shape:
            raise ParameterError("label map and feature raster differ in size")
        means = segment_means(labels, features)
        is_ground |= np.linalg.norm(means - means[ground], axis=1) <= ground_tolerance

    max_area = max_area_fraction * raster.size
    boxes = []
    for label, window in enumerate(ndimage.find_objects(raster + 1)):
        if window is None or is_ground[label] or label == labels.background:
            continue
        if not min_area <= sizes[label] <= max_area:
            continue
        rows, cols = window
        box = BBox2D(cols.start, rows.start, cols.stop - 1, rows.stop - 1, channel=Channel.RGB)
        if center_in_mask(box, roi_mask):
            boxes.append(box)
    logger.debug("ground: segment %d plus %d look-alike(s)", ground, int(is_ground.sum()) - 1)
    return sorted(boxes, key=lambda b: b.coords)


def segment_frame(frame, pp, gs):
    """Pre-processing chain plus graph segmentation (and optional erosion/dilation).

    Returns the label map together with the median-filtered feature raster.
    """
    hsv = boost_saturation(rgb_to_hsv(pegtop_softlight(frame)), pp.saturation_gain)
    features = median_filter(hsv_cone(hsv), pp.median_kernel)
    labels = graph_segment(features, gs)
    if pp.apply_erosion:
        labels = morphological_erode(labels, pp.erosion_kernel)
        if pp.apply_dilation:
            labels = morphological_dilate(labels, pp.dilation_kernel)
    return labels, features


def detect_rgb(frame, roi, pp, gs, extract=None, roi_mask=None):
    """Obstacle boxes found by the RGB channel.

    ``roi_mask`` may be passed when the caller already rasterized ``roi``.
    """
    extract = extract or ExtractParams()
    if roi_mask is None:
        roi_mask = rasterize_roi(roi, frame.width, frame.height)
    labels, features = segment_frame(frame, pp, gs)
    boxes = extract_obstacle_bboxes(labels, roi_mask, extract.min_area, extract.max_area_fraction,
                                    features=features, ground_tolerance=extract.ground_tolerance)
    logger.debug("rgb channel: %d segment(s), %d box(es)", labels.num_labels, len(boxes))
    return boxes
