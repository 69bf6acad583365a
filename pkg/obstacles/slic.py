"""
SLIC superpixels: localized k-means in CIELAB + position space.
"""
from collections import deque
from dataclasses import dataclass
import logging

import numpy as np
from numba import jit
from skimage import color, measure

from .core import LabelMap
from .exceptions import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlicParams:
    region_size: int = 24
    compactness: float = 10.0
    iterations: int = 10

    def __post_init__(self):
        if self.region_size < 2:
            raise ParameterError("region_size must be >= 2")
        if self.compactness <= 0:
            raise ParameterError("compactness must be positive")
        if self.iterations < 1:
            raise ParameterError(f"SLIC needs at least one iteration, got {self.iterations}")


def grid_centers(width, height, region_size):
    """Initial (y, x) centres: one per cell of a near-square grid with the given step."""
    nx = max(1, int(round(width / region_size)))
    ny = max(1, int(round(height / region_size)))
    xs = (np.arange(nx) + 0.5) * (width / nx) - 0.5
    ys = (np.arange(ny) + 0.5) * (height / ny) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing='ij')
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


def lab_gradient(lab):
    padded = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode='edge')
    dx = padded[1:-1, 2:] - padded[1:-1, :-2]
    dy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return np.sum(dx ** 2, axis=2) + np.sum(dy ** 2, axis=2)


def perturb_centers(centers, gradient):
    """Move each centre to the lowest-gradient pixel of its 3x3 neighbourhood,
    but only when that pixel is strictly smoother than the centre itself."""
    height, width = gradient.shape
    moved = centers.copy()
    for i, (cy, cx) in enumerate(centers):
        y0 = min(max(int(round(cy)), 0), height - 1)
        x0 = min(max(int(round(cx)), 0), width - 1)
        window = gradient[max(y0 - 1, 0):y0 + 2, max(x0 - 1, 0):x0 + 2]
        wy, wx = np.unravel_index(np.argmin(window), window.shape)
        if window[wy, wx] < gradient[y0, x0]:
            moved[i] = (max(y0 - 1, 0) + wy, max(x0 - 1, 0) + wx)
    return moved


@jit(nopython=True, nogil=True, cache=True)
def _assign(lab, centers, region_size, spatial_weight):
    height, width = lab.shape[0], lab.shape[1]
    labels = np.full((height, width), -1, dtype=np.int64)
    distance = np.full((height, width), np.inf)
    for k in range(centers.shape[0]):
        cl, ca, cb, cy, cx = centers[k, 0], centers[k, 1], centers[k, 2], centers[k, 3], centers[k, 4]
        y_lo = max(0, int(np.floor(cy - region_size)))
        y_hi = min(height - 1, int(np.ceil(cy + region_size)))
        x_lo = max(0, int(np.floor(cx - region_size)))
        x_hi = min(width - 1, int(np.ceil(cx + region_size)))
        for y in range(y_lo, y_hi + 1):
            for x in range(x_lo, x_hi + 1):
                dl = lab[y, x, 0] - cl
                da = lab[y, x, 1] - ca
                db = lab[y, x, 2] - cb
                d_color = np.sqrt(dl * dl + da * da + db * db)
                d_xy = np.sqrt((y - cy) ** 2 + (x - cx) ** 2)
                d = d_color + spatial_weight * d_xy
                if d < distance[y, x]:
                    distance[y, x] = d
                    labels[y, x] = k
    return labels


@jit(nopython=True, nogil=True, cache=True)
def _update_centers(lab, labels, centers):
    """Mean (L, a, b, y, x) of every cluster; clusters with no pixel keep their centre."""
    num_centers = centers.shape[0]
    sums = np.zeros((num_centers, 5))
    counts = np.zeros(num_centers, dtype=np.int64)
    for y in range(labels.shape[0]):
        for x in range(labels.shape[1]):
            k = labels[y, x]
            if k < 0:
                continue
            counts[k] += 1
            sums[k, 0] += lab[y, x, 0]
            sums[k, 1] += lab[y, x, 1]
            sums[k, 2] += lab[y, x, 2]
            sums[k, 3] += y
            sums[k, 4] += x
    updated = centers.copy()
    for k in range(num_centers):
        if counts[k] > 0:
            for column in range(5):
                updated[k, column] = sums[k, column] / counts[k]
    return updated


def _fragment_adjacency(fragments):
    pairs = [
        (fragments[:, :-1].ravel(), fragments[:, 1:].ravel()),
        (fragments[:-1, :].ravel(), fragments[1:, :].ravel()),
    ]
    a = np.concatenate([p for p, _ in pairs])
    b = np.concatenate([q for _, q in pairs])
    differ = a != b
    edges = np.unique(np.stack([a[differ], b[differ]], axis=1), axis=0)
    neighbours = {}
    for p, q in edges:
        neighbours.setdefault(int(p), set()).add(int(q))
        neighbours.setdefault(int(q), set()).add(int(p))
    return neighbours


def enforce_connectivity(labels, num_clusters):
    """Make every superpixel 4-connected.

    The largest fragment of each cluster keeps its id; every other fragment,
    smallest first, joins the largest adjacent superpixel (lowest id on ties).
    Pixels with a negative label are treated as fragments of no cluster.
    """
    fragments = measure.label(labels, background=num_clusters + 1, connectivity=1)
    fragments = fragments - fragments.min()
    num_fragments = int(fragments.max()) + 1
    flat_fragments = fragments.ravel()
    sizes = np.bincount(flat_fragments, minlength=num_fragments)
    owner = np.full(num_fragments, -1, dtype=np.int64)
    owner[flat_fragments] = labels.ravel()

    assignment = np.full(num_fragments, -1, dtype=np.int64)
    superpixel_size = {}
    by_size = sorted(range(num_fragments), key=lambda f: (-sizes[f], f))
    for f in by_size:
        cluster = int(owner[f])
        if cluster >= 0 and cluster not in superpixel_size:
            assignment[f] = cluster
            superpixel_size[cluster] = int(sizes[f])

    neighbours = _fragment_adjacency(fragments)
    pending = deque(sorted((f for f in range(num_fragments) if assignment[f] < 0),
                           key=lambda f: (sizes[f], f)))
    stalled = 0
    while pending:
        f = pending.popleft()
        adjacent = {int(assignment[n]) for n in neighbours.get(f, ()) if assignment[n] >= 0}
        if not adjacent:
            pending.append(f)
            stalled += 1
            if stalled > len(pending):
                raise ParameterError("superpixel fragment has no labelled neighbour")
            continue
        stalled = 0
        target = min(adjacent, key=lambda s: (-superpixel_size[s], s))
        assignment[f] = target
        superpixel_size[target] += int(sizes[f])

    return LabelMap.from_raster(assignment[fragments])


def slic_segment(img, params):
    width, height = img.width, img.height
    region = params.region_size
    if width <= region or height <= region:
        raise ParameterError(f"image {width}x{height} is not larger than one SLIC region ({region} px)")

    lab = color.rgb2lab(img.pixels)
    grid = perturb_centers(grid_centers(width, height, region), lab_gradient(lab))
    seeds = np.rint(grid).astype(np.int64)
    seeds[:, 0] = np.clip(seeds[:, 0], 0, height - 1)
    seeds[:, 1] = np.clip(seeds[:, 1], 0, width - 1)
    centers = np.concatenate([lab[seeds[:, 0], seeds[:, 1]], grid], axis=1)

    spatial_weight = params.compactness / region
    for _ in range(params.iterations):
        labels = _assign(lab, centers, region, spatial_weight)
        centers = _update_centers(lab, labels, centers)
    labels = _assign(lab, centers, region, spatial_weight)

    superpixels = enforce_connectivity(labels, len(centers))
    logger.debug("slic %dx%d: %d seeds, %d superpixels", width, height, len(centers), superpixels.num_labels)
    return superpixels
