"""
Depth obstacle channel.

Disparity is averaged over SLIC superpixels of the left image, lifted to a
point cloud, the ground plane is found with RANSAC, points above it are
clustered with DBSCAN and the clusters are projected back to image boxes.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core import BBox2D, CameraMount, Channel, DisparityMap, center_in_mask
from .exceptions import DegenerateInputError, GroundNotFoundError, ParameterError
from .slic import SlicParams, slic_segment

logger = logging.getLogger(__name__)

# Stereo depth is unreliable beyond this distance.
MAX_RANGE_M = 15.0


class Point3(NamedTuple):
    x: float
    y: float
    z: float
    src_pixel: tuple


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Camera-frame points (x right, y down, z forward) with their source pixels.

    ``segments`` holds the superpixel id of every point when the cloud was
    built one point per superpixel.
    """
    points: np.ndarray
    pixels: np.ndarray
    segments: np.ndarray | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        if len(points) != len(pixels):
            raise ParameterError("every point needs exactly one source pixel")
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'pixels', pixels)
        if self.segments is not None:
            object.__setattr__(self, 'segments', np.asarray(self.segments, dtype=np.int64))

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        x, y, z = self.points[i]
        u, v = self.pixels[i]
        return Point3(float(x), float(y), float(z), (float(u), float(v)))

    def subset(self, index):
        segments = None if self.segments is None else self.segments[index]
        return PointCloud(self.points[index], self.pixels[index], segments)


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``normal . p + offset = 0``; positive signed distance is above ground."""
    normal: tuple
    offset: float
    inlier_count: int

    def __post_init__(self):
        normal = tuple(float(c) for c in self.normal)
        if abs(math.hypot(*normal) - 1.0) > 1e-9:
            raise ParameterError("plane normal must be a unit vector")
        object.__setattr__(self, 'normal', normal)
        object.__setattr__(self, 'offset', float(self.offset))

    def signed_distance(self, points):
        return np.asarray(points, dtype=np.float64) @ np.asarray(self.normal) + self.offset


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 200
    threshold: float = 0.02
    seed: int = 0
    max_tilt_deg: float = 30.0

    def __post_init__(self):
        if self.iterations < 1 or self.threshold <= 0:
            raise ParameterError("RANSAC needs iterations >= 1 and a positive threshold")


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.25
    min_pts: int = 3
    min_cluster_size: int = 3

    def __post_init__(self):
        if self.eps <= 0 or self.min_pts < 1 or self.min_cluster_size < 1:
            raise ParameterError("DBSCAN needs eps > 0, min_pts >= 1 and min_cluster_size >= 1")


@dataclass(frozen=True)
class StereoParams:
    slic: SlicParams = field(default_factory=SlicParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    mount: CameraMount | None = field(default_factory=CameraMount)
    min_height: float = 0.03
    max_height: float = 2.5
    max_range: float = MAX_RANGE_M
    dense: bool = False

    def __post_init__(self):
        if not 0 <= self.min_height < self.max_height:
            raise ParameterError("need 0 <= min_height < max_height")
        if self.max_range <= 0:
            raise ParameterError("max_range must be positive")


def _check_shape(disp, other):
    if disp.disparity.shape != other.shape:
        raise ParameterError(f"dimension mismatch: disparity {disp.width}x{disp.height}, "
                             f"other {other.shape[1]}x{other.shape[0]}")


def average_disparity_by_superpixel(disp, labels):
    _check_shape(disp, labels.labels)
    values = disp.disparity
    valid = disp.valid
    ids = labels.labels[valid]
    sums = np.bincount(ids, weights=values[valid], minlength=labels.num_labels)
    counts = np.bincount(ids, minlength=labels.num_labels)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return DisparityMap(np.where(valid, means[labels.labels], 0.0))


def unproject_pixels(u, v, d, cam, max_range=MAX_RANGE_M):
    """Lift pixel coordinates with positive disparities to camera-frame points.

    Returns the points and the boolean selection of inputs that survived the
    range cutoff.
    """
    u, v, d = (np.asarray(a, dtype=np.float64) for a in (u, v, d))
    z = cam.fx * cam.baseline / d
    keep = z <= max_range
    z = z[keep]
    x = (u[keep] - cam.cx) * z / cam.fx
    y = (v[keep] - cam.cy) * z / cam.fy
    return np.stack([x, y, z], axis=1), keep


def unproject(disp, cam, max_range=MAX_RANGE_M):
    """One point per valid pixel: Z = fx*B/d, X = (u-cx)Z/fx, Y = (v-cy)Z/fy."""
    if (disp.width, disp.height) != (cam.width, cam.height):
        raise ParameterError("disparity map and camera disagree on the image size")
    v, u = np.nonzero(disp.valid)
    points, keep = unproject_pixels(u, v, disp.disparity[v, u], cam, max_range)
    return PointCloud(points, np.stack([u[keep], v[keep]], axis=1))


def superpixel_cloud(averaged, labels, cam, max_range=MAX_RANGE_M):
    """One point per superpixel: its valid-pixel centroid at the averaged disparity."""
    _check_shape(averaged, labels.labels)
    valid = averaged.valid
    ids = labels.labels[valid]
    v, u = np.nonzero(valid)
    counts = np.bincount(ids, minlength=labels.num_labels)
    present = np.flatnonzero(counts)
    cu = np.bincount(ids, weights=u, minlength=labels.num_labels)[present] / counts[present]
    cv = np.bincount(ids, weights=v, minlength=labels.num_labels)[present] / counts[present]
    cd = np.bincount(ids, weights=averaged.disparity[valid], minlength=labels.num_labels)[present] / counts[present]
    points, keep = unproject_pixels(cu, cv, cd, cam, max_range)
    return PointCloud(points, np.stack([cu[keep], cv[keep]], axis=1), present[keep])


def project(points, cam):
    """Pinhole projection of camera-frame points to (u, v, disparity)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.stack([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy, cam.fx * cam.baseline / z], axis=1)


def _orient(normal, offset, points, inliers, up):
    if up is not None:
        sign = 1.0 if normal @ up >= 0 else -1.0
    else:
        above = np.sign(points[~inliers] @ normal + offset)
        balance = above.sum()
        if balance != 0:
            sign = 1.0 if balance > 0 else -1.0
        else:
            # the camera sits above the ground
            sign = 1.0 if offset >= 0 else -1.0
    return normal * sign, offset * sign


def ransac_plane(cloud, iterations=200, threshold=0.02, seed=0, up=None, max_tilt_deg=30.0):
    """Fit the dominant plane by 3-point RANSAC and refit it by least squares.

    With ``up`` given, hypotheses tilted more than ``max_tilt_deg`` from it are
    rejected and the normal is oriented along it; otherwise the normal points
    to the side holding most of the outliers.
    """
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    n = len(points)
    if n < 3:
        raise DegenerateInputError(f"RANSAC needs at least 3 points, got {n}")
    if up is not None:
        up = np.asarray(up, dtype=np.float64)
        up = up / np.linalg.norm(up)
    min_cos = math.cos(math.radians(max_tilt_deg))

    rng = np.random.default_rng(seed)
    best_count, best_model = -1, None
    tilted = 0
    for _ in range(iterations):
        p0, p1, p2 = points[rng.choice(n, 3, replace=False)]
        normal = np.cross(p1 - p0, p2 - p0)
        length = np.linalg.norm(normal)
        if length < 1e-12:
            continue
        normal = normal / length
        if up is not None and abs(normal @ up) < min_cos:
            tilted += 1
            continue
        offset = -normal @ p0
        count = int(np.count_nonzero(np.abs(points @ normal + offset) <= threshold))
        if count > best_count:
            best_count, best_model = count, (normal, offset)

    if best_model is None:
        if tilted:
            raise GroundNotFoundError(f"every plane hypothesis tilted more than {max_tilt_deg} degrees")
        raise DegenerateInputError("all RANSAC samples were collinear")

    normal, offset = best_model
    inliers = np.abs(points @ normal + offset) <= threshold
    if np.count_nonzero(inliers) >= 3:
        consensus = points[inliers]
        centroid = consensus.mean(axis=0)
        _, _, vt = np.linalg.svd(consensus - centroid, full_matrices=False)
        refit = vt[-1] / np.linalg.norm(vt[-1])
        if up is None or abs(refit @ up) >= min_cos:
            normal, offset = refit, -refit @ centroid
            inliers = np.abs(points @ normal + offset) <= threshold

    normal, offset = _orient(normal, offset, points, inliers, up)
    plane = PlaneModel(tuple(normal), offset, int(np.count_nonzero(inliers)))
    logger.debug("ground plane n=(%.3f, %.3f, %.3f) d=%.3f, %d/%d inliers",
                 *plane.normal, plane.offset, plane.inlier_count, n)
    return plane


def filter_above_ground(cloud, plane, min_height=0.03, max_height=2.5):
    height = plane.signed_distance(cloud.points)
    return cloud.subset((height >= min_height) & (height <= max_height))


@dataclass(frozen=True)
class Clustering:
    """DBSCAN output: ``clusters`` are sorted point-index arrays, ``noise`` the rest."""
    clusters: list
    noise: np.ndarray


def dbscan(cloud, params):
    """Density clustering with an order-independent result.

    Cluster ids follow the lexicographically smallest core point of each
    cluster; a border point reachable from several clusters joins the lowest id.
    """
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    n = len(points)
    if n == 0:
        return Clustering([], np.zeros(0, dtype=np.int64))

    pairs = cKDTree(points).query_pairs(params.eps, output_type='ndarray')
    a, b = pairs[:, 0], pairs[:, 1]
    neighbours = 1 + np.bincount(a, minlength=n) + np.bincount(b, minlength=n)
    core = neighbours >= params.min_pts

    both = core[a] & core[b]
    graph = coo_matrix((np.ones(np.count_nonzero(both)), (a[both], b[both])), shape=(n, n))
    _, component = connected_components(graph, directed=False)

    core_idx = np.flatnonzero(core)
    order = np.lexsort(points[core_idx].T[::-1])
    cluster_of_component = {}
    for i in core_idx[order]:
        cluster_of_component.setdefault(component[i], len(cluster_of_component))

    label = np.full(n, -1, dtype=np.int64)
    label[core_idx] = [cluster_of_component[component[i]] for i in core_idx]

    # border points: non-core with a core neighbour, lowest cluster id wins
    for p, q in ((a, b), (b, a)):
        reach = core[p] & ~core[q]
        for border, cluster in zip(q[reach], label[p[reach]]):
            if label[border] < 0 or cluster < label[border]:
                label[border] = cluster

    clusters = [np.flatnonzero(label == c) for c in range(len(cluster_of_component))]
    return Clustering(clusters, np.flatnonzero(label < 0))


def clusters_to_bboxes(clusters, cloud, cam, min_cluster_size, labels=None):
    """Image boxes of the clusters holding at least ``min_cluster_size`` points.

    With a superpixel ``labels`` map and a per-superpixel cloud, each box spans
    the pixel extents of its member superpixels; otherwise it is the tight box
    around the members' source pixels.
    """
    extents = None
    if labels is not None and cloud.segments is not None:
        extents = ndimage.find_objects(labels.labels + 1)

    boxes = []
    for members in clusters:
        members = np.asarray(members, dtype=np.int64)
        if len(members) < min_cluster_size:
            continue
        if extents is not None:
            windows = [extents[s] for s in cloud.segments[members]]
            x_min = min(w[1].start for w in windows)
            y_min = min(w[0].start for w in windows)
            x_max = max(w[1].stop for w in windows) - 1
            y_max = max(w[0].stop for w in windows) - 1
        else:
            u, v = cloud.pixels[members, 0], cloud.pixels[members, 1]
            x_min, y_min = math.floor(u.min()), math.floor(v.min())
            x_max, y_max = math.ceil(u.max()), math.ceil(v.max())
        box = BBox2D(x_min, y_min, x_max, y_max, channel=Channel.STEREO)
        boxes.append(box.clamp(cam.width, cam.height))
    return boxes


def detect_stereo(frame, disp, cam, roi_mask, params=None):
    """Obstacle boxes found by the depth channel.

    Raises GroundNotFoundError when no acceptable ground plane exists.
    """
    params = params or StereoParams()
    _check_shape(disp, frame.pixels[..., 0])
    _check_shape(disp, np.asarray(roi_mask))

    superpixels = slic_segment(frame, params.slic)
    averaged = average_disparity_by_superpixel(disp, superpixels)
    if params.dense:
        cloud = unproject(averaged, cam, params.max_range)
        labels = None
    else:
        cloud = superpixel_cloud(averaged, superpixels, cam, params.max_range)
        labels = superpixels

    up = params.mount.up if params.mount is not None else None
    try:
        plane = ransac_plane(cloud, params.ransac.iterations, params.ransac.threshold,
                             params.ransac.seed, up=up, max_tilt_deg=params.ransac.max_tilt_deg)
    except DegenerateInputError as e:
        raise GroundNotFoundError(str(e)) from e

    obstacles = filter_above_ground(cloud, plane, params.min_height, params.max_height)
    clustering = dbscan(obstacles, params.dbscan)
    boxes = clusters_to_bboxes(clustering.clusters, obstacles, cam, params.dbscan.min_cluster_size, labels)
    boxes = sorted((b for b in boxes if center_in_mask(b, roi_mask)), key=lambda b: b.coords)
    logger.debug("stereo channel: %d points, %d above ground, %d cluster(s), %d box(es) in ROI",
                 len(cloud), len(obstacles), len(clustering.clusters), len(boxes))
    return boxes
