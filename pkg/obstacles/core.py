"""
Raster, geometry and bounding-box types shared by both detection channels.

All types are immutable value objects: array payloads are copied on
construction and marked read-only, so instances can be shared between threads.
"""
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .exceptions import InvalidPolygonError, ParameterError

# Disparity value marking an unmatched pixel.
INVALID_DISPARITY = 0.0


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class ImageRGB:
    """8-bit colour image, ``pixels`` shaped (height, width, 3)."""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ParameterError(f"ImageRGB expects an (H, W, 3) array, got shape {pixels.shape}")
        if pixels.dtype != np.uint8 and (pixels.min() < 0 or pixels.max() > 255):
            raise ParameterError("ImageRGB intensities must lie in 0..255")
        object.__setattr__(self, 'pixels', _frozen(pixels, np.uint8))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, ImageRGB) and np.array_equal(self.pixels, other.pixels)

    def __str__(self):
        return f"ImageRGB {self.width}x{self.height}"


@dataclass(frozen=True, eq=False)
class ImageHSV:
    """HSV image: H in degrees [0, 360), S in [0, 1], V in [0, 255]."""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ParameterError(f"ImageHSV expects an (H, W, 3) array, got shape {pixels.shape}")
        object.__setattr__(self, 'pixels', _frozen(pixels, np.float64))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def hue(self):
        return self.pixels[..., 0]

    @property
    def saturation(self):
        return self.pixels[..., 1]

    @property
    def value(self):
        return self.pixels[..., 2]

    def __eq__(self, other):
        return isinstance(other, ImageHSV) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Compact per-pixel segment ids.

    ``background`` names the id used for eroded boundary pixels, if any;
    consumers that extract segments skip it.
    """
    labels: np.ndarray
    num_labels: int
    background: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ParameterError("LabelMap expects a 2-D array")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_labels):
            raise ParameterError("LabelMap ids must lie in 0..num_labels-1")
        counts = np.bincount(labels.ravel(), minlength=self.num_labels) if labels.size else np.zeros(0)
        if np.any(counts[:self.num_labels] == 0):
            raise ParameterError("LabelMap is not compact: some ids do not occur")
        object.__setattr__(self, 'labels', _frozen(labels, np.int64))

    @classmethod
    def from_raster(cls, raster):
        """Relabel an integer raster compactly; negative values become the background id."""
        raster = np.asarray(raster)
        foreground = raster >= 0
        used, inverse = np.unique(raster[foreground], return_inverse=True)
        labels = np.empty(raster.shape, dtype=np.int64)
        labels[foreground] = inverse
        background = None
        if not foreground.all():
            background = len(used)
            labels[~foreground] = background
        num_labels = len(used) + (background is not None)
        return cls(labels, num_labels, background)

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def height(self):
        return self.labels.shape[0]

    def sizes(self):
        return np.bincount(self.labels.ravel(), minlength=self.num_labels)

    def __eq__(self, other):
        return (isinstance(other, LabelMap) and self.num_labels == other.num_labels
                and self.background == other.background and np.array_equal(self.labels, other.labels))


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel disparity in pixels; ``INVALID_DISPARITY`` marks unmatched pixels."""
    disparity: np.ndarray

    def __post_init__(self):
        disparity = np.asarray(self.disparity, dtype=np.float64)
        if disparity.ndim != 2:
            raise ParameterError("DisparityMap expects a 2-D array")
        if np.any(disparity < 0) or not np.all(np.isfinite(disparity)):
            raise ParameterError("disparities must be finite and non-negative")
        object.__setattr__(self, 'disparity', _frozen(disparity, np.float64))

    @property
    def width(self):
        return self.disparity.shape[1]

    @property
    def height(self):
        return self.disparity.shape[0]

    @property
    def valid(self):
        return self.disparity > INVALID_DISPARITY

    def __eq__(self, other):
        return isinstance(other, DisparityMap) and np.array_equal(self.disparity, other.disparity)


@dataclass(frozen=True)
class CameraModel:
    """Rectified pinhole intrinsics plus stereo baseline (metres)."""
    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0 or self.baseline <= 0:
            raise ParameterError("fx, fy and baseline must be positive")
        if self.width < 1 or self.height < 1:
            raise ParameterError("camera image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ParameterError("principal point must lie inside the image")

    def depth_to_disparity(self, z):
        return self.fx * self.baseline / z

    def disparity_to_depth(self, d):
        return self.fx * self.baseline / d


@dataclass(frozen=True)
class CameraMount:
    """Camera height above the floor and downward pitch."""
    height_m: float = 1.5
    pitch_deg: float = 20.0

    def __post_init__(self):
        if self.height_m <= 0:
            raise ParameterError("camera height must be positive")
        if not -90 < self.pitch_deg < 90:
            raise ParameterError("camera pitch must lie in (-90, 90) degrees")

    @property
    def up(self):
        """World up direction expressed in camera coordinates (x right, y down, z forward)."""
        pitch = math.radians(self.pitch_deg)
        return np.array([0.0, -math.cos(pitch), -math.sin(pitch)])


class Channel(str, Enum):
    RGB = 'rgb'
    STEREO = 'stereo'
    FUSED = 'fused'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BBox2D:
    """Axis-aligned box with inclusive integer pixel bounds.

    ``frames_present`` is set by temporal averaging and does not take part in
    equality.
    """
    x_min: int
    y_min: int
    x_max: int
    y_max: int
    channel: Channel = Channel.FUSED
    frames_present: int = field(default=1, compare=False)

    def __post_init__(self):
        for name in ('x_min', 'y_min', 'x_max', 'y_max'):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ParameterError(f"inverted box ({self.x_min},{self.y_min},{self.x_max},{self.y_max})")
        object.__setattr__(self, 'channel', Channel(self.channel))

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.width * self.height

    @property
    def coords(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def with_channel(self, channel, frames_present=None):
        return BBox2D(*self.coords, channel=channel,
                      frames_present=self.frames_present if frames_present is None else frames_present)

    def clamp(self, width, height):
        x_min = min(max(self.x_min, 0), width - 1)
        y_min = min(max(self.y_min, 0), height - 1)
        x_max = min(max(self.x_max, 0), width - 1)
        y_max = min(max(self.y_max, 0), height - 1)
        return BBox2D(x_min, y_min, x_max, y_max, self.channel, self.frames_present)

    def __str__(self):
        return f"{self.channel}({self.x_min},{self.y_min},{self.x_max},{self.y_max})"


@dataclass(frozen=True)
class RoiPolygon:
    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, 'vertices', tuple((float(x), float(y)) for x, y in self.vertices))


def rasterize_roi(roi, width, height):
    """Boolean (height, width) mask of pixels whose centres (x+0.5, y+0.5) fall
    inside ``roi`` by the even-odd rule."""
    if len(roi.vertices) < 3:
        raise InvalidPolygonError(f"ROI needs at least 3 vertices, got {len(roi.vertices)}")
    if width < 1 or height < 1:
        raise ParameterError("raster size must be positive")

    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    inside = np.zeros((height, width), dtype=bool)
    vertices = roi.vertices
    for (xa, ya), (xb, yb) in zip(vertices, vertices[1:] + vertices[:1]):
        if ya == yb:
            continue
        crosses = (ya > ys) != (yb > ys)
        x_cross = xa + (ys - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses[:, None] & (xs[None, :] < x_cross[:, None])
    return inside


def bbox_center(b):
    return ((b.x_min + b.x_max) / 2, (b.y_min + b.y_max) / 2)


def bbox_center_pixel(b):
    """Pixel holding the box centre (centre coordinates rounded down)."""
    return ((b.x_min + b.x_max) // 2, (b.y_min + b.y_max) // 2)


def center_in_mask(b, mask):
    x, y = bbox_center_pixel(b)
    height, width = mask.shape
    if not (0 <= x < width and 0 <= y < height):
        return False
    return bool(mask[y, x])


def center_distance(a, b):
    (ax, ay), (bx, by) = bbox_center(a), bbox_center(b)
    return math.hypot(ax - bx, ay - by)


def bbox_iou(a, b):
    if a.coords == b.coords:
        return 1.0
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    intersection = max(iw, 0) * max(ih, 0)
    union = a.area + b.area - intersection
    if union <= 0:
        return 0.0
    return intersection / union


def bbox_union(a, b):
    return BBox2D(min(a.x_min, b.x_min), min(a.y_min, b.y_min),
                  max(a.x_max, b.x_max), max(a.y_max, b.y_max),
                  channel=Channel.FUSED,
                  frames_present=max(a.frames_present, b.frames_present))
