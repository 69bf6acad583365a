"""
Dataset directories on disk::

    dataset/intrinsics.cfg          [intrinsics] fx fy cx cy baseline_m disparity_scale width height
    dataset/rgb/NNNNNN.png          8-bit RGB
    dataset/disparity/NNNNNN.png    16-bit single channel, disparity = value * disparity_scale
"""
import configparser
from dataclasses import dataclass, field
import logging
from pathlib import Path
import re

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import CameraModel, DisparityMap, ImageRGB
from .exceptions import DatasetError, FrameReadError, ParameterError

logger = logging.getLogger(__name__)

INTRINSICS_FILE = 'intrinsics.cfg'
RGB_DIR = 'rgb'
DISPARITY_DIR = 'disparity'
DEFAULT_DISPARITY_SCALE = 1 / 16
FRAME_NAME = re.compile(r'^(\d{6})\.png$')


def frame_name(frame_id):
    return f"{frame_id:06d}.png"


@dataclass(frozen=True)
class FrameBundle:
    frame_id: int
    rgb: ImageRGB
    disparity: DisparityMap
    timestamp: float | None = None

    def __post_init__(self):
        if (self.rgb.width, self.rgb.height) != (self.disparity.width, self.disparity.height):
            raise ParameterError(f"frame {self.frame_id}: RGB and disparity sizes differ")


@dataclass(frozen=True)
class FrameIssue:
    frame_id: int
    level: str
    message: str

    def to_dict(self):
        return {'frame_id': self.frame_id, 'level': self.level, 'message': self.message}


def read_intrinsics(path):
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding='utf-8') as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise DatasetError(f"missing intrinsics file {path}")
    except configparser.Error as e:
        raise DatasetError(f"unreadable intrinsics file {path}: {e}")

    try:
        section = parser['intrinsics']
        camera = CameraModel(
            fx=section.getfloat('fx'),
            fy=section.getfloat('fy'),
            cx=section.getfloat('cx'),
            cy=section.getfloat('cy'),
            baseline=section.getfloat('baseline_m'),
            width=section.getint('width'),
            height=section.getint('height'),
        )
        scale = section.getfloat('disparity_scale', fallback=DEFAULT_DISPARITY_SCALE)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"bad intrinsics file {path}: {e}")
    if scale <= 0:
        raise DatasetError(f"bad intrinsics file {path}: disparity_scale must be positive")
    return camera, scale


def write_intrinsics(path, camera, disparity_scale=DEFAULT_DISPARITY_SCALE):
    parser = configparser.ConfigParser()
    parser['intrinsics'] = {
        'fx': repr(camera.fx),
        'fy': repr(camera.fy),
        'cx': repr(camera.cx),
        'cy': repr(camera.cy),
        'baseline_m': repr(camera.baseline),
        'disparity_scale': repr(disparity_scale),
        'width': str(camera.width),
        'height': str(camera.height),
    }
    with open(path, 'w', encoding='utf-8') as fh:
        parser.write(fh)


def read_rgb(path, frame_id):
    try:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert('RGB'))
    except (OSError, UnidentifiedImageError) as e:
        raise FrameReadError(frame_id, f"unreadable RGB image {path.name}: {e}")
    return ImageRGB(pixels)


def read_disparity(path, frame_id, scale):
    try:
        with Image.open(path) as img:
            if img.mode not in ('I;16', 'I', 'L'):
                raise FrameReadError(frame_id, f"disparity {path.name} is {img.mode}, expected 16-bit grayscale")
            raw = np.asarray(img).astype(np.float64)
    except (OSError, UnidentifiedImageError) as e:
        raise FrameReadError(frame_id, f"unreadable disparity image {path.name}: {e}")
    return DisparityMap(raw * scale)


def encode_disparity(disp, scale=DEFAULT_DISPARITY_SCALE):
    return np.clip(np.rint(disp.disparity / scale), 0, 65535).astype(np.uint16)


def write_frame(dataset_dir, bundle, scale=DEFAULT_DISPARITY_SCALE):
    dataset_dir = Path(dataset_dir)
    (dataset_dir / RGB_DIR).mkdir(parents=True, exist_ok=True)
    (dataset_dir / DISPARITY_DIR).mkdir(parents=True, exist_ok=True)
    name = frame_name(bundle.frame_id)
    Image.fromarray(bundle.rgb.pixels.copy()).save(dataset_dir / RGB_DIR / name)
    Image.fromarray(encode_disparity(bundle.disparity, scale)).save(dataset_dir / DISPARITY_DIR / name)


def _frame_ids(directory):
    if not directory.is_dir():
        return set()
    ids = set()
    for entry in directory.iterdir():
        match = FRAME_NAME.match(entry.name)
        if match:
            ids.add(int(match.group(1)))
    return ids


class Sequence:
    """Ordered frames of one dataset directory.

    Iterating yields FrameBundles in ascending frame id. Frames that cannot be
    used are skipped and reported in ``issues``: a missing disparity or RGB
    file is a warning, an unreadable image an error.
    """

    def __init__(self, dataset_dir):
        self.root = Path(dataset_dir)
        if not self.root.is_dir():
            raise DatasetError(f"dataset directory {self.root} does not exist")
        rgb_ids = _frame_ids(self.root / RGB_DIR)
        disparity_ids = _frame_ids(self.root / DISPARITY_DIR)
        self.issues = []
        self.camera = None
        self.disparity_scale = DEFAULT_DISPARITY_SCALE

        for frame_id in sorted(rgb_ids ^ disparity_ids):
            missing = 'disparity' if frame_id in rgb_ids else 'RGB'
            self._issue(frame_id, 'warning', f"no {missing} image, frame skipped")
        self.frame_ids = sorted(rgb_ids & disparity_ids)

        if not rgb_ids and not disparity_ids:
            logger.info("no frames in %s", self.root)
            return
        self.camera, self.disparity_scale = read_intrinsics(self.root / INTRINSICS_FILE)

    def _issue(self, frame_id, level, message):
        issue = FrameIssue(frame_id, level, message)
        self.issues.append(issue)
        log = logger.error if level == 'error' else logger.warning
        log("frame %06d: %s", frame_id, message)
        return issue

    @property
    def errors(self):
        return [issue for issue in self.issues if issue.level == 'error']

    def __len__(self):
        return len(self.frame_ids)

    def read(self, frame_id):
        name = frame_name(frame_id)
        rgb = read_rgb(self.root / RGB_DIR / name, frame_id)
        disparity = read_disparity(self.root / DISPARITY_DIR / name, frame_id, self.disparity_scale)
        if (rgb.width, rgb.height) != (self.camera.width, self.camera.height):
            raise FrameReadError(frame_id, f"image is {rgb.width}x{rgb.height}, intrinsics say "
                                           f"{self.camera.width}x{self.camera.height}")
        if (disparity.width, disparity.height) != (rgb.width, rgb.height):
            raise FrameReadError(frame_id, "RGB and disparity sizes differ")
        return FrameBundle(frame_id, rgb, disparity)

    def __iter__(self):
        for frame_id in self.frame_ids:
            try:
                yield self.read(frame_id)
            except FrameReadError as e:
                self._issue(frame_id, 'error', e.detail)


def load_sequence(dataset_dir):
    return Sequence(dataset_dir)


@dataclass
class DatasetWriter:
    """Writes a dataset directory frame by frame."""
    root: Path
    camera: CameraModel
    disparity_scale: float = DEFAULT_DISPARITY_SCALE
    written: list = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        write_intrinsics(self.root / INTRINSICS_FILE, self.camera, self.disparity_scale)

    def write(self, bundle):
        write_frame(self.root, bundle, self.disparity_scale)
        self.written.append(bundle.frame_id)
