"""
Synthetic parking scenes with exact ground truth.

Scenes are rendered analytically: every pixel ray is intersected with the
floor, a back wall and axis-aligned cuboid obstacles. World coordinates are
x right, y up and z forward, with the origin on the floor below the camera.
"""
from dataclasses import asdict, dataclass, field, replace
import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np

from .core import BBox2D, CameraModel, CameraMount, Channel, DisparityMap, ImageRGB, RoiPolygon
from .dataset import FrameBundle
from .exceptions import SceneSpecError
from .stereo import PlaneModel

logger = logging.getLogger(__name__)

SUITE_VERSION = '2'

TRUTH_DIR = 'truth'


@dataclass(frozen=True)
class ObstacleSpec:
    """Cuboid resting on the floor; ``position`` is its footprint centre (x, z)."""
    size: tuple = (0.2, 0.2, 0.2)
    position: tuple = (0.0, 3.0)
    albedo: tuple = (200, 40, 40)
    velocity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if len(self.size) != 3 or min(self.size) <= 0:
            raise SceneSpecError(f"obstacle size must be three positive lengths, got {self.size}")

    def footprint_at(self, t):
        return (self.position[0] + self.velocity[0] * t, self.position[1] + self.velocity[1] * t)

    def vertices_at(self, t):
        x, z = self.footprint_at(t)
        w, d, h = self.size
        return np.array([(x + sx * w / 2, y, z + sz * d / 2)
                         for sx in (-1, 1) for y in (0.0, h) for sz in (-1, 1)])


@dataclass(frozen=True)
class SceneSpec:
    name: str
    camera: CameraModel
    mount: CameraMount = field(default_factory=CameraMount)
    floor_albedo: tuple = (90, 90, 90)
    floor_texture_sigma: float = 3.0
    wall_distance: float = 12.0
    wall_albedo: tuple = (150, 160, 175)
    obstacles: tuple = ()
    disparity_noise_sigma: float = 0.3
    disparity_warp: bool = False
    warp_amplitude: float = 0.5
    warp_period: float = 80.0
    frames: int = 1
    frame_rate: float = 30.0
    roi_half_width: float = 1.5
    roi_near: float = 1.4
    roi_far: float = 11.0

    def __post_init__(self):
        if self.floor_texture_sigma < 0 or self.disparity_noise_sigma < 0:
            raise SceneSpecError("noise sigmas must be non-negative")
        if self.frames < 1 or self.frame_rate <= 0:
            raise SceneSpecError("a scene needs at least one frame and a positive frame rate")
        object.__setattr__(self, 'obstacles', tuple(self.obstacles))

    def to_dict(self):
        data = asdict(self)
        data['camera'] = asdict(self.camera)
        return data

    def with_frames(self, frames):
        return replace(self, frames=frames)


@dataclass(frozen=True)
class TruthBox:
    obstacle_id: int
    bbox: BBox2D


@dataclass(frozen=True)
class GroundTruthFrame:
    frame_id: int
    boxes: tuple
    plane: PlaneModel

    def to_dict(self):
        return {
            'frame_id': self.frame_id,
            'boxes': [{'obstacle_id': b.obstacle_id, 'bbox': list(b.bbox.coords)} for b in self.boxes],
            'plane': {'normal': list(self.plane.normal), 'offset': self.plane.offset},
        }

    @classmethod
    def from_dict(cls, data):
        boxes = tuple(TruthBox(b['obstacle_id'], BBox2D(*b['bbox'], channel=Channel.FUSED)) for b in data['boxes'])
        plane = PlaneModel(tuple(data['plane']['normal']), data['plane']['offset'], 0)
        return cls(data['frame_id'], boxes, plane)


class CameraPose:
    """Camera axes and centre in world coordinates."""

    def __init__(self, mount):
        pitch = math.radians(mount.pitch_deg)
        self.center = np.array([0.0, mount.height_m, 0.0])
        self.right = np.array([1.0, 0.0, 0.0])
        self.down = np.array([0.0, -math.cos(pitch), -math.sin(pitch)])
        self.forward = np.array([0.0, -math.sin(pitch), math.cos(pitch)])

    def to_camera(self, world_points):
        rel = np.asarray(world_points, dtype=np.float64) - self.center
        return np.stack([rel @ self.right, rel @ self.down, rel @ self.forward], axis=-1)

    def ray_directions(self, cam):
        du = (np.arange(cam.width) - cam.cx) / cam.fx
        dv = (np.arange(cam.height) - cam.cy) / cam.fy
        return (du[None, :, None] * self.right + dv[:, None, None] * self.down + self.forward)


def ground_plane(mount):
    """The floor in camera coordinates, oriented so heights above it are positive."""
    return PlaneModel(tuple(mount.up), mount.height_m, 0)


def project_world(points, cam, pose):
    pc = pose.to_camera(points)
    return cam.fx * pc[..., 0] / pc[..., 2] + cam.cx, cam.fy * pc[..., 1] / pc[..., 2] + cam.cy, pc[..., 2]


def true_bbox(obstacle, t, cam, pose, obstacle_id=0, frame_id=0):
    """Pixels whose rays can hit the cuboid: ceil/floor of its projected vertices.

    Partly visible obstacles are clipped to the image; an obstacle behind the
    camera or with no pixel in the image is an error.
    """
    u, v, z = project_world(obstacle.vertices_at(t), cam, pose)
    if np.any(z <= 0):
        raise SceneSpecError(f"obstacle {obstacle_id} is behind the camera at frame {frame_id}")
    x_min, y_min = max(0, math.ceil(u.min())), max(0, math.ceil(v.min()))
    x_max, y_max = min(cam.width - 1, math.floor(u.max())), min(cam.height - 1, math.floor(v.max()))
    if x_min > x_max or y_min > y_max:
        raise SceneSpecError(f"obstacle {obstacle_id} leaves the camera frustum at frame {frame_id}")
    if (x_min, y_min, x_max, y_max) != (math.ceil(u.min()), math.ceil(v.min()),
                                        math.floor(u.max()), math.floor(v.max())):
        logger.debug("obstacle %d clipped to the image at frame %d", obstacle_id, frame_id)
    return BBox2D(x_min, y_min, x_max, y_max, channel=Channel.FUSED)


def roi_polygon(spec):
    """Floor rectangle in front of the camera projected to the image."""
    pose = CameraPose(spec.mount)
    cam = spec.camera
    corners = np.array([
        (-spec.roi_half_width, 0.0, spec.roi_near),
        (spec.roi_half_width, 0.0, spec.roi_near),
        (spec.roi_half_width, 0.0, spec.roi_far),
        (-spec.roi_half_width, 0.0, spec.roi_far),
    ])
    u, v, z = project_world(corners, cam, pose)
    if np.any(z <= 0):
        raise SceneSpecError("ROI corners must lie in front of the camera")
    u = np.clip(u, 0, cam.width)
    v = np.clip(v, 0, cam.height)
    return RoiPolygon(tuple((round(float(a), 2), round(float(b), 2)) for a, b in zip(u, v)))


def _slab_hit(origin, dirs, lo, hi):
    t_near = np.full(dirs.shape[:2], -np.inf)
    t_far = np.full(dirs.shape[:2], np.inf)
    with np.errstate(divide='ignore', invalid='ignore'):
        for axis in range(3):
            d = dirs[..., axis]
            t1 = (lo[axis] - origin[axis]) / d
            t2 = (hi[axis] - origin[axis]) / d
            parallel = d == 0
            inside = lo[axis] <= origin[axis] <= hi[axis]
            low = np.where(parallel, -np.inf if inside else np.inf, np.minimum(t1, t2))
            high = np.where(parallel, np.inf if inside else -np.inf, np.maximum(t1, t2))
            t_near = np.maximum(t_near, low)
            t_far = np.minimum(t_far, high)
    return np.where((t_far >= t_near) & (t_near > 0), t_near, np.inf)


def cast_rays(spec, t):
    """Per-pixel camera depth and surface index (0 floor, 1 wall, 2+i obstacle i)."""
    pose = CameraPose(spec.mount)
    dirs = pose.ray_directions(spec.camera)
    origin = pose.center
    with np.errstate(divide='ignore', invalid='ignore'):
        floor = np.where(dirs[..., 1] < 0, -origin[1] / dirs[..., 1], np.inf)
        wall = np.where(dirs[..., 2] > 0, (spec.wall_distance - origin[2]) / dirs[..., 2], np.inf)
        # the wall stands on the floor
        wall = np.where(origin[1] + wall * dirs[..., 1] >= 0, wall, np.inf)
    candidates = [floor, wall]
    for obstacle in spec.obstacles:
        x, z = obstacle.footprint_at(t)
        w, d, h = obstacle.size
        candidates.append(_slab_hit(origin, dirs, (x - w / 2, 0.0, z - d / 2), (x + w / 2, h, z + d / 2)))
    stack = np.stack(candidates)
    surface = np.argmin(stack, axis=0)
    depth = np.take_along_axis(stack, surface[None], axis=0)[0]
    return depth, surface


def render_frame(spec, frame_id, seed):
    rng = np.random.default_rng((seed, frame_id))
    cam, pose = spec.camera, CameraPose(spec.mount)
    t = frame_id / spec.frame_rate

    boxes = tuple(TruthBox(i, true_bbox(o, t, cam, pose, i, frame_id)) for i, o in enumerate(spec.obstacles))
    depth, surface = cast_rays(spec, t)
    if not np.all(np.isfinite(depth)):
        raise SceneSpecError("some pixel rays miss every surface; lower the camera pitch")

    albedo = np.array([spec.floor_albedo, spec.wall_albedo] + [o.albedo for o in spec.obstacles], dtype=np.float64)
    rgb = albedo[surface]
    if spec.floor_texture_sigma > 0:
        rgb = rgb + rng.normal(0.0, spec.floor_texture_sigma, size=depth.shape)[..., None]
    rgb = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)

    disparity = cam.fx * cam.baseline / depth
    if spec.disparity_noise_sigma > 0:
        disparity = disparity + rng.normal(0.0, spec.disparity_noise_sigma, size=depth.shape)
    if spec.disparity_warp:
        phase = rng.uniform(0.0, 2 * math.pi)
        v, u = np.indices(depth.shape)
        disparity = disparity + spec.warp_amplitude * np.sin(2 * math.pi * (u + v) / spec.warp_period + phase)
    disparity = np.maximum(disparity, 0.0)

    bundle = FrameBundle(frame_id, ImageRGB(rgb), DisparityMap(disparity), timestamp=t)
    return bundle, GroundTruthFrame(frame_id, boxes, ground_plane(spec.mount))


def iter_scene(spec, seed=0):
    for frame_id in range(spec.frames):
        yield render_frame(spec, frame_id, seed)


def render_scene(spec, seed=0):
    """All frames of a scene as (FrameBundle, GroundTruthFrame) pairs; deterministic per seed."""
    return list(iter_scene(spec, seed))


def write_truth(out_dir, truth):
    directory = Path(out_dir) / TRUTH_DIR
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{truth.frame_id:06d}.json").write_text(
        json.dumps(truth.to_dict(), sort_keys=True, indent=2) + '\n', encoding='utf-8')


def load_truth(directory):
    directory = Path(directory)
    if (directory / TRUTH_DIR).is_dir():
        directory = directory / TRUTH_DIR
    frames = [GroundTruthFrame.from_dict(json.loads(p.read_text(encoding='utf-8')))
              for p in sorted(directory.glob('*.json'))]
    return sorted(frames, key=lambda f: f.frame_id)


# Frozen evaluation suites

def _suite_camera(width, height):
    from .config import camera_preset

    return camera_preset('d455', width, height)


def standard_suites(width=1280, height=720):
    """The named evaluation scenes, rendered with the D455 preset."""
    cam = _suite_camera(width, height)
    mount = CameraMount(height_m=1.5, pitch_deg=20.0)
    floor = (90, 90, 90)
    red, blue, yellow = (200, 40, 40), (40, 60, 200), (220, 200, 40)
    cube20 = (0.2, 0.2, 0.2)
    cube10 = (0.1, 0.1, 0.1)

    return {
        'S1': SceneSpec(
            'static-20cm', cam, mount, floor_albedo=floor,
            obstacles=(
                ObstacleSpec(cube20, (-0.6, 1.8), red),
                ObstacleSpec(cube20, (0.1, 2.8), blue),
                ObstacleSpec(cube20, (0.7, 3.9), yellow),
            ),
            disparity_noise_sigma=0.3, frames=100,
        ),
        'S2': SceneSpec(
            'static-10cm-low-contrast', cam, mount, floor_albedo=(70, 70, 70), floor_texture_sigma=2.0,
            obstacles=(
                ObstacleSpec(cube10, (-0.4, 2.4), (78, 72, 64)),
                ObstacleSpec(cube10, (0.5, 3.0), (64, 72, 78)),
            ),
            disparity_noise_sigma=0.7, disparity_warp=True, frames=100,
        ),
        'S3': SceneSpec(
            'multi-box', cam, mount, floor_albedo=floor,
            obstacles=(
                ObstacleSpec(cube10, (-0.7, 4.0), red),
                ObstacleSpec(cube10, (0.7, 4.0), blue),
                ObstacleSpec((0.5, 0.5, 0.5), (0.0, 3.0), floor),
            ),
            disparity_noise_sigma=0.7, disparity_warp=True, frames=100,
        ),
        'S4': SceneSpec(
            'moving-box', cam, mount, floor_albedo=floor,
            obstacles=(
                # starts at the left ROI edge and drives towards the centre line
                ObstacleSpec(cube20, (-1.3, 3.0), red, velocity=(0.5, 0.0)),
                ObstacleSpec((0.4, 0.4, 1.7), (1.0, 3.5), (60, 110, 60)),
            ),
            disparity_noise_sigma=0.3, frames=30, frame_rate=30.0,
        ),
        'S5': SceneSpec('empty', cam, mount, floor_albedo=floor, disparity_noise_sigma=0.3, frames=100),
    }


def suite_fingerprint(suites=None):
    """Stable digest of the serialized suite set."""
    suites = suites or standard_suites()
    document = {'version': SUITE_VERSION, 'suites': {name: spec.to_dict() for name, spec in sorted(suites.items())}}
    return hashlib.sha256(json.dumps(document, sort_keys=True).encode('utf-8')).hexdigest()
