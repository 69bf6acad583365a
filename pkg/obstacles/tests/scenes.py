"""Small synthetic scenes and matching configurations for fast tests."""
from obstacles.config import PipelineConfig, camera_preset
from obstacles.core import CameraMount
from obstacles.rgb import ExtractParams, GraphSegParams
from obstacles.slic import SlicParams
from obstacles.synthetic import ObstacleSpec, SceneSpec, roi_polygon

WIDTH, HEIGHT = 320, 180


def small_scene(obstacles=(), frames=6, noise=0.0, texture=0.0, width=WIDTH, height=HEIGHT):
    return SceneSpec('small', camera_preset('d455', width, height), CameraMount(1.5, 20.0),
                     floor_texture_sigma=texture, obstacles=obstacles, disparity_noise_sigma=noise,
                     frames=frames)


def cube_scene(frames=6, **kwargs):
    return small_scene((ObstacleSpec((0.2, 0.2, 0.2), (0.0, 2.5), (220, 30, 30)),), frames=frames, **kwargs)


def small_config(spec):
    return PipelineConfig(
        camera=spec.camera,
        roi=roi_polygon(spec),
        mount=spec.mount,
        graphseg=GraphSegParams(min_size=40),
        extract=ExtractParams(min_area=16),
        slic=SlicParams(region_size=10),
    )
