import math
import tempfile

import numpy as np
from django.test import SimpleTestCase

from obstacles.core import CameraModel, CameraMount, center_in_mask, rasterize_roi
from obstacles.exceptions import SceneSpecError
from obstacles.synthetic import (
    CameraPose, ObstacleSpec, load_truth, project_world, render_frame, render_scene, roi_polygon, standard_suites,
    suite_fingerprint, true_bbox, write_truth,
)

from .scenes import cube_scene, small_scene


class TrueBoxTests(SimpleTestCase):
    def test_cube_width_follows_pinhole_model(self):
        cam = CameraModel(700.0, 700.0, 639.5, 359.5, 0.095, 1280, 720)
        box = true_bbox(ObstacleSpec((0.2, 0.2, 0.2), (0.0, 3.0)), 0.0, cam, CameraPose(CameraMount(0.5, 0.0)))
        self.assertIn(box.width, (46, 47, 48))

    def test_obstacle_outside_frustum(self):
        spec = small_scene((ObstacleSpec((0.2, 0.2, 0.2), (6.0, 2.0)),), frames=1)
        with self.assertRaises(SceneSpecError) as ctx:
            render_frame(spec, 0, seed=0)
        self.assertIn('obstacle 0', str(ctx.exception))

    def test_partly_visible_obstacle_is_clipped(self):
        cam = CameraModel(700.0, 700.0, 639.5, 359.5, 0.095, 1280, 720)
        pose = CameraPose(CameraMount(0.5, 0.0))
        box = true_bbox(ObstacleSpec((0.2, 0.2, 0.2), (2.74, 3.0)), 0.0, cam, pose)
        self.assertEqual(box.x_max, 1279)
        self.assertGreater(box.x_min, 1200)
        self.assertGreater(box.y_min, 0)
        self.assertLess(box.y_max, 719)

    def test_obstacle_behind_camera(self):
        cam = CameraModel(700.0, 700.0, 639.5, 359.5, 0.095, 1280, 720)
        with self.assertRaises(SceneSpecError) as ctx:
            true_bbox(ObstacleSpec((0.2, 0.2, 0.2), (0.0, -1.0)), 0.0, cam, CameraPose(CameraMount(0.5, 0.0)), 2, 7)
        self.assertIn('obstacle 2', str(ctx.exception))

    def test_moving_obstacle(self):
        obstacle = ObstacleSpec(velocity=(0.5, 0.0))
        self.assertEqual(obstacle.footprint_at(2.0), (1.0, 3.0))

    def test_invalid_size(self):
        with self.assertRaises(SceneSpecError):
            ObstacleSpec((0.2, 0.0, 0.2))


class RenderTests(SimpleTestCase):
    def test_noiseless_floor_disparity_is_exact(self):
        spec = small_scene(frames=1)
        bundle, _ = render_frame(spec, 0, seed=0)
        cam, up = spec.camera, spec.mount.up
        for u, v in ((0, 179), (160, 150), (319, 120)):
            ray = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
            depth = -spec.mount.height_m / (ray @ up)
            self.assertAlmostEqual(bundle.disparity.disparity[v, u], cam.fx * cam.baseline / depth, places=9)

    def test_same_seed_same_frames(self):
        spec = cube_scene(frames=2, noise=0.5, texture=3.0)
        first, second = render_scene(spec, seed=4), render_scene(spec, seed=4)
        for (a, ta), (b, tb) in zip(first, second):
            self.assertEqual(a.rgb, b.rgb)
            self.assertEqual(a.disparity, b.disparity)
            self.assertEqual(ta, tb)

    def test_different_seed_different_noise(self):
        spec = cube_scene(frames=1, noise=0.5, texture=3.0)
        (a, _), = render_scene(spec, seed=1)
        (b, _), = render_scene(spec, seed=2)
        self.assertNotEqual(a.disparity, b.disparity)

    def test_obstacle_pixels_carry_its_albedo(self):
        spec = cube_scene(frames=1)
        bundle, truth = render_frame(spec, 0, seed=0)
        box = truth.boxes[0].bbox
        cx, cy = (box.x_min + box.x_max) // 2, (box.y_min + box.y_max) // 2
        self.assertEqual(tuple(bundle.rgb.pixels[cy, cx]), (220, 30, 30))
        self.assertEqual(tuple(bundle.rgb.pixels[179, 5]), (90, 90, 90))

    def test_truth_files_round_trip(self):
        spec = cube_scene(frames=2)
        truths = [truth for _, truth in render_scene(spec)]
        with tempfile.TemporaryDirectory() as tmp:
            for truth in truths:
                write_truth(tmp, truth)
            self.assertEqual(load_truth(tmp), truths)

    def test_roi_lies_on_the_floor_ahead(self):
        spec = small_scene(frames=1)
        mask = rasterize_roi(roi_polygon(spec), spec.camera.width, spec.camera.height)
        self.assertTrue(mask[160, 160])
        self.assertFalse(mask[5, 160])
        self.assertFalse(mask[160, 2])


class SuiteTests(SimpleTestCase):
    def test_suite_contents(self):
        suites = standard_suites()
        self.assertEqual(sorted(suites), ['S1', 'S2', 'S3', 'S4', 'S5'])
        self.assertGreaterEqual(len(suites['S3'].obstacles), 3)
        self.assertGreaterEqual(len({o.size for o in suites['S3'].obstacles}), 2)
        self.assertEqual(suites['S5'].obstacles, ())
        self.assertEqual(suites['S4'].frames, 30)
        self.assertEqual(suites['S4'].obstacles[0].velocity, (0.5, 0.0))
        self.assertTrue(suites['S2'].disparity_warp)

    def test_moving_box_starts_at_the_roi_edge(self):
        s4 = standard_suites()['S4']
        box = s4.obstacles[0]
        first, last = box.footprint_at(0.0), box.footprint_at((s4.frames - 1) / s4.frame_rate)
        self.assertLess(abs(first[0] + s4.roi_half_width), 0.3)
        self.assertLess(abs(last[0]), abs(first[0]))
        mask = rasterize_roi(roi_polygon(s4), s4.camera.width, s4.camera.height)
        self.assertTrue(center_in_mask(true_bbox(box, 0.0, s4.camera, CameraPose(s4.mount)), mask))

    def test_low_contrast_suite_stays_within_eight_levels(self):
        s2 = standard_suites()['S2']
        for obstacle in s2.obstacles:
            self.assertLessEqual(max(abs(a - f) for a, f in zip(obstacle.albedo, s2.floor_albedo)), 8)

    def test_fingerprint_is_stable(self):
        self.assertEqual(suite_fingerprint(), suite_fingerprint(standard_suites()))
        self.assertEqual(len(suite_fingerprint()), 64)
        changed = standard_suites()
        changed['S5'] = changed['S5'].with_frames(10)
        self.assertNotEqual(suite_fingerprint(changed), suite_fingerprint())

    def test_every_suite_obstacle_stays_in_view(self):
        for spec in standard_suites().values():
            pose = CameraPose(spec.mount)
            for frame_id in range(spec.frames):
                for i, obstacle in enumerate(spec.obstacles):
                    u, v, z = project_world(obstacle.vertices_at(frame_id / spec.frame_rate), spec.camera, pose)
                    self.assertTrue(np.all(z > 0))
                    self.assertGreaterEqual(min(u.min(), v.min()), 0, f"{spec.name} obstacle {i}")
                    self.assertLessEqual(u.max(), spec.camera.width - 1)
                    self.assertLessEqual(v.max(), spec.camera.height - 1)

    def test_suite_focal_length(self):
        cam = standard_suites()['S1'].camera
        self.assertAlmostEqual(cam.fx, 640 / math.tan(math.radians(43.5)))
