from pathlib import Path
import tempfile

import numpy as np
from django.test import SimpleTestCase

from obstacles.core import BBox2D, Channel, DisparityMap, ImageRGB, RoiPolygon
from obstacles.dataset import FrameBundle
from obstacles.fusion import Detection
from obstacles.pipeline import FrameResult
from obstacles.render import ALARM_COLOR, RGB_COLOR, STEREO_COLOR, fill_roi, render_overlay, save_image

ROI = RoiPolygon([(0, 30), (80, 30), (80, 60), (0, 60)])


def gray_bundle():
    return FrameBundle(0, ImageRGB(np.full((60, 80, 3), 100, dtype=np.uint8)), DisparityMap(np.zeros((60, 80))))


def result(detections=True):
    dets = ()
    if detections:
        dets = (Detection(BBox2D(30, 35, 50, 50), {Channel.RGB, Channel.STEREO}),)
    return FrameResult(0, rgb_averaged=(BBox2D(10, 35, 20, 45, Channel.RGB),),
                       stereo_averaged=(BBox2D(60, 35, 70, 45, Channel.STEREO),), detections=dets)


class OverlayTests(SimpleTestCase):
    def test_roi_is_tinted(self):
        mask = np.zeros((2, 2), dtype=bool)
        mask[0, 0] = True
        tinted = fill_roi(np.full((2, 2, 3), 100, dtype=np.uint8), mask)
        self.assertEqual(tinted[0, 0].tolist(), [154, 102, 128])
        self.assertEqual(tinted[1, 1].tolist(), [100, 100, 100])

    def test_boxes_are_drawn_in_channel_colours(self):
        pixels = render_overlay(gray_bundle(), result(detections=False), ROI).pixels
        self.assertEqual(tuple(pixels[35, 10]), RGB_COLOR)
        self.assertEqual(tuple(pixels[35, 60]), STEREO_COLOR)
        self.assertEqual(tuple(pixels[5, 5]), (100, 100, 100))

    def test_detection_has_both_outlines(self):
        pixels = render_overlay(gray_bundle(), result(), ROI).pixels
        self.assertEqual(tuple(pixels[35, 30]), RGB_COLOR)
        self.assertEqual(tuple(pixels[33, 28]), STEREO_COLOR)

    def test_alarm_border(self):
        alarmed = render_overlay(gray_bundle(), result(), ROI).pixels
        quiet = render_overlay(gray_bundle(), result(detections=False), ROI).pixels
        self.assertEqual(tuple(alarmed[0, 0]), ALARM_COLOR)
        self.assertEqual(tuple(alarmed[59, 40]), ALARM_COLOR)
        self.assertEqual(tuple(quiet[0, 0]), (100, 100, 100))

    def test_rendering_is_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp:
            paths = [Path(tmp) / f'{i}.png' for i in range(2)]
            for path in paths:
                save_image(render_overlay(gray_bundle(), result(), ROI), path)
            self.assertEqual(paths[0].read_bytes(), paths[1].read_bytes())
