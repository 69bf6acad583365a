from pathlib import Path
import tempfile

import numpy as np
from django.test import SimpleTestCase

from obstacles.core import CameraModel, DisparityMap, ImageRGB
from obstacles.dataset import (
    DISPARITY_DIR, INTRINSICS_FILE, RGB_DIR, DatasetWriter, FrameBundle, load_sequence, read_intrinsics,
    write_intrinsics,
)
from obstacles.exceptions import DatasetError, ParameterError

CAM = CameraModel(fx=50.0, fy=51.0, cx=15.5, cy=11.5, baseline=0.095, width=32, height=24)


def bundle(frame_id, seed=0):
    rng = np.random.default_rng(seed + frame_id)
    rgb = ImageRGB(rng.integers(0, 256, size=(24, 32, 3)).astype(np.uint8))
    disparity = DisparityMap(rng.uniform(0, 40, size=(24, 32)))
    return FrameBundle(frame_id, rgb, disparity)


class IntrinsicsTests(SimpleTestCase):
    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / INTRINSICS_FILE
            write_intrinsics(path, CAM, 1 / 32)
            self.assertEqual(read_intrinsics(path), (CAM, 1 / 32))

    def test_missing_file_is_fatal(self):
        with self.assertRaises(DatasetError):
            read_intrinsics('/nonexistent/intrinsics.cfg')

    def test_missing_key(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / INTRINSICS_FILE
            path.write_text("[intrinsics]\nfx = 50\n", encoding='utf-8')
            with self.assertRaises(DatasetError):
                read_intrinsics(path)


class SequenceTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name) / 'dataset'
        writer = DatasetWriter(self.root, CAM)
        for frame_id in range(3):
            writer.write(bundle(frame_id))

    def tearDown(self):
        self.tmp.cleanup()

    def test_frames_come_back_in_order(self):
        sequence = load_sequence(self.root)
        frames = list(sequence)
        self.assertEqual([f.frame_id for f in frames], [0, 1, 2])
        self.assertEqual(sequence.camera, CAM)
        self.assertEqual(frames[1].rgb, bundle(1).rgb)
        self.assertEqual(sequence.issues, [])

    def test_disparity_is_quantized_to_the_scale(self):
        restored = list(load_sequence(self.root))[0].disparity.disparity
        np.testing.assert_allclose(restored, bundle(0).disparity.disparity, atol=1 / 32 + 1e-12)

    def test_missing_disparity_is_a_warning(self):
        (self.root / DISPARITY_DIR / '000001.png').unlink()
        sequence = load_sequence(self.root)
        self.assertEqual([f.frame_id for f in sequence], [0, 2])
        self.assertEqual([(i.frame_id, i.level) for i in sequence.issues], [(1, 'warning')])
        self.assertEqual(sequence.errors, [])

    def test_unreadable_image_is_an_error(self):
        (self.root / RGB_DIR / '000002.png').write_bytes(b'not a png')
        sequence = load_sequence(self.root)
        self.assertEqual([f.frame_id for f in sequence], [0, 1])
        self.assertEqual([(i.frame_id, i.level) for i in sequence.errors], [(2, 'error')])

    def test_size_mismatch_is_an_error(self):
        DatasetWriter(self.root, CAM).write(FrameBundle(
            5, ImageRGB(np.zeros((10, 10, 3), dtype=np.uint8)), DisparityMap(np.zeros((10, 10)))))
        sequence = load_sequence(self.root)
        self.assertEqual(len(list(sequence)), 3)
        self.assertEqual([i.frame_id for i in sequence.errors], [5])

    def test_missing_intrinsics_is_fatal(self):
        (self.root / INTRINSICS_FILE).unlink()
        with self.assertRaises(DatasetError):
            load_sequence(self.root)

    def test_empty_dataset(self):
        empty = Path(self.tmp.name) / 'empty'
        empty.mkdir()
        sequence = load_sequence(empty)
        self.assertEqual(list(sequence), [])
        self.assertEqual(len(sequence), 0)

    def test_missing_directory(self):
        with self.assertRaises(DatasetError):
            load_sequence(Path(self.tmp.name) / 'nowhere')


class BundleTests(SimpleTestCase):
    def test_sizes_must_agree(self):
        with self.assertRaises(ParameterError):
            FrameBundle(0, ImageRGB(np.zeros((4, 4, 3), dtype=np.uint8)), DisparityMap(np.zeros((5, 4))))
