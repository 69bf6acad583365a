import json
from pathlib import Path
import tempfile

from django.test import SimpleTestCase

from obstacles.core import BBox2D, Channel
from obstacles.exceptions import ResultsWriteError
from obstacles.fusion import Detection
from obstacles.pipeline import (
    DETECTIONS_DIR, MANIFEST_FILE, STAGES, SUMMARY_FILE, TIMINGS_DIR, FrameResult, StreamState, dumps,
    load_results, process_frame, read_frame_result, record_to_result, result_to_record, run_sequence,
    write_results,
)
from obstacles.signals import frame_processed
from obstacles.synthetic import iter_scene

from .scenes import cube_scene, small_config, small_scene


def bundles(spec, seed=0):
    return [bundle for bundle, _ in iter_scene(spec, seed)]


def sample_result(frame_id=3, alarm=True):
    rgb = BBox2D(10, 10, 30, 30, Channel.RGB, frames_present=4)
    stereo = BBox2D(12, 8, 34, 31, Channel.STEREO, frames_present=5)
    detections = ()
    if alarm:
        detections = (Detection(BBox2D(10, 8, 34, 31, Channel.FUSED, frames_present=5),
                                {Channel.RGB, Channel.STEREO}, 5),)
    return FrameResult(
        frame_id=frame_id,
        rgb_boxes=(BBox2D(11, 10, 30, 31, Channel.RGB),),
        stereo_boxes=(),
        rgb_averaged=(rgb,),
        stereo_averaged=(stereo,),
        detections=detections,
        ground_found=True,
        timings={stage: 1.0 for stage in STAGES},
    )


class RecordTests(SimpleTestCase):
    def test_record_round_trip(self):
        result = sample_result()
        record = json.loads(dumps(result_to_record(result)))
        self.assertEqual(record_to_result(record), result)

    def test_record_holds_no_timings(self):
        self.assertNotIn('timings', result_to_record(sample_result()))

    def test_alarm_follows_detections(self):
        self.assertTrue(sample_result().alarm)
        self.assertFalse(sample_result(alarm=False).alarm)
        self.assertTrue(result_to_record(sample_result())['alarm'])

    def test_sources_are_sorted_names(self):
        record = result_to_record(sample_result())
        self.assertEqual(record['detections'][0]['sources'], ['rgb', 'stereo'])


class WriteResultsTests(SimpleTestCase):
    def test_layout(self):
        with tempfile.TemporaryDirectory() as tmp:
            summary = write_results([sample_result(1), sample_result(2, alarm=False)], tmp)
            out = Path(tmp)
            self.assertEqual(sorted(p.name for p in (out / DETECTIONS_DIR).iterdir()),
                             ['000001.json', '000002.json'])
            self.assertEqual(sorted(p.name for p in (out / TIMINGS_DIR).iterdir()),
                             ['000001.json', '000002.json'])
            self.assertEqual(summary.frame_count, 2)
            self.assertEqual(summary.alarm_frames, 1)
            stored = json.loads((out / SUMMARY_FILE).read_text())
            self.assertEqual(stored['frame_ids'], [1, 2])
            self.assertEqual(stored['mean_timings_ms']['total'], 1.0)

    def test_read_back(self):
        with tempfile.TemporaryDirectory() as tmp:
            write_results([sample_result(1)], tmp)
            restored = read_frame_result(tmp, 1)
            self.assertEqual(restored, sample_result(1))
            self.assertEqual(restored.timings, sample_result(1).timings)
            self.assertEqual(load_results(tmp), [sample_result(1)])

    def test_failure_leaves_partial_manifest(self):
        def failing():
            yield sample_result(1)
            raise OSError("disk full")

        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ResultsWriteError) as ctx:
                write_results(failing(), tmp)
            self.assertEqual(ctx.exception.manifest, ['detections/000001.json', 'timings/000001.json'])
            manifest = json.loads((Path(tmp) / MANIFEST_FILE).read_text())
            self.assertEqual(manifest['written'], ctx.exception.manifest)
            self.assertFalse((Path(tmp) / SUMMARY_FILE).exists())


class RunSequenceTests(SimpleTestCase):
    def test_empty_scene_raises_no_alarm(self):
        spec = small_scene(frames=6)
        results = list(run_sequence(bundles(spec), small_config(spec)))
        self.assertEqual([r.frame_id for r in results], list(range(6)))
        self.assertFalse(any(r.alarm for r in results))
        self.assertTrue(all(r.ground_found for r in results))

    def test_timings_cover_every_stage(self):
        spec = cube_scene(frames=2)
        result = list(run_sequence(bundles(spec), small_config(spec)))[-1]
        self.assertEqual(set(result.timings), set(STAGES))
        staged = sum(result.timings[s] for s in STAGES if s != 'total')
        self.assertLessEqual(staged, result.timings['total'] + 1e-6)

    def test_thread_count_does_not_change_records(self):
        spec = cube_scene(frames=7, noise=0.3, texture=2.0)
        cfg = small_config(spec)
        frames = bundles(spec, seed=5)
        single = [dumps(result_to_record(r)) for r in run_sequence(frames, cfg, threads=1)]
        threaded = [dumps(result_to_record(r)) for r in run_sequence(frames, cfg, threads=3)]
        self.assertEqual(single, threaded)

    def test_repeat_runs_are_identical(self):
        spec = cube_scene(frames=4, noise=0.3)
        cfg = small_config(spec)
        first = list(run_sequence(bundles(spec, 1), cfg))
        second = list(run_sequence(bundles(spec, 1), cfg))
        self.assertEqual(first, second)

    def test_process_frame_carries_state_between_calls(self):
        spec = cube_scene(frames=4)
        cfg = small_config(spec)
        frames = bundles(spec)
        state = StreamState.from_config(cfg)
        stepped = [process_frame(bundle, cfg, state) for bundle in frames]
        self.assertEqual(stepped, list(run_sequence(frames, cfg)))
        self.assertEqual(len(state.rgb.frames), 4)

    def test_frame_processed_signal(self):
        received = []

        def receiver(sender, result, **kwargs):
            received.append(result.frame_id)

        frame_processed.connect(receiver)
        try:
            spec = small_scene(frames=3)
            list(run_sequence(bundles(spec), small_config(spec)))
        finally:
            frame_processed.disconnect(receiver)
        self.assertEqual(received, [0, 1, 2])

    def test_match_radius_scales_with_width(self):
        spec = small_scene()
        state = StreamState.from_config(small_config(spec))
        self.assertAlmostEqual(state.rgb.match_radius, 40.0 * 320 / 1280)
        self.assertEqual(state.stereo.size, 5)
