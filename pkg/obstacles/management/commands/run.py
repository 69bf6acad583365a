import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from obstacles.config import load_config
from obstacles.dataset import load_sequence
from obstacles.exceptions import ConfigError, DatasetError, ResultsWriteError
from obstacles.pipeline import run_sequence, write_results
from obstacles.render import render_overlay, save_image

logger = logging.getLogger(__name__)

OVERLAY_DIR = 'overlays'


class Command(BaseCommand):
    help = "Run the obstacle detector over a dataset directory and write per-frame records"

    def add_arguments(self, parser):
        parser.add_argument('--dataset', required=True, help="Dataset directory (intrinsics.cfg, rgb/, disparity/)")
        parser.add_argument('--config', default=str(settings.OBSTACLES_DEFAULT_CONFIG),
                            help="Pipeline configuration JSON")
        parser.add_argument('--out', required=True, help="Output directory for records")
        parser.add_argument('--overlay', action='store_true', help="Also write an annotated image per frame")
        parser.add_argument('--threads', type=int, help="Worker threads (overrides runtime.threads)")
        parser.add_argument('--seed', type=int, help="RANSAC seed (overrides ransac.seed)")

    def handle(self, *args, **options):
        try:
            cfg = load_config(options['config'])
            sequence = load_sequence(options['dataset'])
        except (ConfigError, DatasetError) as e:
            raise CommandError(str(e), returncode=1)

        if options['seed'] is not None:
            cfg = cfg.with_seed(options['seed'])
        threads = options['threads']
        if threads is not None:
            if threads < 1:
                raise CommandError("--threads must be at least 1", returncode=1)
            cfg = cfg.with_threads(threads)

        camera = sequence.camera
        if camera is not None and (camera.width, camera.height) != (cfg.camera.width, cfg.camera.height):
            raise CommandError(
                f"configured camera is {cfg.camera.width}x{cfg.camera.height} but the dataset is "
                f"{camera.width}x{camera.height}", returncode=1)
        if camera is not None and camera != cfg.camera:
            logger.warning("dataset intrinsics differ from the configured camera; using the configuration")

        out_dir = Path(options['out'])
        bundles = {}

        def frames():
            for bundle in sequence:
                if options['overlay']:
                    bundles[bundle.frame_id] = bundle
                yield bundle

        def results():
            for result in run_sequence(frames(), cfg):
                if options['overlay']:
                    overlay_dir = out_dir / OVERLAY_DIR
                    overlay_dir.mkdir(parents=True, exist_ok=True)
                    image = render_overlay(bundles.pop(result.frame_id), result, cfg.roi)
                    save_image(image, overlay_dir / f"{result.frame_id:06d}.png")
                yield result

        try:
            summary = write_results(results(), out_dir, issues=sequence.issues)
        except ResultsWriteError as e:
            raise CommandError(f"{e} ({len(e.manifest)} file(s) written)", returncode=1)

        self.stdout.write(f"{summary.frame_count} frame(s) processed, {summary.alarm_frames} with obstacles; "
                          f"records in {out_dir}")
        if sequence.issues:
            raise CommandError(f"{len(sequence.issues)} frame(s) could not be processed; see summary.json",
                               returncode=2)
