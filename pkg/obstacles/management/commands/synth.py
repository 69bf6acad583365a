import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from obstacles.config import PipelineConfig, dump_config
from obstacles.dataset import DatasetWriter
from obstacles.exceptions import SceneSpecError
from obstacles.synthetic import (
    SUITE_VERSION, iter_scene, roi_polygon, standard_suites, suite_fingerprint, write_truth,
)

logger = logging.getLogger(__name__)

CONFIG_FILE = 'config.json'
SCENE_FILE = 'scene.json'


class Command(BaseCommand):
    help = "Render a synthetic evaluation suite as a dataset directory with ground truth"

    def add_arguments(self, parser):
        parser.add_argument('--suite', required=True, choices=sorted(standard_suites()))
        parser.add_argument('--out', required=True)
        parser.add_argument('--seed', type=int, default=settings.OBSTACLES_DEFAULT_SEED)
        parser.add_argument('--frames', type=int, help="Render only the first N frames")
        parser.add_argument('--width', type=int, default=1280)
        parser.add_argument('--height', type=int, default=720)

    def handle(self, *args, **options):
        if options['width'] < 2 or options['height'] < 2:
            raise CommandError("--width and --height must be at least 2", returncode=1)
        spec = standard_suites(options['width'], options['height'])[options['suite']]
        if options['frames'] is not None:
            if options['frames'] < 1:
                raise CommandError("--frames must be at least 1", returncode=1)
            spec = spec.with_frames(min(options['frames'], spec.frames))

        out = Path(options['out'])
        try:
            cfg = PipelineConfig(camera=spec.camera, roi=roi_polygon(spec), mount=spec.mount)
            writer = DatasetWriter(out, spec.camera)
            for bundle, truth in iter_scene(spec, options['seed']):
                writer.write(bundle)
                write_truth(out, truth)
        except SceneSpecError as e:
            raise CommandError(f"suite {options['suite']}: {e}", returncode=1)
        except OSError as e:
            raise CommandError(f"cannot write {out}: {e}", returncode=1)

        dump_config(cfg, out / CONFIG_FILE)
        scene = {
            'suite': options['suite'],
            'version': SUITE_VERSION,
            'fingerprint': suite_fingerprint(),
            'seed': options['seed'],
            'spec': spec.to_dict(),
        }
        (out / SCENE_FILE).write_text(json.dumps(scene, sort_keys=True, indent=2) + '\n', encoding='utf-8')
        logger.info("rendered suite %s (%s): %d frame(s) to %s", options['suite'], spec.name,
                    len(writer.written), out)
        self.stdout.write(f"{len(writer.written)} frame(s) of {options['suite']} written to {out}")
