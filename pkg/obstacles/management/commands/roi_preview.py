from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from obstacles.config import load_config
from obstacles.core import ImageRGB, rasterize_roi
from obstacles.dataset import load_sequence
from obstacles.exceptions import ConfigError, DatasetError, ParameterError
from obstacles.render import fill_roi, save_image


class Command(BaseCommand):
    help = "Render the configured region of interest over the first frame of a dataset"

    def add_arguments(self, parser):
        parser.add_argument('--dataset', required=True)
        parser.add_argument('--config', default=str(settings.OBSTACLES_DEFAULT_CONFIG))
        parser.add_argument('--out', default='roi_preview.png', help="PNG file to write")

    def handle(self, *args, **options):
        try:
            cfg = load_config(options['config'])
            sequence = load_sequence(options['dataset'])
        except (ConfigError, DatasetError) as e:
            raise CommandError(str(e), returncode=1)

        first = next(iter(sequence), None)
        if first is None:
            raise CommandError(f"no readable frame in {options['dataset']}", returncode=1)

        try:
            mask = rasterize_roi(cfg.roi, first.rgb.width, first.rgb.height)
        except ParameterError as e:
            raise CommandError(str(e), returncode=1)
        out = Path(options['out'])
        out.parent.mkdir(parents=True, exist_ok=True)
        save_image(ImageRGB(fill_roi(first.rgb.pixels, mask)), out)
        coverage = 100.0 * mask.mean()
        self.stdout.write(f"frame {first.frame_id:06d}: ROI covers {coverage:.1f}% of the image; wrote {out}")
