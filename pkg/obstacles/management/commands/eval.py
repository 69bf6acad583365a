import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from obstacles.core import Channel
from obstacles.evaluation import evaluate
from obstacles.exceptions import EvaluationError, ParameterError
from obstacles.pipeline import load_results
from obstacles.synthetic import load_truth


class Command(BaseCommand):
    help = "Score detector records against synthetic ground truth and print a metrics table"

    def add_arguments(self, parser):
        parser.add_argument('--results', required=True, help="Output directory of a run")
        parser.add_argument('--truth', required=True, help="Synthetic dataset directory (or its truth/ folder)")
        parser.add_argument('--iou', type=float, default=0.5)
        parser.add_argument('--channel', choices=[c.value for c in Channel], default=Channel.FUSED.value)
        parser.add_argument('--obstacle', type=int, action='append', dest='obstacles',
                            help="Only score this obstacle id (repeatable)")
        parser.add_argument('--start-frame', type=int, default=0, help="Ignore frames before this id")
        parser.add_argument('--json', help="Also write the full report to this file")

    def handle(self, *args, **options):
        try:
            results = load_results(options['results'])
            truth = load_truth(options['truth'])
        except (OSError, ValueError, KeyError) as e:
            raise CommandError(f"cannot read records: {e}", returncode=1)
        if not truth:
            raise CommandError(f"no ground truth in {options['truth']}", returncode=1)

        try:
            report = evaluate(results, truth, options['iou'], options['channel'],
                              obstacle_ids=options['obstacles'], start_frame=options['start_frame'])
        except (EvaluationError, ParameterError) as e:
            raise CommandError(str(e), returncode=1)

        self.stdout.write(report.table())
        if options['json']:
            Path(options['json']).write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + '\n',
                                             encoding='utf-8')
