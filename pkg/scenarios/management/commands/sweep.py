from django.core.management.base import BaseCommand

from scenarios.cli import add_run_arguments, load_config, reports_errors
from scenarios.loader import parse_value
from scenarios.runner import sweep


class Command(BaseCommand):
    help = (
        "Run a scenario once per value of one parameter and tabulate "
        "slowdown per bin."
    )

    def add_arguments(self, parser):
        add_run_arguments(parser)
        parser.add_argument(
            "--axis", required=True, help="block.key or scheme/load/chunk"
        )
        parser.add_argument("--values", required=True, help="comma-separated values")

    @reports_errors
    def handle(self, *args, **options):
        config = load_config(options)
        values = [
            parse_value(v.strip()) for v in options["values"].split(",") if v.strip()
        ]
        path, rows, _ = sweep(
            config,
            options["axis"],
            values,
            out=options.get("out"),
            workers=options.get("workers"),
        )
        for value, scheme, label, avg, p99 in rows:
            avg_text = "-" if avg is None else f"{avg:.3f}"
            p99_text = "-" if p99 is None else f"{p99:.3f}"
            self.stdout.write(
                f"{value}\t{scheme}\t{label}\tavg={avg_text}\tp99={p99_text}"
            )
        self.stdout.write(self.style.SUCCESS(f"sweep table written to {path}"))
