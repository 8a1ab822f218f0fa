from django.core.management.base import BaseCommand

from scenarios.cli import add_run_arguments, load_config, reports_errors
from scenarios.runner import run_scenario


class Command(BaseCommand):
    help = (
        "Run a scenario for every configured seed and write per-seed "
        "and aggregate reports."
    )

    def add_arguments(self, parser):
        add_run_arguments(parser)

    @reports_errors
    def handle(self, *args, **options):
        config = load_config(options)
        outcome = run_scenario(
            config, out=options.get("out"), workers=options.get("workers")
        )
        for result in outcome.results:
            self.stdout.write(
                f"seed {result.seed}: "
                f"{len(result.records)}/{result.flows_started} flows, "
                f"trace {result.trace_digest[:12]}"
            )
        overall = outcome.aggregate["slowdown"].get("all")
        if overall and overall.get("avg"):
            self.stdout.write(f"mean slowdown {overall['avg']['mean']:.3f}")
        self.stdout.write(self.style.SUCCESS(f"reports written to {outcome.out_dir}"))
