from django.core.management.base import BaseCommand

from metrics.baseline import BaselineOracle
from scenarios.cli import add_config_arguments, load_config, reports_errors

DEFAULT_SIZES = "1000,10000,100000,1000000,10000000"


class Command(BaseCommand):
    help = "Print unloaded flow completion times for a list of flow sizes."

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            "--sizes", default=DEFAULT_SIZES, help="comma-separated bytes"
        )
        parser.add_argument("--src", type=int, default=0)
        parser.add_argument(
            "--dst", type=int, help="default: first host on another leaf"
        )

    @reports_errors
    def handle(self, *args, **options):
        config = load_config(options)
        topo = config.build_topology()
        oracle = BaselineOracle(topo, config.transport_params(topo))
        src = options["src"]
        dst = options.get("dst")
        if dst is None:
            others = [h for h in topo.hosts if h != src and not topo.same_leaf(src, h)]
            dst = others[0] if others else next(h for h in topo.hosts if h != src)
        sizes = [int(s) for s in options["sizes"].split(",") if s.strip()]
        self.stdout.write("size_bytes,fct_ns")
        for size, fct in oracle.table(sizes, src, dst):
            self.stdout.write(f"{size},{fct}")
