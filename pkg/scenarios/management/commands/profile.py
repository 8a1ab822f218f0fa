from django.core.management.base import BaseCommand

from scenarios.cli import add_config_arguments, load_config, reports_errors
from topology.config import PRESETS
from topology.fabric import build_preset
from topology.profiling import PathProfile


class Command(BaseCommand):
    help = "Print the source ports that steer traffic onto each path of a fabric."

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument(
            "--topology", choices=sorted(PRESETS), help="topology preset"
        )
        parser.add_argument("--src", type=int, default=0)
        parser.add_argument(
            "--dst", type=int, help="single destination (default: every host)"
        )

    @reports_errors
    def handle(self, *args, **options):
        if options.get("topology"):
            topo = build_preset(options["topology"])
        else:
            topo = load_config(options).build_topology()
        profile = PathProfile(topo)
        src = options["src"]
        targets = [options["dst"]] if options.get("dst") is not None else topo.hosts
        self.stdout.write("src,dst,src_port,path_id,links")
        for dst in targets:
            if dst == src:
                continue
            for row in profile.as_rows(src, dst):
                self.stdout.write(
                    f"{src},{dst},{row['src_port']},{row['path_id']},{row['links']}"
                )
