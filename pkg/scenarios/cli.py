import functools

from django.core.management.base import CommandError

from engine.exceptions import ConfigurationError, HopsimError, SimulationError

from .config import NEEDS_CONFIG_MESSAGE
from .loader import load_preset, parse_config


def add_config_arguments(parser):
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--preset", help="shipped scenario preset name")


def add_run_arguments(parser):
    add_config_arguments(parser)
    parser.add_argument(
        "--seeds", type=int, help="run seeds 1..N instead of [run].seeds"
    )
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel seed runs")
    parser.add_argument("--trace", action="store_true", help="write the event trace")
    parser.add_argument(
        "--flow-log", action="store_true", help="write per-flow event logs"
    )
    parser.add_argument(
        "--persist", action="store_true", help="archive results in the database"
    )


def load_config(options):
    if options.get("config"):
        config = parse_config(options["config"])
    elif options.get("preset"):
        config = load_preset(options["preset"])
    else:
        raise ConfigurationError(NEEDS_CONFIG_MESSAGE)
    overrides = {}
    if options.get("seeds"):
        overrides["seeds"] = list(range(1, options["seeds"] + 1))
    for flag in ("trace", "flow_log", "persist"):
        if options.get(flag):
            overrides[flag] = True
    return config.with_run(**overrides) if overrides else config


def reports_errors(handle):
    """Turn simulator errors into CommandError so the process exits nonzero."""

    @functools.wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except SimulationError as exc:
            tail = "\n".join(exc.trace_tail)
            raise CommandError(f"simulation failed: {exc}\nlast trace lines:\n{tail}")
        except HopsimError as exc:
            raise CommandError(str(exc))

    return wrapper
