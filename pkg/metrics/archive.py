import hashlib
import logging

from django.db import transaction

from .models import FlowResult, SimulationRun
from .report import dumps_report

logger = logging.getLogger(__name__)


@transaction.atomic
def persist_run(name, scheme, report, records, flows_started):
    """Store one finished run and its per-flow rows."""
    run = SimulationRun.objects.create(
        name=name,
        scheme=scheme,
        seed=report["seed"],
        trace_digest=report["trace_digest"],
        report_digest=hashlib.sha256(dumps_report(report).encode("utf-8")).hexdigest(),
        flows_completed=len(records),
        flows_started=flows_started,
        report=report,
    )
    FlowResult.objects.bulk_create(
        FlowResult(
            run=run,
            flow_id=r.flow_id,
            size=r.size,
            start_ns=r.start_ns,
            end_ns=r.end_ns,
            baseline_ns=r.baseline_ns,
            slowdown=r.slowdown,
            switches=r.switches,
            retransmits=r.retransmits,
        )
        for r in records
    )
    logger.info("archived run %s (%d flows)", run, len(records))
    return run
