from django.db import models

from .config import STATUS, STATUS_OK


class SimulationRun(models.Model):
    name = models.CharField(max_length=100)
    scheme = models.CharField(max_length=20)
    seed = models.IntegerField()
    status = models.CharField(max_length=10, choices=STATUS, default=STATUS_OK)
    trace_digest = models.CharField(max_length=64)
    report_digest = models.CharField(max_length=64)
    flows_completed = models.IntegerField(default=0)
    flows_started = models.IntegerField(default=0)
    report = models.JSONField()
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ("-created_at",)

    def overall_slowdown(self):
        summary = self.report.get("slowdown", {}).get("all")
        if summary is None:
            return None
        return round(summary["avg"], 3)

    def __str__(self):
        return f"{self.name} [{self.scheme}] seed {self.seed}"


class FlowResult(models.Model):
    run = models.ForeignKey(
        SimulationRun, on_delete=models.CASCADE, related_name="flows"
    )
    flow_id = models.IntegerField()
    size = models.BigIntegerField()
    start_ns = models.BigIntegerField()
    end_ns = models.BigIntegerField()
    baseline_ns = models.BigIntegerField()
    slowdown = models.FloatField()
    switches = models.IntegerField(default=0)
    retransmits = models.IntegerField(default=0)

    class Meta:
        ordering = ("run", "flow_id")

    def __str__(self):
        return f"flow {self.flow_id} of {self.run_id}"
