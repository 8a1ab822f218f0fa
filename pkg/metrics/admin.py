from django.contrib import admin

from .models import FlowResult, SimulationRun


class FlowResultInline(admin.TabularInline):
    model = FlowResult
    readonly_fields = (
        "flow_id",
        "size",
        "start_ns",
        "end_ns",
        "baseline_ns",
        "slowdown",
        "switches",
        "retransmits",
    )
    extra = 0


class SimulationRunAdmin(admin.ModelAdmin):
    list_display = (
        "name",
        "scheme",
        "seed",
        "status",
        "flows_completed",
        "flows_started",
        "overall_slowdown",
        "created_at",
    )

    list_filter = (
        "scheme",
        "status",
    )

    search_fields = (
        "name",
        "trace_digest",
        "report_digest",
    )

    list_per_page = 20
    inlines = [FlowResultInline]


class FlowResultAdmin(admin.ModelAdmin):
    list_display = (
        "run",
        "flow_id",
        "size",
        "slowdown",
        "switches",
        "retransmits",
    )


admin.site.register(SimulationRun, SimulationRunAdmin)
admin.site.register(FlowResult, FlowResultAdmin)
