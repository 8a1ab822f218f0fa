# Generated by Django 5.0.1 on 2026-10-18 10:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SimulationRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("name", models.CharField(max_length=100)),
                ("scheme", models.CharField(max_length=20)),
                ("seed", models.IntegerField()),
                (
                    "status",
                    models.CharField(
                        choices=[("ok", "OK"), ("failed", "Failed")],
                        default="ok",
                        max_length=10,
                    ),
                ),
                ("trace_digest", models.CharField(max_length=64)),
                ("report_digest", models.CharField(max_length=64)),
                ("flows_completed", models.IntegerField(default=0)),
                ("flows_started", models.IntegerField(default=0)),
                ("report", models.JSONField()),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ("-created_at",),
            },
        ),
        migrations.CreateModel(
            name="FlowResult",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("flow_id", models.IntegerField()),
                ("size", models.BigIntegerField()),
                ("start_ns", models.BigIntegerField()),
                ("end_ns", models.BigIntegerField()),
                ("baseline_ns", models.BigIntegerField()),
                ("slowdown", models.FloatField()),
                ("switches", models.IntegerField(default=0)),
                ("retransmits", models.IntegerField(default=0)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="flows",
                        to="metrics.simulationrun",
                    ),
                ),
            ],
            options={
                "ordering": ("run", "flow_id"),
            },
        ),
    ]
