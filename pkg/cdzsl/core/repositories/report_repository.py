"""
Report Repository
-----------------
Renders and stores experiment reports.

Outputs:
- `report.txt`: `key = value` sections, one `[method]` section per method plus `[run]` and `[timings]`.
- `table.txt`: plain-text table of hit@K per method, rendered from `templates/report_table.txt`.
- `config.cfg`: the run configuration echo.

Methods:
- `render_report()`: Key/value text of a report.
- `render_table()`: The hit@K table.
- `write_report()`: Write all three files.
"""

from pathlib import Path

from jinja2 import Template

from cdzsl.core.models.evaluation import METHOD_LABELS, ExperimentReport
from cdzsl.core.utils.helper import format_key_values
from cdzsl.core.utils.logger import logger

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"


class ReportRepository:
    """Rendering and file output of experiment reports."""

    @staticmethod
    def render_report(report: ExperimentReport) -> str:
        """
        Render a report as `key = value` sections.

        Args:
            report (ExperimentReport): The report.

        Returns:
            str: Report text.
        """
        sections = [
            "[run]\n"
            + format_key_values(
                {"n_test": report.n_test, "n_unseen": report.n_unseen, "seeds": tuple(report.seeds)}
            )
        ]
        for name, scores in report.methods.items():
            values: dict[str, object] = {}
            for k, value in sorted(scores.hit_at.items()):
                values[f"hit@{k}"] = round(value, 6)
                values[f"hit@{k}_std"] = round(scores.hit_std.get(k, 0.0), 6)
            values["mean_class_accuracy"] = round(scores.mean_class_accuracy, 6)
            values["unconverged"] = scores.unconverged
            for class_id, accuracy in sorted(scores.per_class.items()):
                values[f"class_{class_id}"] = round(accuracy, 6)
            sections.append(f"[{name}]\n" + format_key_values(values))
        sections.append(
            "[timings]\n" + format_key_values({k: round(v, 6) for k, v in report.timings.items()})
        )
        return "\n".join(sections)

    @staticmethod
    def render_table(report: ExperimentReport) -> str:
        """
        Render the hit@K table (methods as rows, depths as columns).
        """
        top_k = sorted(next(iter(report.methods.values())).hit_at) if report.methods else []
        runs = max(len(report.seeds), 1)
        rows = []
        for name, scores in report.methods.items():
            cells = {}
            for k in top_k:
                cell = f"{scores.hit_at[k]:.2f}"
                if runs > 1:
                    cell += f" +/- {scores.hit_std.get(k, 0.0):.2f}"
                cells[k] = cell
            rows.append(
                {"label": METHOD_LABELS.get(name, name), "cells": cells, "class_mean": scores.mean_class_accuracy}
            )
        template = Template((TEMPLATE_DIR / "report_table.txt").read_text(encoding="utf-8"))
        return template.render(
            n_test=report.n_test, n_unseen=report.n_unseen, runs=runs, top_k=top_k, rows=rows
        ) + "\n"

    @staticmethod
    def write_report(directory: str | Path, report: ExperimentReport) -> list[Path]:
        """
        Write `report.txt`, `table.txt` and `config.cfg` into `directory`.

        Returns:
            list[Path]: The written files.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        outputs = {
            "report.txt": ReportRepository.render_report(report),
            "table.txt": ReportRepository.render_table(report),
            "config.cfg": report.config_text,
        }
        paths = []
        for name, text in outputs.items():
            path = directory / name
            path.write_text(text, encoding="utf-8")
            paths.append(path)
        logger.info("report written", extra={"path": str(directory)})
        return paths
