"""
Emisión de resultados: tabla CSV de registros, resumen JSON y gráfico SVG
log-log del error frente al predictor de tasa.
"""

import csv
import logging
import os
from typing import Dict, Iterable, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..core.experiments import LemmaCheck, RateRecord, RateResult  # noqa: E402
from ..core.metrics import EnvelopeFit, ModulusProfile  # noqa: E402
from ..exceptions import ExperimentException  # noqa: E402
from .serialization import write_json  # noqa: E402

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "svg")


def write_records_csv(records: Sequence[RateRecord], path: str) -> str:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RateRecord.CSV_FIELDS)
        for record in records:
            writer.writerow(record.csv_row())
    return path


def plot_rates(result: RateResult, path: str) -> str:
    """Dispersión log-log y recta ajustada (omitida si la pendiente no está definida)."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    kept = [r for r in result.records if not r.excluded]
    dropped = [r for r in result.records if r.excluded]
    if kept:
        ax.scatter([r.predictor for r in kept], [r.sup_error for r in kept], s=12, label="trials")
    if dropped:
        ax.scatter(
            [r.predictor for r in dropped],
            [r.sup_error for r in dropped],
            s=14,
            marker="x",
            color="grey",
            label="excluded",
        )
    if result.slope is not None and kept:
        xs = np.array(sorted(r.predictor for r in kept))
        ax.plot(
            xs,
            np.exp(result.intercept) * xs**result.slope,
            color="black",
            linewidth=1.0,
            label=f"slope {result.slope:.3f}",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("rate predictor")
    ax.set_ylabel("sup alignment error")
    ax.set_title(f"{result.kind} design")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_report(
    result: RateResult, out_dir: str, formats: Iterable[str] = FORMATS
) -> Dict[str, str]:
    """Escribe rates.csv, summary.json y rates.svg en `out_dir`."""
    if not result.records:
        raise ExperimentException("No records to report")
    os.makedirs(out_dir, exist_ok=True)
    written: Dict[str, str] = {}
    for fmt in formats:
        if fmt == "csv":
            written["csv"] = write_records_csv(result.records, os.path.join(out_dir, "rates.csv"))
        elif fmt == "json":
            written["json"] = write_json(result.summary(), os.path.join(out_dir, "summary.json"))
        elif fmt == "svg":
            written["svg"] = plot_rates(result, os.path.join(out_dir, "rates.svg"))
        else:
            raise ExperimentException(f"Unknown report format: {fmt}")
    logger.info("report written to %s", out_dir)
    return written


def write_envelope_csv(profile: ModulusProfile, fit: EnvelopeFit, path: str) -> str:
    """Tripletas (eta, omega, envelope) de una regresión de envolvente."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["eta", "omega", "envelope"])
        for row in fit.rows(profile):
            writer.writerow(row)
    return path


def write_lemma_table(checks: List[LemmaCheck], out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "lemmas.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["name", "status", "slack", "detail"])
        for check in checks:
            writer.writerow([check.name, check.status, check.slack, check.detail])
    json_path = write_json([c.to_dict() for c in checks], os.path.join(out_dir, "lemmas.json"))
    return {"csv": csv_path, "json": json_path}
