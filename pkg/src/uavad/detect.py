"""Anomaly detection by reconstruction comparison.

A trained model reconstructs a scene with zero latent noise; the
reconstruction is thresholded back to binary. Cells occupied in the input
but absent in the thresholded reconstruction are the anomalies. Cells the
model adds that the input lacks are reported separately as hallucinated
cells — diagnostics, not detections.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .adnet import Checkpoint
from .grid import CATEGORIES, GpsLabel, GridTensor, N_CATEGORIES, read_jsonl, record_to_scene

__all__ = ["AnomalyCell", "AnomalyReport", "detect", "detect_batch", "write_reports"]


@dataclass(frozen=True)
class AnomalyCell:
    category: str
    row: int
    col: int
    reconstruction_prob: float


@dataclass(frozen=True)
class AnomalyReport:
    anomalies: tuple[AnomalyCell, ...]
    hallucinated: tuple[AnomalyCell, ...]
    threshold: float
    model_variant: str
    gps: tuple[float, float] | None

    def flagged(self) -> set[tuple[str, int, int]]:
        return {(a.category, a.row, a.col) for a in self.anomalies}


def detect(
    checkpoint: Checkpoint,
    x: GridTensor,
    gps: GpsLabel | None = None,
    threshold: float = 0.5,
) -> AnomalyReport:
    """Flag occupied cells whose reconstruction falls below the threshold."""
    config = checkpoint.config
    if x.spec != config.grid or config.n_o != N_CATEGORIES:
        raise ValueError(
            f"scene grid {x.spec} does not match checkpoint grid {config.grid} "
            f"with {config.n_o} channels"
        )
    if config.use_gps and gps is None:
        raise ValueError(f"variant {config.variant!r} requires a gps label")
    if not config.use_gps and gps is not None:
        raise ValueError(f"variant {config.variant!r} takes no gps label")

    probs = checkpoint.reconstruct(x, gps).reshape(x.data.shape)
    recon_bin = probs >= threshold

    anomalies = []
    hallucinated = []
    for row, col, cat in zip(*np.nonzero(x.data)):
        if not recon_bin[row, col, cat]:
            anomalies.append(
                AnomalyCell(CATEGORIES[cat], int(row), int(col), float(probs[row, col, cat]))
            )
    for row, col, cat in zip(*np.nonzero(recon_bin & (x.data == 0))):
        hallucinated.append(
            AnomalyCell(CATEGORIES[cat], int(row), int(col), float(probs[row, col, cat]))
        )
    def order(a: AnomalyCell) -> tuple[int, int, str]:
        return (a.row, a.col, a.category)

    return AnomalyReport(
        anomalies=tuple(sorted(anomalies, key=order)),
        hallucinated=tuple(sorted(hallucinated, key=order)),
        threshold=threshold,
        model_variant=config.variant,
        gps=(gps.latitude, gps.longitude) if gps is not None else None,
    )


def detect_batch(checkpoint: Checkpoint, path: str, threshold: float = 0.5) -> list[AnomalyReport]:
    """One report per scene record, in file order.

    Accepts plain scene files and injected-anomaly benchmark files alike;
    only the gps and cells fields are read.
    """
    use_gps = checkpoint.config.use_gps
    reports = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, record in read_jsonl(f):
            try:
                g, gps = record_to_scene(record, checkpoint.config.grid)
            except (KeyError, TypeError, ValueError, IndexError) as e:
                raise ValueError(f"{path}: line {lineno}: invalid scene record: {e}") from e
            reports.append(detect(checkpoint, g, gps if use_gps else None, threshold))
    return reports


def write_reports(reports: Sequence[AnomalyReport], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for report in reports:
            doc = {
                "model_variant": report.model_variant,
                "threshold": report.threshold,
                "gps": list(report.gps) if report.gps is not None else None,
                "anomalies": [asdict(a) for a in report.anomalies],
                "hallucinated": [asdict(a) for a in report.hallucinated],
            }
            f.write(json.dumps(doc) + "\n")
