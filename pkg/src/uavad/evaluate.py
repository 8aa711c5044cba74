"""Reconstruction metrics, anomaly-task accuracy, and the four-variant benchmark."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .adnet import VARIANTS, Checkpoint, forward
from .detect import AnomalyReport
from .grid import CATEGORY_IDS, GpsLabel, GridTensor, flatten
from .world import AnomalyCase, WorldSpec, load_scenes, read_benchmark

__all__ = [
    "MetricCounts",
    "reconstruction_counts",
    "prf1",
    "anomaly_accuracy",
    "mse",
    "reconstruction_metrics",
    "task_accuracy",
    "mse_on_scenes",
    "run_benchmark",
    "format_table",
]

logger = logging.getLogger("uavad.evaluate")


@dataclass(frozen=True)
class MetricCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("metric counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "MetricCounts") -> "MetricCounts":
        return MetricCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


def reconstruction_counts(x: GridTensor, x_hat_bin: GridTensor) -> MetricCounts:
    """Per-cell confusion counts between an input grid and a binarized reconstruction."""
    if x.spec != x_hat_bin.spec:
        raise ValueError("grids have different specifications")
    a = x.data.astype(bool)
    b = x_hat_bin.data.astype(bool)
    return MetricCounts(
        tp=int(np.sum(a & b)),
        fp=int(np.sum(~a & b)),
        fn=int(np.sum(a & ~b)),
        tn=int(np.sum(~a & ~b)),
    )


def prf1(c: MetricCounts) -> tuple[float, float, float]:
    """Precision, recall, F1 with all-empty denominators counting as perfect."""
    precision = 1.0 if c.tp + c.fp == 0 else c.tp / (c.tp + c.fp)
    recall = 1.0 if c.tp + c.fn == 0 else c.tp / (c.tp + c.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def anomaly_accuracy(reports: Sequence[AnomalyReport], cases: Sequence[AnomalyCase]) -> float:
    """Fraction of cases whose injected cell appears in the paired report."""
    if len(reports) != len(cases):
        raise ValueError(f"{len(reports)} reports for {len(cases)} cases")
    if not cases:
        raise ValueError("no anomaly cases to score")
    correct = sum(
        1 for report, case in zip(reports, cases) if case.injected in report.flagged()
    )
    return correct / len(cases)


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean squared per-element error."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


# ---------------------------------------------------------------------------
# Batched model evaluation
# ---------------------------------------------------------------------------


def _scene_arrays(
    scenes: Sequence[tuple[GridTensor, GpsLabel]]
) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([flatten(g) for g, _ in scenes], dtype=np.uint8)
    gps = np.array([[gps.latitude, gps.longitude] for _, gps in scenes], dtype=np.float64)
    return x, gps


def _forward_probs(
    checkpoint: Checkpoint, x: np.ndarray, gps_deg: np.ndarray | None, chunk: int = 512
) -> np.ndarray:
    """Zero-noise reconstruction probabilities for rows of flattened scenes."""
    config = checkpoint.config
    params = checkpoint.param_set()
    g = None
    if config.use_gps:
        if gps_deg is None:
            raise ValueError(f"variant {config.variant!r} requires gps inputs")
        g = checkpoint.gps_normalization.normalize_array(gps_deg)
    out = np.empty((x.shape[0], config.hidden3))
    for lo in range(0, x.shape[0], chunk):
        xb = x[lo : lo + chunk].astype(np.float64)
        gb = g[lo : lo + chunk] if g is not None else None
        out[lo : lo + xb.shape[0]], _, _ = forward(config, params, xb, gb, None)
    return out


def reconstruction_metrics(
    checkpoint: Checkpoint,
    scenes: Sequence[tuple[GridTensor, GpsLabel]],
    threshold: float = 0.5,
    gps_labels: Sequence[GpsLabel] | None = None,
) -> tuple[MetricCounts, tuple[float, float, float]]:
    """Confusion counts and (precision, recall, f1) over a scene set.

    ``gps_labels`` substitutes the scenes' own labels when given — used to
    measure how much reconstruction relies on correct GPS conditioning.
    """
    x, gps = _scene_arrays(scenes)
    if gps_labels is not None:
        if len(gps_labels) != len(scenes):
            raise ValueError("gps override length does not match scenes")
        gps = np.array([[g.latitude, g.longitude] for g in gps_labels], dtype=np.float64)
    probs = _forward_probs(checkpoint, x, gps if checkpoint.config.use_gps else None)
    recon = probs >= threshold
    truth = x.astype(bool)
    counts = MetricCounts(
        tp=int(np.sum(truth & recon)),
        fp=int(np.sum(~truth & recon)),
        fn=int(np.sum(truth & ~recon)),
        tn=int(np.sum(~truth & ~recon)),
    )
    return counts, prf1(counts)


def task_accuracy(
    checkpoint: Checkpoint,
    records: Sequence[tuple[GridTensor, GpsLabel, AnomalyCase]],
    threshold: float = 0.5,
) -> float:
    """Fraction of injected cells whose reconstruction falls below threshold.

    Matches scoring a full detection report per scene: an injected cell is
    occupied by construction, so it is flagged exactly when its probability
    is below the threshold.
    """
    if not records:
        raise ValueError("no benchmark records to score")
    scenes = [(g, gps) for g, gps, _ in records]
    x, gps = _scene_arrays(scenes)
    probs = _forward_probs(checkpoint, x, gps if checkpoint.config.use_gps else None)
    rows, cols, cats = checkpoint.config.grid.cells_y, checkpoint.config.grid.cells_x, checkpoint.config.n_o
    probs = probs.reshape(-1, rows, cols, cats)
    correct = 0
    for i, (_, _, case) in enumerate(records):
        p = probs[i, case.row, case.col, CATEGORY_IDS[case.category]]
        if p < threshold:
            correct += 1
    return correct / len(records)


def mse_on_scenes(
    checkpoint: Checkpoint, scenes: Sequence[tuple[GridTensor, GpsLabel]]
) -> float:
    x, gps = _scene_arrays(scenes)
    probs = _forward_probs(checkpoint, x, gps if checkpoint.config.use_gps else None)
    return mse(x.astype(np.float64), probs)


# ---------------------------------------------------------------------------
# Benchmark orchestration
# ---------------------------------------------------------------------------


def run_benchmark(
    world: WorldSpec,
    data_dir: str,
    checkpoints: dict[str, Checkpoint],
    bench_dir: str,
    out_path: str | None = None,
    threshold: float = 0.5,
) -> dict:
    """Reconstruction metrics plus per-task accuracy for every variant.

    ``data_dir`` must hold val.jsonl and test.jsonl; ``bench_dir`` must hold
    task1.jsonl, task2.jsonl, task3.jsonl. Writes a JSON result document
    when ``out_path`` is given.
    """
    for variant in VARIANTS:
        if variant not in checkpoints:
            raise ValueError(f"missing checkpoint for variant {variant!r}")

    paths = {
        "val": os.path.join(data_dir, "val.jsonl"),
        "test": os.path.join(data_dir, "test.jsonl"),
        "task1": os.path.join(bench_dir, "task1.jsonl"),
        "task2": os.path.join(bench_dir, "task2.jsonl"),
        "task3": os.path.join(bench_dir, "task3.jsonl"),
    }
    for name, path in paths.items():
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing benchmark artifact {name!r}: {path}")

    val_scenes = load_scenes(paths["val"], world.grid)
    test_scenes = load_scenes(paths["test"], world.grid)
    tasks = {
        f"task{k}": read_benchmark(paths[f"task{k}"], world.grid) for k in (1, 2, 3)
    }

    result: dict = {
        "threshold": threshold,
        "counts": {
            "val_scenes": len(val_scenes),
            "test_scenes": len(test_scenes),
            **{f"{name}_cases": len(records) for name, records in tasks.items()},
        },
        "variants": {},
    }
    for variant in VARIANTS:
        ckpt = checkpoints[variant]
        _, (precision, recall, f1) = reconstruction_metrics(ckpt, test_scenes, threshold)
        entry = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "val_mse": mse_on_scenes(ckpt, val_scenes),
        }
        for name, records in tasks.items():
            entry[f"{name}_acc"] = task_accuracy(ckpt, records, threshold)
        result["variants"][variant] = entry
        logger.info(
            "%s: f1 %.4f task1 %.4f task2 %.4f task3 %.4f",
            variant,
            f1,
            entry["task1_acc"],
            entry["task2_acc"],
            entry["task3_acc"],
        )

    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as f:
            json.dump(result, f, indent=1)
    return result


def format_table(result: dict) -> str:
    """Fixed-width text table over the benchmark result, variant order preserved."""
    header = f"{'variant':<18} {'prec':>7} {'recall':>7} {'f1':>7} {'task1':>7} {'task2':>7} {'task3':>7} {'val_mse':>9}"
    lines = [header, "-" * len(header)]
    for variant, e in result["variants"].items():
        lines.append(
            f"{variant:<18} {e['precision']:>7.4f} {e['recall']:>7.4f} {e['f1']:>7.4f} "
            f"{e['task1_acc']:>7.4f} {e['task2_acc']:>7.4f} {e['task3_acc']:>7.4f} "
            f"{e['val_mse']:>9.6f}"
        )
    return "\n".join(lines)
