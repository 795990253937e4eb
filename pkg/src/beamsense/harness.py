"""Experiment orchestration: dataset generation, training cells, sweep grids.

Desk-scale defaults (40+40 arrangements x 50 sweeps) keep a full grid cheap;
`paper_scale=True` restores the 200+200 x 200 campaign.  Every random stream
is derived from one master seed through a documented hash scheme, so reruns
produce byte-identical containers and CSVs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .beamtraining import ProtocolConfig, collect_snapshots, ordered_pairs
from .classifier import FFNN, Metrics, TrainConfig, evaluate, train
from .container import read_container, read_labels, write_container, write_labels
from .features import (
    AlertArea,
    SnapshotDataset,
    Standardizer,
    area_feature_columns,
    area_label_of,
    define_alert_areas,
    fit_standardizer,
    split_dataset,
)
from .propagation import ChannelParams
from .scene import (
    LABEL_COMPLIANCE,
    LABEL_VIOLATION,
    ScenarioConfig,
    build_scenario,
    sample_arrangement,
    scenario_hash,
)

DESK_SCALE = {"n_violation": 40, "n_compliance": 40, "trainings": 50}
PAPER_SCALE = {"n_violation": 200, "n_compliance": 200, "trainings": 200}


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit stream seed from the master seed and a key path."""
    text = repr((int(master_seed),) + tuple(parts))
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class SweepGrid:
    scenarios: tuple[str, ...] = ("office", "hall", "underground", "station")
    n_rx_list: tuple[int, ...] = (1, 3, 6)
    n_tx: int = 32
    alphas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    hidden_units: tuple[int, ...] = (8, 16, 32, 64)
    repetitions: int = 3

    def __post_init__(self):
        if not (self.scenarios and self.n_rx_list and self.alphas and self.hidden_units):
            raise ValueError("grid lists must be non-empty")
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValueError("alphas must lie within [0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def cells(self):
        for scenario in self.scenarios:
            for n_rx in self.n_rx_list:
                for alpha in self.alphas:
                    for hidden in self.hidden_units:
                        for rep in range(self.repetitions):
                            yield scenario, n_rx, alpha, hidden, rep


def build_dataset(
    cfg: ScenarioConfig,
    protocol: ProtocolConfig,
    params: ChannelParams,
    master_seed: int,
) -> SnapshotDataset:
    """Simulate every arrangement of the scenario into a flat snapshot dataset."""
    areas = define_alert_areas(cfg)
    plan = [(LABEL_VIOLATION, i) for i in range(cfg.n_violation_arrangements)]
    plan += [(LABEL_COMPLIANCE, i) for i in range(cfg.n_compliance_arrangements)]
    n_pairs = len(ordered_pairs(cfg.devices))
    n_tx = cfg.devices[0].codebook_tx.n_beams
    n_rx = cfg.devices[0].codebook_rx.n_beams
    per_arr = protocol.trainings_per_arrangement
    total = len(plan) * per_arr
    features = np.empty((total, n_pairs * n_tx * n_rx), dtype=np.float32)
    labels = np.empty(total, dtype=np.int8)
    arrangement_ids = np.empty(total, dtype=np.int32)
    area_labels = np.empty((total, len(areas)), dtype=np.int8)
    row = 0
    for arrangement_id, (target, k) in enumerate(plan):
        arr_seed = derive_seed(master_seed, "arrangement", target, k)
        arrangement = sample_arrangement(cfg, target, arr_seed)
        snaps = collect_snapshots(
            cfg,
            arrangement,
            protocol,
            params,
            seed=derive_seed(master_seed, "snapshots", target, k),
            arrangement_id=arrangement_id,
        )
        per_area = [area_label_of(arrangement.people, area, cfg.safe_distance) for area in areas]
        for snap in snaps:
            features[row] = snap.measurements.ravel()
            labels[row] = target
            arrangement_ids[row] = arrangement_id
            area_labels[row] = per_area
            row += 1
    return SnapshotDataset(
        features=features,
        labels=labels,
        arrangement_ids=arrangement_ids,
        n_pairs=n_pairs,
        n_tx=n_tx,
        n_rx=n_rx,
        scenario_hash=scenario_hash(cfg),
        area_labels=area_labels,
    )


def generate_dataset(
    cfg: ScenarioConfig,
    protocol: ProtocolConfig,
    params: ChannelParams,
    master_seed: int,
    container_path,
    labels_path,
) -> SnapshotDataset:
    """Simulate a dataset and persist it as container + label sidecar."""
    dataset = build_dataset(cfg, protocol, params, master_seed)
    save_dataset(dataset, container_path, labels_path)
    return dataset


def save_dataset(dataset: SnapshotDataset, container_path, labels_path) -> None:
    shaped = dataset.features.reshape(-1, dataset.n_pairs, dataset.n_tx, dataset.n_rx)
    write_container(container_path, shaped, dataset.scenario_hash)
    area_labels = dataset.area_labels
    if area_labels is not None and area_labels.shape[1] == 1:
        area_labels = None  # single-area labels equal the global ones
    write_labels(labels_path, dataset.arrangement_ids, dataset.labels, area_labels)


def ingest_external(container_path, labels_path) -> SnapshotDataset:
    """Load a container + sidecar pair into the same dataset type the simulator yields."""
    header, data = read_container(container_path)
    arrangement_ids, labels, area_labels = read_labels(labels_path)
    count = data.shape[0]
    if len(labels) != count:
        raise ValueError(
            f"{labels_path}: {len(labels)} labels for {count} snapshots in {container_path}"
        )
    return SnapshotDataset(
        features=data.reshape(count, -1),
        labels=labels,
        arrangement_ids=arrangement_ids,
        n_pairs=data.shape[1],
        n_tx=data.shape[2],
        n_rx=data.shape[3],
        scenario_hash=header.get("scenario", "unknown"),
        area_labels=area_labels,
    )


# ---------------------------------------------------------------------------
# training cells
# ---------------------------------------------------------------------------


@dataclass
class AreaResult:
    area_id: int
    model: FFNN
    standardizer: Standardizer
    metrics: Metrics
    val_accuracy: float


@dataclass
class CellResult:
    accuracy: float
    min_area_accuracy: float
    areas: list[AreaResult]
    train_rows: int
    val_rows: int
    test_rows: int


def _dataset_area_labels(dataset: SnapshotDataset, n_areas: int) -> np.ndarray:
    if dataset.area_labels is not None:
        if dataset.area_labels.shape[1] != n_areas:
            raise ValueError(
                f"dataset carries {dataset.area_labels.shape[1]} area label columns, "
                f"but the scenario defines {n_areas} alert areas"
            )
        return dataset.area_labels
    if n_areas != 1:
        raise ValueError("dataset lacks per-area labels but the scenario has several alert areas")
    return dataset.labels[:, None]


def train_cell(
    dataset: SnapshotDataset,
    areas: list[AlertArea],
    hidden_units: int,
    seed: int,
    train_cfg: TrainConfig | None = None,
    grouped_split: bool = True,
) -> CellResult:
    """Split, standardize, and train one classifier per alert area; test metrics."""
    split = split_dataset(dataset.arrangement_ids, seed=derive_seed(seed, "split"), grouped=grouped_split)
    area_labels = _dataset_area_labels(dataset, len(areas))
    results = []
    for area in areas:
        cols = area_feature_columns(area, dataset.n_tx, dataset.n_rx)
        x = dataset.features[:, cols].astype(float)
        y = area_labels[:, area.id].astype(np.int64)
        standardizer = fit_standardizer(x[split.train])
        x_std = standardizer.apply(x)
        cfg = train_cfg or TrainConfig()
        cfg = TrainConfig(
            batch_size=cfg.batch_size,
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            epsilon=cfg.epsilon,
            seed=derive_seed(seed, "train", area.id),
        )
        model = FFNN(len(cols), hidden_units, seed=derive_seed(seed, "init", area.id))
        train(model, x_std[split.train], y[split.train], cfg,
              x_val=x_std[split.validation], y_val=y[split.validation])
        metrics = evaluate(model, x_std[split.test], y[split.test])
        val_metrics = evaluate(model, x_std[split.validation], y[split.validation])
        results.append(
            AreaResult(
                area_id=area.id,
                model=model,
                standardizer=standardizer,
                metrics=metrics,
                val_accuracy=val_metrics.accuracy,
            )
        )
    accuracies = [r.metrics.accuracy for r in results]
    return CellResult(
        accuracy=float(np.mean(accuracies)),
        min_area_accuracy=float(np.min(accuracies)),
        areas=results,
        train_rows=len(split.train),
        val_rows=len(split.validation),
        test_rows=len(split.test),
    )


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

CSV_FIELDS = (
    "scenario",
    "n_tx",
    "n_rx",
    "alpha",
    "hidden_units",
    "repetition",
    "seed",
    "status",
    "accuracy",
    "min_area_accuracy",
    "train_rows",
    "val_rows",
    "test_rows",
)


def _scale_counts(paper_scale: bool) -> dict:
    return PAPER_SCALE if paper_scale else DESK_SCALE


def scenario_for_cell(
    scenario: str,
    n_tx: int,
    n_rx: int,
    alpha: float,
    paper_scale: bool = False,
) -> tuple[ScenarioConfig, ProtocolConfig]:
    counts = _scale_counts(paper_scale)
    cfg = build_scenario(
        scenario,
        n_tx=n_tx,
        n_rx=n_rx,
        alpha=alpha,
        n_violation_arrangements=counts["n_violation"],
        n_compliance_arrangements=counts["n_compliance"],
    )
    protocol = ProtocolConfig(trainings_per_arrangement=counts["trainings"])
    return cfg, protocol


def dataset_for_cell(
    cfg: ScenarioConfig,
    protocol: ProtocolConfig,
    params: ChannelParams,
    dataset_seed: int,
    cache_dir=None,
) -> SnapshotDataset:
    """Generate the cell's dataset, or reuse the cached container if present."""
    if cache_dir is None:
        return build_dataset(cfg, protocol, params, dataset_seed)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = derive_seed(dataset_seed, "cache", scenario_hash(cfg), protocol.trainings_per_arrangement)
    stem = f"{cfg.name}-{key:016x}"
    container = cache_dir / f"{stem}.snap"
    labels = cache_dir / f"{stem}.labels"
    if container.exists() and labels.exists():
        return ingest_external(container, labels)
    return generate_dataset(cfg, protocol, params, dataset_seed, container, labels)


@dataclass
class RunManifest:
    master_seed: int
    grid: dict
    paper_scale: bool
    cells: list[dict] = field(default_factory=list)
    csv_path: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "master_seed": self.master_seed,
                "grid": self.grid,
                "paper_scale": self.paper_scale,
                "csv_path": self.csv_path,
                "cells": self.cells,
            },
            indent=2,
            sort_keys=True,
        )


def run_sweep(
    grid: SweepGrid,
    csv_path,
    master_seed: int = 0,
    paper_scale: bool = False,
    params: ChannelParams | None = None,
    cache_dir=None,
    manifest_path=None,
    train_cfg: TrainConfig | None = None,
    grouped_split: bool = True,
    progress=None,
) -> RunManifest:
    """Run every grid cell and write one CSV row per (cell, repetition).

    Cell failures are recorded (status=error) and the sweep continues.  The CSV
    bytes are a pure function of the grid, the master seed, and the scale.
    """
    params = params or ChannelParams()
    manifest = RunManifest(
        master_seed=master_seed,
        grid=asdict(grid),
        paper_scale=paper_scale,
        csv_path=str(csv_path),
    )
    rows = []
    for scenario, n_rx, alpha, hidden, rep in grid.cells():
        cell_seed = derive_seed(master_seed, "cell", scenario, grid.n_tx, n_rx, repr(alpha), rep)
        record = {
            "scenario": scenario,
            "n_tx": grid.n_tx,
            "n_rx": n_rx,
            "alpha": f"{alpha:g}",
            "hidden_units": hidden,
            "repetition": rep,
            "seed": cell_seed,
        }
        started = time.perf_counter()
        try:
            cfg, protocol = scenario_for_cell(scenario, grid.n_tx, n_rx, alpha, paper_scale)
            dataset = dataset_for_cell(cfg, protocol, params, derive_seed(cell_seed, "dataset"), cache_dir)
            areas = define_alert_areas(cfg)
            result = train_cell(dataset, areas, hidden, cell_seed, train_cfg, grouped_split)
            record.update(
                status="ok",
                accuracy=f"{result.accuracy:.6f}",
                min_area_accuracy=f"{result.min_area_accuracy:.6f}",
                train_rows=result.train_rows,
                val_rows=result.val_rows,
                test_rows=result.test_rows,
            )
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            record.update(
                status="error",
                accuracy="",
                min_area_accuracy="",
                train_rows="",
                val_rows="",
                test_rows="",
            )
            manifest.cells.append({**record, "error": str(exc)})
            rows.append(record)
            continue
        manifest.cells.append({**record, "wall_s": round(time.perf_counter() - started, 3)})
        rows.append(record)
        if progress is not None:
            progress(record)
    with open(csv_path, "w", encoding="ascii", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    if manifest_path is not None:
        with open(manifest_path, "w", encoding="ascii") as fh:
            fh.write(manifest.to_json() + "\n")
    return manifest


def long_format_rows(csv_path) -> list[dict]:
    """Unpivot a sweep CSV into plot-ready (cell, metric, value) rows."""
    out = []
    with open(csv_path, "r", encoding="ascii", newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("status") != "ok":
                continue
            for metric in ("accuracy", "min_area_accuracy"):
                out.append(
                    {
                        "scenario": row["scenario"],
                        "n_rx": row["n_rx"],
                        "alpha": row["alpha"],
                        "hidden_units": row["hidden_units"],
                        "repetition": row["repetition"],
                        "metric": metric,
                        "value": row[metric],
                    }
                )
    return out
