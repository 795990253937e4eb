"""Feature assembly: alert areas, z-score standardization, dataset splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamtraining import ordered_pairs
from .geometry import Rect
from .scene import LABEL_COMPLIANCE, ScenarioConfig, label_of

_REGION_TOL = 1e-9


@dataclass(frozen=True)
class AlertArea:
    """A monitored sub-region and the device pairs whose sweeps sense it."""

    id: int
    region: Rect
    member_pairs: tuple[tuple[int, int], ...]
    pair_indices: tuple[int, ...]


@dataclass
class SnapshotDataset:
    """Raw dBm snapshot features plus labels, flattened in (pair, tx, rx) order."""

    features: np.ndarray  # float32 (n, pairs*tx*rx)
    labels: np.ndarray  # int8 (n,)
    arrangement_ids: np.ndarray  # int32 (n,)
    n_pairs: int
    n_tx: int
    n_rx: int
    scenario_hash: str = ""
    area_labels: np.ndarray | None = None  # int8 (n, n_areas)

    @property
    def n_snapshots(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


def define_alert_areas(cfg: ScenarioConfig) -> list[AlertArea]:
    """One alert area per walkable region, fed by the pairs of its bordering devices."""
    pairs = ordered_pairs(cfg.devices)
    areas = []
    for region in cfg.environment.walkable:
        member = tuple(
            k
            for k, (i, j) in enumerate(pairs)
            if region.contains(cfg.devices[i].x, cfg.devices[i].y, margin=-_REGION_TOL)
            and region.contains(cfg.devices[j].x, cfg.devices[j].y, margin=-_REGION_TOL)
        )
        if member:
            areas.append(
                AlertArea(
                    id=len(areas),
                    region=region,
                    member_pairs=tuple(pairs[k] for k in member),
                    pair_indices=member,
                )
            )
    if not areas:
        raise ValueError("no alert area has a usable device pair (need >= 2 devices per region)")
    return areas


def area_feature_columns(area: AlertArea, n_tx: int, n_rx: int) -> np.ndarray:
    """Column indices of an area's features inside the full flattened snapshot."""
    block = n_tx * n_rx
    cols = [np.arange(k * block, (k + 1) * block) for k in area.pair_indices]
    return np.concatenate(cols)


def area_label_of(people, area: AlertArea, safe_distance: float) -> int:
    """Label restricted to the people standing inside the area region."""
    members = [p for p in people if area.region.contains(p.x, p.y, margin=-_REGION_TOL)]
    if not members:
        return LABEL_COMPLIANCE
    return label_of(members, safe_distance)


@dataclass
class Standardizer:
    """Per-feature z-scoring with training-split statistics (population std)."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        safe = np.where(self.std > 0.0, self.std, 1.0)
        out = (x - self.mean) / safe
        if out.ndim == 1:
            out[self.std == 0.0] = 0.0
        else:
            out[:, self.std == 0.0] = 0.0
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for m, s in zip(self.mean, self.std):
                fh.write(f"{m!r},{s!r}\n")

    @classmethod
    def load(cls, path) -> "Standardizer":
        means = []
        stds = []
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                m, s = line.split(",")
                means.append(float(m))
                stds.append(float(s))
        return cls(mean=np.asarray(means), std=np.asarray(stds))


def fit_standardizer(train_features: np.ndarray) -> Standardizer:
    """Fit per-feature mean and population standard deviation on the training split."""
    x = np.asarray(train_features, dtype=float)
    if x.size == 0:
        raise ValueError("cannot fit a standardizer on an empty training split")
    return Standardizer(mean=x.mean(axis=0), std=x.std(axis=0))


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint snapshot index sets covering the whole dataset."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def split_dataset(
    arrangement_ids: np.ndarray,
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
    grouped: bool = True,
) -> DatasetSplit:
    """Shuffled train/validation/test split, deterministic per seed.

    With grouped=True (the default) every snapshot of one arrangement lands in
    the same subset, so noisy copies of a placement never leak across splits.
    grouped=False shuffles snapshots individually.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    arrangement_ids = np.asarray(arrangement_ids)
    n = len(arrangement_ids)
    rng = np.random.default_rng(seed)
    if grouped:
        groups = np.unique(arrangement_ids)
        if len(groups) < 3:
            raise ValueError(f"grouped split needs at least 3 arrangements, got {len(groups)}")
        order = rng.permutation(len(groups))
        shuffled = groups[order]
        cut1 = int(round(len(groups) * ratios[0]))
        cut2 = int(round(len(groups) * (ratios[0] + ratios[1])))
        train_groups = set(shuffled[:cut1].tolist())
        val_groups = set(shuffled[cut1:cut2].tolist())
        index = np.arange(n)
        in_train = np.fromiter((g in train_groups for g in arrangement_ids), bool, count=n)
        in_val = np.fromiter((g in val_groups for g in arrangement_ids), bool, count=n)
        return DatasetSplit(
            train=index[in_train],
            validation=index[in_val],
            test=index[~in_train & ~in_val],
        )
    order = rng.permutation(n)
    cut1 = int(round(n * ratios[0]))
    cut2 = int(round(n * (ratios[0] + ratios[1])))
    return DatasetSplit(
        train=np.sort(order[:cut1]),
        validation=np.sort(order[cut1:cut2]),
        test=np.sort(order[cut2:]),
    )
