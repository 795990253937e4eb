"""Flat binary snapshot container and its label sidecar.

Container layout: a short text header terminated by an `end` line, then
count * pairs * tx * rx little-endian float32 values in (snapshot, pair,
tx beam, rx beam) order.  The sidecar is one line per snapshot,
`arrangement_id,label[,area labels...]`; external producers may omit the
sidecar header and the per-area columns.
"""

from __future__ import annotations

import numpy as np

from .scene import LABEL_NAMES, LABEL_VALUES

CONTAINER_MAGIC = "beamsnap 1"
LABELS_MAGIC = "beamsnap-labels 1"


class ContainerFormatError(ValueError):
    """Malformed container or sidecar file."""


def write_container(path, measurements: np.ndarray, scenario_hash: str = "") -> None:
    """Write snapshots shaped (count, pairs, tx, rx) as float32."""
    if measurements.ndim != 4:
        raise ValueError(f"expected a (count, pairs, tx, rx) array, got shape {measurements.shape}")
    count, n_pairs, n_tx, n_rx = measurements.shape
    header = (
        f"{CONTAINER_MAGIC}\n"
        f"scenario {scenario_hash or 'unknown'}\n"
        f"pairs {n_pairs}\n"
        f"tx {n_tx}\n"
        f"rx {n_rx}\n"
        f"count {count}\n"
        f"end\n"
    )
    data = np.ascontiguousarray(measurements, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_container(path) -> tuple[dict, np.ndarray]:
    """Read a container; returns (header fields, float32 array (count, pairs, tx, rx))."""
    with open(path, "rb") as fh:
        raw = fh.read()
    fields: dict = {}
    offset = 0
    line_no = 0
    while True:
        nl = raw.find(b"\n", offset)
        if nl < 0:
            raise ContainerFormatError(f"{path}: header not terminated by 'end' (EOF at byte {len(raw)})")
        line = raw[offset:nl].decode("ascii", errors="replace")
        offset = nl + 1
        line_no += 1
        if line_no == 1:
            if line != CONTAINER_MAGIC:
                raise ContainerFormatError(f"{path}: bad magic line {line!r}")
            continue
        if line == "end":
            break
        if line_no > 16:
            raise ContainerFormatError(f"{path}: runaway header at byte {offset}")
        try:
            key, value = line.split(" ", 1)
        except ValueError:
            raise ContainerFormatError(f"{path}: malformed header line {line!r}") from None
        fields[key] = value
    try:
        n_pairs = int(fields["pairs"])
        n_tx = int(fields["tx"])
        n_rx = int(fields["rx"])
        count = int(fields["count"])
    except (KeyError, ValueError) as exc:
        raise ContainerFormatError(f"{path}: incomplete header: {exc}") from None
    fields["scenario"] = fields.get("scenario", "unknown")
    expected_bytes = count * n_pairs * n_tx * n_rx * 4
    payload = raw[offset:]
    if len(payload) != expected_bytes:
        raise ContainerFormatError(
            f"{path}: payload is {len(payload)} bytes at offset {offset}, expected {expected_bytes}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(count, n_pairs, n_tx, n_rx)
    return fields, data


def write_labels(path, arrangement_ids, labels, area_labels=None) -> None:
    """Write the sidecar; `area_labels` is an optional (count, n_areas) int array."""
    arrangement_ids = np.asarray(arrangement_ids)
    labels = np.asarray(labels)
    if arrangement_ids.shape != labels.shape:
        raise ValueError("arrangement_ids and labels must have matching length")
    n_areas = 0 if area_labels is None else int(np.asarray(area_labels).shape[1])
    lines = [LABELS_MAGIC, f"areas {n_areas}"]
    for i in range(len(labels)):
        parts = [str(int(arrangement_ids[i])), LABEL_NAMES[int(labels[i])]]
        if n_areas:
            parts.extend(LABEL_NAMES[int(v)] for v in area_labels[i])
        lines.append(",".join(parts))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_labels(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read a sidecar; returns (arrangement_ids, labels, area_labels or None)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    n_areas = 0
    if lines and lines[0] == LABELS_MAGIC:
        lines = lines[1:]
        if lines and lines[0].startswith("areas "):
            n_areas = int(lines[0].split(" ", 1)[1])
            lines = lines[1:]
    ids = []
    labels = []
    area_rows = []
    for i, line in enumerate(lines):
        parts = line.split(",")
        if len(parts) < 2:
            raise ContainerFormatError(f"{path}: line {i + 1}: expected 'arrangement_id,label'")
        try:
            ids.append(int(parts[0]))
            labels.append(LABEL_VALUES[parts[1]])
        except (ValueError, KeyError):
            raise ContainerFormatError(f"{path}: line {i + 1}: bad entry {line!r}") from None
        if n_areas:
            if len(parts) != 2 + n_areas:
                raise ContainerFormatError(f"{path}: line {i + 1}: expected {n_areas} area labels")
            area_rows.append([LABEL_VALUES[p] for p in parts[2:]])
    arrangement_ids = np.asarray(ids, dtype=np.int32)
    label_arr = np.asarray(labels, dtype=np.int8)
    area_arr = np.asarray(area_rows, dtype=np.int8) if n_areas else None
    return arrangement_ids, label_arr, area_arr
