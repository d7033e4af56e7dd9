"""File formats: JND sample CSVs, the binary feature store, PSNR and SUR CSVs.

QF is the canonical annotation axis in files; distortion levels are derived
as 101 - QF on load.  All text formats are UTF-8 with LF line endings and
round-trip-exact float formatting.  Loaders never crash on malformed input:
every failure surfaces as a structured error with enough context to find
the offending line or byte.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .baseline import PsnrCurve
from .errors import FormatError
from .sur import QF_AXIS_OFFSET

_FEATURE_MAGIC = b"SURFEAT1"
_FEATURE_VERSION = 1

JND_CSV_HEADER = ["dataset", "image_id", "subject_id", "jnd_order", "qf"]
PSNR_CSV_HEADER = ["image_id", "level", "psnr_db"]
SUR_CSV_HEADER = ["image_id", "level", "sur"]


# ---------------------------------------------------------------------------
# JND sample table


@dataclass(frozen=True)
class JndRow:
    dataset: str
    image_id: int
    subject_id: int
    jnd_order: int
    qf: int


@dataclass
class JndSampleTable:
    rows: list[JndRow] = field(default_factory=list)

    def datasets(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.dataset not in seen:
                seen.append(r.dataset)
        return seen

    def image_ids(self, dataset: str) -> list[int]:
        return sorted({r.image_id for r in self.rows if r.dataset == dataset})

    def qf_samples(self, dataset: str, image_id: int, jnd_order: int) -> np.ndarray:
        vals = [r.qf for r in self.rows
                if r.dataset == dataset and r.image_id == image_id
                and r.jnd_order == jnd_order]
        return np.asarray(vals, dtype=float)

    def level_samples(self, dataset: str, image_id: int, jnd_order: int) -> np.ndarray:
        return QF_AXIS_OFFSET - self.qf_samples(dataset, image_id, jnd_order)

    def __len__(self) -> int:
        return len(self.rows)


def _parse_int(text: str, what: str, line_no: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"line {line_no}: {what} {text!r} is not an integer") from None


def _read_csv_rows(path, expected_header: list[str]):
    """Header-checked CSV rows as (line_no, record); total over decode errors."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty file") from None
            if header != expected_header:
                raise FormatError(f"{path}: expected header {','.join(expected_header)!r}, "
                                  f"got {','.join(header)!r}")
            return [(line_no, rec) for line_no, rec in enumerate(reader, start=2) if rec]
    except (UnicodeDecodeError, csv.Error) as e:
        raise FormatError(f"{path}: not a valid text CSV ({e})") from None


def load_jnd_csv(path) -> JndSampleTable:
    """Load and validate a JND annotation table.

    Enforces the header, integral QF in [1, 100], JND order in {1, 2, 3},
    key uniqueness, and the per-subject ordering invariant that successive
    JND orders sit at strictly decreasing QF.
    """
    rows = []
    seen_keys = {}
    for line_no, rec in _read_csv_rows(path, JND_CSV_HEADER):
        if len(rec) != 5:
            raise FormatError(f"line {line_no}: expected 5 fields, got {len(rec)}")
        dataset = rec[0]
        image_id = _parse_int(rec[1], "image_id", line_no)
        subject_id = _parse_int(rec[2], "subject_id", line_no)
        order = _parse_int(rec[3], "jnd_order", line_no)
        qf = _parse_int(rec[4], "qf", line_no)
        if order not in (1, 2, 3):
            raise FormatError(f"line {line_no}: jnd_order must be 1, 2, or 3, got {order}")
        if not (1 <= qf <= 100):
            raise FormatError(f"line {line_no}: qf must lie in [1, 100], got {qf}")
        key = (dataset, image_id, subject_id, order)
        if key in seen_keys:
            raise FormatError(
                f"line {line_no}: duplicate annotation for {key} "
                f"(first at line {seen_keys[key]})")
        seen_keys[key] = line_no
        rows.append((line_no, JndRow(dataset, image_id, subject_id, order, qf)))

    # later JNDs of one subject must sit at strictly lower QF
    by_subject: dict[tuple, dict[int, tuple[int, int]]] = {}
    for line_no, r in rows:
        by_subject.setdefault((r.dataset, r.image_id, r.subject_id), {})[r.jnd_order] = (r.qf, line_no)
    for key, orders in by_subject.items():
        for k in (1, 2):
            if k in orders and k + 1 in orders:
                if orders[k + 1][0] >= orders[k][0]:
                    raise FormatError(
                        f"line {orders[k + 1][1]}: JND order {k + 1} of subject "
                        f"{key[2]} (image {key[1]}) must sit at lower QF than order {k}")
    return JndSampleTable(rows=[r for _, r in rows])


def save_jnd_csv(table: JndSampleTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(JND_CSV_HEADER) + "\n")
        for r in table.rows:
            fh.write(f"{r.dataset},{r.image_id},{r.subject_id},{r.jnd_order},{r.qf}\n")


# ---------------------------------------------------------------------------
# Binary feature store


@dataclass
class FeatureStore:
    """Fixed-dimension float32 vectors keyed by (image_id, level, patch_id).

    Level 0 denotes the uncompressed reference; levels 1..100 are the JPEG
    distortion levels.
    """

    dim: int
    records: dict[tuple[int, int, int], np.ndarray] = field(default_factory=dict)

    def add(self, image_id: int, level: int, patch_id: int, vector) -> None:
        vec = np.asarray(vector, dtype=np.float32).ravel()
        if vec.size != self.dim:
            raise FormatError(f"vector length {vec.size} != store dimension {self.dim}")
        if not (0 <= level <= 100):
            raise FormatError(f"level must lie in [0, 100], got {level}")
        key = (int(image_id), int(level), int(patch_id))
        if key in self.records:
            raise FormatError(f"duplicate feature key {key}")
        self.records[key] = vec

    def get(self, image_id: int, level: int, patch_id: int) -> np.ndarray:
        return self.records[(image_id, level, patch_id)]

    def image_ids(self) -> list[int]:
        return sorted({k[0] for k in self.records})

    def patch_ids(self, image_id: int) -> list[int]:
        return sorted({k[2] for k in self.records if k[0] == image_id})

    def __len__(self) -> int:
        return len(self.records)


def write_features(store: FeatureStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_FEATURE_MAGIC)
        fh.write(struct.pack("<III", _FEATURE_VERSION, store.dim, len(store.records)))
        for (image_id, level, patch_id) in sorted(store.records):
            fh.write(struct.pack("<IHH", image_id, level, patch_id))
            fh.write(store.records[(image_id, level, patch_id)].astype("<f4").tobytes())


def read_features(path) -> FeatureStore:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _FEATURE_MAGIC:
        raise FormatError(f"bad feature-store magic {raw[:8]!r}")
    if len(raw) < 20:
        raise FormatError("truncated feature-store header")
    version, dim, count = struct.unpack_from("<III", raw, 8)
    if version != _FEATURE_VERSION:
        raise FormatError(f"unsupported feature-store version {version}")
    store = FeatureStore(dim=dim)
    off = 20
    rec_bytes = 8 + 4 * dim
    if len(raw) != off + count * rec_bytes:
        raise FormatError(
            f"payload size {len(raw) - off} does not match {count} records "
            f"of {rec_bytes} bytes")
    for _ in range(count):
        image_id, level, patch_id = struct.unpack_from("<IHH", raw, off)
        off += 8
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=off)
        off += 4 * dim
        store.add(image_id, level, patch_id, vec)
    return store


# ---------------------------------------------------------------------------
# PSNR curves


def load_psnr_csv(path) -> dict[int, PsnrCurve]:
    per_image: dict[int, dict[int, float]] = {}
    for line_no, rec in _read_csv_rows(path, PSNR_CSV_HEADER):
        if len(rec) != 3:
            raise FormatError(f"line {line_no}: expected 3 fields, got {len(rec)}")
        image_id = _parse_int(rec[0], "image_id", line_no)
        level = _parse_int(rec[1], "level", line_no)
        try:
            value = float(rec[2])
        except ValueError:
            raise FormatError(f"line {line_no}: psnr_db {rec[2]!r} is not a number") from None
        levels = per_image.setdefault(image_id, {})
        if level in levels:
            raise FormatError(f"line {line_no}: duplicate level {level} for image {image_id}")
        levels[level] = value

    curves = {}
    for image_id, levels in per_image.items():
        n = max(levels)
        expected = set(range(1, n + 1))
        if set(levels) != expected:
            missing = sorted(expected - set(levels))[:5]
            raise FormatError(f"image {image_id}: PSNR levels must run 1..{n} "
                              f"without gaps (missing {missing}...)")
        arr = np.array([levels[k] for k in range(1, n + 1)])
        curves[image_id] = PsnrCurve(image_id=image_id, psnr=arr)
    return curves


def save_psnr_csv(curves: dict[int, PsnrCurve], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(PSNR_CSV_HEADER) + "\n")
        for image_id in sorted(curves):
            for level, value in enumerate(curves[image_id].psnr, start=1):
                fh.write(f"{image_id},{level},{float(value)!r}\n")


# ---------------------------------------------------------------------------
# SUR curve CSV


def save_sur_csv(curves: dict[int, np.ndarray], path) -> None:
    """Write sampled SUR values, one row per level, with 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUR_CSV_HEADER) + "\n")
        for image_id in sorted(curves):
            values = np.asarray(getattr(curves[image_id], "values", curves[image_id]),
                                dtype=float)
            for level, value in enumerate(values, start=1):
                fh.write(f"{image_id},{level},{value:.17g}\n")


def load_sur_csv(path) -> dict[int, np.ndarray]:
    per_image: dict[int, dict[int, float]] = {}
    for line_no, rec in _read_csv_rows(path, SUR_CSV_HEADER):
        if len(rec) != 3:
            raise FormatError(f"line {line_no}: expected 3 fields, got {len(rec)}")
        image_id = _parse_int(rec[0], "image_id", line_no)
        level = _parse_int(rec[1], "level", line_no)
        try:
            value = float(rec[2])
        except ValueError:
            raise FormatError(f"line {line_no}: sur {rec[2]!r} is not a number") from None
        levels = per_image.setdefault(image_id, {})
        if level in levels:
            raise FormatError(f"line {line_no}: duplicate level {level} for image {image_id}")
        levels[level] = value

    out = {}
    for image_id, levels in per_image.items():
        n = max(levels)
        if set(levels) != set(range(1, n + 1)):
            raise FormatError(f"image {image_id}: SUR levels must run 1..{n} without gaps")
        out[image_id] = np.array([levels[k] for k in range(1, n + 1)])
    return out
