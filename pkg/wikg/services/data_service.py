"""
Bag files, manifests, stratified folds and the co-occurrence generator.

Bag file (little-endian): b"WKGB" | u32 version=1 | u32 n | u32 D_in |
n * D_in float32, row-major.
Manifest: CSV with header ``bag_path,label,fold``; relative paths resolve
against the manifest's directory. The generator also writes
``dataset.json`` (per-instance prototype assignments) and
``prototypes.wkgb``.
"""

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from wikg.core.errors import FormatError, InputError, ParameterError
from wikg.core.logging import logger
from wikg.engine.rng import derive_rng
from wikg.schemas.dataset import DatasetInfo, DatasetManifest, ManifestRecord

BAG_MAGIC = b"WKGB"
BAG_VERSION = 1
BAG_HEADER = struct.Struct("<4sIII")
MANIFEST_HEADER = ["bag_path", "label", "fold"]
DATASET_INFO = "dataset.json"
MANIFEST_NAME = "manifest.csv"

N_PROTOTYPES = 8
PROTOTYPE_A = 0
PROTOTYPE_B = 1

PathLike = Union[str, Path]


@dataclass
class Bag:
    """One sample: instance features, a class label and an identifier."""

    id: str
    features: np.ndarray
    label: int = 0
    node_meta: Optional[List[Union[str, int]]] = field(default=None)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise InputError(f"bag {self.id} needs an n x D_in matrix with n >= 1, got {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise InputError(f"bag {self.id} has non-finite features")
        if self.label < 0:
            raise InputError(f"bag {self.id} has negative label {self.label}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d_in(self) -> int:
        return self.features.shape[1]


# Bag files

def encode_bag(features: np.ndarray) -> bytes:
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[0] < 1:
        raise InputError(f"bag features must be n x D_in with n >= 1, got {features.shape}")
    n, d_in = features.shape
    return BAG_HEADER.pack(BAG_MAGIC, BAG_VERSION, n, d_in) + np.ascontiguousarray(features, dtype="<f4").tobytes()


def decode_bag(payload: bytes, bag_id: str = "bag", label: int = 0) -> Bag:
    if len(payload) < BAG_HEADER.size:
        raise FormatError(f"file shorter than the {BAG_HEADER.size}-byte header ({len(payload)} bytes)", len(payload))
    magic, version, n, d_in = BAG_HEADER.unpack_from(payload, 0)
    if magic != BAG_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {BAG_MAGIC!r}", 0)
    if version != BAG_VERSION:
        raise FormatError(f"unsupported bag version {version}", 4)
    if n < 1:
        raise FormatError("bag has zero instances", 8)
    if d_in < 1:
        raise FormatError("bag has zero feature dimensions", 12)
    expected = n * d_in * 4
    actual = len(payload) - BAG_HEADER.size
    if actual != expected:
        raise FormatError(
            f"payload size mismatch: expected {expected} bytes for {n} x {d_in}, got {actual}",
            BAG_HEADER.size + min(actual, expected),
        )
    features = np.frombuffer(payload, dtype="<f4", offset=BAG_HEADER.size).reshape(n, d_in).astype(np.float32)
    bad = np.flatnonzero(~np.isfinite(features.reshape(-1)))
    if bad.size:
        raise FormatError("non-finite feature value", BAG_HEADER.size + int(bad[0]) * 4)
    return Bag(id=bag_id, features=features, label=label)


def write_bag(path: PathLike, bag: Bag) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_bag(bag.features))
    return path


def read_bag(path: PathLike, label: int = 0, bag_id: Optional[str] = None) -> Bag:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"bag file not found: {path}")
    return decode_bag(path.read_bytes(), bag_id or path.stem, label)


def read_bag_header(path: PathLike) -> Tuple[int, int]:
    """``(n, D_in)`` without reading the payload."""
    with open(path, "rb") as f:
        head = f.read(BAG_HEADER.size)
    if len(head) < BAG_HEADER.size:
        raise FormatError(f"{path}: file shorter than the bag header", len(head))
    magic, _, n, d_in = BAG_HEADER.unpack(head)
    if magic != BAG_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", 0)
    return n, d_in


# Manifests

def write_manifest(path: PathLike, manifest: DatasetManifest) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for record in manifest.records:
            writer.writerow([record.bag_path, record.label, record.fold])
    return path


def read_manifest(path: PathLike, n_classes: Optional[int] = None) -> DatasetManifest:
    """
    Parse manifest.csv. The class count comes from ``n_classes``, else from
    a ``dataset.json`` sidecar, else from the largest label; D_in is read
    from the first bag's header.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise FormatError(f"{path}: header must be {','.join(MANIFEST_HEADER)}, got {header}")
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{line_no}: expected 3 columns, got {len(row)}")
            try:
                records.append(ManifestRecord(bag_path=row[0], label=int(row[1]), fold=int(row[2])))
            except ValueError as e:
                raise FormatError(f"{path}:{line_no}: {e}") from None
    if not records:
        raise FormatError(f"{path}: manifest has no records")

    root = path.parent
    if n_classes is None:
        sidecar = root / DATASET_INFO
        n_classes = 2 if sidecar.is_file() else max(2, max(r.label for r in records) + 1)
    _, d_in = read_bag_header(resolve_bag_path(root, records[0].bag_path))
    return DatasetManifest(records=records, n_classes=n_classes, d_in=d_in, root=str(root))


def resolve_bag_path(root: PathLike, bag_path: str) -> Path:
    candidate = Path(bag_path)
    return candidate if candidate.is_absolute() else Path(root) / candidate


def load_bags(manifest: DatasetManifest, records: Optional[Sequence[ManifestRecord]] = None) -> List[Bag]:
    """Read the bags of ``records`` (default: all), labels from the manifest."""
    root = Path(manifest.root or ".")
    meta = load_node_meta(root)
    bags = []
    for record in records if records is not None else manifest.records:
        path = resolve_bag_path(root, record.bag_path)
        bag = read_bag(path, label=record.label)
        if bag.d_in != manifest.d_in:
            raise InputError(f"{path} has D_in={bag.d_in}, manifest expects {manifest.d_in}")
        bag.node_meta = meta.get(bag.id)
        bags.append(bag)
    return bags


def load_node_meta(root: PathLike) -> Dict[str, List[str]]:
    """Prototype names per instance, when a generator sidecar is present."""
    sidecar = Path(root) / DATASET_INFO
    if not sidecar.is_file():
        return {}
    info = DatasetInfo.model_validate_json(sidecar.read_text(encoding="utf-8"))
    return {
        bag_id: [info.prototype_names[p] for p in assignment]
        for bag_id, assignment in info.assignments.items()
    }


# Stratified folds

def kfold_split(labels: Sequence[int], folds: int, seed: int) -> List[int]:
    """
    Fold index for every sample, stratified by label.

    Within a class, fold sizes differ by at most one; each class starts
    its round-robin where the previous one stopped so totals stay level.
    """
    if folds < 2:
        raise ParameterError(f"need at least 2 folds, got {folds}")
    labels = np.asarray(labels, dtype=np.int64)
    assignment = np.full(labels.shape[0], -1, dtype=np.int64)
    classes, counts = np.unique(labels, return_counts=True)
    short = [(int(c), int(n)) for c, n in zip(classes, counts) if n < folds]
    if short:
        detail = ", ".join(f"class {c} has {n}" for c, n in short)
        raise ParameterError(f"cannot stratify into {folds} folds: {detail}")
    start = 0
    for cls in classes:
        members = np.flatnonzero(labels == cls)
        order = derive_rng(seed, "kfold", int(cls)).permutation(members)
        assignment[order] = (start + np.arange(order.size)) % folds
        start = (start + order.size) % folds
    return assignment.tolist()


def assign_folds(manifest: DatasetManifest, folds: int, seed: int) -> DatasetManifest:
    fold_of = kfold_split(manifest.labels, folds, seed)
    records = [r.model_copy(update={"fold": f}) for r, f in zip(manifest.records, fold_of)]
    return manifest.model_copy(update={"records": records})


# Co-occurrence generator

@dataclass
class GeneratedDataset:
    manifest: DatasetManifest
    info: DatasetInfo
    manifest_path: Path


def make_prototypes(d_in: int, seed: int) -> np.ndarray:
    """Eight unit-norm directions."""
    raw = derive_rng(seed, "prototypes").standard_normal((N_PROTOTYPES, d_in))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def prototype_names() -> List[str]:
    return ["A", "B"] + [f"D{i}" for i in range(2, N_PROTOTYPES)]


def _bag_assignment(rng: np.random.Generator, n: int, positive: bool) -> np.ndarray:
    """
    Prototype index per instance. Both classes draw the same number of key
    (A or B) instances; positives split them between A and B, negatives
    give them all to one of the two.
    """
    key_count = int(rng.integers(2, max(2, n // 8) + 1))
    if positive:
        a_count = int(rng.integers(1, key_count))
        keys = [PROTOTYPE_A] * a_count + [PROTOTYPE_B] * (key_count - a_count)
    else:
        keys = [PROTOTYPE_A if rng.random() < 0.5 else PROTOTYPE_B] * key_count
    distractors = rng.integers(2, N_PROTOTYPES, size=n - key_count).tolist()
    return rng.permutation(np.array(keys + distractors, dtype=np.int64))


def label_from_assignment(assignment: Sequence[int]) -> int:
    present = set(int(p) for p in assignment)
    return int(PROTOTYPE_A in present and PROTOTYPE_B in present)


def gen_cooccurrence_dataset(
    out_dir: PathLike,
    n_bags: int,
    instances: Tuple[int, int] = (30, 80),
    d_in: int = 384,
    noise_sigma: float = 0.25,
    seed: int = 0,
    folds: int = 4,
) -> GeneratedDataset:
    """
    Write ``n_bags`` class-balanced bags whose label is 1 exactly when the
    bag holds at least one A and at least one B instance.
    """
    lo, hi = instances
    if n_bags < 2 or n_bags % 2:
        raise ParameterError(f"n_bags must be even and >= 2, got {n_bags}")
    if lo < 2 or hi < lo:
        raise ParameterError(f"instances per bag must satisfy 2 <= min <= max, got [{lo}, {hi}]")
    if noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if n_bags // 2 < folds:
        raise ParameterError(f"cannot stratify {n_bags} bags ({n_bags // 2} per class) into {folds} folds")

    out = Path(out_dir)
    (out / "bags").mkdir(parents=True, exist_ok=True)
    prototypes = make_prototypes(d_in, seed)
    write_bag(out / "prototypes.wkgb", Bag(id="prototypes", features=prototypes.astype(np.float32)))

    labels = [1] * (n_bags // 2) + [0] * (n_bags // 2)
    labels = derive_rng(seed, "labels").permutation(labels).tolist()
    records, assignments = [], {}
    for i, label in enumerate(labels):
        rng = derive_rng(seed, "bag", i)
        n = int(rng.integers(lo, hi + 1))
        assignment = _bag_assignment(rng, n, positive=bool(label))
        features = prototypes[assignment] + noise_sigma * rng.standard_normal((n, d_in))
        bag_id = f"bag_{i:05d}"
        write_bag(out / "bags" / f"{bag_id}.wkgb", Bag(id=bag_id, features=features.astype(np.float32), label=label))
        records.append(ManifestRecord(bag_path=f"bags/{bag_id}.wkgb", label=label))
        assignments[bag_id] = assignment.tolist()

    manifest = DatasetManifest(records=records, n_classes=2, d_in=d_in, root=str(out))
    manifest = assign_folds(manifest, folds, seed)
    manifest_path = write_manifest(out / MANIFEST_NAME, manifest)
    info = DatasetInfo(
        seed=seed,
        n_bags=n_bags,
        d_in=d_in,
        noise_sigma=noise_sigma,
        min_instances=lo,
        max_instances=hi,
        n_prototypes=N_PROTOTYPES,
        prototype_a=PROTOTYPE_A,
        prototype_b=PROTOTYPE_B,
        prototype_names=prototype_names(),
        assignments=assignments,
    )
    (out / DATASET_INFO).write_text(json.dumps(info.model_dump(), sort_keys=True), encoding="utf-8")
    logger.info(f"Generated {n_bags} bags in {out} (sigma={noise_sigma}, seed={seed})")
    return GeneratedDataset(manifest=manifest, info=info, manifest_path=manifest_path)
