"""Response-data containers, deterministic splits, and the on-disk dataset format.

A dataset directory holds one ``manifest.json`` plus one CSV per response
profile (header row = neuron ids, one row per stimulus in manifest order).
Optional per-trial CSVs and per-neuron ncsnr arrays ride along in the
manifest. Values round-trip exactly: they are written with 17 significant
digits.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DatasetError

STAGES = ("pre_nl", "post_nl", "unspecified")


def _check_ids(ids, what):
    ids = tuple(str(i) for i in ids)
    if len(set(ids)) != len(ids):
        raise DatasetError(f"duplicate {what} ids")
    return ids


@dataclass
class ResponseMatrix:
    """Stimuli x neurons matrix of real-valued responses."""

    values: np.ndarray
    stimulus_ids: tuple = ()
    neuron_ids: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DatasetError("response values must be 2-dimensional")
        s, n = self.values.shape
        if s < 2 or n < 1:
            raise DatasetError(f"need at least 2 stimuli and 1 neuron, got {s}x{n}")
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise DatasetError(f"non-finite response at stimulus {bad[0]}, neuron {bad[1]}")
        if not self.stimulus_ids:
            self.stimulus_ids = tuple(f"s{i}" for i in range(s))
        if not self.neuron_ids:
            self.neuron_ids = tuple(f"n{i}" for i in range(n))
        self.stimulus_ids = _check_ids(self.stimulus_ids, "stimulus")
        self.neuron_ids = _check_ids(self.neuron_ids, "neuron")
        if len(self.stimulus_ids) != s or len(self.neuron_ids) != n:
            raise DatasetError("id lengths do not match matrix shape")

    @property
    def n_stimuli(self):
        return self.values.shape[0]

    @property
    def n_neurons(self):
        return self.values.shape[1]


@dataclass
class TrialTensor:
    """Stimuli x neurons x trials raw responses."""

    values: np.ndarray
    stimulus_ids: tuple = ()
    neuron_ids: tuple = ()
    counts: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise DatasetError("trial values must be 3-dimensional (stimuli x neurons x trials)")
        if self.values.shape[2] < 1:
            raise DatasetError("need at least one trial")
        if not np.all(np.isfinite(self.values)):
            raise DatasetError("non-finite trial value")
        if self.counts and np.any(self.values < 0):
            raise DatasetError("count-tagged trials must be nonnegative")

    @property
    def trial_count(self):
        return self.values.shape[2]


def trial_average(tensor: TrialTensor) -> ResponseMatrix:
    """Arithmetic mean over trials."""
    return ResponseMatrix(
        tensor.values.mean(axis=2),
        stimulus_ids=tensor.stimulus_ids,
        neuron_ids=tensor.neuron_ids,
    )


@dataclass
class ResponseProfile:
    """A labeled response matrix for one subject and area."""

    matrix: ResponseMatrix
    subject_id: str
    area_id: str
    hierarchy_level: float = 0.0
    stage: str = "unspecified"
    trials: TrialTensor | None = None
    ncsnr: np.ndarray | None = None

    def __post_init__(self):
        if self.stage not in STAGES:
            raise DatasetError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        self.hierarchy_level = float(self.hierarchy_level)
        if self.ncsnr is not None:
            self.ncsnr = np.asarray(self.ncsnr, dtype=np.float64)
            if self.ncsnr.shape != (self.matrix.n_neurons,):
                raise DatasetError("ncsnr length must match neuron count")
        if self.trials is not None and self.trials.values.shape[:2] != self.matrix.values.shape:
            raise DatasetError("trial tensor shape does not match the profile matrix")

    @property
    def key(self):
        return (self.subject_id, self.area_id, self.stage)

    @property
    def label(self):
        return (self.subject_id, self.area_id)


@dataclass
class PopulationDataset:
    """Immutable-after-load collection of profiles sharing one stimulus set."""

    profiles: list
    stimulus_ids: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.profiles:
            raise DatasetError("dataset has no profiles")
        if not self.stimulus_ids:
            self.stimulus_ids = self.profiles[0].matrix.stimulus_ids
        self.stimulus_ids = tuple(self.stimulus_ids)
        seen = set()
        for p in self.profiles:
            if p.matrix.stimulus_ids != self.stimulus_ids:
                raise DatasetError(
                    f"profile {p.key} does not share the dataset stimulus ordering"
                )
            if p.key in seen:
                raise DatasetError(f"duplicate profile key {p.key}")
            seen.add(p.key)

    def select(self, stage=None, area=None, subject=None):
        out = self.profiles
        if stage is not None:
            out = [p for p in out if p.stage == stage]
        if area is not None:
            out = [p for p in out if p.area_id == area]
        if subject is not None:
            out = [p for p in out if p.subject_id == subject]
        return list(out)

    def get(self, subject, area, stage=None):
        hits = [
            p
            for p in self.profiles
            if p.subject_id == subject
            and p.area_id == area
            and (stage is None or p.stage == stage)
        ]
        if not hits:
            raise DatasetError(f"no profile ({subject}, {area}, {stage})")
        if len(hits) > 1:
            raise DatasetError(f"ambiguous profile ({subject}, {area}); pass a stage")
        return hits[0]

    def stages(self):
        return sorted({p.stage for p in self.profiles})

    def areas(self):
        return sorted({p.area_id for p in self.profiles})

    def subjects(self):
        return sorted({p.subject_id for p in self.profiles})


@dataclass
class SplitSpec:
    """Deterministic train/test split of the stimulus axis."""

    train_fraction: float = 0.8
    seed: int = 0
    fold_count: int = 5

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError("train_fraction must lie in (0, 1)")
        if self.fold_count < 1:
            raise DatasetError("fold_count must be positive")


def split_stimuli(n_stimuli, spec: SplitSpec):
    """Partition range(n_stimuli) into (train, test) index arrays.

    The same (seed, n_stimuli) always reproduces the same partition.
    """
    n_train = math.floor(n_stimuli * spec.train_fraction)
    if n_train < 2 or n_stimuli - n_train < 2:
        raise DatasetError(
            f"too few stimuli: {n_stimuli} with fraction {spec.train_fraction} "
            f"leaves train={n_train}, test={n_stimuli - n_train}"
        )
    perm = np.random.default_rng(spec.seed).permutation(n_stimuli)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# ---------------------------------------------------------------------------
# on-disk format


def _fmt(v):
    return f"{v:.17g}"


def _safe_name(text):
    return re.sub(r"[^A-Za-z0-9_.-]", "_", text)


def _write_matrix_csv(path: Path, values, neuron_ids):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(neuron_ids)
        for row in values:
            writer.writerow([_fmt(v) for v in row])


def _read_matrix_csv(path: Path, expected_rows):
    if not path.is_file():
        raise DatasetError(f"{path}: missing profile file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        neuron_ids = tuple(h.strip() for h in header)
        rows = []
        for r, raw in enumerate(reader):
            if len(raw) != len(neuron_ids):
                raise DatasetError(
                    f"{path}: row {r + 1} has {len(raw)} cells, expected {len(neuron_ids)}"
                )
            parsed = []
            for c, cell in enumerate(raw):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: unparsable value at row {r + 1}, column {neuron_ids[c]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DatasetError(
                        f"{path}: non-finite value at row {r + 1}, column {neuron_ids[c]!r}"
                    )
                parsed.append(v)
            rows.append(parsed)
    if len(rows) != expected_rows:
        raise DatasetError(
            f"{path}: manifest declares {expected_rows} stimuli but file has {len(rows)} rows"
        )
    return np.array(rows, dtype=np.float64), neuron_ids


def save_dataset(dataset: PopulationDataset, path, include_trials=True):
    """Write a dataset directory (manifest.json + per-profile CSVs)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in dataset.profiles:
        base = _safe_name(f"{p.subject_id}__{p.area_id}__{p.stage}")
        fname = base + ".csv"
        _write_matrix_csv(root / fname, p.matrix.values, p.matrix.neuron_ids)
        entry = {
            "subject": p.subject_id,
            "area": p.area_id,
            "hierarchy_level": p.hierarchy_level,
            "stage": p.stage,
            "file": fname,
        }
        if include_trials and p.trials is not None:
            trial_files = []
            for t in range(p.trials.trial_count):
                tname = f"{base}__trial{t:03d}.csv"
                _write_matrix_csv(root / tname, p.trials.values[:, :, t], p.matrix.neuron_ids)
                trial_files.append(tname)
            entry["trial_files"] = trial_files
        if p.ncsnr is not None:
            entry["ncsnr"] = [float(v) for v in p.ncsnr]
        entries.append(entry)
    manifest = {
        "stimulus_ids": list(dataset.stimulus_ids),
        "profiles": entries,
        "metadata": dataset.metadata,
    }
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return root


def load_dataset(path) -> PopulationDataset:
    """Load and validate a dataset directory."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"{root}: missing manifest.json")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{manifest_path}: invalid JSON ({exc})") from None
    for key in ("stimulus_ids", "profiles"):
        if key not in manifest:
            raise DatasetError(f"{manifest_path}: manifest lacks {key!r}")
    stimulus_ids = tuple(str(s) for s in manifest["stimulus_ids"])
    profiles = []
    for entry in manifest["profiles"]:
        for key in ("subject", "area", "file"):
            if key not in entry:
                raise DatasetError(f"{manifest_path}: profile entry lacks {key!r}")
        values, neuron_ids = _read_matrix_csv(root / entry["file"], len(stimulus_ids))
        matrix = ResponseMatrix(values, stimulus_ids=stimulus_ids, neuron_ids=neuron_ids)
        trials = None
        if entry.get("trial_files"):
            stack = []
            for tname in entry["trial_files"]:
                tvals, tneurons = _read_matrix_csv(root / tname, len(stimulus_ids))
                if tneurons != neuron_ids:
                    raise DatasetError(f"{root / tname}: neuron ids differ from {entry['file']}")
                stack.append(tvals)
            trials = TrialTensor(
                np.stack(stack, axis=2), stimulus_ids=stimulus_ids, neuron_ids=neuron_ids
            )
        profiles.append(
            ResponseProfile(
                matrix=matrix,
                subject_id=str(entry["subject"]),
                area_id=str(entry["area"]),
                hierarchy_level=float(entry.get("hierarchy_level", 0.0)),
                stage=str(entry.get("stage", "unspecified")),
                trials=trials,
                ncsnr=np.asarray(entry["ncsnr"], dtype=float) if "ncsnr" in entry else None,
            )
        )
    return PopulationDataset(
        profiles=profiles,
        stimulus_ids=stimulus_ids,
        metadata=dict(manifest.get("metadata", {})),
    )
