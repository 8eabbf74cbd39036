"""File formats: per-subject CSV signal tables plus a JSON manifest for
datasets, checksummed JSON checkpoints, and versioned JSON run reports.

Plain text everywhere: the files are diff-friendly, language-neutral, and
small at the scales this package targets. Floats are written with repr, which
round-trips IEEE-754 doubles exactly; checkpoint parameter blocks are base64
raw little-endian float64, so load(save(model)) is bit-identical.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .metrics import labels_to_segments
from .model import Model, ModelConfig
from .synth import CLASS_NAMES, N_CLASSES, Recording, SubjectProfile

DATASET_FORMAT = 1
CHECKPOINT_FORMAT = 1
REPORT_FORMAT = 1

CSV_COLUMNS = ("t_index", "ax", "ay", "az", "gx", "gy", "gz", "label")


class DataFormatError(ValueError):
    """A file failed structural validation."""


class ChecksumError(DataFormatError):
    """A checkpoint payload does not match its recorded checksum."""


# ---------------------------------------------------------------- datasets

@dataclass
class Dataset:
    """A manifest-backed cohort: one recording and profile per subject."""

    sample_rate: float
    seed: int
    plan: list[tuple[int, int]]
    class_names: dict[int, str]
    recordings: list[Recording]
    profiles: list[SubjectProfile]

    def subject_ids(self) -> list[str]:
        return [r.subject_id for r in self.recordings]

    def by_subject(self, subject_id: str) -> tuple[Recording, SubjectProfile]:
        for rec, prof in zip(self.recordings, self.profiles):
            if rec.subject_id == subject_id:
                return rec, prof
        raise KeyError(f"no subject {subject_id!r} in dataset")


def _segment_counts(segments) -> dict[str, int]:
    counts: dict[str, int] = {}
    for s in segments:
        counts[str(s.class_id)] = counts.get(str(s.class_id), 0) + 1
    return counts


def write_dataset(out_dir, recordings: list[Recording],
                  profiles: list[SubjectProfile], seed: int,
                  plan: list[tuple[int, int]]) -> Path:
    """Write one CSV per subject plus manifest.json; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not recordings:
        raise ValueError("need at least one recording")
    if len(recordings) != len(profiles):
        raise ValueError("recordings and profiles differ in length")
    if len({r.sample_rate for r in recordings}) != 1:
        raise ValueError("recordings disagree on sample rate")
    subjects = []
    for rec, prof in zip(recordings, profiles):
        if rec.subject_id != prof.subject_id:
            raise ValueError("recording/profile subject ids disagree")
        name = f"{rec.subject_id}.csv"
        with open(out_dir / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for i in range(rec.signal.shape[0]):
                writer.writerow(
                    [i] + [repr(float(v)) for v in rec.signal[i]]
                    + [int(rec.labels[i])])
        subjects.append({
            "subject_id": rec.subject_id,
            "file": name,
            "rows": int(rec.signal.shape[0]),
            "segment_counts": _segment_counts(rec.segments),
            "profile": prof.to_dict(),
        })
    manifest = {
        "format_version": DATASET_FORMAT,
        "kind": "dataset",
        "sample_rate": float(recordings[0].sample_rate),
        "seed": int(seed),
        "plan": [[int(c), int(n)] for c, n in plan],
        "class_names": {str(c): CLASS_NAMES[c] for c in range(N_CLASSES)},
        "subjects": subjects,
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _read_subject_csv(path: Path, rows: int) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_COLUMNS):
            raise DataFormatError(f"{path.name}: bad header {header}")
        signal = np.empty((rows, 6))
        labels = np.empty(rows, dtype=np.int64)
        n = 0
        for row in reader:
            if n >= rows:
                raise DataFormatError(f"{path.name}: more rows than manifest "
                                      f"declares ({rows})")
            if len(row) != len(CSV_COLUMNS) or int(row[0]) != n:
                raise DataFormatError(f"{path.name}: bad row {n}")
            signal[n] = [float(v) for v in row[1:7]]
            labels[n] = int(row[7])
            n += 1
    if n != rows:
        raise DataFormatError(f"{path.name}: {n} rows, manifest says {rows}")
    if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
        raise DataFormatError(f"{path.name}: label outside [0, {N_CLASSES})")
    return signal, labels


def read_dataset(dataset_dir) -> Dataset:
    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataFormatError(f"no manifest.json under {dataset_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "dataset" \
            or manifest.get("format_version") != DATASET_FORMAT:
        raise DataFormatError("not a dataset manifest (kind/format_version)")
    recordings, profiles = [], []
    for entry in manifest["subjects"]:
        signal, labels = _read_subject_csv(dataset_dir / entry["file"],
                                           entry["rows"])
        segments = labels_to_segments(labels)
        if _segment_counts(segments) != entry["segment_counts"]:
            raise DataFormatError(
                f"{entry['file']}: segment counts disagree with manifest")
        recordings.append(Recording(
            subject_id=entry["subject_id"], signal=signal, labels=labels,
            segments=segments, sample_rate=float(manifest["sample_rate"])))
        profiles.append(SubjectProfile.from_dict(entry["profile"]))
    return Dataset(
        sample_rate=float(manifest["sample_rate"]),
        seed=int(manifest["seed"]),
        plan=[(int(c), int(n)) for c, n in manifest["plan"]],
        class_names={int(k): v for k, v in manifest["class_names"].items()},
        recordings=recordings,
        profiles=profiles,
    )


# -------------------------------------------------------------- checkpoints

def _checkpoint_payload(model: Model) -> dict:
    return {
        "model_config": model.config.to_dict(),
        "params": {
            name: {
                "shape": list(p.shape),
                "data": base64.b64encode(
                    p.data.astype("<f8").tobytes(order="C")).decode("ascii"),
            }
            for name, p in model.parameters().items()
        },
    }


def _digest(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_checkpoint(path, model: Model) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _checkpoint_payload(model)
    doc = {
        "format_version": CHECKPOINT_FORMAT,
        "kind": "checkpoint",
        "sha256": _digest(payload),
        **payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_checkpoint(path) -> Model:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "checkpoint" \
            or doc.get("format_version") != CHECKPOINT_FORMAT:
        raise DataFormatError("not a checkpoint (kind/format_version)")
    payload = {"model_config": doc["model_config"], "params": doc["params"]}
    if _digest(payload) != doc.get("sha256"):
        raise ChecksumError(f"{path}: payload does not match its checksum")
    config = ModelConfig.from_dict(doc["model_config"])
    params = {}
    for name, block in doc["params"].items():
        raw = base64.b64decode(block["data"])
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        expected = int(np.prod(block["shape"])) if block["shape"] else 1
        if arr.size != expected:
            raise DataFormatError(f"{path}: parameter {name} has {arr.size} "
                                  f"values for shape {block['shape']}")
        params[name] = ad.parameter(arr.reshape(block["shape"]))
    return Model(config, params=params)


# ------------------------------------------------------------------ reports

_REQUIRED_REPORT_KEYS = ("format_version", "kind", "command", "seed",
                         "wall_clock_s")


def write_report(path, report: dict) -> Path:
    check_report_structure(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_report(path) -> dict:
    with open(path) as fh:
        report = json.load(fh)
    check_report_structure(report)
    return report


def check_report_structure(report: dict):
    """Light structural validation (full schema validation lives in tests)."""
    missing = [k for k in _REQUIRED_REPORT_KEYS if k not in report]
    if missing:
        raise DataFormatError(f"report is missing keys {missing}")
    if report["kind"] != "run_report" \
            or report["format_version"] != REPORT_FORMAT:
        raise DataFormatError("not a run report (kind/format_version)")


# JSON-Schema documents for the three file kinds. Runtime code performs only
# the light checks above; the test suite validates instances against these.

_F1_REPORT_SCHEMA = {
    "type": "object",
    "required": ["per_class", "macro_f1"],
    "properties": {
        "per_class": {
            "type": "object",
            "additionalProperties": {
                "oneOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "required": ["tp", "fp", "fn", "precision", "recall",
                                     "f1"],
                        "properties": {
                            "tp": {"type": "number"},
                            "fp": {"type": "number"},
                            "fn": {"type": "number"},
                            "precision": {"type": "number"},
                            "recall": {"type": "number"},
                            "f1": {"type": "number"},
                        },
                    },
                ],
            },
        },
        "macro_f1": {"type": ["number", "null"]},
    },
}

_LOA_SCHEMA = {
    "type": "object",
    "required": ["ddof", "per_class"],
    "properties": {
        "ddof": {"type": "integer"},
        "per_class": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["mean_diff", "std_diff", "lower", "upper",
                             "pairs"],
                "properties": {
                    "mean_diff": {"type": "number"},
                    "std_diff": {"type": "number"},
                    "lower": {"type": "number"},
                    "upper": {"type": "number"},
                    "pairs": {"type": "array",
                              "items": {"type": "array",
                                        "items": {"type": "number"}}},
                },
            },
        },
    },
}

_KINEMATICS_ROW_SCHEMA = {
    "type": "object",
    "required": ["class_id", "start", "end", "duration_s", "peak_speed"],
    "properties": {
        "class_id": {"type": "integer"},
        "start": {"type": "integer"},
        "end": {"type": "integer"},
        "duration_s": {"type": "number"},
        "peak_speed": {"type": "number"},
    },
}

_CURVES_SCHEMA = {
    "type": "object",
    "required": ["epoch", "loss", "ce", "mse"],
    "properties": {
        "epoch": {"type": "array", "items": {"type": "integer"}},
        "loss": {"type": "array", "items": {"type": "number"}},
        "ce": {"type": "array", "items": {"type": "number"}},
        "mse": {"type": "array", "items": {"type": "number"}},
    },
}

_FOLD_SCHEMA = {
    "type": "object",
    "required": ["test_subject", "train_subjects"],
    "properties": {
        "test_subject": {"type": "string"},
        "train_subjects": {"type": "array", "items": {"type": "string"}},
        "checkpoint": {"type": "string"},
        "loss_curves": _CURVES_SCHEMA,
        "sample_f1": _F1_REPORT_SCHEMA,
        "segmental": _F1_REPORT_SCHEMA,
        "confusion": {"type": "array",
                      "items": {"type": "array", "items": {"type": "number"}}},
        "sample_accuracy": {"type": "number"},
    },
}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": list(_REQUIRED_REPORT_KEYS),
    "properties": {
        "format_version": {"const": REPORT_FORMAT},
        "kind": {"const": "run_report"},
        "command": {"enum": ["generate", "train", "evaluate", "velocity",
                             "sweep"]},
        "seed": {"type": "integer"},
        "wall_clock_s": {"type": "number"},
        "model_config": {"type": "object"},
        "train_config": {"type": "object"},
        "dataset": {"type": "string"},
        "iou_threshold": {"type": "number"},
        "segment_counts": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": {"type": "integer"}},
        },
        "folds": {"type": "array", "items": _FOLD_SCHEMA},
        "checkpoints": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["checkpoint", "sample_f1", "segmental"],
                "properties": {
                    "checkpoint": {"type": "string"},
                    "sample_accuracy": {"type": "number"},
                    "sample_f1": _F1_REPORT_SCHEMA,
                    "segmental": _F1_REPORT_SCHEMA,
                    "confusion": {
                        "type": "array",
                        "items": {"type": "array",
                                  "items": {"type": "number"}}},
                    "loa": _LOA_SCHEMA,
                },
            },
        },
        "aggregate": {
            "type": "object",
            "properties": {
                "mean_macro_sample_f1": {"type": ["number", "null"]},
                "mean_macro_segmental_f1": {"type": ["number", "null"]},
            },
        },
        "loa": _LOA_SCHEMA,
        "sweep": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["mask_ratio", "seeds", "mean_macro_sample_f1"],
                "properties": {
                    "mask_ratio": {"type": "number"},
                    "seeds": {"type": "array", "items": {"type": "integer"}},
                    "mean_macro_sample_f1": {"type": ["number", "null"]},
                    "per_seed": {
                        "type": "array",
                        "items": {"type": ["number", "null"]},
                    },
                },
            },
        },
        "velocity": {
            "type": "object",
            "required": ["g_prime", "still_window", "repetitions"],
            "properties": {
                "g_prime": {"type": "number"},
                "still_window": {"type": "array",
                                 "items": {"type": "integer"}},
                "repetitions": {"type": "array",
                                "items": _KINEMATICS_ROW_SCHEMA},
                "velocity": {"type": "array", "items": {"type": "number"}},
            },
        },
        "subject": {"type": "string"},
        "notes": {"type": "string"},
    },
}

MANIFEST_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["format_version", "kind", "sample_rate", "seed", "plan",
                 "class_names", "subjects"],
    "properties": {
        "format_version": {"const": DATASET_FORMAT},
        "kind": {"const": "dataset"},
        "sample_rate": {"type": "number"},
        "seed": {"type": "integer"},
        "plan": {"type": "array",
                 "items": {"type": "array", "items": {"type": "integer"},
                           "minItems": 2, "maxItems": 2}},
        "class_names": {"type": "object",
                        "additionalProperties": {"type": "string"}},
        "subjects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["subject_id", "file", "rows", "segment_counts",
                             "profile"],
                "properties": {
                    "subject_id": {"type": "string"},
                    "file": {"type": "string"},
                    "rows": {"type": "integer"},
                    "segment_counts": {
                        "type": "object",
                        "additionalProperties": {"type": "integer"}},
                    "profile": {"type": "object"},
                },
            },
        },
    },
}

CHECKPOINT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["format_version", "kind", "sha256", "model_config",
                 "params"],
    "properties": {
        "format_version": {"const": CHECKPOINT_FORMAT},
        "kind": {"const": "checkpoint"},
        "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "model_config": {"type": "object"},
        "params": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["shape", "data"],
                "properties": {
                    "shape": {"type": "array", "items": {"type": "integer"}},
                    "data": {"type": "string"},
                },
            },
        },
    },
}
