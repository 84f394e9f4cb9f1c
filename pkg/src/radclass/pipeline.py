"""End-to-end pipeline: configuration, the four stages, and their artifact files.

Stages and the files they write into the output directory::

    extract    features.csv, features.json
    lda-cv     cv_curve.csv, cv_report.json, projection_3d.csv, merge_tree.json, lda_model.json
    nrs-sweep  importance.csv, reduct.json
    evaluate   reduced_eval.json, confusion.csv
    (run)      all of the above, then run_manifest.json

Each stage records a hash of the configuration it depends on, chained to
the hashes of the stages it consumed, and refuses upstream artifacts whose
hash disagrees with the current configuration.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import os
import platform
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
import yaml

from . import __version__, classify, lda, nrs
from .errors import ArtifactMismatch, ConfigError, MissingArtifact, SchemaError
from .features import CSV_COLUMNS, N_FEATURES, FeatureConfig, LabeledDataset, extract_all
from .signal_io import (
    STANDARD_LABELS,
    assign_folds,
    label_by_name,
    load_dataset,
    synthesize,
)

logger = logging.getLogger(__name__)

FAMILY_LABELS = {
    "PSK": ["BPSK", "QPSK", "8PSK"],
    "QAM": ["16QAM", "64QAM"],
    "FSK": ["2FSK", "4FSK"],
    "ASK": ["OOK", "4ASK"],
    "AM": ["AM-DSB"],
    "FM": ["FM"],
}

DEFAULT_CONFIG = {
    "input": {
        "synthetic": {
            "families": list(FAMILY_LABELS),
            "labels": None,
            "per_class": 200,
            "snr_db": [10.0, 30.0],
            "n_samples": 1024,
            "sample_rate_hz": 1.0e6,
        },
    },
    "seed": 0,
    "features": {"embed_dim": None, "fft_size": 128, "n_segments": None, "k_max": 16},
    "lda": {"d_range": None, "epsilon": None},
    "classify": {"folds": 10, "k_final": 4, "classifier": "centroid", "grouping": {}},
    "nrs": {"delta_grid": list(nrs.DEFAULT_DELTA_GRID), "space": "features"},
    "output": "out",
}

FEATURES_CSV_HEADER = ["index", "label", "class_id", *CSV_COLUMNS]

ARTIFACTS = {
    "extract": ["features.csv", "features.json"],
    "lda-cv": ["cv_curve.csv", "cv_report.json", "projection_3d.csv", "merge_tree.json", "lda_model.json"],
    "nrs-sweep": ["importance.csv", "reduct.json"],
    "evaluate": ["reduced_eval.json", "confusion.csv"],
}


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        # 'input' and free-form maps are replaced, not merged
        if isinstance(base[key], dict) and isinstance(val, dict) and key not in ("input", "grouping"):
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> dict:
    """Defaults, overlaid with a YAML file, overlaid with ``overrides``; validated."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
            user = yaml.safe_load(text) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must be a mapping")
        cfg = _merge(cfg, user)
        base_dir = Path(path).parent
        manifest = (cfg.get("input") or {}).get("manifest")
        if manifest is not None and not Path(manifest).is_absolute():
            cfg["input"]["manifest"] = str(base_dir / manifest)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    inp = cfg.get("input")
    if not isinstance(inp, dict):
        raise ConfigError("'input' must be a mapping")
    extra = set(inp) - {"manifest", "synthetic"}
    if extra:
        raise ConfigError(f"unknown input keys {sorted(extra)}")
    has_manifest = inp.get("manifest") is not None
    has_synth = inp.get("synthetic") is not None
    if has_manifest == has_synth:
        raise ConfigError("input needs exactly one of 'manifest' or 'synthetic'")
    if has_manifest and not Path(inp["manifest"]).is_file():
        raise ConfigError(f"manifest {inp['manifest']} does not exist")
    if has_synth:
        syn = {**DEFAULT_CONFIG["input"]["synthetic"], **inp["synthetic"]}
        unknown = set(inp["synthetic"]) - set(DEFAULT_CONFIG["input"]["synthetic"])
        if unknown:
            raise ConfigError(f"unknown synthetic keys {sorted(unknown)}")
        inp["synthetic"] = syn
        for fam in syn["families"]:
            if fam not in FAMILY_LABELS:
                raise ConfigError(f"unsupported family {fam!r}")
        for name in syn["labels"] or []:
            if name not in STANDARD_LABELS:
                raise ConfigError(f"unknown label {name!r}")
        lo, hi = syn["snr_db"]
        if not lo <= hi:
            raise ConfigError(f"snr_db range {syn['snr_db']} is empty")
        if syn["per_class"] < 1 or syn["n_samples"] < 64:
            raise ConfigError("per_class must be >= 1 and n_samples >= 64")
    c = cfg["classify"]
    if c["folds"] < 2:
        raise ConfigError("classify.folds must be >= 2")
    if c["classifier"] not in ("centroid", "knn"):
        raise ConfigError(f"unknown classifier {c['classifier']!r}")
    if cfg["nrs"]["space"] not in ("features", "lda"):
        raise ConfigError("nrs.space must be 'features' or 'lda'")
    grid = cfg["nrs"]["delta_grid"]
    if not grid or any(d < 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"nrs.delta_grid must be non-empty, non-negative, increasing: {grid}")
    try:
        FeatureConfig(**cfg["features"])
    except TypeError as exc:
        raise ConfigError(f"features: {exc}") from None


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def stage_hashes(cfg: dict) -> dict:
    inp = copy.deepcopy(cfg["input"])
    if inp.get("manifest"):
        inp["manifest_sha256"] = _file_digest(inp["manifest"])
        inp["manifest"] = os.path.basename(inp["manifest"])
    f = _hash({"input": inp, "seed": cfg["seed"], "features": cfg["features"],
               "grouping": cfg["classify"]["grouping"]})
    l = _hash({"up": f, "lda": cfg["lda"], "classify": cfg["classify"], "seed": cfg["seed"]})
    n = _hash({"up": l, "nrs": cfg["nrs"]})
    e = _hash({"up": n})
    return {"extract": f, "lda-cv": l, "nrs-sweep": n, "evaluate": e}


# ---------------------------------------------------------------------------
# artifact helpers


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path, expected_header=None):
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path.name} is empty")
    header, body = rows[0], rows[1:]
    if expected_header is not None and header != list(expected_header):
        missing = [c for c in expected_header if c not in header]
        extra = [c for c in header if c not in expected_header]
        detail = []
        if missing:
            detail.append(f"missing column(s) {', '.join(missing)}")
        if extra:
            detail.append(f"unexpected column(s) {', '.join(extra)}")
        raise SchemaError(f"{path.name}: {'; '.join(detail) or 'columns out of order'}")
    return header, body


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: {exc}") from None


def _check_hash(doc: dict, key: str, expected: str, name: str):
    got = doc.get(key)
    if got != expected:
        raise ArtifactMismatch(
            f"{name} was produced under a different configuration ({key} {got} != {expected})"
        )


@contextmanager
def _stage_dir(out: Path, stage: str):
    """Collect a stage's files in a scratch directory; publish only on success."""
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{stage}-", dir=out))
    try:
        yield tmp
        for name in ARTIFACTS[stage]:
            os.replace(tmp / name, out / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


# ---------------------------------------------------------------------------
# stages


def labels_for(syn: dict):
    if syn.get("labels"):
        chosen = [label_by_name(n) for n in syn["labels"]]
        by_family: dict[str, list] = {}
        for lab in chosen:
            by_family.setdefault(lab.family, []).append(lab)
        return by_family
    return {fam: [label_by_name(n) for n in FAMILY_LABELS[fam]] for fam in syn["families"]}


def synthetic_recordings(syn: dict, seed: int):
    """``per_class`` recordings per family, cycling through the family's labels."""
    rng = np.random.default_rng(seed)
    lo, hi = syn["snr_db"]
    out = []
    for fam, labs in labels_for(syn).items():
        for i in range(syn["per_class"]):
            snr = float(rng.uniform(lo, hi))
            sub_seed = int(rng.integers(0, 2**63 - 1))
            out.append(synthesize(labs[i % len(labs)], syn["n_samples"], snr, sub_seed, syn["sample_rate_hz"]))
    return out


def load_recordings(cfg: dict):
    inp = cfg["input"]
    if inp.get("manifest"):
        return load_dataset(inp["manifest"])
    return synthetic_recordings(inp["synthetic"], cfg["seed"])


def _workers(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def run_extract(cfg: dict, out, threads: int = 0) -> LabeledDataset:
    out = Path(out)
    hashes = stage_hashes(cfg)
    recs = load_recordings(cfg)
    fcfg = FeatureConfig(**cfg["features"])
    grouping = {lr.label.name: lr.label.family for lr in recs}
    grouping.update(cfg["classify"]["grouping"])
    data = extract_all(recs, fcfg, grouping, workers=_workers(threads))
    logger.info("extracted %d x %d features, %d classes", *data.raw.shape, data.n_classes)
    with _stage_dir(out, "extract") as tmp:
        _write_csv(
            tmp / "features.csv",
            FEATURES_CSV_HEADER,
            [
                [i, data.label_names[i], int(data.labels[i]), *(repr(float(v)) for v in data.raw[i])]
                for i in range(len(data))
            ],
        )
        sidecar = {
            "config_hash": hashes["extract"],
            "feature_config": fcfg.to_dict(),
            "feature_columns": list(CSV_COLUMNS),
            "class_names": data.class_names,
            "grouping": {k: grouping[k] for k in sorted(grouping)},
            "standardization": {"mean": data.mean.tolist(), "std": data.std.tolist()},
            "constant_columns": data.constant_columns,
            "snr_db": [lr.snr_db for lr in recs],
        }
        (tmp / "features.json").write_text(_dumps(sidecar), encoding="utf-8")
    return data


def load_features(out, expected_hash: Optional[str] = None) -> LabeledDataset:
    out = Path(out)
    sidecar = _read_json(out / "features.json")
    if expected_hash is not None:
        _check_hash(sidecar, "config_hash", expected_hash, "features.json")
    _, body = _read_csv(out / "features.csv", FEATURES_CSV_HEADER)
    try:
        raw = np.array([[float(v) for v in row[3:]] for row in body], dtype=np.float64).reshape(-1, N_FEATURES)
        labels = np.array([int(row[2]) for row in body], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"features.csv: {exc}") from None
    std = sidecar["standardization"]
    return LabeledDataset(
        raw=raw,
        labels=labels,
        class_names=sidecar["class_names"],
        mean=np.array(std["mean"]),
        std=np.array(std["std"]),
        label_names=[row[1] for row in body],
        feature_config=FeatureConfig(**sidecar["feature_config"]),
    )


def _folds(cfg, labels):
    return assign_folds(len(labels), labels, cfg["classify"]["folds"], cfg["seed"])


def run_lda_cv(cfg: dict, out):
    out = Path(out)
    hashes = stage_hashes(cfg)
    data = load_features(out, hashes["extract"])
    k = data.n_classes
    folds = _folds(cfg, data.labels)
    report = classify.cross_validate(
        data, folds, cfg["lda"]["d_range"], cfg["lda"]["epsilon"], cfg["classify"]["classifier"]
    )
    logger.info("cv: chosen d=%s, baseline %.4f", report.chosen_d, report.baseline_accuracy)

    d_proj = min(3, k - 1)
    x = data.features
    model = lda.fit(x, data.labels, d_proj, cfg["lda"]["epsilon"])
    model.standardization = {"mean": data.mean.tolist(), "std": data.std.tolist()}
    z = lda.transform(model, x)
    k_final = cfg["classify"]["k_final"]
    merge = classify.merge_classes(z, data.labels, k_final, k)
    group_names = ["+".join(data.class_names[c] for c in g) for g in merge.groups]

    with _stage_dir(out, "lda-cv") as tmp:
        n_folds = folds.n_folds
        _write_csv(
            tmp / "cv_curve.csv",
            ["d", "mean_acc", *(f"fold_{i}" for i in range(n_folds))],
            [[d, repr(acc), *(repr(a) for a in fa)] for d, acc, fa in report.per_dimension],
        )
        doc = report.to_dict()
        doc.update(config_hash=hashes["lda-cv"], features_hash=hashes["extract"], n_folds=n_folds,
                   projection_dim=d_proj, epsilon=cfg["lda"]["epsilon"])
        (tmp / "cv_report.json").write_text(_dumps(doc), encoding="utf-8")
        _write_csv(
            tmp / "projection_3d.csv",
            ["index", "class_id", "merged_id", *(f"z{j + 1}" for j in range(d_proj))],
            [[i, int(data.labels[i]), int(merge.labels[i]), *(repr(float(v)) for v in z[i])]
             for i in range(len(data))],
        )
        (tmp / "merge_tree.json").write_text(
            _dumps({
                "config_hash": hashes["lda-cv"],
                "k_final": k_final,
                "tree": merge.tree,
                "groups": merge.groups,
                "group_names": group_names,
                "mapping": merge.mapping.tolist(),
                "class_names": data.class_names,
            }),
            encoding="utf-8",
        )
        (tmp / "lda_model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    return report, merge


def _load_projection(out, hashes):
    out = Path(out)
    tree = _read_json(out / "merge_tree.json")
    _check_hash(tree, "config_hash", hashes["lda-cv"], "merge_tree.json")
    report = _read_json(out / "cv_report.json")
    _check_hash(report, "config_hash", hashes["lda-cv"], "cv_report.json")
    header, body = _read_csv(out / "projection_3d.csv")
    if header[:3] != ["index", "class_id", "merged_id"]:
        raise SchemaError("projection_3d.csv: expected columns index,class_id,merged_id,z...")
    merged = np.array([int(r[2]) for r in body], dtype=np.int64)
    z = np.array([[float(v) for v in r[3:]] for r in body], dtype=np.float64)
    return merged, z, tree


def run_nrs_sweep(cfg: dict, out):
    out = Path(out)
    hashes = stage_hashes(cfg)
    data = load_features(out, hashes["extract"])
    merged, z, tree = _load_projection(out, hashes)
    if cfg["nrs"]["space"] == "lda":
        universe, names = z, [f"z{j + 1}" for j in range(z.shape[1])]
    else:
        universe, names = data.features, list(CSV_COLUMNS)
    sweep = nrs.importance_sweep(universe, merged, cfg["nrs"]["delta_grid"])
    logger.info("stable reduct: %s", [names[a] for a in sweep.stable_reduct])
    with _stage_dir(out, "nrs-sweep") as tmp:
        _write_csv(
            tmp / "importance.csv",
            ["delta", *names],
            [[repr(d), *(repr(float(v)) for v in row)]
             for d, row in zip(sweep.delta_grid, sweep.significance_matrix)],
        )
        doc = {
            "config_hash": hashes["nrs-sweep"],
            "lda_cv_hash": hashes["lda-cv"],
            "space": cfg["nrs"]["space"],
            "attributes": names,
            "delta_grid": sweep.delta_grid,
            "reducts": [r.to_dict() for r in sweep.reducts],
            "stable_reduct": sweep.stable_reduct,
            "stable_reduct_names": [names[a] for a in sweep.stable_reduct],
        }
        (tmp / "reduct.json").write_text(_dumps(doc), encoding="utf-8")
    return sweep


def run_evaluate(cfg: dict, out):
    out = Path(out)
    hashes = stage_hashes(cfg)
    data = load_features(out, hashes["extract"])
    merged, z, tree = _load_projection(out, hashes)
    red = _read_json(out / "reduct.json")
    _check_hash(red, "config_hash", hashes["nrs-sweep"], "reduct.json")

    attrs = list(red["stable_reduct"])
    source = "stable_reduct"
    if not attrs:
        attrs = sorted({a for r in red["reducts"] for a in r["selected"]})
        source = "union_of_reducts"
    if not attrs:
        attrs = list(range(len(red["attributes"])))
        source = "all_attributes"

    raw = z if red["space"] == "lda" else data.raw
    merged_data = LabeledDataset(raw=raw, labels=merged, class_names=tree["group_names"])
    folds = _folds(cfg, data.labels)
    clf = cfg["classify"]["classifier"]
    report = classify.evaluate_reduced(merged_data, attrs, folds, clf)
    full = classify.evaluate_reduced(merged_data, list(range(raw.shape[1])), folds, clf)
    logger.info("reduced accuracy %.4f on %s", report.baseline_accuracy, attrs)

    with _stage_dir(out, "evaluate") as tmp:
        doc = {
            "config_hash": hashes["evaluate"],
            "nrs_hash": hashes["nrs-sweep"],
            "attrs": attrs,
            "attr_names": [red["attributes"][a] for a in attrs],
            "attrs_source": source,
            "accuracy": report.baseline_accuracy,
            "fold_accuracies": report.baseline_folds,
            "all_attributes_accuracy": full.baseline_accuracy,
            "class_names": tree["group_names"],
            "confusion": report.confusion.tolist(),
        }
        (tmp / "reduced_eval.json").write_text(_dumps(doc), encoding="utf-8")
        _write_csv(
            tmp / "confusion.csv",
            ["true\\predicted", *tree["group_names"]],
            [[name, *row] for name, row in zip(tree["group_names"], report.confusion.tolist())],
        )
    return report


def run_pipeline(cfg: dict, out, threads: int = 0) -> dict:
    """All four stages in order, then ``run_manifest.json``."""
    out = Path(out)
    run_extract(cfg, out, threads)
    run_lda_cv(cfg, out)
    run_nrs_sweep(cfg, out)
    run_evaluate(cfg, out)
    manifest = {
        "config": cfg | {"output": None},
        "seed": cfg["seed"],
        "stage_hashes": stage_hashes(cfg),
        "artifacts": [name for stage in ARTIFACTS.values() for name in stage],
        "versions": {
            "radclass": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    (out / "run_manifest.json").write_text(_dumps(manifest), encoding="utf-8")
    return manifest
