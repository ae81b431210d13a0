"""Experiment orchestration: config-driven population evaluation and
model-vs-population comparison, with deterministic parallel execution and
report emission.

Determinism contract: task seeds derive from the master seed and a stable
task key, results merge in canonical order, and the report serializes with
sorted keys, so identical configs produce byte-identical report.json at any
worker count.
"""
from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import KERNEL_BACKEND
from .data import PopulationDataset, ResponseMatrix, ResponseProfile, SplitSpec, load_dataset
from .exceptions import ConfigError, DatasetError, FitError, IatcError
from .metrics import (
    hierarchy_correlation,
    mds_embed,
    predictivity_per_neuron,
    silhouette_specificity,
)
from .noise import FAST_BOOTSTRAP, corrected_predictivity_bootstrap, nc_ceiling, nc_corrected_r2
from .transforms import RsaComparator, make_method, method_kinds

CORRECTION_MODES = ("none", "bootstrap", "nc")
_RSA_KINDS = ("rsa", "rsa_squared")


def stable_seed(*parts) -> int:
    """63-bit seed derived from a stable string key (order-sensitive)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class MethodSpec:
    kind: str
    label: str
    params: dict = field(default_factory=dict)
    stage: str | None = None


@dataclass
class ModelSpec:
    name: str
    dataset: str
    stage: str | None = None


@dataclass
class ExperimentConfig:
    dataset: str
    methods: list
    train_fraction: float = 0.8
    stage: str | None = None
    silhouette: bool = True
    hierarchy: bool = True
    mds: bool = True
    correction: str = "none"
    n_boot: int = 100
    n_splits: int = 10
    fast: bool = False
    jobs: int = 1
    seed: int = 0
    out: str | None = None
    fail_threshold: float = 0.0
    pool_sources: bool = False
    ci_resamples: int = 1000
    models: list = field(default_factory=list)

    def bootstrap_params(self):
        if self.fast:
            return dict(FAST_BOOTSTRAP)
        return {"n_boot": self.n_boot, "n_splits": self.n_splits}

    def to_canonical_dict(self):
        return {
            "dataset": self.dataset,
            "methods": [
                {"kind": m.kind, "label": m.label, "params": m.params, "stage": m.stage}
                for m in self.methods
            ],
            "models": [
                {"name": m.name, "dataset": m.dataset, "stage": m.stage} for m in self.models
            ],
            "train_fraction": self.train_fraction,
            "stage": self.stage,
            "silhouette": self.silhouette,
            "hierarchy": self.hierarchy,
            "mds": self.mds,
            "correction": self.correction,
            "n_boot": self.n_boot,
            "n_splits": self.n_splits,
            "fast": self.fast,
            "seed": self.seed,
            "fail_threshold": self.fail_threshold,
            "pool_sources": self.pool_sources,
            "ci_resamples": self.ci_resamples,
        }

    def config_hash(self):
        blob = json.dumps(self.to_canonical_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


_CONFIG_KEYS = {
    "dataset", "methods", "models", "train_fraction", "stage", "silhouette",
    "hierarchy", "mds", "correction", "n_boot", "n_splits", "fast", "jobs",
    "seed", "out", "fail_threshold", "pool_sources", "ci_resamples",
}


def config_from_dict(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table/object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if "dataset" not in raw:
        raise ConfigError("config lacks 'dataset'")
    methods_raw = raw.get("methods")
    if not methods_raw:
        raise ConfigError("config lacks a nonempty 'methods' list")
    known = set(method_kinds()) | set(_RSA_KINDS)
    methods = []
    for entry in methods_raw:
        if isinstance(entry, str):
            entry = {"kind": entry}
        if "kind" not in entry:
            raise ConfigError(f"method entry lacks 'kind': {entry}")
        kind = str(entry["kind"])
        if kind not in known:
            raise ConfigError(f"unknown mapping method {kind!r}; known: {sorted(known)}")
        methods.append(MethodSpec(
            kind=kind,
            label=str(entry.get("label", kind)),
            params=dict(entry.get("params", {})),
            stage=entry.get("stage"),
        ))
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate method labels: {labels}")
    models = []
    for entry in raw.get("models", []):
        for key in ("name", "dataset"):
            if key not in entry:
                raise ConfigError(f"model entry lacks {key!r}: {entry}")
        models.append(ModelSpec(
            name=str(entry["name"]), dataset=str(entry["dataset"]),
            stage=entry.get("stage"),
        ))
    correction = str(raw.get("correction", "none"))
    if correction not in CORRECTION_MODES:
        raise ConfigError(f"correction must be one of {CORRECTION_MODES}")
    try:
        cfg = ExperimentConfig(
            dataset=str(raw["dataset"]),
            methods=methods,
            models=models,
            train_fraction=float(raw.get("train_fraction", 0.8)),
            stage=raw.get("stage"),
            silhouette=bool(raw.get("silhouette", True)),
            hierarchy=bool(raw.get("hierarchy", True)),
            mds=bool(raw.get("mds", True)),
            correction=correction,
            n_boot=int(raw.get("n_boot", 100)),
            n_splits=int(raw.get("n_splits", 10)),
            fast=bool(raw.get("fast", False)),
            jobs=int(raw.get("jobs", 1)),
            seed=int(raw.get("seed", 0)),
            out=raw.get("out"),
            fail_threshold=float(raw.get("fail_threshold", 0.0)),
            pool_sources=bool(raw.get("pool_sources", False)),
            ci_resamples=int(raw.get("ci_resamples", 1000)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be at least 1")
    return cfg


def load_config_file(path) -> dict:
    """Parse a TOML (primary) or JSON config file into a raw dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from None


@dataclass
class EvaluationReport:
    kind: str
    scores: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    dissimilarity: dict = field(default_factory=dict)
    specificity: dict = field(default_factory=dict)
    mds: dict = field(default_factory=dict)
    pooled: list = field(default_factory=list)
    separation: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_jsonable(self):
        return _sanitize({
            "kind": self.kind,
            "scores": self.scores,
            "aggregates": self.aggregates,
            "dissimilarity": self.dissimilarity,
            "specificity": self.specificity,
            "mds": self.mds,
            "pooled": self.pooled,
            "separation": self.separation,
            "provenance": self.provenance,
        })

    @classmethod
    def from_jsonable(cls, obj):
        return cls(**{k: obj.get(k) for k in (
            "kind", "scores", "aggregates", "dissimilarity", "specificity",
            "mds", "pooled", "separation", "provenance",
        )})

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True, indent=2,
                          allow_nan=False) + "\n"

    @property
    def n_failed(self):
        return int(self.provenance.get("n_failed", 0))

    @property
    def n_tasks(self):
        return int(self.provenance.get("n_tasks", 0))


def _sanitize(obj):
    """JSON-safe copy: numpy scalars/arrays to plain Python, NaN/Inf to None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _pair_key(label_a, label_b):
    return f"{label_a[0]}:{label_a[1]}|{label_b[0]}:{label_b[1]}"


def _run_tasks(tasks, fn, jobs):
    """Execute fn over tasks (dict key -> argument tuple); deterministic merge."""
    results = {}
    if jobs <= 1:
        for key in sorted(tasks):
            results[key] = fn(key, tasks[key])
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            keys = sorted(tasks)
            futures = {key: pool.submit(fn, key, tasks[key]) for key in keys}
            for key in keys:
                results[key] = futures[key].result()
    return results


def _default_stage(dataset: PopulationDataset, requested):
    if requested is not None:
        if requested not in dataset.stages():
            raise ConfigError(
                f"stage {requested!r} not present in dataset (has {dataset.stages()})"
            )
        return requested
    for candidate in ("post_nl", "unspecified", "pre_nl"):
        if candidate in dataset.stages():
            return candidate
    return dataset.stages()[0]


def _provenance(cfg, n_tasks, n_failed, extra=None):
    prov = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "version": __version__,
        "kernel_backend": KERNEL_BACKEND,
        "n_tasks": n_tasks,
        "n_failed": n_failed,
    }
    if extra:
        prov.update(extra)
    return prov


def run_population_eval(cfg: ExperimentConfig, dataset=None) -> EvaluationReport:
    """Pairwise cross-subject evaluation with specificity metrics.

    Every unordered profile pair is fitted in both directions for each
    method; same-area pairs feed the predictivity aggregates (with
    bootstrap CIs over subject pairs) and all pairs feed the dissimilarity
    matrix, silhouette, hierarchy correlation, and MDS blocks. Failed fits
    are recorded per cell and never abort the run.
    """
    if dataset is None:
        dataset = load_dataset(cfg.dataset)
    split = SplitSpec(cfg.train_fraction, seed=stable_seed(cfg.seed, "split"))

    method_profiles = {}
    for ms in cfg.methods:
        stage = _default_stage(dataset, ms.stage or cfg.stage)
        profiles = sorted(dataset.select(stage=stage), key=lambda p: p.label)
        if len({p.subject_id for p in profiles}) < 2:
            raise ConfigError(
                f"pairwise evaluation impossible: a single subject at stage {stage!r}"
            )
        method_profiles[ms.label] = (ms, profiles)

    tasks = {}
    for label, (ms, profiles) in method_profiles.items():
        for i in range(len(profiles)):
            for j in range(i + 1, len(profiles)):
                a, b = profiles[i], profiles[j]
                if ms.kind in _RSA_KINDS:
                    tasks[(label, a.label, b.label, "both")] = (ms, a, b)
                else:
                    tasks[(label, a.label, b.label, "fwd")] = (ms, a, b)
                    tasks[(label, a.label, b.label, "rev")] = (ms, b, a)

    def run_one(key, args):
        ms, src, tgt = args
        try:
            if ms.kind in _RSA_KINDS:
                comparator = RsaComparator(squared=ms.kind == "rsa_squared")
                return {"score": comparator.pair_score(src.matrix, tgt.matrix),
                        "n_neurons": tgt.matrix.n_neurons, "error": None}
            seed = stable_seed(cfg.seed, *key)
            method = make_method(ms.kind, seed=seed, **ms.params)
            r2 = predictivity_per_neuron(src, tgt, method, split)
            if np.all(np.isnan(r2)):
                raise FitError("every target neuron has zero test variance")
            return {"score": float(np.nanmedian(r2)),
                    "n_neurons": int(np.sum(np.isfinite(r2))), "error": None}
        except (IatcError, ValueError, np.linalg.LinAlgError) as exc:
            return {"score": None, "n_neurons": 0, "error": f"{type(exc).__name__}: {exc}"}

    results = _run_tasks(tasks, run_one, cfg.jobs)
    n_failed = sum(1 for r in results.values() if r["error"] is not None)

    report = EvaluationReport(kind="population_eval")
    direction_name = {"fwd": "forward", "rev": "reverse", "both": "both"}
    for key in sorted(results):
        label, la, lb, direction = key
        r = results[key]
        src, tgt = (lb, la) if direction == "rev" else (la, lb)
        report.scores.append({
            "method": label,
            "pair": _pair_key(la, lb),
            "source": f"{src[0]}:{src[1]}",
            "target": f"{tgt[0]}:{tgt[1]}",
            "area": la[1] if la[1] == lb[1] else f"{la[1]}->{lb[1]}",
            "same_area": la[1] == lb[1],
            "direction": direction_name[direction],
            "score": r["score"],
            "n_neurons": r["n_neurons"],
            "error": r["error"],
        })

    # aggregates: same-area bidirectional scores with bootstrap CIs over pairs
    for label, (ms, profiles) in sorted(method_profiles.items()):
        by_area = {}
        for i in range(len(profiles)):
            for j in range(i + 1, len(profiles)):
                a, b = profiles[i], profiles[j]
                if a.area_id != b.area_id:
                    continue
                if ms.kind in _RSA_KINDS:
                    r = results[(label, a.label, b.label, "both")]
                    score = r["score"]
                else:
                    fwd = results[(label, a.label, b.label, "fwd")]["score"]
                    rev = results[(label, a.label, b.label, "rev")]["score"]
                    score = None if fwd is None or rev is None else 0.5 * (fwd + rev)
                by_area.setdefault(a.area_id, []).append(score)
        for area in sorted(by_area):
            vals = [v for v in by_area[area] if v is not None]
            entry = {
                "method": label, "area": area,
                "n_pairs": len(by_area[area]), "n_failed": len(by_area[area]) - len(vals),
                "mean_bidirectional": float(np.mean(vals)) if vals else None,
                "ci_low": None, "ci_high": None,
            }
            if vals:
                rng = np.random.default_rng(stable_seed(cfg.seed, "ci", label, area))
                draws = rng.integers(0, len(vals), size=(cfg.ci_resamples, len(vals)))
                means = np.asarray(vals)[draws].mean(axis=1)
                # percentile CI, widened if needed so it contains the point estimate
                entry["ci_low"] = min(float(np.percentile(means, 2.5)),
                                      entry["mean_bidirectional"])
                entry["ci_high"] = max(float(np.percentile(means, 97.5)),
                                       entry["mean_bidirectional"])
            report.aggregates.append(entry)

    # dissimilarity + specificity + MDS per method
    for label, (ms, profiles) in sorted(method_profiles.items()):
        labels = [p.label for p in profiles]
        k = len(labels)
        complete = True
        values = np.zeros((k, k))
        for i in range(k):
            for j in range(i + 1, k):
                if ms.kind in _RSA_KINDS:
                    score = results[(label, labels[i], labels[j], "both")]["score"]
                else:
                    fwd = results[(label, labels[i], labels[j], "fwd")]["score"]
                    rev = results[(label, labels[i], labels[j], "rev")]["score"]
                    score = None if fwd is None or rev is None else 0.5 * (fwd + rev)
                if score is None:
                    complete = False
                    values[i, j] = values[j, i] = np.nan
                else:
                    values[i, j] = values[j, i] = 1.0 - min(score, 1.0)
        report.dissimilarity[label] = {
            "labels": [list(l) for l in labels],
            "values": values,
            "complete": complete,
        }
        if not complete:
            report.specificity[label] = {"error": "dissimilarity matrix has failed cells"}
            continue
        from .metrics import DissimilarityMatrix

        d = DissimilarityMatrix(labels=labels, values=values)
        spec_entry = {}
        if cfg.silhouette:
            try:
                sil = silhouette_specificity(d, {p.label: p.area_id for p in profiles})
                spec_entry["silhouette_mean"] = sil.silhouette_mean
                spec_entry["silhouettes"] = [
                    {"label": list(lab), "value": v} for lab, v in sil.silhouettes
                ]
            except (IatcError, ValueError) as exc:
                spec_entry["silhouette_error"] = str(exc)
        if cfg.hierarchy:
            try:
                spec_entry["hierarchy_correlation"] = hierarchy_correlation(
                    d, {p.label: p.hierarchy_level for p in profiles}
                )
            except (IatcError, ValueError) as exc:
                spec_entry["hierarchy_error"] = str(exc)
        if spec_entry:
            report.specificity[label] = spec_entry
        if cfg.mds:
            mds = mds_embed(d, dims=2, seed=stable_seed(cfg.seed, "mds", label))
            report.mds[label] = {
                "labels": [list(l) for l in labels],
                "coords": mds.coords,
                "stress": mds.stress,
            }

    if cfg.pool_sources:
        report.pooled = _pooled_scores(cfg, method_profiles, split)

    report.provenance = _provenance(
        cfg, len(tasks), n_failed,
        {"split_seed": split.seed, "train_fraction": cfg.train_fraction},
    )
    return report


def _pooled_scores(cfg, method_profiles, split):
    """Concatenate all other subjects' neurons per area and map to each target."""
    rows = []
    for label, (ms, profiles) in sorted(method_profiles.items()):
        if ms.kind in _RSA_KINDS:
            continue
        areas = sorted({p.area_id for p in profiles})
        for area in areas:
            area_profiles = [p for p in profiles if p.area_id == area]
            if len(area_profiles) < 2:
                continue
            for target in area_profiles:
                sources = [p for p in area_profiles if p.subject_id != target.subject_id]
                pooled_values = np.hstack([p.matrix.values for p in sources])
                pooled_ids = tuple(
                    f"{p.subject_id}::{nid}" for p in sources for nid in p.matrix.neuron_ids
                )
                pooled = ResponseProfile(
                    matrix=ResponseMatrix(
                        pooled_values, target.matrix.stimulus_ids, pooled_ids
                    ),
                    subject_id="pooled", area_id=area, stage=target.stage,
                    hierarchy_level=target.hierarchy_level,
                )
                try:
                    seed = stable_seed(cfg.seed, "pooled", label, area, target.subject_id)
                    method = make_method(ms.kind, seed=seed, **ms.params)
                    r2 = predictivity_per_neuron(pooled, target, method, split)
                    score = float(np.nanmedian(r2))
                    err = None
                except (IatcError, ValueError, np.linalg.LinAlgError) as exc:
                    score, err = None, f"{type(exc).__name__}: {exc}"
                rows.append({
                    "method": label, "area": area, "target": target.subject_id,
                    "n_source_neurons": int(pooled_values.shape[1]),
                    "score": score, "error": err,
                })
    return rows


def run_model_comparison(cfg: ExperimentConfig, population=None, model_sets=None) -> EvaluationReport:
    """Bidirectional model-vs-population scoring with trial-noise correction.

    model -> brain scores get the configured correction (bootstrap split-half
    or ncsnr ceiling); brain -> model scores use a ceiling of 1 (models are
    treated as noiseless). The report carries all three views (each
    direction plus their average) and a model-separation table per view.
    """
    if not cfg.models:
        raise ConfigError("compare-models needs a nonempty 'models' list in the config")
    if population is None:
        population = load_dataset(cfg.dataset)
    stage = _default_stage(population, cfg.stage)
    targets = sorted(population.select(stage=stage), key=lambda p: p.label)
    split = SplitSpec(cfg.train_fraction, seed=stable_seed(cfg.seed, "split"))

    if model_sets is None:
        model_sets = {}
        for spec in cfg.models:
            ds = load_dataset(spec.dataset)
            mstage = _default_stage(ds, spec.stage)
            layers = sorted(ds.select(stage=mstage),
                            key=lambda p: (p.hierarchy_level, p.label))
            model_sets[spec.name] = layers
    layer_counts = {name: len(layers) for name, layers in model_sets.items()}
    if len(set(layer_counts.values())) > 1:
        raise ConfigError(f"models have mismatched layer counts: {layer_counts}")
    for name, layers in model_sets.items():
        for p in layers:
            if p.matrix.stimulus_ids != population.stimulus_ids:
                raise DatasetError(
                    f"model {name} profile {p.key} does not share the population stimuli"
                )

    mapping_methods = [ms for ms in cfg.methods if ms.kind not in _RSA_KINDS]
    boot = cfg.bootstrap_params()

    tasks = {}
    for ms in mapping_methods:
        for name in sorted(model_sets):
            for li, layer in enumerate(model_sets[name]):
                for target in targets:
                    tasks[(ms.label, name, li, target.label)] = (ms, layer, target)

    def run_one(key, args):
        ms, layer, target = args
        label, name, li, tlabel = key
        try:
            seed = stable_seed(cfg.seed, label, name, li, *tlabel)
            method = make_method(ms.kind, seed=seed, **ms.params)
            if cfg.correction == "bootstrap":
                if target.trials is None:
                    raise DatasetError(
                        f"bootstrap correction needs trial files for {target.key}"
                    )
                res = corrected_predictivity_bootstrap(
                    layer.matrix, target.trials, method,
                    train_fraction=cfg.train_fraction, seed=seed, **boot,
                )
                mb = res.score
                mb_extra = {"raw": res.raw_score, "excluded_neurons": res.excluded_neurons}
            elif cfg.correction == "nc":
                if target.ncsnr is None:
                    raise DatasetError(f"nc correction needs ncsnr for {target.key}")
                if target.trials is not None:
                    n_trials = target.trials.trial_count
                else:
                    n_trials = int(population.metadata.get("trials", 0))
                    if n_trials < 1:
                        raise DatasetError(
                            "nc correction needs a trial count (trial files or "
                            "'trials' in dataset metadata)"
                        )
                r2 = predictivity_per_neuron(layer, target, method, split)
                corrected = nc_corrected_r2(r2, nc_ceiling(target.ncsnr, n_trials))
                mb = float(np.nanmedian(corrected))
                mb_extra = {"raw": float(np.nanmedian(r2)),
                            "excluded_neurons": int(np.sum(~np.isfinite(corrected)))}
            else:
                r2 = predictivity_per_neuron(layer, target, method, split)
                mb = float(np.nanmedian(r2))
                mb_extra = {"raw": mb, "excluded_neurons": 0}
            # brain -> model: models are noiseless, ceiling is 1 (no correction)
            bm = float(np.nanmedian(predictivity_per_neuron(target, layer, method, split)))
            return {"model_to_brain": mb, "brain_to_model": bm,
                    "average": 0.5 * (mb + bm), "error": None, **mb_extra}
        except (IatcError, ValueError, np.linalg.LinAlgError) as exc:
            return {"model_to_brain": None, "brain_to_model": None, "average": None,
                    "error": f"{type(exc).__name__}: {exc}"}

    results = _run_tasks(tasks, run_one, cfg.jobs)
    n_failed = sum(1 for r in results.values() if r["error"] is not None)

    report = EvaluationReport(kind="model_comparison")
    for key in sorted(results):
        label, name, li, tlabel = key
        r = results[key]
        layer = model_sets[name][li]
        for direction in ("model_to_brain", "brain_to_model", "average"):
            report.scores.append({
                "method": label,
                "pair": f"{name}:{layer.area_id}|{tlabel[0]}:{tlabel[1]}",
                "model": name,
                "layer": layer.area_id,
                "area": tlabel[1],
                "direction": direction,
                "score": r[direction],
                "error": r["error"],
            })

    for ms in mapping_methods:
        per_view = {}
        for view in ("model_to_brain", "brain_to_model", "average"):
            table = {}
            usable = True
            for name in sorted(model_sets):
                layer_scores = []
                for li in range(len(model_sets[name])):
                    vals = [
                        results[(ms.label, name, li, t.label)][view] for t in targets
                    ]
                    vals = [v for v in vals if v is not None]
                    if not vals:
                        usable = False
                        break
                    layer_scores.append(float(np.mean(vals)))
                table[name] = layer_scores
            if usable and len(table) >= 2:
                from .metrics import model_separation

                per_view[view] = {
                    "separation": model_separation(table),
                    "scores": table,
                }
            else:
                per_view[view] = {"separation": None, "scores": table}
        report.separation[ms.label] = per_view

    report.provenance = _provenance(
        cfg, len(tasks), n_failed,
        {"split_seed": split.seed, "correction": cfg.correction, "stage": stage},
    )
    return report


# ---------------------------------------------------------------------------
# report emission


def emit_report(report: EvaluationReport, out_dir, formats=("json", "csv")):
    """Write report.json plus plot-ready CSVs; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(report.to_json(), encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        written.append(_write_scores_csv(report, out / "scores.csv"))
        if report.mds:
            written.append(_write_mds_csv(report, out / "mds.csv"))
    return written


def _write_scores_csv(report, path):
    ci = {}
    for entry in report.aggregates or []:
        ci[(entry["method"], entry["area"])] = (entry["ci_low"], entry["ci_high"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair", "area", "method", "direction", "score", "ci_low", "ci_high"])
        for row in report.scores or []:
            if not row.get("same_area", True):
                continue  # cross-area cells live in the report's dissimilarity block
            lo, hi = ci.get((row["method"], row["area"]), (None, None))
            writer.writerow([
                row["pair"], row["area"], row["method"], row["direction"],
                "" if row["score"] is None else f"{row['score']:.17g}",
                "" if lo is None else f"{lo:.17g}",
                "" if hi is None else f"{hi:.17g}",
            ])
    return path


def _write_mds_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "x", "y", "stress", "method"])
        for method in sorted(report.mds or {}):
            block = report.mds[method]
            coords = np.asarray(block["coords"], dtype=float)
            for lab, xy in zip(block["labels"], coords):
                writer.writerow([
                    f"{lab[0]}:{lab[1]}", f"{xy[0]:.17g}", f"{xy[1]:.17g}",
                    f"{block['stress']:.17g}", method,
                ])
    return path
