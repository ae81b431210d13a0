import csv
import json

import numpy as np
import pytest

from iatc.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_PARTIAL, main
from iatc.data import save_dataset
from iatc.exceptions import ConfigError
from iatc.pipeline import (
    EvaluationReport,
    config_from_dict,
    emit_report,
    run_model_comparison,
    run_population_eval,
)
from iatc.simulate import PopulationConfig, generate_population, spurious_model_variant


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    cfg = PopulationConfig(layers=2, latent_dims=10, neurons=12, subjects=2,
                           stimuli=150, teacher_seed=9, trials=12, pre_gain=2.0)
    save_dataset(generate_population(cfg), root / "ds")
    return root / "ds"


@pytest.fixture(scope="module")
def one_area_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("one_area")
    cfg = PopulationConfig(layers=1, latent_dims=8, neurons=10, subjects=2,
                           stimuli=120, teacher_seed=4, trials=8)
    save_dataset(generate_population(cfg), root / "ds")
    return root / "ds"


def base_config(dataset, **over):
    raw = {"dataset": str(dataset), "methods": ["ridge"], "seed": 3}
    raw.update(over)
    return config_from_dict(raw)


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"dataset": "x", "methods": ["ridge"], "typo": 1})

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError, match="unknown mapping method"):
            config_from_dict({"dataset": "x", "methods": ["krige"]})

    def test_method_entry_with_params(self):
        cfg = config_from_dict({
            "dataset": "x",
            "methods": [{"kind": "ridge", "label": "r1", "params": {"folds": 3}}],
        })
        assert cfg.methods[0].params == {"folds": 3}

    def test_correction_mode_validated(self):
        with pytest.raises(ConfigError, match="correction"):
            config_from_dict({"dataset": "x", "methods": ["ridge"], "correction": "magic"})

    def test_hash_stable(self):
        a = config_from_dict({"dataset": "x", "methods": ["ridge"], "seed": 1})
        b = config_from_dict({"dataset": "x", "methods": ["ridge"], "seed": 1})
        assert a.config_hash() == b.config_hash()


class TestPopulationEval:
    def test_two_subjects_one_area_counts(self, one_area_dir):
        report = run_population_eval(base_config(one_area_dir))
        assert len(report.scores) == 2  # 1 pair x 2 directions
        directions = {r["direction"] for r in report.scores}
        assert directions == {"forward", "reverse"}

    def test_single_subject_rejected(self, tmp_path):
        cfg = PopulationConfig(layers=1, latent_dims=4, neurons=6, subjects=1,
                               stimuli=60, teacher_seed=1, trials=4)
        save_dataset(generate_population(cfg), tmp_path / "ds")
        with pytest.raises(ConfigError, match="single subject"):
            run_population_eval(base_config(tmp_path / "ds"))

    def test_empty_metrics_config_still_valid(self, one_area_dir):
        cfg = base_config(one_area_dir, silhouette=False, hierarchy=False, mds=False)
        report = run_population_eval(cfg)
        assert report.specificity == {}
        assert report.mds == {}
        json.loads(report.to_json())  # schema stays parseable

    def test_report_round_trip(self, dataset_dir):
        report = run_population_eval(base_config(dataset_dir))
        revived = EvaluationReport.from_jsonable(json.loads(report.to_json()))
        assert revived.to_json() == report.to_json()

    def test_jobs_do_not_change_report(self, dataset_dir):
        r1 = run_population_eval(base_config(dataset_dir, jobs=1))
        r8 = run_population_eval(base_config(dataset_dir, jobs=8))
        assert r1.to_json() == r8.to_json()

    def test_ci_contains_point_estimate(self, dataset_dir):
        report = run_population_eval(base_config(dataset_dir))
        for entry in report.aggregates:
            assert entry["ci_low"] <= entry["mean_bidirectional"] <= entry["ci_high"]

    def test_failed_cells_recorded_not_fatal(self, dataset_dir):
        # exact zippering on pre_nl data (has negatives) fails per cell
        cfg = base_config(dataset_dir, stage="pre_nl",
                          methods=[{"kind": "exact_zippering", "params": {"c": 100.0}}])
        report = run_population_eval(cfg)
        assert report.n_failed == report.n_tasks > 0
        assert all(r["error"] for r in report.scores)
        assert "error" in report.specificity["exact_zippering"]

    def test_rsa_method_slots_in(self, dataset_dir):
        cfg = base_config(dataset_dir, methods=["rsa_squared"])
        report = run_population_eval(cfg)
        assert all(r["direction"] == "both" for r in report.scores)
        assert "rsa_squared" in report.dissimilarity

    def test_pool_sources(self, dataset_dir):
        cfg = base_config(dataset_dir, pool_sources=True)
        report = run_population_eval(cfg)
        assert report.pooled
        row = report.pooled[0]
        assert row["n_source_neurons"] == 12  # one other subject's neurons
        assert row["score"] is not None


class TestScoresCsv:
    def test_row_count_contract(self, dataset_dir, tmp_path):
        # pairs x areas x methods x 2 directions, same-area rows only
        report = run_population_eval(base_config(dataset_dir))
        emit_report(report, tmp_path)
        with open(tmp_path / "scores.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        # 2 subjects -> 1 pair per area, 2 areas, 1 method, 2 directions
        assert len(rows) == 1 * 2 * 1 * 2
        assert set(r["direction"] for r in rows) == {"forward", "reverse"}
        for r in rows:
            assert r["ci_low"] != "" and r["ci_high"] != ""

    def test_mds_csv_schema(self, dataset_dir, tmp_path):
        report = run_population_eval(base_config(dataset_dir))
        emit_report(report, tmp_path)
        with open(tmp_path / "mds.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {"label", "x", "y", "stress", "method"} == set(rows[0])
        assert len(rows) == 4  # 2 subjects x 2 areas


class TestModelComparison:
    def make_model_dirs(self, tmp_path, population):
        # ground truth: the target subject's own post profiles; spurious: +noise
        truth = [spurious_model_variant(p, 0) for p in population.select(stage="post_nl")
                 if p.subject_id == "subject00"]
        noisy = [spurious_model_variant(p, 30, seed=5) for p in
                 population.select(stage="post_nl") if p.subject_id == "subject00"]
        from iatc.data import PopulationDataset

        for name, profiles in (("truth", truth), ("spurious", noisy)):
            ds = PopulationDataset(profiles=[
                type(p)(matrix=p.matrix, subject_id=name, area_id=p.area_id,
                        hierarchy_level=p.hierarchy_level, stage=p.stage)
                for p in profiles
            ])
            save_dataset(ds, tmp_path / name)
        return tmp_path / "truth", tmp_path / "spurious"

    def test_bidirectional_separation(self, dataset_dir, tmp_path):
        from iatc.data import load_dataset

        population = load_dataset(dataset_dir)
        truth_dir, spurious_dir = self.make_model_dirs(tmp_path, population)
        cfg = config_from_dict({
            "dataset": str(dataset_dir),
            "methods": ["ridge"],
            "seed": 11,
            "models": [
                {"name": "truth", "dataset": str(truth_dir)},
                {"name": "spurious", "dataset": str(spurious_dir)},
            ],
        })
        report = run_model_comparison(cfg)
        sep = report.separation["ridge"]
        # spurious features move model->brain far less than brain->model
        # (the strict ground-truth bounds live in the acceptance suite)
        assert sep["model_to_brain"]["separation"] < sep["brain_to_model"]["separation"] / 3
        assert sep["brain_to_model"]["separation"] >= 0.1
        truth_avg = np.mean(sep["average"]["scores"]["truth"])
        spur_avg = np.mean(sep["average"]["scores"]["spurious"])
        assert truth_avg > spur_avg + 0.05

    def test_identical_models_zero_separation(self, dataset_dir, tmp_path):
        from iatc.data import load_dataset

        population = load_dataset(dataset_dir)
        truth_dir, _ = self.make_model_dirs(tmp_path, population)
        cfg = config_from_dict({
            "dataset": str(dataset_dir),
            "methods": ["ridge"],
            "seed": 11,
            "models": [
                {"name": "m1", "dataset": str(truth_dir)},
                {"name": "m2", "dataset": str(truth_dir)},
            ],
        })
        report = run_model_comparison(cfg)
        for view in ("model_to_brain", "brain_to_model", "average"):
            assert report.separation["ridge"][view]["separation"] == pytest.approx(0.0)

    def test_needs_models(self, dataset_dir):
        with pytest.raises(ConfigError, match="models"):
            run_model_comparison(base_config(dataset_dir))


class TestCli:
    def test_simulate_evaluate_report_flow(self, tmp_path):
        cfg_file = tmp_path / "sim.toml"
        cfg_file.write_text(
            "layers = 1\nlatent_dims = 6\nneurons = 8\nsubjects = 2\n"
            "stimuli = 100\nteacher_seed = 2\ntrials = 6\n"
        )
        rc = main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "ds")])
        assert rc == EXIT_OK
        rc = main(["evaluate", "--dataset", str(tmp_path / "ds"), "--methods", "ridge",
                   "--out", str(tmp_path / "out"), "--seed", "5"])
        assert rc == EXIT_OK
        assert (tmp_path / "out" / "report.json").is_file()
        rc = main(["report", "--report", str(tmp_path / "out" / "report.json"),
                   "--out", str(tmp_path / "rerender")])
        assert rc == EXIT_OK
        assert (tmp_path / "rerender" / "scores.csv").is_file()

    def test_exit_code_config_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("methods = ['ridge']\n")  # no dataset
        assert main(["evaluate", "--config", str(bad)]) == EXIT_CONFIG

    def test_exit_code_data_error(self, tmp_path):
        (tmp_path / "empty").mkdir()
        rc = main(["evaluate", "--dataset", str(tmp_path / "empty"),
                   "--methods", "ridge"])
        assert rc == EXIT_DATA

    def test_exit_code_partial_failures(self, dataset_dir, tmp_path):
        rc = main(["evaluate", "--dataset", str(dataset_dir),
                   "--methods", "exact_zippering", "--stage", "pre_nl",
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_PARTIAL

    def test_spiking_demo(self, tmp_path):
        rc = main(["spiking-demo", "--out", str(tmp_path / "curve.csv"),
                   "--trials", "60", "--points", "17"])
        assert rc == EXIT_OK
        with open(tmp_path / "curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 17

    def test_map_dump_round_trip(self, one_area_dir, tmp_path):
        out = tmp_path / "map.json"
        rc = main(["map", "--dataset", str(one_area_dir),
                   "--source", "subject00:layer1:post_nl",
                   "--target", "subject01:layer1:post_nl",
                   "--method", "ridge", "--dump-map", str(out)])
        assert rc == EXIT_OK
        obj = json.loads(out.read_text())
        assert obj["kind"] == "ridge"
        from iatc.transforms import FittedMap, predict_map
        from iatc.data import load_dataset

        revived = FittedMap.from_jsonable(obj)
        ds = load_dataset(one_area_dir)
        pred = predict_map(revived, ds.get("subject00", "layer1", "post_nl").matrix.values)
        assert pred.shape == (120, 10)


@pytest.fixture(scope="module")
def trialed_population(tmp_path_factory):
    root = tmp_path_factory.mktemp("trials")
    cfg = PopulationConfig(layers=1, latent_dims=8, neurons=10, subjects=2,
                           stimuli=120, teacher_seed=13, trials=16,
                           pre_gain=2.0, attach_trials=True)
    ds = generate_population(cfg)
    for p in ds.select(stage="post_nl"):
        p.ncsnr = np.full(10, 2.0)
    save_dataset(ds, root / "ds", include_trials=True)
    # the model: one subject's own responses, as its own single-layer model
    model = [spurious_model_variant(p, 0) for p in ds.select(stage="post_nl")
             if p.subject_id == "subject00"]
    from iatc.data import PopulationDataset

    save_dataset(PopulationDataset(profiles=model), root / "model")
    return root


class TestCorrectionPaths:

    def make_cfg(self, root, correction, fast=True):
        return config_from_dict({
            "dataset": str(root / "ds"),
            "methods": ["ridge"],
            "seed": 2,
            "correction": correction,
            "fast": fast,
            "models": [{"name": "m", "dataset": str(root / "model")}],
        })

    def test_bootstrap_correction_runs_fast_preset(self, trialed_population):
        report = run_model_comparison(self.make_cfg(trialed_population, "bootstrap"))
        assert report.n_failed == 0
        rows = [r for r in report.scores if r["direction"] == "model_to_brain"]
        assert all(r["score"] is not None for r in rows)
        # ground-truth-style model: corrected scores close to 1
        own = [r for r in rows if "subject00" in r["pair"]]
        assert own and all(r["score"] > 0.9 for r in own)

    def test_nc_correction_uses_manifest_ncsnr(self, trialed_population):
        report = run_model_comparison(self.make_cfg(trialed_population, "nc"))
        assert report.n_failed == 0
        assert all(r["score"] is not None for r in report.scores)

    def test_bootstrap_without_trials_fails_cells(self, trialed_population, tmp_path):
        # strip trial files by re-saving without them
        from iatc.data import load_dataset

        ds = load_dataset(trialed_population / "ds")
        for p in ds.profiles:
            p.trials = None
        save_dataset(ds, tmp_path / "no_trials", include_trials=False)
        cfg = config_from_dict({
            "dataset": str(tmp_path / "no_trials"),
            "methods": ["ridge"],
            "seed": 2,
            "correction": "bootstrap",
            "fast": True,
            "models": [{"name": "m", "dataset": str(trialed_population / "model")}],
        })
        report = run_model_comparison(cfg)
        assert report.n_failed == report.n_tasks > 0
        assert all("trial" in r["error"] for r in report.scores)
