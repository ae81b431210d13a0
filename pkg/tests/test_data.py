import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iatc.data import (
    DatasetError,
    PopulationDataset,
    ResponseMatrix,
    ResponseProfile,
    SplitSpec,
    TrialTensor,
    load_dataset,
    save_dataset,
    split_stimuli,
    trial_average,
)


def make_profile(subject, area, values, stage="unspecified", **kw):
    return ResponseProfile(
        matrix=ResponseMatrix(values), subject_id=subject, area_id=area, stage=stage, **kw
    )


def small_dataset(rng, subjects=2, areas=2, stimuli=6, neurons=3):
    profiles = []
    for s in range(subjects):
        for a in range(areas):
            profiles.append(ResponseProfile(
                matrix=ResponseMatrix(
                    rng.normal(size=(stimuli, neurons)),
                    stimulus_ids=tuple(f"stim{i}" for i in range(stimuli)),
                    neuron_ids=tuple(f"s{s}a{a}n{j}" for j in range(neurons)),
                ),
                subject_id=f"subj{s}", area_id=f"area{a}",
                hierarchy_level=float(a + 1), stage="unspecified",
            ))
    return PopulationDataset(
        profiles=profiles,
        stimulus_ids=tuple(f"stim{i}" for i in range(stimuli)),
        metadata={"note": "fixture"},
    )


class TestResponseMatrix:
    def test_rejects_nan(self):
        vals = np.ones((3, 2))
        vals[1, 0] = np.nan
        with pytest.raises(DatasetError, match="stimulus 1, neuron 0"):
            ResponseMatrix(vals)

    def test_rejects_single_stimulus(self):
        with pytest.raises(DatasetError):
            ResponseMatrix(np.ones((1, 3)))

    def test_rejects_duplicate_ids(self):
        with pytest.raises(DatasetError, match="duplicate neuron"):
            ResponseMatrix(np.ones((3, 2)), neuron_ids=("a", "a"))


class TestTrialAverage:
    def test_single_trial_is_identity(self):
        vals = np.arange(6.0).reshape(3, 2, 1)
        avg = trial_average(TrialTensor(vals))
        assert np.array_equal(avg.values, vals[:, :, 0])

    def test_constant_tensor(self):
        avg = trial_average(TrialTensor(np.full((3, 2, 5), 2.5)))
        assert np.all(avg.values == 2.5)

    def test_small_arithmetic(self):
        # S=2, N=1, T=2 with trials {(1,3),(2,4)} -> column (2,3)
        vals = np.array([[[1.0, 3.0]], [[2.0, 4.0]]])
        avg = trial_average(TrialTensor(vals))
        assert np.array_equal(avg.values, np.array([[2.0], [3.0]]))

    def test_commutes_with_stimulus_permutation(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(5, 3, 4))
        perm = rng.permutation(5)
        a = trial_average(TrialTensor(vals)).values[perm]
        b = trial_average(TrialTensor(vals[perm])).values
        assert np.array_equal(a, b)

    def test_counts_tag_rejects_negative(self):
        with pytest.raises(DatasetError):
            TrialTensor(-np.ones((2, 2, 2)), counts=True)


class TestSplit:
    def test_sizes(self):
        train, test = split_stimuli(10, SplitSpec(0.8, seed=1))
        assert train.size == 8 and test.size == 2

    def test_same_seed_identical(self):
        a = split_stimuli(100, SplitSpec(0.8, seed=42))
        b = split_stimuli(100, SplitSpec(0.8, seed=42))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_different_seeds_differ(self):
        a = split_stimuli(10000, SplitSpec(0.8, seed=1))
        b = split_stimuli(10000, SplitSpec(0.8, seed=2))
        assert not np.array_equal(a[0], b[0])

    def test_too_few_stimuli(self):
        with pytest.raises(DatasetError):
            split_stimuli(3, SplitSpec(0.8, seed=0))

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(min_value=4, max_value=10000),
        frac=st.floats(min_value=0.05, max_value=0.95),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_is_partition(self, n, frac, seed):
        import math

        n_train = math.floor(n * frac)
        if n_train < 2 or n - n_train < 2:
            return
        train, test = split_stimuli(n, SplitSpec(frac, seed=seed))
        merged = np.concatenate([train, test])
        assert merged.size == n
        assert np.array_equal(np.sort(merged), np.arange(n))


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = small_dataset(rng)
        save_dataset(ds, tmp_path / "ds")
        loaded = load_dataset(tmp_path / "ds")
        assert len(loaded.profiles) == 4
        assert loaded.stimulus_ids == ds.stimulus_ids
        for orig in ds.profiles:
            got = loaded.get(orig.subject_id, orig.area_id, orig.stage)
            # 17 significant digits round-trip exactly
            assert np.array_equal(got.matrix.values, orig.matrix.values)
            assert got.matrix.neuron_ids == orig.matrix.neuron_ids
            assert got.hierarchy_level == orig.hierarchy_level
        # and a second save reproduces identical CSV bytes
        save_dataset(loaded, tmp_path / "ds2")
        for f in sorted((tmp_path / "ds").glob("*.csv")):
            assert f.read_bytes() == (tmp_path / "ds2" / f.name).read_bytes()

    def test_trials_and_ncsnr_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        tensor = TrialTensor(rng.gamma(2.0, size=(6, 3, 4)),
                             stimulus_ids=tuple(f"stim{i}" for i in range(6)),
                             neuron_ids=("a", "b", "c"))
        prof = ResponseProfile(
            matrix=trial_average(tensor), subject_id="s0", area_id="v1",
            stage="post_nl", trials=tensor, ncsnr=np.array([0.5, 1.0, 2.0]),
        )
        ds = PopulationDataset(profiles=[prof])
        save_dataset(ds, tmp_path / "ds")
        loaded = load_dataset(tmp_path / "ds")
        got = loaded.profiles[0]
        assert got.trials is not None and got.trials.trial_count == 4
        assert np.array_equal(got.trials.values, tensor.values)
        assert np.array_equal(got.ncsnr, prof.ncsnr)

    def test_missing_manifest(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(DatasetError, match="manifest"):
            load_dataset(tmp_path / "empty")

    def test_nan_cell_names_location(self, tmp_path):
        rng = np.random.default_rng(5)
        save_dataset(small_dataset(rng), tmp_path / "ds")
        target = sorted((tmp_path / "ds").glob("*.csv"))[0]
        lines = target.read_text().splitlines()
        cells = lines[2].split(",")
        cells[1] = "NaN"
        lines[2] = ",".join(cells)
        target.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match=r"row 2, column"):
            load_dataset(tmp_path / "ds")

    def test_dimension_mismatch(self, tmp_path):
        rng = np.random.default_rng(6)
        save_dataset(small_dataset(rng), tmp_path / "ds")
        target = sorted((tmp_path / "ds").glob("*.csv"))[0]
        lines = target.read_text().splitlines()
        target.write_text("\n".join(lines[:-1]) + "\n")  # drop one stimulus row
        with pytest.raises(DatasetError, match="declares 6 stimuli"):
            load_dataset(tmp_path / "ds")

    def test_duplicate_profile_key(self, tmp_path):
        rng = np.random.default_rng(7)
        save_dataset(small_dataset(rng), tmp_path / "ds")
        manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        manifest["profiles"].append(dict(manifest["profiles"][0]))
        (tmp_path / "ds" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(DatasetError, match="duplicate profile key"):
            load_dataset(tmp_path / "ds")


class TestPopulationDataset:
    def test_mismatched_stimuli_rejected(self):
        rng = np.random.default_rng(8)
        p1 = make_profile("a", "x", rng.normal(size=(4, 2)))
        p2 = ResponseProfile(
            matrix=ResponseMatrix(rng.normal(size=(4, 2)),
                                  stimulus_ids=("w", "x", "y", "z")),
            subject_id="b", area_id="x",
        )
        with pytest.raises(DatasetError, match="stimulus ordering"):
            PopulationDataset(profiles=[p1, p2])

    def test_stage_validation(self):
        with pytest.raises(DatasetError, match="unknown stage"):
            make_profile("a", "x", np.ones((3, 2)) * [[1], [2], [3]], stage="weird")
