import csv
import hashlib
import json

import pytest

from survrisk.cli import main

BASE_CONFIG = {
    "seed": 2024,
    "name": "golden",
    "paths": {"bundle_dir": "bundle", "out_dir": "out", "model_file": "out/model.json"},
    "synth": {"preset": "separable", "n_patients": 400, "n_features": 6, "n_informative": 3},
    "cohort": {"disease_codes": ["Z99"], "approach": "distinct"},
    "features": "out/features.json",
    "forest": {"n_trees": 15},
    "classifier": {"technique": "rs"},
    "explain": {"n_explained": 3, "background_size": 15, "budget": 64},
}


def write_config(root, overrides=None):
    config = json.loads(json.dumps(BASE_CONFIG))
    for key, value in (overrides or {}).items():
        if value is None:
            config.pop(key, None)
        else:
            config[key] = value
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=1))
    return path


def run(*argv):
    return main(list(argv))


def run_pipeline(root, stages=("synth", "prepare", "train", "evaluate", "explain")):
    config = write_config(root)
    for stage in stages:
        assert run(stage, "--config", str(config)) == 0, stage
    return root / "out"


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    out = run_pipeline(root)
    return out, root


class TestExitCodes:
    def test_missing_config_key_exits_2_with_key_name(self, tmp_path, capsys):
        config = write_config(tmp_path, {"synth": None})
        assert run("synth", "--config", str(config)) == 2
        assert "synth" in capsys.readouterr().err

    def test_missing_seed_names_key(self, tmp_path, capsys):
        config = write_config(tmp_path, {"seed": None})
        assert run("prepare", "--config", str(config)) == 2
        assert "seed" in capsys.readouterr().err

    def test_evaluate_before_train_exits_3(self, tmp_path):
        config = write_config(tmp_path)
        assert run("synth", "--config", str(config)) == 0
        assert run("prepare", "--config", str(config)) == 0
        assert run("evaluate", "--config", str(config)) == 3

    def test_prepare_without_bundle_exits_3(self, tmp_path):
        config = write_config(tmp_path)
        assert run("prepare", "--config", str(config)) == 3

    def test_missing_config_file_exits_2(self, tmp_path):
        assert run("synth", "--config", str(tmp_path / "nope.json")) == 2


class TestArtifacts:
    def test_samples_csv_shape(self, pipeline_out):
        out, _ = pipeline_out
        with open(out / "samples.csv") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        assert header[:4] == ["patient_id", "cutoff_date", "time_days", "event"]
        assert header[4:10] == [f"f_{i}" for i in range(6)]
        assert header[-1] == "split"
        splits = {r[-1] for r in rows[1:]}
        assert splits == {"train", "validation", "test"}

    def test_report_csv_columns(self, pipeline_out):
        out, _ = pipeline_out
        with open(out / "report.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["dataset", "c_index", "accuracy", "precision", "recall",
                           "npv", "specificity", "auroc", "auprc", "f1"]
        assert rows[1][0] == "golden[test]"

    def test_attributions_cover_all_features(self, pipeline_out):
        out, _ = pipeline_out
        with open(out / "attributions.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 3 * 6  # n_explained x n_features
        assert {r[1] for r in rows} == {f"f_{i}" for i in range(6)}

    def test_importance_ranked(self, pipeline_out):
        out, _ = pipeline_out
        with open(out / "importance.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        values = [float(r[1]) for r in rows]
        assert values == sorted(values, reverse=True)
        assert [int(r[2]) for r in rows] == list(range(1, 7))

    def test_curve_clusters_are_step_valid(self, pipeline_out):
        out, _ = pipeline_out
        with open(out / "curves.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        by_cluster = {}
        for cluster, time, value in rows:
            by_cluster.setdefault(cluster, []).append((float(time), float(value)))
        for series in by_cluster.values():
            times = [t for t, _ in series]
            values = [v for _, v in series]
            assert times == sorted(times)
            assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_times_histogram_counts(tmp_path):
    config = write_config(tmp_path)
    assert run("synth", "--config", str(config)) == 0
    assert run("times", "--config", str(config)) == 0
    with open(tmp_path / "out" / "times.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    approaches = {r[0] for r in rows}
    assert approaches == {"similar", "overlap", "distinct"}
    for approach in approaches:
        for group in ("event", "normal"):
            total = sum(int(r[4]) for r in rows if r[0] == approach and r[1] == group)
            assert total > 0
    # distinct keeps normals outside the window, similar within it
    similar_normal_max = max(int(r[3]) for r in rows if r[0] == "similar" and r[1] == "normal")
    distinct_normal_min = min(int(r[3]) for r in rows if r[0] == "distinct" and r[1] == "normal")
    assert similar_normal_max <= 12  # months
    assert distinct_normal_min >= 12


def test_compare_emits_twelve_rows(tmp_path):
    config = write_config(tmp_path, {"forest": {"n_trees": 10}, "baseline": {"n_trees": 10}})
    assert run("synth", "--config", str(config)) == 0
    assert run("compare", "--config", str(config)) == 0
    with open(tmp_path / "out" / "compare.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert len(rows) == 12
    combos = {(r[0], r[1]) for r in rows}
    assert combos == {
        (a, m)
        for a in ("similar", "overlap", "distinct")
        for m in ("baseline_rf", "rs", "sp", "ln")
    }


def test_rerun_is_byte_identical(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    out_a = run_pipeline(tmp_path / "a")
    out_b = run_pipeline(tmp_path / "b")
    for name in ("samples.csv", "model.json", "report.csv", "attributions.csv",
                 "importance.csv", "curves.csv", "ground_truth.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_technique_override_on_evaluate(tmp_path):
    config = write_config(tmp_path)
    for stage in ("synth", "prepare", "train"):
        assert run(stage, "--config", str(config)) == 0
    assert run("evaluate", "--config", str(config), "--technique", "sp") == 0
    assert run("evaluate", "--config", str(config), "--split", "validation") == 0


GOLDEN_DIGESTS = {
    # SHA-256 of artifacts from the BASE_CONFIG pipeline (LAPACK-free ones only;
    # attribution bytes are covered by the rerun-identity test instead).
    # Regenerate by running this file with -k golden -s after intentional changes.
    "samples.csv": None,
    "model.json": None,
    "ground_truth.csv": None,
    "report.csv": None,
}


def test_golden_digests(pipeline_out):
    out, _ = pipeline_out
    observed = {name: sha(out / name) for name in GOLDEN_DIGESTS}
    expected = {k: v for k, v in GOLDEN_DIGESTS.items() if v is not None}
    if not expected:
        pytest.skip("golden digests not frozen yet: " + json.dumps(observed, indent=1))
    assert observed == GOLDEN_DIGESTS
