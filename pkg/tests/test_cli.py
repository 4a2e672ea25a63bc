import json
from pathlib import Path

import numpy as np
import pytest

from neurocam.cli import main
from neurocam.report import read_heatmap_blob


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def conn_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("conn")
    assert run(["synth", "--kind", "connectivity", "--out", root / "data",
                "--n-parcels", 10, "--planted", "2,5", "--delta", "1.0",
                "--sigma", "0.2", "--hc-subjects", 15, "--ad-subjects", 15,
                "--mixed-fraction", 0, "--seed", 1]) == 0
    return root


@pytest.fixture(scope="module")
def trained(conn_dataset):
    out = conn_dataset / "final"
    assert run(["final-train", "--manifest", conn_dataset / "data/manifest.csv",
                "--model", "bcgcnse", "--out", out, "--epochs", 60,
                "--patience", 10, "--lr", "0.02", "--batch", 8,
                "--channels", "2,4", "--se-reduction", 2,
                "--fc-widths", "8,4", "--seed", 0]) == 0
    return out


@pytest.fixture(scope="module")
def explained(conn_dataset, trained):
    out = conn_dataset / "xai"
    assert run(["explain", "--manifest", conn_dataset / "data/manifest.csv",
                "--checkpoint", trained / "checkpoint.bin", "--out", out,
                "--slices"]) == 0
    return out


class TestSynth:
    def test_outputs_parse(self, conn_dataset):
        from neurocam.dataio import read_manifest
        cohort = read_manifest(conn_dataset / "data/manifest.csv")
        assert len(cohort.sessions) == 30
        assert (conn_dataset / "data/run.json").exists()

    def test_mixed_fraction_zero(self, conn_dataset):
        from neurocam.dataio import read_manifest
        cohort = read_manifest(conn_dataset / "data/manifest.csv")
        assert not cohort.mixed_class_subjects

    def test_volumes_dataset(self, tmp_path):
        assert run(["synth", "--kind", "volumes", "--out", tmp_path,
                    "--n-parcels", 8, "--planted", "3", "--shape", "12,12,12",
                    "--hc-subjects", 4, "--ad-subjects", 4,
                    "--mixed-fraction", 0, "--seed", 2]) == 0
        from neurocam.dataio import read_atlas, read_manifest
        cohort = read_manifest(tmp_path / "manifest.csv")
        atlas = read_atlas(tmp_path / "atlas_labels.nii",
                           tmp_path / "atlas_names.tsv")
        assert atlas.n_parcels == 8
        assert len(cohort.sessions) == 8


class TestFinalTrain:
    def test_outputs(self, trained):
        payload = json.loads((trained / "union_metrics.json").read_text())
        assert payload["union"]["accuracy"] >= 0.9
        lines = (trained / "predictions.csv").read_text().splitlines()
        assert lines[0] == "session_id,true,predicted,logit"
        assert len(lines) == 31

    def test_checkpoint_reload_identical_logits(self, conn_dataset, trained):
        from neurocam.cli import _model_from_checkpoint, load_graph_inputs
        from neurocam.dataio import read_manifest
        cohort = read_manifest(conn_dataset / "data/manifest.csv")
        inputs, _ = load_graph_inputs(cohort, conn_dataset / "data/manifest.csv")
        a, _ = _model_from_checkpoint(trained / "checkpoint.bin")
        b, _ = _model_from_checkpoint(trained / "checkpoint.bin")
        for rec in cohort.sessions[:10]:
            la = a.forward(inputs[rec.session_id])[0]
            lb = b.forward(inputs[rec.session_id])[0]
            assert la == lb


class TestExplain:
    def test_rv_rows(self, explained):
        lines = (explained / "rv.csv").read_text().splitlines()
        assert lines[0] == "session_id,class,parcel,acronym,rv"
        assert len(lines) == 1 + 30 * 10  # sessions x parcels

    def test_heatmap_blobs(self, explained):
        blobs = sorted((explained / "heatmaps").glob("*.bin"))
        assert len(blobs) == 30
        heatmap = read_heatmap_blob(blobs[0])
        assert heatmap.shape == (10, 10)
        assert (heatmap >= 0).all()

    def test_pgm_header(self, explained):
        pgms = sorted((explained / "slices").glob("*.pgm"))
        assert len(pgms) == 30
        header = pgms[0].read_bytes()[:13]
        assert header == b"P5 10 10 255\n"

    def test_jobs_parallel_identical(self, conn_dataset, trained, tmp_path):
        out2 = tmp_path / "xai2"
        assert run(["explain", "--manifest",
                    conn_dataset / "data/manifest.csv",
                    "--checkpoint", trained / "checkpoint.bin",
                    "--out", out2, "--jobs", 3]) == 0
        a = (conn_dataset / "xai" / "rv.csv").read_text()
        assert a == (out2 / "rv.csv").read_text()


class TestStats:
    def test_outputs(self, conn_dataset, explained):
        out = conn_dataset / "stats"
        assert run(["stats", "--manifest", conn_dataset / "data/manifest.csv",
                    "--rv", explained / "rv.csv",
                    "--predictions", explained / "predictions.csv",
                    "--out", out, "--model-name", "graph"]) == 0
        stats_lines = (out / "stats.csv").read_text().splitlines()
        assert stats_lines[0].startswith("parcel,acronym,test,statistic")
        assert len(stats_lines) == 11
        table = (out / "table2.md").read_text()
        assert "| N. | Parcel | Adjusted p |" in table
        subgroups = json.loads((out / "subgroups.json").read_text())
        assert set(subgroups["classes"]) == {"AD", "HC"}
        # toy atlas: top 15% of 10 parcels = 2 per class
        assert len(subgroups["classes"]["AD"]["top"]) == 2
        connectogram = json.loads((out / "connectogram.json").read_text())
        assert len(connectogram["nodes"]) == 10

    def test_two_model_common_marker(self, conn_dataset, explained):
        out = conn_dataset / "stats2"
        assert run(["stats", "--manifest", conn_dataset / "data/manifest.csv",
                    "--rv", explained / "rv.csv",
                    "--predictions", explained / "predictions.csv",
                    "--rv2", explained / "rv.csv",
                    "--predictions2", explained / "predictions.csv",
                    "--model-name", "graph", "--model2-name", "graph-bis",
                    "--out", out]) == 0
        table = (out / "table2.md").read_text()
        assert "## graph" in table and "## graph-bis" in table
        # identical inputs: every significant parcel is common -> starred
        sig_rows = [l for l in table.splitlines()
                    if l.startswith("|") and "Adjusted" not in l and "---" not in l]
        if sig_rows:
            assert all("*" in row for row in sig_rows)

    def test_report_command(self, conn_dataset):
        out = conn_dataset / "report"
        assert run(["report", "--stats-dir", conn_dataset / "stats",
                    "--out", out]) == 0
        text = (out / "report.md").read_text()
        assert "# Run report" in text
        assert (out / "connectogram.json").exists()


class TestDeterminismAndErrors:
    def test_synth_rerun_from_run_json_byte_identical(self, conn_dataset,
                                                      tmp_path):
        out2 = tmp_path / "data2"
        assert run(["synth", "--config", conn_dataset / "data/run.json",
                    "--kind", "connectivity", "--out", out2]) == 0
        a_dir = conn_dataset / "data"
        for path in sorted(a_dir.rglob("*")):
            if path.is_file() and path.name != "run.json":
                rel = path.relative_to(a_dir)
                assert (out2 / rel).read_bytes() == path.read_bytes(), rel
        a_run = json.loads((a_dir / "run.json").read_text())
        b_run = json.loads((out2 / "run.json").read_text())
        assert a_run["artifacts"] == b_run["artifacts"]

    def test_usage_error_exit_1(self, capsys):
        assert run(["crossval", "--model", "nope"]) == 1

    def test_data_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,header\n1,2\n")
        assert run(["crossval", "--manifest", bad, "--model", "bcgcnse",
                    "--out", tmp_path / "out"]) == 2

    def test_missing_checkpoint_exit_2(self, conn_dataset, tmp_path):
        missing = tmp_path / "none.bin"
        code = run(["explain", "--manifest",
                    conn_dataset / "data/manifest.csv",
                    "--checkpoint", missing, "--out", tmp_path / "x"])
        assert code == 2


class TestCrossvalCli:
    def test_small_crossval(self, conn_dataset, tmp_path):
        out = tmp_path / "cv"
        assert run(["crossval", "--manifest",
                    conn_dataset / "data/manifest.csv",
                    "--model", "bcgcnse", "--out", out, "--folds", 5,
                    "--epochs", 12, "--patience", 3, "--lr", "0.02",
                    "--batch", 8, "--channels", "2,4", "--se-reduction", 2,
                    "--fc-widths", "8,4", "--seed", 3]) == 0
        payload = json.loads((out / "metrics.json").read_text())
        assert len(payload["folds"]) == 5
        cm = payload["confusion_matrix"]["actual_positive"]["predicted_positive"]
        assert "[" in cm and "]" in cm  # median [Q1, Q3] rendering
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "fold,epoch,train_loss,val_loss,val_auc"
        assert len(history) > 5

    def test_crossval_rerun_byte_identical(self, conn_dataset, tmp_path):
        args = ["crossval", "--manifest", conn_dataset / "data/manifest.csv",
                "--model", "bcgcnse", "--folds", 5, "--epochs", 6,
                "--patience", 2, "--lr", "0.02", "--batch", 8,
                "--channels", "2,4", "--se-reduction", 2,
                "--fc-widths", "8,4", "--seed", 4]
        out1, out2 = tmp_path / "cv1", tmp_path / "cv2"
        assert run(args + ["--out", out1]) == 0
        assert run(args + ["--out", out2]) == 0
        assert (out1 / "metrics.json").read_bytes() == \
               (out2 / "metrics.json").read_bytes()
        assert (out1 / "history.csv").read_bytes() == \
               (out2 / "history.csv").read_bytes()
