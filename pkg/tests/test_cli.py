import json

import numpy as np
import pytest

from scod import cli, io


def run(*argv):
    return cli.main([str(a) for a in argv])


def pipeline(root, seed=0, epochs=400):
    """gen-data -> train -> fit -> score on the sine task; returns the output paths."""
    d = root / "data"
    assert run("gen-data", "--task", "sine-regression", "--seed", seed, "--out", d) == 0
    assert run("train", "--data", d / "train.bin", "--epochs", epochs, "--seed", seed,
               "--out", root / "model.bin") == 0
    assert run("fit", "--model", root / "model.bin", "--data", d / "train.bin",
               "--T", 34, "--k", 5, "--seed", seed, "--out", root / "mon.bin") == 0
    for split in ("train", "in_test", "out_test"):
        assert run("score", "--model", root / "model.bin", "--monitor", root / "mon.bin",
                   "--inputs", d / f"{split}.bin", "--out", root / f"{split}.scores") == 0
    return root


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    return pipeline(tmp_path_factory.mktemp("run"))


def test_pipeline_outputs(built):
    task = json.loads((built / "data" / "task.json").read_text())
    assert task["kind"] == "sine-regression"
    s_train = io.load_scores(built / "train.scores")
    s_out = io.load_scores(built / "out_test.scores")
    assert s_train.size == 200 and s_out.size == 300
    assert s_out.mean() > s_train.mean()


def test_eval_report_and_curves(built, tmp_path):
    assert run("eval", "--in-scores", built / "in_test.scores", "--out-scores", built / "out_test.scores",
               "--n-boot", 200, "--out", tmp_path / "r.txt", "--roc-out", tmp_path / "roc.tsv",
               "--pr-out", tmp_path / "pr.tsv") == 0
    text = (tmp_path / "r.txt").read_text()
    keys = [line.split(":")[0] for line in text.splitlines()]
    assert keys == ["auroc", "auroc_ci_low", "auroc_ci_high", "aupr", "aupr_ci_low",
                    "aupr_ci_high", "n_in", "n_out", "n_boot", "conf", "seed"]
    roc = np.loadtxt(tmp_path / "roc.tsv")
    assert roc[0].tolist() == [0.0, 0.0] and roc[-1].tolist() == [1.0, 1.0]


def test_score_identical_inputs_give_identical_scores(built, tmp_path):
    io.save_dataset(tmp_path / "x.bin", np.full((5, 1), 6.5))
    assert run("score", "--model", built / "model.bin", "--monitor", built / "mon.bin",
               "--inputs", tmp_path / "x.bin", "--out", tmp_path / "s.txt") == 0
    s = io.load_scores(tmp_path / "s.txt")
    assert np.unique(s).size == 1


def test_score_empty_input(built, tmp_path):
    (tmp_path / "empty.txt").write_text("")
    assert run("score", "--model", built / "model.bin", "--monitor", built / "mon.bin",
               "--inputs", tmp_path / "empty.txt", "--out", tmp_path / "s.txt") == 0
    assert (tmp_path / "s.txt").read_text() == ""


def test_monitor_from_other_model_is_mismatch(built, tmp_path):
    d = built / "data"
    assert run("train", "--data", d / "train.bin", "--epochs", 1, "--hidden", "8",
               "--out", tmp_path / "other.bin") == 0
    assert run("score", "--model", tmp_path / "other.bin", "--monitor", built / "mon.bin",
               "--inputs", d / "in_test.bin", "--out", tmp_path / "s.txt") == 3


def test_rank_above_budget_is_config_error(built, tmp_path):
    rc = run("fit", "--model", built / "model.bin", "--data", built / "data" / "train.bin",
             "--T", 10, "--k", 7, "--out", tmp_path / "m.bin")
    assert rc == 2
    assert not (tmp_path / "m.bin").exists()


def test_missing_setting_and_bad_config(built, tmp_path):
    assert run("fit", "--model", built / "model.bin") == 2
    (tmp_path / "bad.json").write_text("{nope")
    assert run("fit", "--config", tmp_path / "bad.json") == 2


def test_config_file_with_flag_override(built, tmp_path):
    cfg = {"model": str(built / "model.bin"), "data": str(built / "data" / "train.bin"),
           "T": 10, "k": 7, "out": str(tmp_path / "m.bin")}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("fit", "--config", tmp_path / "c.json") == 2
    assert run("fit", "--config", tmp_path / "c.json", "--k", 6) == 0
    assert io.load_monitor(tmp_path / "m.bin", *io.load_model(built / "model.bin")).k == 6


def test_unwritable_output_is_io_error(built, tmp_path):
    rc = run("score", "--model", built / "model.bin", "--monitor", built / "mon.bin",
             "--inputs", built / "data" / "in_test.bin", "--out", tmp_path / "missing" / "s.txt")
    assert rc == 4
    assert run("score", "--model", tmp_path / "nope.bin", "--monitor", built / "mon.bin",
               "--inputs", built / "data" / "in_test.bin", "--out", tmp_path / "s.txt") == 4


def test_training_divergence_exit_code(built, tmp_path):
    rc = run("train", "--data", built / "data" / "train.bin", "--epochs", 50, "--lr", 1e6,
             "--out", tmp_path / "m.bin")
    assert rc == 1


def test_full_mask_fraction_matches_no_mask(built, tmp_path):
    common = ["fit", "--model", built / "model.bin", "--data", built / "data" / "train.bin",
              "--T", 34, "--k", 5]
    assert run(*common, "--out", tmp_path / "a.bin") == 0
    assert run(*common, "--mask-fraction", 1.0, "--out", tmp_path / "b.bin") == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.bin").read_bytes() == (built / "mon.bin").read_bytes()
    assert run(*common, "--mask-fraction", 0.5, "--out", tmp_path / "c.bin") == 0
    n_full = int.from_bytes((tmp_path / "a.bin").read_bytes()[8:16], "little")
    n_masked = int.from_bytes((tmp_path / "c.bin").read_bytes()[8:16], "little")
    assert n_masked < n_full


def test_sweeps(built, tmp_path):
    d = built / "data"
    common = ["--model", built / "model.bin", "--data", d / "train.bin",
              "--in-test", d / "in_test.bin", "--out-test", d / "out_test.bin"]
    assert run("sweep-rank", *common, "--T-list", "34,64", "--k-list", "1,4",
               "--out", tmp_path / "rank.tsv") == 0
    lines = (tmp_path / "rank.tsv").read_text().splitlines()
    assert lines[0] == "T\tk\tauroc" and len(lines) == 5
    assert run("sweep-prior", *common, "--T", 34, "--k", 5, "--out", tmp_path / "prior.tsv") == 0
    lines = (tmp_path / "prior.tsv").read_text().splitlines()
    assert lines[0] == "eps2\tauroc" and len(lines) == 4
    assert run("sweep-prior", *common, "--T", 34, "--k", 23, "--out", tmp_path / "x.tsv") == 2


def test_clusters_task_runs(tmp_path):
    d = tmp_path / "data"
    assert run("gen-data", "--task", "cluster-classification", "--n-train", 60, "--n-in-test", 20,
               "--n-out-test", 20, "--out", d) == 0
    assert run("train", "--data", d / "train.bin", "--task", "cluster-classification", "--epochs", 20,
               "--out", tmp_path / "m.bin") == 0
    assert run("fit", "--model", tmp_path / "m.bin", "--data", d / "train.bin", "--T", 22,
               "--k", 6, "--out", tmp_path / "mon.bin") == 0
    assert run("score", "--model", tmp_path / "m.bin", "--monitor", tmp_path / "mon.bin",
               "--inputs", d / "out_test.bin", "--out", tmp_path / "s.txt") == 0
    assert io.load_scores(tmp_path / "s.txt").size == 20
