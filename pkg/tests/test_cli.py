import json

import numpy as np
import pytest

from radseg import cli
from radseg.cli import main
from radseg.nn import gradcheck
from radseg.store import Dataset


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    assert main(["generate", "--profile", "smoke", "--out", str(root / "data")]) == 0
    assert main(["train", "--profile", "smoke", "--data", str(root / "data"), "--out", str(root / "run"),
                 "--max-steps", "2", "--epochs", "2"]) == 0
    return root


def test_generate_count(tmp_path, capsys):
    assert main(["generate", "--out", str(tmp_path), "--split", "train", "--count", "100", "--jobs", "2"]) == 0
    ds = Dataset(tmp_path / "train")
    assert len(ds) == 100 and ds.manifest.count == 100 and ds.normalizer is not None
    out = capsys.readouterr().out
    assert "per class" in out and "per SNR" in out
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert set(cfg) == {"generation", "data", "model", "train", "eval", "resolved"}


def test_generate_same_seed_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["generate", "--profile", "smoke", "--out", str(tmp_path / d), "--split", "val",
                     "--seed", "4"]) == 0
    a, b = (tmp_path / "a" / "val" / "shard-00000.rsgd"), (tmp_path / "b" / "val" / "shard-00000.rsgd")
    assert a.read_bytes() == b.read_bytes()


def test_splits_use_distinct_seeds(smoke):
    tr, va = Dataset(smoke / "data" / "train"), Dataset(smoke / "data" / "val")
    assert tr.manifest.generation["global_seed"] != va.manifest.generation["global_seed"]
    assert va.normalizer is None


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"epochz": 1}}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--count", "1"]) == 2
    cfg.write_text(json.dumps({"extra": {}}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--count", "1"]) == 2
    cfg.write_text("{not json")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--count", "1"]) == 2
    assert main(["generate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 3


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"generation": {"n_samples": 1024, "global_seed": 1}}))
    assert main(["generate", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "o"),
                 "--split", "test", "--count", "2"]) == 0
    resolved = json.loads((tmp_path / "o" / "config.json").read_text())
    assert resolved["generation"]["global_seed"] == 9 and resolved["generation"]["n_samples"] == 1024
    assert Dataset(tmp_path / "o" / "test").manifest.generation["global_seed"] == 9 + 2


def test_train_outputs(smoke):
    run = smoke / "run"
    for name in ("final.ckpt", "best.ckpt", "history.csv", "config.json", "val_history.csv"):
        assert (run / name).exists(), name
    assert (run / "history.csv").read_text().splitlines()[0] == "epoch,step,loss"


def test_resume_continues_epochs(smoke, tmp_path):
    run = tmp_path / "run"
    data = smoke / "data"
    assert main(["train", "--profile", "smoke", "--data", str(data), "--out", str(run), "--epochs", "2",
                 "--max-steps", "2"]) == 0
    assert main(["train", "--profile", "smoke", "--data", str(data), "--out", str(run), "--epochs", "2",
                 "--max-steps", "2", "--resume", str(run / "final.ckpt")]) == 0
    rows = (run / "history.csv").read_text().splitlines()[1:]
    assert [r.split(",")[:2] for r in rows] == [["0", "1"], ["1", "2"], ["2", "3"], ["3", "4"]]
    resolved = json.loads((run / "config.json").read_text())["resolved"]
    assert resolved["start_epoch"] == 2 and resolved["start_step"] == 2


def test_resume_with_other_architecture_is_incompatible(smoke, tmp_path):
    assert main(["train", "--profile", "smoke", "--data", str(smoke / "data"), "--out", str(tmp_path),
                 "--stages", "2", "--resume", str(smoke / "run" / "final.ckpt")]) == 5


@pytest.mark.parametrize("stages", [1, 2, 3, 4, 5])
def test_stage_flag_accepted(stages):
    args = cli.build_parser().parse_args(["train", "--data", "d", "--out", "o", "--stages", str(stages)])
    assert args.stages == stages


def test_stage_flag_rejects_six():
    with pytest.raises(SystemExit) as info:
        cli.build_parser().parse_args(["train", "--data", "d", "--out", "o", "--stages", "6"])
    assert info.value.code == 2


def test_train_missing_data_is_io_error(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nothing"), "--out", str(tmp_path / "o")]) == 3


def test_nan_loss_exit_code(smoke, tmp_path, monkeypatch):
    real = cli.build_model

    def poisoned(spec, seed=0, dtype=np.float32):
        m = real(spec, seed, dtype)
        m.stages[0].head.params["bias"][:] = np.nan
        return m

    monkeypatch.setattr(cli, "build_model", poisoned)
    assert main(["train", "--profile", "smoke", "--data", str(smoke / "data"), "--out", str(tmp_path)]) == 4
    dump = json.loads((tmp_path / "nan_dump.json").read_text())
    assert dump["step"] == 0 and "indices" in dump


def test_eval_and_oracle(smoke, tmp_path, capsys):
    assert main(["eval", "--data", str(smoke / "data"), "--oracle", "--out", str(tmp_path / "or")]) == 0
    summary = (tmp_path / "or" / "summary.txt").read_text()
    assert summary.startswith("# threshold 0.5")
    rep = json.loads((tmp_path / "or" / "report.json").read_text())
    assert all(row["mean"][m] == 1.0 for row in rep["rows"] for m in ("f1", "dice", "iou"))
    assert main(["eval", "--data", str(smoke / "data" / "test"), "--checkpoint", str(smoke / "run" / "final.ckpt"),
                 "--out", str(tmp_path / "ev")]) == 0
    lines = (tmp_path / "ev" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "snr_db,metric,mean,std,n,count" and len(lines) == 4


def test_eval_missing_checkpoint(smoke, tmp_path):
    assert main(["eval", "--data", str(smoke / "data"), "--checkpoint", str(tmp_path / "nope.ckpt"),
                 "--out", str(tmp_path)]) == 5


def test_eval_incompatible_dataset(smoke, tmp_path):
    # a 512-sample dataset is shorter than the 1024-sample model window
    assert main(["generate", "--profile", "smoke", "--n-samples", "512", "--out", str(tmp_path / "d"),
                 "--split", "test"]) == 0
    assert main(["eval", "--data", str(tmp_path / "d"), "--checkpoint", str(smoke / "run" / "final.ckpt"),
                 "--out", str(tmp_path / "o")]) == 5


def test_report_runs(smoke, tmp_path):
    for name, extra in (("a", ["--oracle"]), ("b", ["--checkpoint", str(smoke / "run" / "final.ckpt")])):
        assert main(["eval", "--data", str(smoke / "data"), "--out", str(tmp_path / name), *extra]) == 0
    assert main(["report", "--runs", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "r")]) == 0
    csv = (tmp_path / "r" / "report.csv").read_text().splitlines()
    assert csv[0] == "model,stages,metric,snr_db,mean,std,n" and len(csv) == 1 + 2 * 3
    assert (tmp_path / "r" / "report.svg").read_text().startswith("<svg")


def test_report_bin_mismatch(smoke, tmp_path):
    assert main(["eval", "--data", str(smoke / "data"), "--oracle", "--out", str(tmp_path / "a")]) == 0
    assert main(["generate", "--out", str(tmp_path / "d"), "--split", "test", "--count", "3",
                 "--n-samples", "1024"]) == 0
    assert main(["eval", "--data", str(tmp_path / "d"), "--oracle", "--out", str(tmp_path / "b")]) == 0
    assert main(["report", "--runs", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "r")]) == 6


def test_inspect(smoke, tmp_path):
    assert main(["inspect", "--data", str(smoke / "data"), "--index", "0", "--out", str(tmp_path / "plain")]) == 0
    doc = json.loads((tmp_path / "plain" / "example-0.json").read_text())
    assert len(doc["i"]) == 1024 and "labels" not in doc
    assert main(["inspect", "--data", str(smoke / "data"), "--index", "0", "--checkpoint",
                 str(smoke / "run" / "final.ckpt"), "--out", str(tmp_path / "pred")]) == 0
    doc = json.loads((tmp_path / "pred" / "example-0.json").read_text())
    labels = np.array(doc["labels"])
    assert labels.shape == (5, 1024) and set(np.unique(labels)) <= {0, 1, 2, 3}
    header = (tmp_path / "pred" / "example-0.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["sample", "i", "q"] and "label_LFM" in header


def test_inspect_out_of_range(smoke, tmp_path):
    assert main(["inspect", "--data", str(smoke / "data"), "--index", "999", "--out", str(tmp_path)]) == 2


def test_gradcheck_pass(capsys):
    assert main(["gradcheck", "--seeds", "1"]) == 0
    out = capsys.readouterr().out
    assert "conv1d_k3_d4" in out and "max rel err" in out and "PASS" in out


def test_gradcheck_negative_control(monkeypatch):
    real = gradcheck.layer_cases

    def corrupted(seed):
        cases = real(seed)
        name, layer, x = cases[0]
        return [(name, gradcheck.SignFlipped(layer), x)] + cases[1:]

    monkeypatch.setattr(gradcheck, "layer_cases", corrupted)
    assert main(["gradcheck", "--seeds", "1"]) == 1


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("RADSEG_THREADS", "2")
    assert cli._jobs(8) == 2
    monkeypatch.delenv("RADSEG_THREADS")
    assert cli._jobs(8) == 8
