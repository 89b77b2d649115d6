import csv
import json

import numpy as np
import pytest

from csi_supcon.cli import ExperimentConfig, cmd_ablate_pos_neg, cmd_evaluate, cmd_generate, cmd_import, cmd_train, load_data, main
from csi_supcon.dataset import load_database


def config_dict(tmp_path, **kw):
    d = {
        "scenario": {"preset": "default", "rng_seed": 5, "rows": 3, "cols": 3, "num_subcarriers": 16},
        "positions": {"count": 160, "seed": 5},
        "split": {"test_ratio": 0.125, "split_seed": 1},
        "encoder": {"channels": [8, 16, 16, 16], "projection_hidden": 32, "feature_dim": 8},
        "train": {"epochs": 2, "num_positives": 2, "num_negatives": 8, "rng_seed": 2},
        "dm": {"epochs": 2, "rng_seed": 2},
        "metrics": ["supcon", "cmd", "svd", "magnitude", "dm"],
        "k": 4,
        "output_dir": str(tmp_path / "out"),
    }
    d.update(kw)
    return d


def write_config(tmp_path, name="cfg.json", **kw):
    path = tmp_path / name
    path.write_text(json.dumps(config_dict(tmp_path, **kw)))
    return path


def test_generate_round_trip(tmp_path):
    cfg = ExperimentConfig(**config_dict(tmp_path))
    out = cmd_generate(cfg)
    back = load_database(out)
    mem = load_data(cfg)
    np.testing.assert_array_equal(back.csi, mem.csi)
    np.testing.assert_array_equal(back.positions, mem.positions)
    manifest = json.loads((out / "manifest.json").read_text())
    assert (manifest["I"], manifest["B"], manifest["N"]) == back.csi.shape


def test_generate_bad_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        cmd_generate(ExperimentConfig(**config_dict(tmp_path)), blocker / "ds")


def test_import_dir_and_npz(tmp_path):
    cfg = ExperimentConfig(**config_dict(tmp_path))
    src = cmd_generate(cfg, tmp_path / "src")
    before = {p.name: p.read_bytes() for p in src.iterdir()}
    db = load_database(cmd_import(src, tmp_path / "imp"))
    assert db.source == "imported"
    assert before == {p.name: p.read_bytes() for p in src.iterdir()}
    np.savez(tmp_path / "ext.npz", csi=db.csi, positions=db.positions)
    db2 = load_database(cmd_import(tmp_path / "ext.npz", tmp_path / "imp2"))
    np.testing.assert_array_equal(db2.csi, db.csi)
    with pytest.raises(FileNotFoundError):
        cmd_import(tmp_path / "nope", tmp_path / "x")


def test_missing_dataset_is_an_error(tmp_path):
    with pytest.raises(FileNotFoundError):
        ExperimentConfig(**config_dict(tmp_path, scenario=None, dataset=str(tmp_path / "missing")))
    assert main(["train", "--config", str(write_config(tmp_path, scenario=None, dataset=str(tmp_path / "missing")))]) == 1


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = ExperimentConfig(**config_dict(tmp))
    return cfg, cmd_train(cfg, tmp / "run")


def test_train_run_directory(trained, tmp_path):
    cfg, run = trained
    snap = json.loads((run / "config.json").read_text())
    assert snap == cfg.to_dict()
    for name in ("params.bin", "loss.csv", "dm_params.bin", "dm_loss.csv"):
        assert (run / name).is_file()
    # the snapshot alone reproduces the run byte for byte
    rerun = cmd_train(ExperimentConfig.load(run / "config.json"), tmp_path / "rerun")
    assert (rerun / "params.bin").read_bytes() == (run / "params.bin").read_bytes()
    assert (rerun / "dm_params.bin").read_bytes() == (run / "dm_params.bin").read_bytes()


def test_evaluate_outputs(trained, tmp_path):
    cfg, run = trained
    a = cmd_evaluate(cfg, run, tmp_path / "e1")
    b = cmd_evaluate(cfg, run, tmp_path / "e2")
    assert a == b
    with open(tmp_path / "e1" / "table.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["rho", "SupCon", "CMD", "SVD", "Magn.", "DM"]
    assert len(rows) == 2
    for name in cfg.metrics:
        with open(tmp_path / "e1" / f"cdf_{name}.csv") as f:
            errs = [float(r["error_m"]) for r in csv.DictReader(f)]
        assert len(errs) == a["num_test"] == 20
        assert np.mean(errs) == pytest.approx(a["metrics"][name]["mean_error_m"], rel=1e-12)


def test_evaluate_without_params(tmp_path):
    cfg = ExperimentConfig(**config_dict(tmp_path))
    with pytest.raises(FileNotFoundError):
        cmd_evaluate(cfg, tmp_path)


def test_ablation(tmp_path):
    cfg = ExperimentConfig(**config_dict(tmp_path, train={"epochs": 1, "rng_seed": 4}))
    out = cmd_ablate_pos_neg(cfg, [(2, 4)], tmp_path / "abl1")
    with open(out / "ablation.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 1
    single_cfg = ExperimentConfig(**config_dict(tmp_path, train={"epochs": 1, "rng_seed": 4, "num_positives": 2, "num_negatives": 4}, metrics=["supcon"], dm=None))
    run = cmd_train(single_cfg, tmp_path / "single")
    ref = cmd_evaluate(single_cfg, run)["metrics"]["supcon"]["mean_error_m"]
    assert float(rows[0]["mean_error_m"]) == ref

    out3 = cmd_ablate_pos_neg(cfg, [(1, 1), (2, 4), (3, 6)], tmp_path / "abl3")
    with open(out3 / "ablation.csv") as f:
        assert len(list(csv.DictReader(f))) == 3


def test_main_end_to_end(tmp_path, capsys):
    path = write_config(tmp_path, metrics=["cmd"], dm=None)
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "ds")]) == 0
    path2 = write_config(tmp_path, "cfg2.json", scenario=None, dataset=str(tmp_path / "ds"), metrics=["supcon", "cmd"], dm=None)
    assert main(["train", "--config", str(path2), "--out", str(tmp_path / "run")]) == 0
    assert main(["evaluate", "--config", str(path2), "--run", str(tmp_path / "run")]) == 0
    assert '"mean_error_m"' in capsys.readouterr().out
    assert main(["ablate", "--config", str(path2), "--grid", "1,1", "--out", str(tmp_path / "abl")]) == 0
    assert main(["evaluate", "--config", str(tmp_path / "nope.json"), "--run", "x"]) == 1
