import json

import numpy as np
import pytest

from frozen_align.cli import main
from frozen_align.store import Modality

from conftest import make_store, synthetic_viterb_data


@pytest.fixture
def toy_setup(tmp_path):
    """Stores, pair manifest, and a train config for CLI runs."""
    rng = np.random.default_rng(0)
    n, d_vis, d_txt = 12, 4, 6
    img_ids = [f"img{i}" for i in range(n)]
    cap_ids = [f"cap{i}" for i in range(n)]
    vis = rng.standard_normal((n, d_vis)).astype(np.float32)
    txt = rng.standard_normal((n, d_txt)).astype(np.float32)
    vis_path = tmp_path / "vis.fstore"
    txt_path = tmp_path / "txt.fstore"
    make_store(vis_path, vis, img_ids, Modality.VISION)
    make_store(txt_path, txt, cap_ids, Modality.TEXT)
    manifest = tmp_path / "pairs.tsv"
    manifest.write_text("".join(f"{i}\t{c}\n" for i, c in zip(img_ids, cap_ids)))
    cfg = {
        "data": {"vision_store": str(vis_path), "text_store": str(txt_path),
                 "manifest": str(manifest)},
        "projection": {"input_dim": d_txt, "hidden_dim": 16, "output_dim": d_vis,
                       "num_layers": 2, "dropout_p": 0.0, "seed": 1},
        "train": {"batch_size": 4, "max_steps": 4, "val_fraction": 0.2,
                  "val_interval": 2, "seed": 0},
    }
    cfg_path = tmp_path / "train.json"
    cfg_path.write_text(json.dumps(cfg))
    return tmp_path, cfg, cfg_path, vis_path, txt_path


def test_inspect_valid_store(toy_setup, capsys):
    _, _, _, vis_path, _ = toy_setup
    assert main(["inspect", str(vis_path)]) == 0
    out = capsys.readouterr().out
    assert "dim:      4" in out and "count:    12" in out and "vision" in out


def test_inspect_head(toy_setup, capsys):
    _, _, _, vis_path, _ = toy_setup
    assert main(["inspect", str(vis_path), "--head", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("norm=") == 3


def test_inspect_corrupt_store(tmp_path, capsys):
    bad = tmp_path / "bad.fstore"
    bad.write_bytes(b"XXXXXXXX" + b"\x00" * 64)
    assert main(["inspect", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_train_toy_end_to_end(toy_setup, capsys):
    tmp_path, _, cfg_path, _, _ = toy_setup
    out_dir = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "train_report.json").read_text())
    assert report["steps_run"] == 4
    assert (out_dir / "checkpoint_best.ckpt").exists()
    assert (out_dir / "train_log.csv").exists()
    assert report["config_digest"]


def test_train_zero_steps(toy_setup, tmp_path):
    _, _, cfg_path, _, _ = toy_setup
    out_dir = tmp_path / "run0"
    assert main(["train", "--config", str(cfg_path), "--out", str(out_dir),
                 "--max-steps", "0"]) == 0
    report = json.loads((out_dir / "train_report.json").read_text())
    assert report["steps_run"] == 0
    assert (out_dir / "checkpoint_last.ckpt").exists()


def test_train_missing_manifest_names_path(toy_setup, tmp_path, capsys):
    tmp_dir, cfg, _, _, _ = toy_setup
    cfg = json.loads(json.dumps(cfg))
    cfg["data"]["manifest"] = str(tmp_dir / "nope.tsv")
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(bad_cfg)]) == 1
    assert "nope.tsv" in capsys.readouterr().err


def _train_checkpoint(toy_setup):
    tmp_path, _, cfg_path, vis_path, txt_path = toy_setup
    out_dir = tmp_path / "ckptrun"
    assert main(["train", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    return out_dir / "checkpoint_best.ckpt"


def test_eval_classification(toy_setup, tmp_path, capsys):
    tmp_dir, _, _, vis_path, _ = toy_setup
    ckpt = _train_checkpoint(toy_setup)
    # class-rep text store under canonical ids + matching rep dir
    rng = np.random.default_rng(5)
    rep_rows = rng.standard_normal((2, 6)).astype(np.float32)
    rep_store = tmp_dir / "reps.fstore"
    make_store(rep_store, rep_rows, ["a::0000", "b::0000"], Modality.TEXT)
    rep_dir = tmp_dir / "descs"
    rep_dir.mkdir()
    (rep_dir / "a.txt").write_text("class a\n")
    (rep_dir / "b.txt").write_text("class b\n")
    labels = tmp_dir / "labels.tsv"
    labels.write_text("img0\ta\nimg1\tb\nimg2\ta\nimg3\tb\n")
    task = {"task": "classification", "dataset": "toy",
            "vision_store": str(vis_path), "text_store": str(rep_store),
            "labels": str(labels), "mode": "top1",
            "reps": {"kind": "description", "dir": str(rep_dir)}}
    task_path = tmp_dir / "cls.json"
    task_path.write_text(json.dumps(task))
    out_dir = tmp_dir / "evalout"
    assert main(["eval", "--config", str(task_path), "--checkpoint", str(ckpt),
                 "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "eval_classification.json").read_text())
    assert "top1" in report["metrics"]
    assert (out_dir / "eval_classification.txt").exists()


def test_eval_winoground_verbose(toy_setup, tmp_path, capsys):
    tmp_dir, _, _, vis_path, txt_path = toy_setup
    ckpt = _train_checkpoint(toy_setup)
    items = tmp_dir / "wino.tsv"
    items.write_text("img0\timg1\tcap0\tcap1\nimg2\timg3\tcap2\tcap3\n")
    task = {"task": "winoground", "dataset": "toy",
            "vision_store": str(vis_path), "text_store": str(txt_path),
            "items": str(items)}
    task_path = tmp_dir / "wino.json"
    task_path.write_text(json.dumps(task))
    out_dir = tmp_dir / "winoout"
    assert main(["eval", "--config", str(task_path), "--checkpoint", str(ckpt),
                 "--out", str(out_dir), "--verbose"]) == 0
    out = capsys.readouterr().out
    assert "item 0" in out and "item 1" in out  # per-item verdicts in verbose mode


def test_eval_retrieval_k_exceeds_corpus(toy_setup, tmp_path):
    tmp_dir, cfg, _, vis_path, txt_path = toy_setup
    ckpt = _train_checkpoint(toy_setup)
    task = {"task": "retrieval", "vision_store": str(vis_path),
            "text_store": str(txt_path),
            "pairs_manifest": cfg["data"]["manifest"], "k": 99}
    task_path = tmp_dir / "retr.json"
    task_path.write_text(json.dumps(task))
    assert main(["eval", "--config", str(task_path), "--checkpoint", str(ckpt)]) == 1


def test_eval_missing_embedding_exit_code(toy_setup, tmp_path, capsys):
    tmp_dir, _, _, vis_path, txt_path = toy_setup
    ckpt = _train_checkpoint(toy_setup)
    items = tmp_dir / "wino_bad.tsv"
    items.write_text("img0\tghost\tcap0\tcap1\n")
    task = {"task": "winoground", "vision_store": str(vis_path),
            "text_store": str(txt_path), "items": str(items)}
    task_path = tmp_dir / "winobad.json"
    task_path.write_text(json.dumps(task))
    assert main(["eval", "--config", str(task_path), "--checkpoint", str(ckpt)]) == 4
    assert "ghost" in capsys.readouterr().err


def _viterb_dataset_cfg(tmp_path, name, seed):
    from frozen_align.viterb import write_split_file

    split, vis, train_labels, eval_labels, reps, txt = synthetic_viterb_data(
        tmp_path, seed=seed, name=name
    )
    ddir = tmp_path / name
    ddir.mkdir()
    split_file = ddir / "split.txt"
    write_split_file(split, split_file)
    train_lab = ddir / "train_labels.tsv"
    train_lab.write_text("".join(f"{i}\t{c}\n" for i, c in train_labels))
    eval_lab = ddir / "eval_labels.tsv"
    eval_lab.write_text("".join(f"{i}\t{c}\n" for i, c in eval_labels))
    rep_dir = ddir / "reps"
    rep_dir.mkdir()
    for c, ids in reps.texts_per_class.items():
        (rep_dir / f"{c}.txt").write_text("".join(f"text {k}\n" for k in range(len(ids))))
    return {
        "name": name,
        "split": {"file": str(split_file)},
        "vision_store": str(tmp_path / f"{name}_vis.fstore"),
        "text_store": str(tmp_path / f"{name}_txt.fstore"),
        "train_labels": str(train_lab),
        "eval_labels": str(eval_lab),
        "reps": {"kind": "description", "dir": str(rep_dir)},
    }


@pytest.fixture
def viterb_cli_config(tmp_path):
    datasets = [_viterb_dataset_cfg(tmp_path, f"toy{k}", seed=k) for k in range(2)]
    cfg = {
        "datasets": datasets,
        "projection": {"input_dim": 4, "hidden_dim": 32, "output_dim": 4,
                       "num_layers": 2, "dropout_p": 0.2, "seed": 3},
        "train": {"batch_size": 16, "max_steps": 120, "val_fraction": 0.1,
                  "val_interval": 40, "early_stop_patience": 10, "seed": 7},
    }
    path = tmp_path / "viterb.json"
    path.write_text(json.dumps(cfg))
    return tmp_path, cfg, path


def test_viterb_cli_two_datasets(viterb_cli_config, capsys):
    tmp_path, _, cfg_path = viterb_cli_config
    out_dir = tmp_path / "vout"
    assert main(["viterb", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    out = capsys.readouterr().out
    assert "mean" in out
    result = json.loads((out_dir / "viterb_result.json").read_text())
    assert "overall_mean" in result and len(result["entries"]) == 2


def test_viterb_cli_single_dataset_flag(viterb_cli_config, capsys):
    tmp_path, _, cfg_path = viterb_cli_config
    out_dir = tmp_path / "vout1"
    assert main(["viterb", "--config", str(cfg_path), "--out", str(out_dir),
                 "--dataset", "toy0"]) == 0
    result = json.loads((out_dir / "viterb_result.json").read_text())
    assert len(result["entries"]) == 1
    assert "overall_mean" not in result


def test_viterb_cli_overlap_split_exit_5(viterb_cli_config, tmp_path):
    _, cfg, _ = viterb_cli_config
    cfg = json.loads(json.dumps(cfg))
    split_file = tmp_path / "overlap.txt"
    split_file.write_text("seen\ncls00\ncls01\nunseen\ncls01\n")
    cfg["datasets"][0]["split"] = {"file": str(split_file)}
    bad = tmp_path / "viterb_bad.json"
    bad.write_text(json.dumps(cfg))
    assert main(["viterb", "--config", str(bad)]) == 5
