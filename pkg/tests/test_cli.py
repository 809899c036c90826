import json
from pathlib import Path

import numpy as np
import pytest

from graphlens import cli
from graphlens import models as M
from graphlens.datagen import load_saved_dataset
from tests.test_graphs import assert_valid_dot

FAST_EXPLAIN = '{"max_iters": 8, "mc_samples": 2, "max_nodes": 6, "stop_window": 3}'


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One tiny dataset + 3-epoch checkpoint shared by the command tests."""
    root = tmp_path_factory.mktemp("pipe")
    gen = root / "data"
    train = root / "model"
    assert run("gen", "--dataset", "is-acyclic", "--n", "60", "--seed", "3",
               "--out", gen) == 0
    assert run("train", "--preset", "isacyclic-gcn", "--dataset-dir", gen,
               "--epochs", "3", "--seed", "1", "--out", train) == 0
    return gen, train / "checkpoint.json"


def test_gen_writes_dataset_and_manifest(pipeline):
    gen, _ = pipeline
    assert (gen / "graphs.jsonl").exists()
    manifest = json.loads((gen / "manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert manifest["seeds"] == {"seed": 3}
    ds = load_saved_dataset(gen)
    assert len(ds.graphs) == 60
    assert ds.class_names == ["Cyclic", "Acyclic"]


def test_gen_is_byte_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("gen", "--dataset", "shape", "--n", "25", "--seed", "9",
                   "--out", tmp_path / d) == 0
    assert (tmp_path / "a" / "graphs.jsonl").read_bytes() == \
           (tmp_path / "b" / "graphs.jsonl").read_bytes()


def test_gen_unknown_dataset_fails(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("gen", "--dataset", "nonesuch", "--out", tmp_path)
    assert exc.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_train_outputs_and_roundtrip(pipeline):
    gen, ckpt = pipeline
    out = ckpt.parent
    assert ckpt.exists()
    metrics = (out / "metrics.csv").read_text().strip().split("\n")
    assert metrics[0].startswith("epoch,loss,accuracy")
    assert len(metrics) == 1 + 3
    # reload and re-evaluate: accuracy matches the last metrics row
    model = M.load_checkpoint(ckpt)
    ds = load_saved_dataset(gen)
    acc = M.evaluate(model, ds.test_graphs())["accuracy"]
    last = metrics[-1].split(",")
    assert float(last[2]) == pytest.approx(acc)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert "graphs.jsonl" in manifest["input_hashes"]


def test_explain_outputs(pipeline, tmp_path):
    gen, ckpt = pipeline
    out = tmp_path / "explain"
    assert run("explain", "--checkpoint", ckpt, "--dataset-dir", gen,
               "--class", "Cyclic", "--config", FAST_EXPLAIN,
               "--n", "5", "--seed", "2", "--out", out) == 0
    assert (out / "latent_cyclic.json").exists()
    latent = json.loads((out / "latent_cyclic.json").read_text())
    om = np.array(latent["omega"])
    np.testing.assert_array_equal(om, om.T)
    samples = [json.loads(l) for l in (out / "samples_cyclic.jsonl").read_text().splitlines()]
    assert len(samples) == 5
    assert all("target_prob" in s for s in samples)
    trace = (out / "trace_cyclic.csv").read_text().splitlines()
    assert trace[0] == "iter,objective,loss,mean_prob,expected_edges,seconds"
    for dot in (out / "dot_cyclic").glob("*.dot"):
        assert_valid_dot(dot.read_text())
    report = (out / "quant_report.csv").read_text().splitlines()
    assert len(report) == 2


def test_explain_all_classes_and_determinism(pipeline, tmp_path):
    gen, ckpt = pipeline
    outs = []
    for d in ("x", "y"):
        out = tmp_path / d
        assert run("explain", "--checkpoint", ckpt, "--dataset-dir", gen,
                   "--all-classes", "--config", FAST_EXPLAIN,
                   "--n", "4", "--seed", "5", "--out", out) == 0
        outs.append(out)
    for name in ("latent_cyclic.json", "latent_acyclic.json",
                 "samples_cyclic.jsonl", "samples_acyclic.jsonl"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_explain_mu_zero_ablation_mode(pipeline, tmp_path):
    gen, ckpt = pipeline
    out = tmp_path / "ablate"
    assert run("explain", "--checkpoint", ckpt, "--dataset-dir", gen,
               "--class", "Acyclic", "--config", FAST_EXPLAIN, "--mu", "0",
               "--n", "3", "--seed", "2", "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["interpreter"]["Acyclic"]["embed_weight"] == 0.0


def test_explain_bad_class_fails(pipeline, tmp_path, capsys):
    gen, ckpt = pipeline
    assert run("explain", "--checkpoint", ckpt, "--dataset-dir", gen,
               "--class", "Spiral", "--out", tmp_path / "bad") == 1
    assert "error:" in capsys.readouterr().err


def test_baseline_probs_sum_to_one(pipeline, tmp_path):
    gen, ckpt = pipeline
    out = tmp_path / "base"
    assert run("baseline", "--checkpoint", ckpt, "--dataset-dir", gen,
               "--n", "12", "--seed", "4", "--out", out) == 0
    dump = json.loads((out / "baseline_probs.json").read_text())
    stack = np.stack([dump[c] for c in ("Cyclic", "Acyclic")], axis=1)
    np.testing.assert_allclose(stack.sum(axis=1), 1.0, atol=1e-9)


def test_verify_complete4_table(tmp_path):
    from graphlens.presets import PRESETS

    model = M.init_classifier(PRESETS["motif-gcn"].spec, np.random.default_rng(0))
    ckpt = tmp_path / "motif.json"
    M.save_checkpoint(model, ckpt)
    out = tmp_path / "verify"
    assert run("verify", "--checkpoint", ckpt, "--study", "complete-4",
               "--n-base", "6", "--seed", "1", "--out", out) == 0
    rows = (out / "verification.csv").read_text().splitlines()
    assert len(rows) == 1 + 8
    preds = json.loads((out / "predictions.json").read_text())
    assert len(preds["predictions"]) == 8
    assert all(len(p) == 6 for p in preds["predictions"])


def test_bench_emits_slope(tmp_path):
    out = tmp_path / "bench"
    assert run("bench", "--sizes", "8,12", "--iters", "4",
               "--preset", "isacyclic-gcn", "--seed", "0", "--out", out) == 0
    report = json.loads((out / "bench.json").read_text())
    assert set(report["median_seconds"]) == {"8", "12"}
    assert np.isfinite(report["slope"])


def test_out_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "root"))
    assert run("gen", "--dataset", "shape", "--n", "5", "--seed", "0") == 0
    assert (tmp_path / "root" / "gen" / "graphs.jsonl").exists()


def test_missing_out_fails(monkeypatch, capsys):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)
    assert run("gen", "--dataset", "shape", "--n", "5", "--seed", "0") == 1
    assert "error:" in capsys.readouterr().err
