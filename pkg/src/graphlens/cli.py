"""Command line pipeline: generate, train, explain, verify, baseline, bench.

Every command writes its artifacts plus exactly one ``manifest.json`` into
the output directory. Diagnostics go to stderr; data only to files. With
identical manifests (same inputs, seeds and configuration) the primary
outputs are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import evaluate as ev
from . import models as mo
from . import presets as pr
from .datagen import save_dataset, load_saved_dataset
from .explain import InterpreterConfig, train_interpreter
from .graphs import graph_to_dict, to_dot

ENV_OUT = "GRAPHLENS_OUT"


class CliError(RuntimeError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _out_dir(args, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    elif os.environ.get(ENV_OUT):
        out = Path(os.environ[ENV_OUT]) / command
    else:
        raise CliError(f"--out not given and ${ENV_OUT} not set")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, config: dict, seeds: dict,
                    inputs: dict, outputs: list, started: float):
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "input_hashes": inputs,
        "outputs": sorted(outputs),
        "tool_version": __version__,
        "wall_clock_seconds": time.time() - started,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _write_csv(path: Path, rows: list):
    if not rows:
        path.write_text("")
        return
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in cols))
    path.write_text("\n".join(lines) + "\n")


def _load_dataset_dir(path: str):
    root = Path(path)
    ds = load_saved_dataset(root)
    manifest = json.loads((root / "dataset.json").read_text())
    return ds, manifest


def _hash_dataset_dir(path: str) -> dict:
    root = Path(path)
    return {name: _sha256(root / name) for name in ("graphs.jsonl", "dataset.json")}


def _resolve_class(value: str, class_names: list) -> int:
    if value in class_names:
        return class_names.index(value)
    try:
        idx = int(value)
    except ValueError:
        raise CliError(f"unknown class {value!r}; classes: {class_names}") from None
    if not 0 <= idx < len(class_names):
        raise CliError(f"class index {idx} out of range; classes: {class_names}")
    return idx


def _log(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    started = time.time()
    out = _out_dir(args, "gen")
    n = args.n or pr.DEFAULT_N_GRAPHS.get(args.dataset, 1000)
    ds = pr.generate_dataset(args.dataset, n, args.seed)
    save_dataset(ds, out, extra_manifest={
        "dataset": args.dataset, "seed": args.seed, "n_graphs": n})
    _log(f"gen: wrote {n} {args.dataset} graphs to {out}")
    _write_manifest(out, "gen", {"dataset": args.dataset, "n": n}, {"seed": args.seed},
                    {}, ["graphs.jsonl", "dataset.json"], started)
    return 0


def cmd_train(args) -> int:
    started = time.time()
    out = _out_dir(args, "train")
    if args.preset not in pr.PRESETS:
        raise CliError(f"unknown preset {args.preset!r}; known: {sorted(pr.PRESETS)}")
    preset = pr.PRESETS[args.preset]
    if preset.dataset == "mutag":
        if not args.dataset_dir:
            raise CliError("mutag-gcn needs --dataset-dir pointing at the TUDataset files")
        ds = pr.load_mutag(args.dataset_dir)
        input_hashes = {"dataset_dir": str(args.dataset_dir)}
    else:
        if not args.dataset_dir:
            raise CliError("--dataset-dir required (run `gen` first)")
        ds, _ = _load_dataset_dir(args.dataset_dir)
        input_hashes = _hash_dataset_dir(args.dataset_dir)
    cfg = preset.train
    if args.epochs:
        from dataclasses import replace
        cfg = replace(cfg, epochs=args.epochs)
    from dataclasses import replace
    cfg = replace(cfg, seed=args.seed)
    model, metrics = mo.train(preset.spec, ds, cfg)
    mo.save_checkpoint(model, out / "checkpoint.json")
    mo.metrics_to_csv(metrics, out / "metrics.csv")
    _log(f"train: {args.preset} final test accuracy "
         f"{metrics[-1]['accuracy']:.4f} -> {out}")
    _write_manifest(out, "train",
                    {"preset": args.preset, "train": asdict(cfg)},
                    {"seed": args.seed}, input_hashes,
                    ["checkpoint.json", "metrics.csv"], started)
    return 0


def _interpreter_config(args, preset, class_name, ds) -> InterpreterConfig:
    overrides = {}
    if args.config:
        text = Path(args.config).read_text() if Path(args.config).exists() else args.config
        overrides.update(json.loads(text))
    if args.mu is not None:
        overrides["embed_weight"] = args.mu
    cfg = pr.interpreter_config(preset, class_name, ds, seed=args.seed, **overrides)
    return cfg


def _explain_one(model, ds, class_idx, cfg, out: Path, n_samples, ds_colors):
    result = train_interpreter(model, ds, class_idx, cfg, n_samples=n_samples)
    class_name = ds.class_names[class_idx]
    tag = class_name.lower().replace(" ", "-")
    latent_path = out / f"latent_{tag}.json"
    latent_path.write_text(json.dumps({
        "class": class_name,
        "n_nodes": result.latent.n_nodes,
        "omega": result.latent.omega_matrix().tolist(),
        "eta": None if result.latent.eta_tri is None else result.latent.eta_matrix().tolist(),
        "xi": None if result.latent.xi is None else result.latent.xi.data.tolist(),
    }, sort_keys=True) + "\n")
    samples_path = out / f"samples_{tag}.jsonl"
    with open(samples_path, "w") as fh:
        for g, p in zip(result.sampled_graphs, result.sample_probs):
            row = graph_to_dict(g)
            row["target_prob"] = float(p)
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    dot_dir = out / f"dot_{tag}"
    dot_dir.mkdir(exist_ok=True)
    for k, g in enumerate(result.sampled_graphs[:10]):
        (dot_dir / f"sample{k}.dot").write_text(
            to_dot(g, name=f"sample{k}", node_colors=ds_colors[0], edge_colors=ds_colors[1]))
    trace_path = out / f"trace_{tag}.csv"
    _write_csv(trace_path, [{k: row[k] for k in
                             ("iter", "objective", "loss", "mean_prob",
                              "expected_edges", "seconds")} for row in result.trace])
    return result, [latent_path.name, samples_path.name, trace_path.name]


def cmd_explain(args) -> int:
    started = time.time()
    out = _out_dir(args, "explain")
    model = mo.load_checkpoint(args.checkpoint)
    ds, manifest = _load_dataset_dir(args.dataset_dir)
    dataset_name = manifest.get("dataset")
    preset_name = args.preset or pr.PRESET_FOR_DATASET.get(dataset_name)
    if not preset_name:
        raise CliError("cannot infer preset from dataset; pass --preset")
    preset = pr.PRESETS[preset_name]
    if args.all_classes:
        class_indices = list(range(ds.n_classes))
    else:
        if not args.klass:
            raise CliError("--class required unless --all-classes")
        class_indices = [_resolve_class(args.klass, ds.class_names)]
    n_samples = 1000 if args.full_scale else args.n
    ds_colors = (ds.node_color_names, ds.edge_color_names)
    outputs, rows, configs = [], [], {}
    for offset, idx in enumerate(class_indices):
        name = ds.class_names[idx]
        cfg = _interpreter_config(args, preset, name, ds)
        if len(class_indices) > 1:
            from dataclasses import replace
            cfg = replace(cfg, seed=args.seed + 1000 * offset)
        result, files = _explain_one(model, ds, idx, cfg, out, n_samples, ds_colors)
        outputs.extend(files)
        configs[name] = asdict(cfg)
        rows.append({"class_index": idx, "class": name, "n": n_samples,
                     "mean_prob": float(result.sample_probs.mean()),
                     "std_prob": float(result.sample_probs.std()),
                     "iterations": len(result.trace),
                     "converged_at": result.converged_at,
                     "seconds": float(result.iter_seconds.sum())})
        _log(f"explain: {name}: mean prob {rows[-1]['mean_prob']:.3f} "
             f"in {rows[-1]['iterations']} iterations")
    _write_csv(out / "quant_report.csv", rows)
    outputs.append("quant_report.csv")
    _write_manifest(out, "explain",
                    {"preset": preset_name, "interpreter": configs,
                     "n_samples": n_samples},
                    {"seed": args.seed},
                    {"checkpoint": _sha256(Path(args.checkpoint)),
                     **_hash_dataset_dir(args.dataset_dir)},
                    outputs, started)
    return 0


def cmd_baseline(args) -> int:
    started = time.time()
    out = _out_dir(args, "baseline")
    model = mo.load_checkpoint(args.checkpoint)
    ds, _ = _load_dataset_dir(args.dataset_dir)
    n_nodes = int(round(np.mean([g.n_nodes for g in ds.graphs])))
    mean_edges = float(np.mean([g.n_edges for g in ds.graphs]))
    rng = np.random.default_rng(args.seed)
    n = 1000 if args.full_scale else args.n
    reports = ev.random_baseline(model, n, n_nodes, mean_edges, rng, ds.class_names)
    _write_csv(out / "baseline.csv", [r.row() for r in reports])
    dump = {r.class_name: r.probs.tolist() for r in reports}
    (out / "baseline_probs.json").write_text(json.dumps(dump, sort_keys=True) + "\n")
    for r in reports:
        _log(f"baseline: {r.class_name}: {r.mean:.4f} +/- {r.std:.4f}")
    _write_manifest(out, "baseline",
                    {"n": n, "n_nodes": n_nodes, "mean_edges": mean_edges},
                    {"seed": args.seed},
                    {"checkpoint": _sha256(Path(args.checkpoint)),
                     **_hash_dataset_dir(args.dataset_dir)},
                    ["baseline.csv", "baseline_probs.json"], started)
    return 0


def cmd_verify(args) -> int:
    started = time.time()
    out = _out_dir(args, "verify")
    model = mo.load_checkpoint(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    n_base = 5000 if args.full_scale else args.n_base
    class_names = None
    if args.dataset_dir:
        ds, _ = _load_dataset_dir(args.dataset_dir)
        class_names = ds.class_names
    if args.study in ("complete-4", "house-x"):
        target = "Complete-4" if args.study == "complete-4" else "House-X"
        table = ev.motif_verification(model, target, n_base, rng, class_names=class_names)
        _write_csv(out / "verification.csv", table.rows())
        (out / "predictions.json").write_text(json.dumps(
            {"motifs": table.motif_names,
             "predictions": table.predictions.tolist()}, sort_keys=True) + "\n")
        for row in table.rows():
            _log(f"verify: {row}")
        files = ["verification.csv", "predictions.json"]
    elif args.study == "no2":
        table = ev.no2_study(model, n_base, rng, class_names=class_names)
        _write_csv(out / "no2.csv", table.rows())
        (out / "predictions.json").write_text(json.dumps(
            {"group_counts": table.group_counts,
             "predictions": table.predictions.tolist()}, sort_keys=True) + "\n")
        for row in table.rows():
            _log(f"verify: {row}")
        files = ["no2.csv", "predictions.json"]
    else:
        raise CliError(f"unknown study {args.study!r}")
    _write_manifest(out, "verify", {"study": args.study, "n_base": n_base},
                    {"seed": args.seed},
                    {"checkpoint": _sha256(Path(args.checkpoint))}, files, started)
    return 0


def cmd_bench(args) -> int:
    started = time.time()
    out = _out_dir(args, "bench")
    sizes = [int(s) for s in args.sizes.split(",")]
    if args.checkpoint:
        def factory():
            return mo.load_checkpoint(args.checkpoint)
        inputs = {"checkpoint": _sha256(Path(args.checkpoint))}
    else:
        preset = pr.PRESETS[args.preset or "colorconsistency-gat"]

        def factory():
            return mo.init_classifier(preset.spec, np.random.default_rng(0))
        inputs = {}
    cfg = InterpreterConfig(budget=10.0, w_connect=1.0, seed=args.seed)
    report = ev.benchmark_complexity(factory, sizes, args.iters, cfg)
    (out / "bench.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    _log(f"bench: slope {report['slope']:.3f} over sizes {sizes}")
    _write_manifest(out, "bench", {"sizes": sizes, "iters": args.iters},
                    {"seed": args.seed}, inputs, ["bench.json"], started)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="graphlens",
        description="Generate datasets, train graph classifiers and learn "
                    "model-level explanations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--dataset", required=True, choices=sorted(pr.DATASET_GENERATORS))
    g.add_argument("--n", type=int, default=0, help="graph count (preset default if 0)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train a classifier preset on a dataset")
    t.add_argument("--preset", required=True)
    t.add_argument("--dataset-dir", default=None)
    t.add_argument("--epochs", type=int, default=0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("explain", help="learn explanation distributions")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset-dir", required=True)
    e.add_argument("--class", dest="klass", default=None)
    e.add_argument("--all-classes", action="store_true")
    e.add_argument("--preset", default=None)
    e.add_argument("--config", default=None, help="JSON file or inline JSON overrides")
    e.add_argument("--mu", type=float, default=None)
    e.add_argument("--n", type=int, default=100, help="explanation samples")
    e.add_argument("--full-scale", action="store_true")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(fn=cmd_explain)

    b = sub.add_parser("baseline", help="score random graphs with a classifier")
    b.add_argument("--checkpoint", required=True)
    b.add_argument("--dataset-dir", required=True)
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--full-scale", action="store_true")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(fn=cmd_baseline)

    v = sub.add_parser("verify", help="plausible-motif and nitro-group studies")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--study", required=True, choices=["complete-4", "house-x", "no2"])
    v.add_argument("--dataset-dir", default=None, help="for class names")
    v.add_argument("--n-base", type=int, default=500)
    v.add_argument("--full-scale", action="store_true")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=None)
    v.set_defaults(fn=cmd_verify)

    c = sub.add_parser("bench", help="per-iteration time versus latent size")
    c.add_argument("--sizes", default="16,32,64")
    c.add_argument("--iters", type=int, default=20)
    c.add_argument("--checkpoint", default=None)
    c.add_argument("--preset", default=None)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)
    c.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, FileNotFoundError, KeyError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
