"""Quantitative metrics, random baselines, verification studies, ablation
and the complexity benchmark.

Every report keeps its per-sample records so that the aggregate numbers can
be recomputed exactly from the dump.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import (
    BaseGraphConfig, attach_motif, gen_base_graph, gilbert_graph,
    plausible_motifs,
)
from .explain import (
    ExplanationResult, InterpreterConfig, LatentParams, sample_explanation,
    train_interpreter,
)
from .graphs import DenseGraph, GraphDataset, one_hot, validate
from .models import Classifier, ModelError, forward, predict_logits, predict_proba
from . import graphs as graphlib


@dataclass
class QuantReport:
    """Mean and spread of the target-class probability over n samples."""

    class_index: int
    class_name: str
    probs: np.ndarray
    seconds: float = 0.0

    @property
    def mean(self) -> float:
        return float(self.probs.mean()) if len(self.probs) else 0.0

    @property
    def std(self) -> float:
        return float(self.probs.std()) if len(self.probs) else 0.0

    def row(self) -> dict:
        return {"class_index": self.class_index, "class": self.class_name,
                "n": len(self.probs), "mean_prob": self.mean,
                "std_prob": self.std, "seconds": self.seconds}


def quantitative_eval(model: Classifier, latent: LatentParams, class_c: int,
                      n_samples: int, rng, class_name: str | None = None) -> QuantReport:
    """Sample explanation graphs and score them with the classifier."""
    t0 = time.perf_counter()
    graphs = sample_explanation(latent, rng, n_samples)
    probs = np.array([predict_proba(model, g)[class_c] for g in graphs])
    return QuantReport(class_c, class_name or str(class_c), probs,
                       time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# random baseline


def random_graph_like_dataset(n_nodes: int, mean_edges: float, k_V: int,
                              k_E: int, rng) -> DenseGraph:
    """One random graph: independent edges at the dataset's mean density,
    uniform random categories where the dataset has them."""
    pairs = n_nodes * (n_nodes - 1) / 2.0
    p = min(1.0, mean_edges / pairs)
    g = gilbert_graph(n_nodes, p, rng)
    nf = one_hot(rng.integers(k_V, size=n_nodes), k_V) if k_V else None
    ef = None
    if k_E:
        ef = np.zeros((n_nodes, n_nodes, k_E))
        for i, j in g.edges():
            c = int(rng.integers(k_E))
            ef[i, j, c] = ef[j, i, c] = 1.0
    return DenseGraph(g.adj, nf, ef)


def random_baseline(model: Classifier, n_graphs: int, n_nodes: int,
                    mean_edges: float, rng, class_names=None) -> list:
    """Per-class mean probability the classifier assigns to random graphs."""
    spec = model.spec
    all_probs = np.zeros((n_graphs, spec.n_classes))
    t0 = time.perf_counter()
    for i in range(n_graphs):
        g = random_graph_like_dataset(n_nodes, mean_edges, spec.k_V, spec.k_E, rng)
        all_probs[i] = predict_proba(model, g)
    seconds = time.perf_counter() - t0
    names = class_names or [str(c) for c in range(spec.n_classes)]
    return [QuantReport(c, names[c], all_probs[:, c], seconds)
            for c in range(spec.n_classes)]


# ---------------------------------------------------------------------------
# verification studies


@dataclass
class VerificationTable:
    class_names: list
    motif_names: list
    counts: np.ndarray         # (n_motifs, n_classes)
    mean_probs: np.ndarray     # (n_motifs, n_classes)
    predictions: np.ndarray    # (n_motifs, n_base) predicted class ids

    def rows(self) -> list:
        out = []
        for m, name in enumerate(self.motif_names):
            row = {"motif": name}
            for c, cls in enumerate(self.class_names):
                row[f"count_{cls}"] = int(self.counts[m, c])
                row[f"prob_{cls}"] = float(self.mean_probs[m, c])
            out.append(row)
        return out


def motif_verification(model: Classifier, class_name: str, n_base: int, rng,
                       base_cfg: BaseGraphConfig | None = None,
                       class_names=None) -> VerificationTable:
    """Attach every plausible motif to the same anchor of a fixed base set
    and tabulate how the classifier responds."""
    motifs = plausible_motifs(class_name)
    cfg = base_cfg or BaseGraphConfig()
    bases = []
    anchors = []
    for _ in range(n_base):
        base = gen_base_graph(cfg, rng)
        colors = rng.integers(5, size=base.n_nodes)
        bases.append(DenseGraph(base.adj, one_hot(colors, 5)))
        anchors.append(int(rng.integers(base.n_nodes)))
    n_classes = model.spec.n_classes
    counts = np.zeros((len(motifs), n_classes), dtype=int)
    mean_probs = np.zeros((len(motifs), n_classes))
    predictions = np.zeros((len(motifs), n_base), dtype=int)
    for m, motif in enumerate(motifs):
        attach_rng = np.random.default_rng(rng.integers(2 ** 63))
        for b, (base, anchor) in enumerate(zip(bases, anchors)):
            g = attach_motif(base, motif, anchor, attach_rng)
            probs = predict_proba(model, g)
            pred = int(probs.argmax())
            predictions[m, b] = pred
            counts[m, pred] += 1
            mean_probs[m] += probs
        mean_probs[m] /= n_base
    names = class_names or [str(c) for c in range(n_classes)]
    return VerificationTable(list(names), [mt.name for mt in motifs],
                             counts, mean_probs, predictions)


# ---------------------------------------------------------------------------
# nitro-group study


@dataclass
class GroupCountTable:
    group_counts: list
    class_names: list
    counts: np.ndarray        # (6, n_classes)
    mean_probs: np.ndarray    # (6, n_classes)
    predictions: np.ndarray   # (6, n_base)

    def rows(self) -> list:
        out = []
        for idx, k in enumerate(self.group_counts):
            row = {"n_groups": k}
            for c, cls in enumerate(self.class_names):
                row[f"count_{cls}"] = int(self.counts[idx, c])
                row[f"prob_{cls}"] = float(self.mean_probs[idx, c])
            out.append(row)
        return out


MUTAG_CARBON, MUTAG_NITROGEN, MUTAG_OXYGEN = 0, 1, 2
MUTAG_EDGES_PER_NODE = 19.79 / 17.93


def _attach_triple(adj_rows, cats, center_cat, leaf_cats, anchor):
    """Grow the edge list with one 3-node group bonded to the anchor."""
    base_n = len(cats)
    center = base_n
    cats.extend([center_cat] + leaf_cats)
    adj_rows.append((anchor, center))
    adj_rows.append((center, base_n + 1))
    adj_rows.append((center, base_n + 2))


def no2_study(model: Classifier, n_base: int, rng,
              nitrogen: int = MUTAG_NITROGEN, oxygen: int = MUTAG_OXYGEN,
              class_names=None) -> GroupCountTable:
    """Vary how many of five attached 3-node groups are nitro groups.

    Base graphs are 5-10 node random graphs of carbon atoms at the molecule
    dataset's edge density; the remaining groups are random non-N/O atom
    paths attached the same way. Requires a model with the 7-category atom
    vocabulary.
    """
    k_V = model.spec.k_V
    if k_V < max(nitrogen, oxygen) + 1:
        raise ModelError(f"model vocabulary k_V={k_V} lacks the N/O categories")
    other_atoms = [c for c in range(k_V) if c not in (nitrogen, oxygen)]
    n_classes = model.spec.n_classes
    group_counts = list(range(6))
    counts = np.zeros((6, n_classes), dtype=int)
    mean_probs = np.zeros((6, n_classes))
    predictions = np.zeros((6, n_base), dtype=int)

    bases = []
    for _ in range(n_base):
        n = int(rng.integers(5, 11))
        p = min(1.0, 2.0 * MUTAG_EDGES_PER_NODE / (n - 1))
        bases.append(gilbert_graph(n, p, rng))

    for idx, k in enumerate(group_counts):
        study_rng = np.random.default_rng(rng.integers(2 ** 63))
        for b, base in enumerate(bases):
            edges = [(int(i), int(j)) for i, j in base.edges()]
            cats = [MUTAG_CARBON] * base.n_nodes
            for grp in range(5):
                anchor = int(study_rng.integers(base.n_nodes))
                if grp < k:
                    _attach_triple(edges, cats, nitrogen, [oxygen, oxygen], anchor)
                else:
                    trio = [other_atoms[i] for i in
                            study_rng.integers(len(other_atoms), size=3)]
                    _attach_triple(edges, cats, trio[1], [trio[0], trio[2]], anchor)
            g = graphlib.graph_from_edges(len(cats), edges, cats, k_V, 0)
            probs = predict_proba(model, g)
            pred = int(probs.argmax())
            predictions[idx, b] = pred
            counts[idx, pred] += 1
            mean_probs[idx] += probs
        mean_probs[idx] /= n_base
    names = class_names or [str(c) for c in range(n_classes)]
    return GroupCountTable(group_counts, list(names), counts, mean_probs, predictions)


# ---------------------------------------------------------------------------
# ablation


@dataclass
class AblationReport:
    with_embedding: dict
    without_embedding: dict

    def rows(self) -> list:
        return [dict(variant="with_second_term", **self.with_embedding),
                dict(variant="without_second_term", **self.without_embedding)]


def _run_summary(model: Classifier, result: ExplanationResult, class_c: int) -> dict:
    logits = []
    sims = []
    psi = result.psi_bar
    for g in result.sampled_graphs:
        lg = predict_logits(model, g)
        logits.append(lg[class_c])
        _, emb = forward(model, graphlib.relax(g))
        e = emb.data
        denom = np.linalg.norm(e) * np.linalg.norm(psi)
        sims.append(float(e @ psi / denom) if denom > 0 else 0.0)
    invalid = sum(bool(validate(g)) for g in result.sampled_graphs)
    return {
        "mean_target_logit": float(np.mean(logits)),
        "mean_cosine_to_class_embedding": float(np.mean(sims)),
        "mean_prob": result.mean_probability,
        "invalid_graphs": invalid,
        "iterations": len(result.trace),
    }


def ablation_second_term(model: Classifier, dataset: GraphDataset, class_c: int,
                         cfg: InterpreterConfig, n_samples: int = 100):
    """Train twice, with the configured embedding weight and with zero."""
    from dataclasses import replace

    with_run = train_interpreter(model, dataset, class_c, cfg, n_samples)
    without_cfg = replace(cfg, embed_weight=0.0)
    without_run = train_interpreter(model, dataset, class_c, without_cfg, n_samples)
    report = AblationReport(_run_summary(model, with_run, class_c),
                            _run_summary(model, without_run, class_c))
    return report, with_run, without_run


# ---------------------------------------------------------------------------
# complexity benchmark


def benchmark_complexity(model_factory, n_list, iters: int,
                         cfg: InterpreterConfig | None = None) -> dict:
    """Median per-iteration wall time of the ascent loop at each latent size,
    plus the log-log slope across sizes."""
    if list(n_list) != sorted(n_list):
        raise ValueError("latent sizes must be ascending")
    base = cfg or InterpreterConfig(budget=10.0)
    medians = {}
    for n in n_list:
        model = model_factory()
        spec = model.spec
        dummy = GraphDataset([], [str(c) for c in range(spec.n_classes)],
                             spec.k_V, spec.k_E)
        from dataclasses import replace

        run_cfg = replace(base, max_nodes=int(n), max_iters=iters + 1, stop_prob=2.0)
        psi = np.zeros(spec.hidden)
        result = train_interpreter(model, dummy, 0, run_cfg, n_samples=1, psi_bar=psi)
        # the first iteration pays one-time allocation costs; drop it
        medians[int(n)] = float(np.median(result.iter_seconds[1:]))
    xs = np.log(np.array(list(medians.keys()), dtype=float))
    ys = np.log(np.array(list(medians.values())))
    slope = float(np.polyfit(xs, ys, 1)[0])
    return {"median_seconds": medians, "slope": slope}
