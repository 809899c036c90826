"""Per-dataset bundles: generator, architecture, training recipe and the
per-class explanation settings.

Each preset reproduces one pipeline row: generate (or load) the dataset,
train the matching classifier, then explain each class with its tuned
regularization weights. Budgets default to the dataset's average edge
count and the latent size to its average node count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import (
    BaseGraphConfig, gen_color_consistency, gen_cyclicity, gen_is_acyclic,
    gen_motif, gen_shape, load_tudataset,
)
from .explain import InterpreterConfig
from .graphs import GraphDataset
from .models import ClassifierSpec, TrainConfig


@dataclass
class Preset:
    name: str
    dataset: str
    spec: ClassifierSpec
    train: TrainConfig
    mu: float = 1.0
    budget: float = 30.0
    n_latent: int | None = None   # explanation distribution size
    # class name -> (w_l1, w_l2, w_budget, w_connect)
    reg_weights: dict = field(default_factory=dict)
    latent_sizes: dict = field(default_factory=dict)   # per-class overrides
    restarts: int = 5


def _gen_cyclicity(n, seed):
    return gen_cyclicity(n, BaseGraphConfig(), np.random.default_rng(seed))


def _gen_motif(n, seed):
    return gen_motif(n, BaseGraphConfig(), np.random.default_rng(seed))


def _gen_shape(n, seed):
    return gen_shape(n, np.random.default_rng(seed))


def _gen_color_consistency(n, seed):
    return gen_color_consistency(n, BaseGraphConfig(), np.random.default_rng(seed))


def _gen_is_acyclic(n, seed):
    return gen_is_acyclic(n, np.random.default_rng(seed))


DATASET_GENERATORS = {
    "cyclicity": _gen_cyclicity,
    "motif": _gen_motif,
    "shape": _gen_shape,
    "color-consistency": _gen_color_consistency,
    "is-acyclic": _gen_is_acyclic,
}

DEFAULT_N_GRAPHS = {
    "cyclicity": 1500,
    "motif": 1500,
    "shape": 1500,
    "color-consistency": 1500,
    "is-acyclic": 1500,
    "mutag": 0,  # loaded from files, not generated
}


PRESETS = {
    "mutag-gcn": Preset(
        name="mutag-gcn",
        dataset="mutag",
        spec=ClassifierSpec("gcn", 3, 64, "mean", 2, k_V=7),
        train=TrainConfig(lr=0.01, weight_decay=0.01, epochs=100),
        mu=10.0,
        budget=20.0,
        n_latent=10,
        reg_weights={"Mutagen": (10, 5, 20, 1), "Nonmutagen": (5, 2, 10, 2)},
    ),
    "cyclicity-nnconv": Preset(
        name="cyclicity-nnconv",
        dataset="cyclicity",
        spec=ClassifierSpec("nnconv", 5, 32, "mean", 3, k_E=2),
        train=TrainConfig(lr=0.01, weight_decay=0.01, lr_decay=0.01, epochs=100),
        budget=53.0,
        n_latent=15,
        reg_weights={
            "Red-Cyclic": (10, 5, 10000, 100),
            "Green-Cyclic": (10, 5, 2000, 50),
            "Acyclic": (10, 2, 5000, 50),
        },
    ),
    "motif-gcn": Preset(
        name="motif-gcn",
        dataset="motif",
        spec=ClassifierSpec("gcn", 3, 64, "mean", 5, k_V=5),
        train=TrainConfig(lr=0.01, weight_decay=0.01, epochs=100),
        budget=22.0,
        n_latent=10,
        latent_sizes={"Complete-5": 7},
        reg_weights={
            "House": (1, 1, 5000, 0),
            "House-X": (5, 2, 2000, 0),
            "Complete-4": (10, 5, 10000, 1),
            "Complete-5": (10, 5, 10000, 5),
            "Others": (1, 1, 5000, 0),
        },
    ),
    "shape-gcn": Preset(
        name="shape-gcn",
        dataset="shape",
        spec=ClassifierSpec("gcn", 4, 64, "mean", 5),
        train=TrainConfig(lr=0.01, weight_decay=0.01, epochs=100),
        budget=60.0,
        n_latent=16,
        reg_weights={
            "Lollipop": (5, 5, 1, 5),
            "Wheel": (10, 5, 10, 0),
            "Grid": (1, 1, 2, 0),
            "Star": (10, 2, 200, 0),
            "Others": (1, 1, 10, 0),
        },
    ),
    "isacyclic-gcn": Preset(
        name="isacyclic-gcn",
        dataset="is-acyclic",
        spec=ClassifierSpec("gcn", 4, 64, "max", 2),
        train=TrainConfig(lr=0.01, weight_decay=0.01, lr_decay=0.02, epochs=120),
        budget=30.0,
        n_latent=12,
        reg_weights={"Cyclic": (0, 0, 500, 0), "Acyclic": (1, 5, 500, 5)},
    ),
    "colorconsistency-gat": Preset(
        name="colorconsistency-gat",
        dataset="color-consistency",
        spec=ClassifierSpec("gat", 3, 16, "sum", 2, k_V=3, k_E=6),
        train=TrainConfig(lr=0.001, weight_decay=0.01, lr_decay=0.01, epochs=100),
        budget=50.0,
        n_latent=15,
        reg_weights={"Consistent": (1, 1, 50, 1), "Inconsistent": (0, 0, 50, 1)},
    ),
}

PRESET_FOR_DATASET = {p.dataset: p.name for p in PRESETS.values()}


def interpreter_config(preset: Preset, class_name: str, dataset: GraphDataset,
                       seed: int = 0, **overrides) -> InterpreterConfig:
    """Assemble the explanation settings for one class of a preset."""
    if class_name not in preset.reg_weights:
        raise KeyError(f"preset {preset.name} has no weights for class {class_name!r}")
    w_l1, w_l2, w_b, w_c = preset.reg_weights[class_name]
    cfg = InterpreterConfig(
        max_nodes=preset.latent_sizes.get(class_name, preset.n_latent),
        embed_weight=preset.mu,
        w_l1=float(w_l1), w_l2=float(w_l2),
        w_budget=float(w_b), w_connect=float(w_c),
        budget=preset.budget,
        restarts=preset.restarts,
        seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


def generate_dataset(name: str, n_graphs: int, seed: int) -> GraphDataset:
    if name not in DATASET_GENERATORS:
        raise KeyError(f"unknown dataset {name!r}; known: {sorted(DATASET_GENERATORS)}")
    return DATASET_GENERATORS[name](n_graphs, seed)


def load_mutag(dir_path) -> GraphDataset:
    ds = load_tudataset(dir_path, "MUTAG")
    rng = np.random.default_rng(0)
    order = rng.permutation(len(ds.graphs))
    cut = int(round(0.8 * len(ds.graphs)))
    ds.train_idx = np.sort(order[:cut])
    ds.test_idx = np.sort(order[cut:])
    return ds
