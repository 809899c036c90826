"""Message-passing graph classifiers over dense (possibly soft) adjacency.

Three convolution types share one forward path: degree-normalized
convolution (gcn), edge-network convolution (nnconv) and additive attention
(gat). Every message between a node pair is weighted by the soft adjacency
entry, so the same code classifies discrete graphs (via ``relax``) and the
explainer's relaxed samples. Inputs may carry one batch axis in front.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import tensor as T
from .graphs import DenseGraph, GraphDataset, RelaxedGraph, relax
from .optim import AdamW

CONV_KINDS = ("gcn", "nnconv", "gat")
POOL_KINDS = ("mean", "sum", "max")
GAT_ATT_SLOPE = 0.2
ADJ_MASK_EPS = 1e-10

CHECKPOINT_VERSION = 1


class ModelError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass
class ClassifierSpec:
    conv: str
    n_layers: int
    hidden: int
    pool: str
    n_classes: int
    k_V: int = 0
    k_E: int = 0
    act_slope: float = 0.01
    head_layers: int = 2

    def __post_init__(self):
        if self.conv not in CONV_KINDS:
            raise ModelError(f"unknown conv kind {self.conv!r}")
        if self.pool not in POOL_KINDS:
            raise ModelError(f"unknown pool kind {self.pool!r}")
        if self.n_layers < 1 or self.hidden < 1 or self.n_classes < 1:
            raise ModelError("layer count, width and classes must be positive")
        if self.conv == "nnconv" and self.k_E < 1:
            raise ModelError("nnconv needs edge categories")

    @property
    def in_width(self) -> int:
        # featureless graphs run on the (soft) node degree as scalar input
        return self.k_V if self.k_V else 1


@dataclass
class Classifier:
    spec: ClassifierSpec
    params: dict
    meta: dict

    def param_list(self):
        return list(self.params.items())


def _kaiming(rng, fan_in: int, shape) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


from contextlib import contextmanager


@contextmanager
def frozen(model: "Classifier"):
    """Temporarily stop the model's weights from collecting gradients.

    Gradients still flow through the weights to the graph inputs, which is
    what explanation training needs.
    """
    saved = [(p, p.requires_grad) for p in model.params.values()]
    for p, _ in saved:
        p.requires_grad = False
    try:
        yield model
    finally:
        for p, was in saved:
            p.requires_grad = was


def init_classifier(spec: ClassifierSpec, rng) -> Classifier:
    params = {}

    def add(name, arr):
        params[name] = T.param(arr)

    fin = spec.in_width
    for i in range(spec.n_layers):
        fout = spec.hidden
        if spec.conv == "gcn":
            add(f"W{i}", _kaiming(rng, fin, (fin, fout)))
        elif spec.conv == "nnconv":
            add(f"We{i}", _kaiming(rng, spec.k_E, (spec.k_E, fin * fout)))
            add(f"be{i}", np.zeros(fin * fout))
            add(f"Wr{i}", _kaiming(rng, fin, (fin, fout)))
        else:
            add(f"W{i}", _kaiming(rng, fin, (fin, fout)))
            add(f"asrc{i}", _kaiming(rng, fout, (fout, 1)))
            add(f"adst{i}", _kaiming(rng, fout, (fout, 1)))
            if spec.k_E:
                add(f"aedge{i}", _kaiming(rng, spec.k_E, (spec.k_E, 1)))
        add(f"b{i}", np.zeros(fout))
        fin = fout
    add("Wh0", _kaiming(rng, fin, (fin, fin)))
    add("bh0", np.zeros(fin))
    add("Wh1", _kaiming(rng, fin, (fin, spec.n_classes)))
    add("bh1", np.zeros(spec.n_classes))
    return Classifier(spec, params, {"seed": None, "epochs": 0, "test_accuracy": None})


# ---------------------------------------------------------------------------
# layers


def _with_bias(x, b):
    return T.add(x, T.broadcast_to(b, x.shape))


def _normalized_adjacency(adj_soft):
    """Fused D^(-1/2) (A + I) D^(-1/2) with a closed-form backward rule.

    Degrees are the row sums of (A + I), which stay differentiable for soft
    adjacency and are at least 1, so the inverse square root is safe.
    """
    adj_soft = T.as_tensor(adj_soft)
    a = adj_soft.data
    ahat = a + np.eye(a.shape[-1])
    s = 1.0 / np.sqrt(ahat.sum(axis=-1))
    out = ahat * (s[..., :, None] * s[..., None, :])

    def backward(g):
        direct = g * (s[..., :, None] * s[..., None, :])
        # degree path: d(s_i)/d(a_pq) = -1/2 s_p^3 for i = p, independent of
        # q, so both correction sums attach to the row index
        ga = g * ahat
        row = (ga * s[..., None, :]).sum(axis=-1)
        col = (ga * s[..., :, None]).sum(axis=-2)
        u = -0.5 * (s ** 3) * (row + col)
        return (direct + u[..., :, None],)

    return T.custom_op(out, (adj_soft,), backward)


def gcn_layer(H, adj_soft, W, b, slope: float = 0.01):
    """Symmetrically normalized convolution with added self loops."""
    out = T.affine(T.matmul(_normalized_adjacency(adj_soft), H), W, b)
    return T.leaky_relu(out, slope)


def nnconv_layer(H, adj_soft, edge_soft, W_e, b_e, W_root, b, slope: float = 0.01):
    """Edge-conditioned messages averaged over all node pairs.

    The single-layer edge network maps an edge's category vector to an
    (in x out) matrix; linearity lets the all-pairs sum split into one
    dense product per edge category.
    """
    n = adj_soft.shape[-1]
    fin = H.shape[-1]
    fout = W_root.shape[-1]
    k_e = W_e.shape[0]
    total = None
    for c in range(k_e):
        block = T.reshape(T.narrow(W_e, 0, c, 1), (fin, fout))
        zc = T.reshape(T.narrow(edge_soft, -1, c, 1), adj_soft.shape)
        weighted = T.mul(adj_soft, zc)
        term = T.matmul(weighted, T.matmul(H, block))
        total = term if total is None else T.add(total, term)
    bias_block = T.reshape(b_e, (fin, fout))
    total = T.add(total, T.matmul(adj_soft, T.matmul(H, bias_block)))
    msg = T.div(total, float(n))
    out = T.add(msg, T.affine(H, W_root, b))
    return T.leaky_relu(out, slope)


def gat_layer(H, adj_soft, edge_soft, W, a_src, a_dst, a_edge, b,
              slope: float = 0.01):
    """Additive attention, softly masked by the adjacency.

    Scores get a log(adj + eps) offset instead of a hard mask so the layer
    stays differentiable in the soft adjacency; messages are additionally
    scaled by the adjacency itself.
    """
    wh = T.matmul(H, W)
    src = T.matmul(wh, a_src)                       # (...,N,1)
    dst = T.transpose(T.matmul(wh, a_dst))          # (...,1,N)
    scores = T.add(T.broadcast_to(src, adj_soft.shape),
                   T.broadcast_to(dst, adj_soft.shape))
    if a_edge is not None:
        k_e = a_edge.shape[0]
        flat = T.matmul(T.reshape(edge_soft, (-1, k_e)), a_edge)
        scores = T.add(scores, T.reshape(flat, adj_soft.shape))
    scores = T.leaky_relu(scores, GAT_ATT_SLOPE)
    gate = T.log(T.add(adj_soft, ADJ_MASK_EPS))
    alpha = T.softmax(T.add(scores, gate), axis=-1)
    out = T.matmul(T.mul(alpha, adj_soft), wh)
    return T.leaky_relu(_with_bias(out, b), slope)


def _dense(x, W, b, slope: float | None = None):
    squeeze = x.ndim == 1
    if squeeze:
        x = T.reshape(x, (1, x.shape[0]))
    out = T.affine(x, W, b)
    if slope is not None:
        out = T.leaky_relu(out, slope)
    if squeeze:
        out = T.reshape(out, (out.shape[-1],))
    return out


# ---------------------------------------------------------------------------
# forward pass


def forward(model: Classifier, rg: RelaxedGraph):
    """Logits and graph embedding for one (possibly batched) relaxed graph.

    The embedding is the global pooling output, taken before the dense head.
    """
    spec = model.spec
    p = model.params
    A = T.as_tensor(rg.adj_soft)
    if spec.k_V:
        if rg.node_soft is None:
            raise ModelError("model expects node features")
        H = T.as_tensor(rg.node_soft)
        if H.shape[-1] != spec.k_V:
            raise ModelError(f"node feature width {H.shape[-1]} != k_V {spec.k_V}")
    else:
        # degree input: informative for featureless graphs and differentiable
        # in the soft adjacency
        deg = T.reduce_sum(A, axis=-1)
        H = T.reshape(deg, deg.shape + (1,))
    Z = None
    if spec.k_E:
        if rg.edge_soft is None:
            raise ModelError("model expects edge features")
        Z = T.as_tensor(rg.edge_soft)
        if Z.shape[-1] != spec.k_E:
            raise ModelError(f"edge feature width {Z.shape[-1]} != k_E {spec.k_E}")
    if A.shape[-1] != A.shape[-2] or A.shape[-1] != H.shape[-2]:
        raise ModelError(f"adjacency {A.shape} does not match features {H.shape}")

    for i in range(spec.n_layers):
        if spec.conv == "gcn":
            H = gcn_layer(H, A, p[f"W{i}"], p[f"b{i}"], spec.act_slope)
        elif spec.conv == "nnconv":
            H = nnconv_layer(H, A, Z, p[f"We{i}"], p[f"be{i}"],
                             p[f"Wr{i}"], p[f"b{i}"], spec.act_slope)
        else:
            a_edge = p.get(f"aedge{i}") if spec.k_E else None
            H = gat_layer(H, A, Z, p[f"W{i}"], p[f"asrc{i}"], p[f"adst{i}"],
                          a_edge, p[f"b{i}"], spec.act_slope)

    emb = T.reduce(model.spec.pool, H, axis=-2)
    hid = _dense(emb, p["Wh0"], p["bh0"], spec.act_slope)
    logits = _dense(hid, p["Wh1"], p["bh1"])
    return logits, emb


def predict_logits(model: Classifier, g: DenseGraph) -> np.ndarray:
    logits, _ = forward(model, relax(g))
    return logits.data


def predict_proba(model: Classifier, g: DenseGraph) -> np.ndarray:
    return T.softmax(T.as_tensor(predict_logits(model, g))).data


def predict(model: Classifier, g: DenseGraph) -> int:
    return int(predict_logits(model, g).argmax())


def embed(model: Classifier, g: DenseGraph) -> np.ndarray:
    _, emb = forward(model, relax(g))
    return emb.data


def mean_class_embedding(model: Classifier, dataset: GraphDataset, class_c: int) -> np.ndarray:
    """Average embedding of the training graphs with the given label."""
    members = [g for g in dataset.train_graphs() if g.label == class_c]
    if not members:
        raise ModelError(f"no training graphs with label {class_c}")
    return np.mean([embed(model, g) for g in members], axis=0)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 0.01
    lr_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    split_fraction: float = 0.8
    optimizer: str = "adamw"

    def __post_init__(self):
        if self.lr <= 0:
            raise ModelError("learning rate must be positive")


def cross_entropy(logits, label: int):
    """Stable -log softmax(logits)[label] built from primitive ops."""
    m = T.reduce_max(logits)
    lse = T.add(T.log(T.reduce_sum(T.exp(T.sub(logits, m)))), m)
    picked = T.reshape(T.narrow(logits, 0, label, 1), ())
    return T.sub(lse, picked)


def evaluate(model: Classifier, graphs) -> dict:
    """Accuracy and one-vs-rest F1 per class over a list of graphs."""
    n_classes = model.spec.n_classes
    hits = 0
    conf = np.zeros((n_classes, n_classes), dtype=int)
    for g in graphs:
        pred = predict(model, g)
        conf[g.label, pred] += 1
        hits += pred == g.label
    f1 = []
    for c in range(n_classes):
        tp = conf[c, c]
        fp = conf[:, c].sum() - tp
        fn = conf[c, :].sum() - tp
        f1.append(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    return {"accuracy": hits / max(len(graphs), 1), "f1": f1, "confusion": conf}


def train(spec: ClassifierSpec, dataset: GraphDataset, cfg: TrainConfig):
    """Cross-entropy training; returns the model and per-epoch metrics."""
    if dataset.k_V != spec.k_V or dataset.k_E != spec.k_E:
        raise ModelError(
            f"dataset dims (k_V={dataset.k_V}, k_E={dataset.k_E}) do not match "
            f"spec (k_V={spec.k_V}, k_E={spec.k_E})")
    rng = np.random.default_rng(cfg.seed)
    model = init_classifier(spec, rng)
    if dataset.train_idx is not None:
        train_graphs = dataset.train_graphs()
        test_graphs = dataset.test_graphs()
    else:
        cut = int(round(cfg.split_fraction * len(dataset.graphs)))
        order = rng.permutation(len(dataset.graphs))
        train_graphs = [dataset.graphs[i] for i in order[:cut]]
        test_graphs = [dataset.graphs[i] for i in order[cut:]]

    opt = AdamW(model.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    metrics = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_graphs))
        lr_scale = 1.0 / (1.0 + cfg.lr_decay * epoch)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            opt.zero_grad()
            with T.Tape() as tape:
                total = None
                for gi in batch:
                    g = train_graphs[gi]
                    logits, _ = forward(model, relax(g))
                    ce = cross_entropy(logits, g.label)
                    total = ce if total is None else T.add(total, ce)
                loss = T.div(total, float(len(batch)))
                if not np.isfinite(loss.data):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}")
                tape.backward(loss)
            opt.step(lr_scale)
            epoch_loss += float(loss.data) * len(batch)
        row = {"epoch": epoch, "loss": epoch_loss / len(train_graphs)}
        ev = evaluate(model, test_graphs) if test_graphs else {"accuracy": None, "f1": []}
        row["accuracy"] = ev["accuracy"]
        row["f1"] = ev["f1"]
        metrics.append(row)
    model.meta = {
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "test_accuracy": metrics[-1]["accuracy"] if metrics else None,
    }
    return model, metrics


def metrics_to_csv(metrics, path):
    with open(path, "w") as fh:
        if not metrics:
            fh.write("epoch,loss,accuracy\n")
            return
        k = len(metrics[0]["f1"])
        cols = ["epoch", "loss", "accuracy"] + [f"f1_class{c}" for c in range(k)]
        fh.write(",".join(cols) + "\n")
        for row in metrics:
            cells = [str(row["epoch"]), repr(row["loss"]), repr(row["accuracy"])]
            cells += [repr(v) for v in row["f1"]]
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: Classifier, path):
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "spec": asdict(model.spec),
        "meta": model.meta,
        "params": {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in model.params.items()
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_checkpoint(path) -> Classifier:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ModelError(f"unreadable checkpoint {path}: {e}") from None
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {payload.get('format_version')}")
    spec = ClassifierSpec(**payload["spec"])
    blank = init_classifier(spec, np.random.default_rng(0))
    params = {}
    for name, ref in blank.params.items():
        if name not in payload["params"]:
            raise ModelError(f"checkpoint missing parameter {name}")
        entry = payload["params"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != ref.data.shape:
            raise ModelError(f"parameter {name} has shape {arr.shape}, expected {ref.data.shape}")
        params[name] = T.param(arr)
    return Classifier(spec, params, payload["meta"])
