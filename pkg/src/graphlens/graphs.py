"""Graph data model shared by generators, classifiers and the explainer.

Graphs are undirected, without self loops, and stored dense: a symmetric
0/1 adjacency matrix, optional one-hot node features (N x k_V) and optional
one-hot edge features (N x N x k_E, zero rows where no edge exists). The
same layout relaxed to [0,1] values is a :class:`RelaxedGraph`, whose fields
may hold either numpy arrays or engine tensors so that discrete and relaxed
inference share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

NODE_PALETTE = ["red", "orange", "green", "blue", "purple",
                "cyan", "magenta", "yellow", "brown", "gray"]
EDGE_PALETTE = ["red", "green", "blue", "yellow", "cyan", "magenta"]


class GraphError(ValueError):
    pass


@dataclass
class DenseGraph:
    """One undirected graph with optional categorical features and a label."""

    adj: np.ndarray
    node_features: np.ndarray | None = None
    edge_features: np.ndarray | None = None
    label: int | None = None

    @property
    def n_nodes(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adj, 1).sum())

    @property
    def k_V(self) -> int:
        return 0 if self.node_features is None else self.node_features.shape[1]

    @property
    def k_E(self) -> int:
        return 0 if self.edge_features is None else self.edge_features.shape[2]

    def node_categories(self) -> np.ndarray | None:
        if self.node_features is None:
            return None
        return self.node_features.argmax(axis=1)

    def edge_category(self, i: int, j: int) -> int:
        if self.edge_features is None or self.adj[i, j] == 0:
            raise GraphError(f"no categorised edge ({i},{j})")
        return int(self.edge_features[i, j].argmax())

    def edges(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(np.triu(self.adj, 1))
        return list(zip(ii.tolist(), jj.tolist()))

    def neighbors(self, i: int) -> np.ndarray:
        return np.nonzero(self.adj[i])[0]

    def copy(self) -> "DenseGraph":
        return DenseGraph(
            self.adj.copy(),
            None if self.node_features is None else self.node_features.copy(),
            None if self.edge_features is None else self.edge_features.copy(),
            self.label,
        )


@dataclass
class RelaxedGraph:
    """Continuous relaxation: soft adjacency plus simplex-valued features.

    Fields hold numpy arrays or autodiff tensors interchangeably.
    """

    adj_soft: object
    node_soft: object | None = None
    edge_soft: object | None = None


@dataclass
class GraphDataset:
    graphs: list = field(default_factory=list)
    class_names: list = field(default_factory=list)
    k_V: int = 0
    k_E: int = 0
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    node_color_names: list | None = None
    edge_color_names: list | None = None

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def train_graphs(self) -> list:
        if self.train_idx is None:
            return self.graphs
        return [self.graphs[i] for i in self.train_idx]

    def test_graphs(self) -> list:
        if self.test_idx is None:
            return []
        return [self.graphs[i] for i in self.test_idx]

    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs])


def one_hot(categories, k: int) -> np.ndarray:
    categories = np.asarray(categories, dtype=int)
    if categories.size and (categories.min() < 0 or categories.max() >= k):
        raise GraphError(f"category out of range for k={k}")
    out = np.zeros((len(categories), k), dtype=np.float64)
    out[np.arange(len(categories)), categories] = 1.0
    return out


def graph_from_edges(n: int, edges, node_cats=None, k_V: int = 0,
                     k_E: int = 0, label: int | None = None) -> DenseGraph:
    """Build a DenseGraph from an edge list; entries are (i, j) or (i, j, cat)."""
    adj = np.zeros((n, n), dtype=np.float64)
    ef = np.zeros((n, n, k_E), dtype=np.float64) if k_E else None
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"bad edge ({i},{j}) for n={n}")
        adj[i, j] = adj[j, i] = 1.0
        if k_E:
            cat = int(e[2]) if len(e) > 2 else 0
            if not 0 <= cat < k_E:
                raise GraphError(f"edge category {cat} out of range")
            ef[i, j] = ef[j, i] = 0.0
            ef[i, j, cat] = ef[j, i, cat] = 1.0
    nf = one_hot(node_cats, k_V) if k_V else None
    if nf is not None and len(nf) != n:
        raise GraphError("node_cats length disagrees with n")
    return DenseGraph(adj, nf, ef, label)


# ---------------------------------------------------------------------------
# validation and relaxation


def validate(g: DenseGraph) -> list[str]:
    """Every invariant violation as a message; an empty list means ok."""
    out = []
    a = g.adj
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return [f"adjacency not square: shape {a.shape}"]
    n = a.shape[0]
    if not np.array_equal(a, a.T):
        out.append("asymmetric adjacency")
    if np.any(np.diag(a) != 0):
        out.append("nonzero diagonal (self-loop)")
    if not np.all(np.isin(a, (0.0, 1.0))):
        out.append("adjacency values outside {0,1}")
    if g.node_features is not None:
        nf = g.node_features
        if nf.shape[0] != n:
            out.append("node feature row count disagrees with n")
        elif not (np.all(np.isin(nf, (0.0, 1.0))) and np.all(nf.sum(axis=1) == 1.0)):
            out.append("node feature rows not one-hot")
    if g.edge_features is not None:
        ef = g.edge_features
        if ef.shape[:2] != (n, n):
            out.append("edge feature shape disagrees with n")
        else:
            on = a == 1.0
            if not np.all(np.isin(ef, (0.0, 1.0))):
                out.append("edge feature values outside {0,1}")
            if not np.all(ef[on].sum(axis=-1) == 1.0):
                out.append("edge rows at existing edges not one-hot")
            if np.any(ef[~on] != 0.0):
                out.append("edge features present where no edge exists")
            if not np.array_equal(ef, np.swapaxes(ef, 0, 1)):
                out.append("asymmetric edge features")
    return out


def relax(g: DenseGraph) -> RelaxedGraph:
    """Embed a valid discrete graph into the soft representation verbatim."""
    problems = validate(g)
    if problems:
        raise GraphError("invalid graph: " + "; ".join(problems))
    return RelaxedGraph(
        adj_soft=g.adj.astype(np.float64).copy(),
        node_soft=None if g.node_features is None else g.node_features.copy(),
        edge_soft=None if g.edge_features is None else g.edge_features.copy(),
    )


def discretize(rg: RelaxedGraph, label: int | None = None) -> DenseGraph:
    """Threshold the soft adjacency at 1/2 and take feature argmaxes."""
    soft = np.asarray(getattr(rg.adj_soft, "data", rg.adj_soft), dtype=np.float64)
    n = soft.shape[0]
    adj = np.where(soft > 0.5, 1.0, 0.0)
    adj = np.triu(adj, 1)
    adj = adj + adj.T
    nf = None
    if rg.node_soft is not None:
        ns = np.asarray(getattr(rg.node_soft, "data", rg.node_soft))
        nf = one_hot(ns.argmax(axis=1), ns.shape[1])
    ef = None
    if rg.edge_soft is not None:
        es = np.asarray(getattr(rg.edge_soft, "data", rg.edge_soft))
        k = es.shape[2]
        ef = np.zeros((n, n, k), dtype=np.float64)
        cats = es.argmax(axis=2)
        for i, j in zip(*np.nonzero(np.triu(adj, 1))):
            ef[i, j, cats[i, j]] = ef[j, i, cats[i, j]] = 1.0
    return DenseGraph(adj, nf, ef, label)


def validate_relaxed(rg: RelaxedGraph, tol: float = 1e-9) -> list[str]:
    out = []
    a = np.asarray(getattr(rg.adj_soft, "data", rg.adj_soft))
    if np.any(a < -tol) or np.any(a > 1 + tol):
        out.append("adj_soft outside [0,1]")
    if not np.allclose(a, a.T, atol=tol):
        out.append("adj_soft asymmetric")
    if np.any(np.abs(np.diag(a)) > tol):
        out.append("adj_soft nonzero diagonal")
    for name, arr in (("node_soft", rg.node_soft), ("edge_soft", rg.edge_soft)):
        if arr is None:
            continue
        x = np.asarray(getattr(arr, "data", arr))
        if np.any(x < -tol) or np.any(x > 1 + tol):
            out.append(f"{name} outside [0,1]")
        if np.any(np.abs(x.sum(axis=-1) - 1.0) > tol):
            out.append(f"{name} rows off the simplex")
    return out


# ---------------------------------------------------------------------------
# structure queries


def _adjacency_lists(g: DenseGraph, edge_cat: int | None = None) -> list[list[int]]:
    if edge_cat is None:
        keep = g.adj == 1.0
    else:
        if g.edge_features is None:
            raise GraphError("edge filter requires edge features")
        keep = (g.adj == 1.0) & (g.edge_features[:, :, edge_cat] == 1.0)
    return [np.nonzero(keep[i])[0].tolist() for i in range(g.n_nodes)]


def connected_components(g: DenseGraph) -> np.ndarray:
    """Component id per node, ids assigned in first-seen order."""
    n = g.n_nodes
    labels = np.full(n, -1, dtype=int)
    nbrs = _adjacency_lists(g)
    comp = 0
    for s in range(n):
        if labels[s] != -1:
            continue
        stack = [s]
        labels[s] = comp
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if labels[v] == -1:
                    labels[v] = comp
                    stack.append(v)
        comp += 1
    return labels


def has_cycle(g: DenseGraph, edge_cat: int | None = None) -> bool:
    """Whether any cycle exists, optionally using edges of one category only."""
    n = g.n_nodes
    nbrs = _adjacency_lists(g, edge_cat)
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        # iterative DFS with an edge back to the parent excluded once
        stack = [(s, -1)]
        seen[s] = True
        while stack:
            u, parent = stack.pop()
            skip_parent = True
            for v in nbrs[u]:
                if v == parent and skip_parent:
                    skip_parent = False
                    continue
                if seen[v]:
                    return True
                seen[v] = True
                stack.append((v, u))
    return False


def find_cycles(g: DenseGraph, edge_cat: int | None = None) -> list[list[int]]:
    """A fundamental cycle basis, each cycle given as an ordered node list.

    One DFS spanning forest; every non-tree edge (u, v) contributes the
    cycle made of that edge plus the tree path between u and v. A graph has
    exactly one simple cycle iff the basis has one element.
    """
    n = g.n_nodes
    nbrs = _adjacency_lists(g, edge_cat)
    parent = np.full(n, -1, dtype=int)
    depth = np.full(n, -1, dtype=int)
    cycles = []
    for s in range(n):
        if depth[s] != -1:
            continue
        depth[s] = 0
        stack = [s]
        order = []
        while stack:
            u = stack.pop()
            order.append(u)
            for v in nbrs[u]:
                if depth[v] == -1:
                    depth[v] = depth[u] + 1
                    parent[v] = u
                    stack.append(v)
        # non-tree edges within this component, counted once
        for u in order:
            for v in nbrs[u]:
                if u < v and parent[v] != u and parent[u] != v:
                    cycles.append(_tree_cycle(u, v, parent, depth))
    return cycles


def _tree_cycle(u: int, v: int, parent: np.ndarray, depth: np.ndarray) -> list[int]:
    pu, pv = [u], [v]
    a, b = u, v
    while depth[a] > depth[b]:
        a = parent[a]
        pu.append(a)
    while depth[b] > depth[a]:
        b = parent[b]
        pv.append(b)
    while a != b:
        a, b = parent[a], parent[b]
        pu.append(a)
        pv.append(b)
    return pu[:-1] + pv[::-1]


def cycle_edges(cycle: list[int]) -> list[tuple[int, int]]:
    return [(cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))]


def induced_subgraph(g: DenseGraph, nodes) -> DenseGraph:
    nodes = np.asarray(sorted(nodes), dtype=int)
    adj = g.adj[np.ix_(nodes, nodes)].copy()
    nf = None if g.node_features is None else g.node_features[nodes].copy()
    ef = None if g.edge_features is None else g.edge_features[np.ix_(nodes, nodes)].copy()
    return DenseGraph(adj, nf, ef, g.label)


def largest_component(g: DenseGraph) -> DenseGraph:
    labels = connected_components(g)
    if len(labels) == 0:
        return g.copy()
    sizes = np.bincount(labels)
    return induced_subgraph(g, np.nonzero(labels == sizes.argmax())[0])


# ---------------------------------------------------------------------------
# serialization


def graph_to_dict(g: DenseGraph) -> dict:
    out = {"n": g.n_nodes, "edges": []}
    for i, j in g.edges():
        if g.edge_features is not None:
            out["edges"].append([i, j, g.edge_category(i, j)])
        else:
            out["edges"].append([i, j])
    cats = g.node_categories()
    if cats is not None:
        out["node_cats"] = cats.tolist()
    if g.label is not None:
        out["label"] = int(g.label)
    return out


def graph_from_dict(d: dict, k_V: int = 0, k_E: int = 0) -> DenseGraph:
    node_cats = d.get("node_cats")
    if node_cats is not None and k_V == 0:
        k_V = max(node_cats) + 1
    if k_E == 0 and any(len(e) > 2 for e in d["edges"]):
        k_E = max(e[2] for e in d["edges"] if len(e) > 2) + 1
    return graph_from_edges(d["n"], d["edges"], node_cats, k_V, k_E, d.get("label"))


def to_dot(g: DenseGraph, name: str = "g", node_colors=None, edge_colors=None) -> str:
    """Render as DOT, colouring nodes and edges by their category."""
    node_colors = node_colors or NODE_PALETTE
    edge_colors = edge_colors or EDGE_PALETTE
    lines = [f"graph {name} {{", "  node [style=filled, fillcolor=lightgray];"]
    cats = g.node_categories()
    for i in range(g.n_nodes):
        if cats is not None:
            lines.append(f'  n{i} [fillcolor="{node_colors[cats[i] % len(node_colors)]}"];')
        else:
            lines.append(f"  n{i};")
    for i, j in g.edges():
        if g.edge_features is not None:
            c = edge_colors[g.edge_category(i, j) % len(edge_colors)]
            lines.append(f'  n{i} -- n{j} [color="{c}"];')
        else:
            lines.append(f"  n{i} -- n{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def permute(g: DenseGraph, perm) -> DenseGraph:
    """Relabel nodes so that new node p[i] is old node i."""
    perm = np.asarray(perm, dtype=int)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    adj = g.adj[np.ix_(inv, inv)].copy()
    nf = None if g.node_features is None else g.node_features[inv].copy()
    ef = None if g.edge_features is None else g.edge_features[np.ix_(inv, inv)].copy()
    return DenseGraph(adj, nf, ef, g.label)


def with_label(g: DenseGraph, label: int) -> DenseGraph:
    return replace(g, label=label)
