import numpy as np
import networkx as nx
import pytest

from graphlens import datagen as D
from graphlens import graphs as G


def to_networkx(g: G.DenseGraph) -> nx.Graph:
    h = nx.Graph()
    for i in range(g.n_nodes):
        cats = g.node_categories()
        h.add_node(i, color=None if cats is None else int(cats[i]))
    h.add_edges_from(g.edges())
    return h


def contains_colored_motif(g: G.DenseGraph, motif: D.MotifSpec) -> bool:
    base = to_networkx(g)
    target = to_networkx(motif.to_graph())
    gm = nx.algorithms.isomorphism.GraphMatcher(
        base, target, node_match=lambda a, b: a["color"] == b["color"])
    return gm.subgraph_is_monomorphic()


# ---------------------------------------------------------------------------
# base graphs


def test_config_range_enforced():
    with pytest.raises(G.GraphError):
        D.BaseGraphConfig(5, 50)
    with pytest.raises(G.GraphError):
        D.BaseGraphConfig(10, 150)


def test_base_graph_tree_level_density():
    rng = np.random.default_rng(0)
    g = D.gen_base_graph(D.BaseGraphConfig(10, 10, edges_per_node=0.9), rng)
    assert g.n_nodes == 10 and g.n_edges == 9
    assert G.connected_components(g).max() == 0


def test_base_graph_always_connected():
    rng = np.random.default_rng(1)
    cfg = D.BaseGraphConfig()
    for _ in range(50):
        g = D.gen_base_graph(cfg, rng)
        assert G.connected_components(g).max() == 0
        assert G.validate(g) == []


def test_base_graph_mean_node_count():
    rng = np.random.default_rng(2)
    cfg = D.BaseGraphConfig()
    counts = [D.gen_base_graph(cfg, rng).n_nodes for _ in range(2000)]
    assert abs(np.mean(counts) - 55.0) < 2.0


# ---------------------------------------------------------------------------
# colored-cycle dataset


def cyclicity_oracle(g: G.DenseGraph) -> int:
    red = G.has_cycle(g, edge_cat=0)
    green = G.has_cycle(g, edge_cat=1)
    assert not (red and green), "construction guarantees at most one cycle"
    if red:
        return 0
    if green:
        return 1
    return 2


def test_cyclicity_labels_match_structure_oracle():
    rng = np.random.default_rng(3)
    ds = D.gen_cyclicity(120, D.BaseGraphConfig(10, 40), rng)
    assert ds.class_names == ["Red-Cyclic", "Green-Cyclic", "Acyclic"]
    for g in ds.graphs:
        assert G.validate(g) == []
        assert cyclicity_oracle(g) == g.label


def test_cyclicity_is_class_balanced():
    rng = np.random.default_rng(4)
    ds = D.gen_cyclicity(91, D.BaseGraphConfig(10, 30), rng)
    counts = np.bincount(ds.labels(), minlength=3)
    assert counts.max() - counts.min() <= 1


def test_cyclicity_nonmono_cycle_is_acyclic_label():
    # every acyclic-labeled graph has no single-colored cycle but may be cyclic
    rng = np.random.default_rng(5)
    ds = D.gen_cyclicity(60, D.BaseGraphConfig(10, 30), rng)
    saw_cyclic_but_mixed = False
    for g in ds.graphs:
        if g.label == 2 and G.has_cycle(g):
            saw_cyclic_but_mixed = True
            assert not G.has_cycle(g, 0) and not G.has_cycle(g, 1)
    assert saw_cyclic_but_mixed


# ---------------------------------------------------------------------------
# motif dataset


def test_motif_labels_contain_their_motif():
    rng = np.random.default_rng(6)
    ds = D.gen_motif(120, D.BaseGraphConfig(10, 30), rng)
    hits = total = 0
    for g in ds.graphs:
        assert G.validate(g) == []
        if g.label < 4:
            total += 1
            hits += contains_colored_motif(g, D.MOTIFS[ds.class_names[g.label]])
    assert total > 0 and hits / total >= 0.99


def test_motif_complete4_contains_k4():
    rng = np.random.default_rng(7)
    ds = D.gen_motif(60, D.BaseGraphConfig(10, 20), rng)
    for g in ds.graphs:
        if g.label == 2:
            assert contains_colored_motif(g, D.COMPLETE_4)


def test_others_motif_drops_one_edge():
    src = D.MOTIFS["House-X"]
    trimmed = src.without_edge(3)
    assert len(trimmed.edges) == len(src.edges) - 1
    assert trimmed.node_colors == src.node_colors


def test_attach_motif_counts_and_connectivity():
    rng = np.random.default_rng(8)
    base = D.gen_base_graph(D.BaseGraphConfig(10, 15), rng)
    base = G.DenseGraph(base.adj, G.one_hot(rng.integers(5, size=base.n_nodes), 5))
    out = D.attach_motif(base, D.HOUSE, anchor_node=3, rng=rng)
    assert out.n_nodes == base.n_nodes + 5
    assert out.n_edges == base.n_edges + 6 + 1
    assert G.connected_components(out).max() == 0


def test_attach_then_delete_recovers_base():
    rng = np.random.default_rng(9)
    base = D.gen_base_graph(D.BaseGraphConfig(10, 15), rng)
    base = G.DenseGraph(base.adj, G.one_hot(rng.integers(5, size=base.n_nodes), 5))
    out = D.attach_motif(base, D.COMPLETE_5, anchor_node=0, rng=rng)
    back = G.induced_subgraph(out, range(base.n_nodes))
    np.testing.assert_array_equal(back.adj, base.adj)
    np.testing.assert_array_equal(back.node_features, base.node_features)


# ---------------------------------------------------------------------------
# shape dataset


def test_shape_builder_counts():
    for k in (4, 10, 64):
        w = D.wheel_graph(k)
        assert w.n_nodes == k + 1 and w.n_edges == 2 * k
        s = D.star_graph(k)
        assert s.n_nodes == k + 1 and s.n_edges == k
    for w in range(2, 9):
        for h in range(2, 9):
            g = D.grid_graph(w, h)
            assert g.n_nodes == w * h
            assert g.n_edges == w * (h - 1) + h * (w - 1)
    lp = D.lollipop_graph(5, 7)
    assert lp.n_nodes == 12 and lp.n_edges == 10 + 7
    assert G.connected_components(lp).max() == 0


def test_shape_dataset_is_valid():
    rng = np.random.default_rng(10)
    ds = D.gen_shape(100, rng)
    assert ds.class_names[0] == "Lollipop"
    for g in ds.graphs:
        assert G.validate(g) == []


# ---------------------------------------------------------------------------
# color-mixing dataset


def consistency_oracle(g: G.DenseGraph) -> int:
    cats = g.node_categories()
    for i, j in g.edges():
        if g.edge_category(i, j) != D.mix_color(cats[i], cats[j]):
            return 1
    return 0


def test_color_consistency_oracle_agreement():
    rng = np.random.default_rng(11)
    ds = D.gen_color_consistency(200, D.BaseGraphConfig(10, 30), rng)
    for g in ds.graphs:
        assert G.validate(g) == []
        assert consistency_oracle(g) == g.label


def test_mix_rule_table():
    assert D.mix_color(0, 0) == 0
    assert D.mix_color(0, 1) == D.mix_color(1, 0) == 3
    assert D.mix_color(1, 2) == 4
    assert D.mix_color(0, 2) == 5


# ---------------------------------------------------------------------------
# tree-versus-cycle dataset


def test_is_acyclic_structure_matches_labels():
    rng = np.random.default_rng(12)
    ds = D.gen_is_acyclic(200, rng)
    for g in ds.graphs:
        assert G.has_cycle(g) == (g.label == 0)


def test_is_acyclic_mean_node_count():
    rng = np.random.default_rng(13)
    ds = D.gen_is_acyclic(1000, rng)
    mean_nodes = np.mean([g.n_nodes for g in ds.graphs])
    assert abs(mean_nodes - 28.46) < 5.0


# ---------------------------------------------------------------------------
# class balance and determinism


@pytest.mark.parametrize("make", [
    lambda rng: D.gen_motif(5000, D.BaseGraphConfig(10, 20), rng),
    lambda rng: D.gen_shape(5000, rng),
    lambda rng: D.gen_is_acyclic(5000, rng),
], ids=["motif", "shape", "is_acyclic"])
def test_class_distribution_uniform_3sigma(make):
    ds = make(np.random.default_rng(14))
    counts = np.bincount(ds.labels(), minlength=ds.n_classes)
    p = 1.0 / ds.n_classes
    sigma = np.sqrt(5000 * p * (1 - p))
    assert np.all(np.abs(counts - 5000 * p) <= 3 * sigma)


def test_generators_are_deterministic(tmp_path):
    for seed in (0, 7):
        a = D.gen_motif(40, D.BaseGraphConfig(10, 20), np.random.default_rng(seed))
        b = D.gen_motif(40, D.BaseGraphConfig(10, 20), np.random.default_rng(seed))
        D.save_dataset(a, tmp_path / f"a{seed}")
        D.save_dataset(b, tmp_path / f"b{seed}")
        for fname in ("graphs.jsonl", "dataset.json"):
            assert (tmp_path / f"a{seed}" / fname).read_bytes() == \
                   (tmp_path / f"b{seed}" / fname).read_bytes()


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(15)
    ds = D.gen_cyclicity(30, D.BaseGraphConfig(10, 20), rng)
    D.save_dataset(ds, tmp_path / "ds", extra_manifest={"seed": 15})
    back = D.load_saved_dataset(tmp_path / "ds")
    assert back.class_names == ds.class_names
    assert back.k_V == ds.k_V and back.k_E == ds.k_E
    np.testing.assert_array_equal(back.train_idx, ds.train_idx)
    for g1, g2 in zip(back.graphs, ds.graphs):
        np.testing.assert_array_equal(g1.adj, g2.adj)
        np.testing.assert_array_equal(g1.edge_features, g2.edge_features)
        assert g1.label == g2.label


# ---------------------------------------------------------------------------
# plausible motifs


def test_plausible_motif_counts_and_ground_truth():
    c4 = D.plausible_motifs("Complete-4")
    hx = D.plausible_motifs("House-X")
    assert len(c4) == 8 and len(hx) == 9
    gt = c4[-1].to_graph()
    assert gt.n_nodes == 4 and gt.n_edges == 6  # a 4-clique
    assert hx[-1].name == "House-X"
    assert sorted(hx[-1].edges) == sorted(D.HOUSE_X.edges)
    with pytest.raises(G.GraphError):
        D.plausible_motifs("House")


def test_plausible_motifs_satisfy_their_rules():
    for m in D.plausible_motifs("Complete-4"):
        assert D.satisfies_complete4_rule(m), m.name
        assert G.connected_components(m.to_graph()).max() == 0, m.name
    for m in D.plausible_motifs("House-X"):
        assert D.satisfies_housex_rule(m), m.name
        assert G.connected_components(m.to_graph()).max() == 0, m.name


def test_plausible_motifs_distinct_from_ground_truth():
    for cls in ("Complete-4", "House-X"):
        motifs = D.plausible_motifs(cls)
        gt = to_networkx(motifs[-1].to_graph())
        for m in motifs[:-1]:
            h = to_networkx(m.to_graph())
            assert not nx.is_isomorphic(
                h, gt, node_match=lambda a, b: a["color"] == b["color"]), m.name


def test_ground_truth_motifs_pass_their_rules():
    assert D.satisfies_complete4_rule(D.COMPLETE_4)
    assert D.satisfies_housex_rule(D.HOUSE_X)


# ---------------------------------------------------------------------------
# TUDataset parsing


def write_tud(tmp_path, name="TINY"):
    # two triangles sharing the format: graph 1 = triangle, graph 2 = path
    (tmp_path / f"{name}_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n2\n")
    (tmp_path / f"{name}_graph_labels.txt").write_text("1\n-1\n")
    (tmp_path / f"{name}_node_labels.txt").write_text("0\n1\n0\n2\n2\n1\n")
    rows = ["1, 2", "2, 1", "2, 3", "3, 2", "1, 3", "3, 1", "4, 5", "5, 4", "5, 6", "6, 5"]
    (tmp_path / f"{name}_A.txt").write_text("\n".join(rows) + "\n")
    return tmp_path


def test_tudataset_parses_fixture(tmp_path):
    ds = D.load_tudataset(write_tud(tmp_path), "TINY")
    assert len(ds.graphs) == 2
    assert ds.k_V == 3
    g1, g2 = ds.graphs
    assert g1.n_nodes == 3 and g1.n_edges == 3   # deduplicated to a triangle
    assert g2.n_nodes == 3 and g2.n_edges == 2
    assert g1.label == 1 and g2.label == 0       # sorted distinct labels -1,1
    np.testing.assert_array_equal(g1.node_categories(), [0, 1, 0])


def test_tudataset_malformed_line_names_location(tmp_path):
    write_tud(tmp_path)
    apath = tmp_path / "TINY_A.txt"
    apath.write_text(apath.read_text() + "1,2,3\n")
    with pytest.raises(D.ParseError, match=r"TINY_A.txt:11"):
        D.load_tudataset(tmp_path, "TINY")


def test_tudataset_missing_file(tmp_path):
    with pytest.raises(D.ParseError, match="missing file"):
        D.load_tudataset(tmp_path, "TINY")


def test_tudataset_bad_token(tmp_path):
    write_tud(tmp_path)
    (tmp_path / "TINY_node_labels.txt").write_text("0\nx\n0\n2\n2\n1\n")
    with pytest.raises(D.ParseError, match="non-integer"):
        D.load_tudataset(tmp_path, "TINY")


def test_tudataset_out_of_range_index(tmp_path):
    write_tud(tmp_path)
    apath = tmp_path / "TINY_A.txt"
    apath.write_text(apath.read_text() + "1, 99\n")
    with pytest.raises(D.ParseError, match="out of range"):
        D.load_tudataset(tmp_path, "TINY")
