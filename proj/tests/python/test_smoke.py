import pytest

import grafenne

QUICK = "methods = sage, grafenne\nepochs = 20\nlr = 0.01\ndim = 8\nseeds = 0, 1\n"


def test_toy_graph():
    g = grafenne.toy_graph()
    assert g.num_nodes == 90
    assert g.num_classes == 3
    assert g.node_name(0) == "paper0"
    assert all(u < v for u, v in g.edges())
    assert set(g.features(0).values()) == {1.0}


def test_allotropic_counts():
    g = grafenne.toy_graph()
    c = grafenne.allotropic_counts(g)
    assert c["graph_nodes"] == g.num_nodes
    assert c["feature_edges"] == g.num_feature_entries
    assert c["graph_edges"] == g.num_edges


def test_translate():
    g = grafenne.toy_graph()
    t = grafenne.translate_features(g, 10.0)
    assert set(t.features(0).values()) == {10.0}
    same = grafenne.translate_features(g, 1.0, 0.0)
    assert same.features(5) == g.features(5)


def test_run_is_deterministic():
    a = grafenne.run(QUICK)
    b = grafenne.run(QUICK, workers=2)
    assert a == b
    assert len(a) == 2 * 4
    assert {r["seed"] for r in a} == {"0", "1", "mean", "std"}
    assert all(0.0 <= r["value"] <= 1.0 for r in a if r["seed"] != "std")
    assert grafenne.run(QUICK, seed=3) != a


def test_stream():
    rows = grafenne.stream(
        "dataset = synthetic\nsynthetic_nodes = 60\nstream_steps = 2\nstep_epochs = 3\nepochs = 10\nlr = 0.01\ndim = 8\n"
    )
    assert [r["strategy"] for r in rows[::3]] == ["oracle", "ewc", "ft", "er"]
    assert [r["t"] for r in rows[:3]] == [1, 2, 3]


def test_config_errors():
    with pytest.raises(grafenne.ConfigError, match="<config>:2"):
        grafenne.check_config("dim = 4\nbogus = 1\n")
    with pytest.raises(ValueError):
        grafenne.run("methods = mystery\n")
    assert "replay_capacity" in grafenne.config_reference()
    assert "fp+grafenne" in grafenne.method_names()


def test_data_errors(tmp_path):
    with pytest.raises(grafenne.DataError):
        grafenne.load_graph(tmp_path / "none.tsv", tmp_path / "none.tsv")


def test_graph_files_round_trip(tmp_path):
    g = grafenne.toy_graph()
    grafenne.write_graph(g, tmp_path / "e.tsv", tmp_path / "f.tsv", tmp_path / "l.tsv")
    back = grafenne.load_graph(tmp_path / "e.tsv", tmp_path / "f.tsv", tmp_path / "l.tsv")
    assert back.num_nodes == g.num_nodes
    assert back.num_edges == g.num_edges
    assert back.num_feature_entries == g.num_feature_entries
