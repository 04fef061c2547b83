"""End-to-end smoke tests for the python bindings."""

import pytest

import graphdiff


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus")
    written = graphdiff.generate_seed_corpus(str(path), count=8, seed=7)
    assert written == 8
    return path


def test_builtin_profiles_present():
    names = graphdiff.builtin_profiles()
    assert "reference" in names
    assert "relaxed-a" in names
    profile = graphdiff.profile("relaxed-a")
    assert profile["bounds_policy"] == "unchecked_wrap"


def test_synthesize_and_validate(corpus_dir):
    graph = graphdiff.synthesize(corpus_dir, threshold=25, seed=42)
    verdict = graphdiff.validate(graph)
    assert verdict["ok"]
    stats = graphdiff.graph_stats(graph)
    assert stats["operators"] >= 25
    assert stats["inputs"] >= 1
    assert stats["outputs"] >= 1


def test_synthesis_is_deterministic(corpus_dir):
    a = graphdiff.synthesize(corpus_dir, threshold=20, seed=11)
    b = graphdiff.synthesize(corpus_dir, threshold=20, seed=11)
    assert graphdiff.graph_stats(a)["content_hash"] == graphdiff.graph_stats(b)["content_hash"]


def test_run_and_diff(corpus_dir):
    graph = graphdiff.synthesize(corpus_dir, threshold=20, seed=3)
    ref = graphdiff.run(graph, backend="reference", input_seed=5)
    alt = graphdiff.run(graph, backend="relaxed-b", input_seed=5)
    assert ref["backend"] == "reference"
    assert any(n["status"] == "ok" for n in ref["nodes"])
    report = graphdiff.diff(alt, ref)
    assert report["backend_a"] == "relaxed-b"
    assert len(report["verdicts"]) >= 1


def test_compiled_mode_agrees_with_eager(corpus_dir):
    graph = graphdiff.synthesize(corpus_dir, threshold=20, seed=9)
    eager = graphdiff.run(graph, backend="reference", input_seed=2, mode="eager")
    compiled = graphdiff.run(graph, backend="reference", input_seed=2, mode="compiled")
    report = graphdiff.diff(compiled, eager)
    assert all(v["verdict"] == "equivalent" for v in report["verdicts"])


def test_input_bundle_digest_is_deterministic(corpus_dir, tmp_path):
    graph = graphdiff.synthesize(corpus_dir, threshold=15, seed=4)
    d1 = graphdiff.save_input_bundle(graph, tmp_path / "a.bin", seed=9)
    d2 = graphdiff.save_input_bundle(graph, tmp_path / "b.bin", seed=9)
    assert d1 == d2
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_campaign_and_replay(corpus_dir, tmp_path):
    out = tmp_path / "ledger"
    summary = graphdiff.run_campaign(
        corpus_dir, out, backends=["reference", "relaxed-a"], variants=5,
        threshold=15, master_seed=21,
    )
    assert summary["completed"] == 5
    assert summary["variants"] == 5
    trace = graphdiff.replay(out, 2, "relaxed-a")
    assert trace["backend"] == "relaxed-a"
    report = graphdiff.campaign_report(out)
    assert report["variants"] == 5


def test_invalid_graph_is_rejected():
    dangling = {
        "schema": 1,
        "nodes": [
            {
                "id": 0,
                "kind": "relu",
                "attrs": {},
                "inputs": [[99, 0]],
                "outputs": [{"shape": [2], "dtype": "f32", "contiguous": True}],
            }
        ],
        "inputs": [],
        "outputs": [],
    }
    with pytest.raises(graphdiff.GraphdiffError):
        graphdiff.run(dangling, input_seed=1)
