"""Differential testing harness for tensor computation graphs.

Thin wrapper over the C++ core: functions exchanging JSON documents return
plain dicts here.
"""

import json as _json

from graphdiff._core import (  # noqa: F401
    GraphdiffError,
    __version__,
    builtin_profiles,
    generate_seed_corpus,
)
from graphdiff import _core


def profile(name):
    """Resolved backend profile (builtin name or profile json path)."""
    return _json.loads(_core.profile_json(name))


def synthesize(corpus_dir, threshold=100, mutation_prob=0.25, seed=0, max_subgraph_nodes=12):
    """Synthesize one variant graph; returns the graph document as a dict."""
    return _json.loads(
        _core.synthesize(str(corpus_dir), threshold, mutation_prob, seed, max_subgraph_nodes)
    )


def validate(graph):
    return _core.validate_graph(_dump(graph))


def graph_stats(graph):
    return _core.graph_stats(_dump(graph))


def run(graph, backend="reference", mode="eager", input_seed=0, run_seed=0, pipeline="default"):
    """Execute a graph on one backend; returns the trace as a dict."""
    return _json.loads(
        _core.run(_dump(graph), backend, mode, input_seed, run_seed, pipeline)
    )


def diff(trace_a, trace_b, atol=5e-4, rtol=1e-4):
    """Compare two traces (subject, reference); returns the report as a dict."""
    return _json.loads(_core.diff(_dump(trace_a), _dump(trace_b), atol, rtol))


def save_input_bundle(graph, path, seed=0, **ranges):
    """Generate inputs for a graph and write them as a replayable bundle.

    Returns the input digest as a hex string.
    """
    return _core.save_input_bundle(_dump(graph), str(path), seed, **ranges)


def run_campaign(corpus_dir, out_dir, backends=("reference", "relaxed-a"), modes=("eager",),
                 variants=10, threshold=30, mutation_prob=0.25, master_seed=0, workers=0):
    return _json.loads(
        _core.run_campaign(str(corpus_dir), str(out_dir), list(backends), list(modes),
                           variants, threshold, mutation_prob, master_seed, workers)
    )


def replay(ledger_dir, variant, backend, mode="eager"):
    return _json.loads(_core.replay(str(ledger_dir), variant, backend, mode))


def campaign_report(ledger_dir):
    return _json.loads(_core.campaign_report(str(ledger_dir)))


def _dump(document):
    if isinstance(document, str):
        return document
    return _json.dumps(document)
