"""Shared fixtures: tiny hand corpora and one trained model per session.

The three-trajectory corpus and its graph are the reference objects for
hand-computed expectations across the metric, graph, and feature tests.
"""

from __future__ import annotations

import pytest

from toolseq.embeddings import build_store
from toolseq.graph import build_graph
from toolseq.synthetic import basic_spec, generate, signal_gap_spec
from toolseq.trajectory import Trajectory, TrajectoryDataset


@pytest.fixture
def hand_dataset() -> TrajectoryDataset:
    # [A,B,C], [A,B], [A,C]: w(A,B)=2/3, w(A,C)=1/3, w(B,C)=1
    return TrajectoryDataset(
        [
            Trajectory(query="q1", tools=("A", "B", "C"), source_index=0),
            Trajectory(query="q2", tools=("A", "B"), source_index=1),
            Trajectory(query="q3", tools=("A", "C"), source_index=2),
        ]
    )


@pytest.fixture
def hand_graph(hand_dataset):
    return build_graph(hand_dataset)


@pytest.fixture(scope="session")
def basic_corpus():
    spec = basic_spec()
    train, test, labels, descriptions = generate(spec)
    return spec, train, test, labels, descriptions


@pytest.fixture(scope="session")
def gap_corpus():
    spec = signal_gap_spec()
    train, test, labels, descriptions = generate(spec)
    return spec, train, test, labels, descriptions


@pytest.fixture(scope="session")
def gap_pipeline(gap_corpus):
    """Graph, store, and trained pairwise model for the inverted corpus."""
    from toolseq import stage2

    spec, train, test, labels, descriptions = gap_corpus
    g = build_graph(train)
    store = build_store(descriptions)
    model = stage2.train(train, g, store)
    return g, store, model
