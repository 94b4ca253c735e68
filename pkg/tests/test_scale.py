"""Benchmark-scale validation on a synthetic stand-in corpus.

Exercises the exact reference configurations of the acceptance criteria on
a generated 188-graph molecule-like dataset (2 imbalanced classes, ~18
nodes per graph, 7 node labels), checking mechanics, runtime, and that the
learned profiles beat the majority rate by a wide margin. This does not
replace the benchmark-data criteria; it validates the same code paths at
the same scale.
"""

import time

import numpy as np
import pytest

from metricvec.classifiers import ClassifierConfig
from metricvec.datasets import GraphDataset, Graph
from metricvec.embedding import EmbedConfig
from metricvec.fragments import MiningConfig, mine_with_decompositions
from metricvec.harness import ExperimentConfig, drift_study, run_cv, run_fewshot
from metricvec.transport import SinkhornConfig


def mutag_scale_dataset(seed=11) -> GraphDataset:
    """188 ring-plus-tail graphs, 125/63 split, class-correlated decoration.

    Every graph is a label-0 ring with a chain tail; class 1 graphs carry a
    label-1 branch motif and longer tails, class 0 a label-2 decoration,
    with overlap noise so the separation is strong but not trivial.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    labels = []
    for gid in range(188):
        cls = 1 if gid < 63 else 0
        ring = int(rng.integers(5, 8))
        tail = int(rng.integers(2, 4)) + (2 if cls == 1 else 0)
        nls = [0] * (ring + tail)
        edges = [(i, (i + 1) % ring) for i in range(ring)]
        edges.append((0, ring))  # tail hangs off ring node 0
        edges += [(ring + i, ring + i + 1) for i in range(tail - 1)]
        base = ring + tail
        noisy = rng.random() < 0.15
        motif_cls = (1 - cls) if noisy else cls
        if motif_cls == 1:
            nls += [1, 1]
            edges += [(ring // 2, base), (base, base + 1)]
        else:
            nls += [2]
            edges += [(ring // 2, base)]
        for _ in range(int(rng.integers(0, 3))):
            v = int(rng.integers(0, ring))
            nls.append(int(rng.integers(3, 7)))
            edges.append((v, len(nls) - 1))
        normalized = {(min(u, v), max(u, v)) for u, v in edges}
        graphs.append(
            Graph(id=gid, node_labels=tuple(nls), edges=tuple(sorted(normalized)))
        )
        labels.append(cls)
    return GraphDataset(graphs=tuple(graphs), labels=tuple(labels),
                        class_count=2, name="mutag_scale")


@pytest.fixture(scope="module")
def scale_ds():
    return mutag_scale_dataset()


REFERENCE = dict(
    embed=EmbedConfig(dim=16, epochs=100, negatives=5, seed=0),
    sinkhorn=SinkhornConfig(reg_lambda=1e-2, max_iters=30),
    seed=0,
)


class TestReferenceConfigsAtScale:
    def test_cv_reference_settings_runtime_and_signal(self, scale_ds):
        config = ExperimentConfig(
            mining=MiningConfig(theta=0.6, max_edges=5),
            classifier=ClassifierConfig(kind="knn", k=3),
            folds=10,
            **REFERENCE,
        )
        t0 = time.perf_counter()
        report = run_cv(config, scale_ds)
        elapsed = time.perf_counter() - t0
        majority = max(scale_ds.class_sizes()) / len(scale_ds)
        mean = report.aggregate["overall"]["mean"]
        assert elapsed < 600, f"reference CV took {elapsed:.0f}s"
        assert mean >= majority + 0.15, f"mean {mean:.3f} vs majority {majority:.3f}"

    def test_cv_at_high_threshold_completes(self, scale_ds):
        config = ExperimentConfig(
            mining=MiningConfig(theta=0.95, max_edges=5),
            classifier=ClassifierConfig(kind="knn", k=3),
            folds=10,
            **REFERENCE,
        )
        report = run_cv(config, scale_ds)
        assert report.aggregate["overall"]["mean"] is not None
        assert len(report.runs) == 10

    def test_fewshot_svm_at_scale(self, scale_ds):
        config = ExperimentConfig(
            mining=MiningConfig(theta=0.6, max_edges=5),
            classifier=ClassifierConfig(kind="svm_rbf"),
            eta_list=(0.05, 0.5),
            zeta=0.1,
            repeats=3,
            **REFERENCE,
        )
        report = run_fewshot(config, scale_ds)
        cells = report.aggregate["by_cell"]
        assert cells["eta=0.5"]["mean"] >= cells["eta=0.05"]["mean"] - 0.02

    def test_drift_at_scale(self, scale_ds):
        config = ExperimentConfig(
            mining=MiningConfig(theta=0.6, max_edges=5),
            eta_list=(0.05, 0.5),
            reference_eta=0.9,
            repeats=3,
            **REFERENCE,
        )
        report = drift_study(config, scale_ds)
        cells = report.aggregate["by_cell"]
        assert cells["eta=0.05"]["mean"] > cells["eta=0.5"]["mean"]

    def test_minsup_sweep_counts_at_scale(self, scale_ds):
        counts = []
        _, supports, _ = mine_with_decompositions(
            scale_ds, MiningConfig(theta=0.5, max_edges=5)
        )
        thetas = np.linspace(0.5, 0.95, 10)
        for theta in thetas:
            counts.append(sum(1 for s in supports if s >= theta))
        assert counts == sorted(counts, reverse=True)
        assert counts[0] > counts[-1] >= 1
