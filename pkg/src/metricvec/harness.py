"""Experiment drivers: cross-validation, few-shot sweeps, threshold sweeps,
and the support-size drift study, all emitting machine-readable reports.

Every driver is deterministic for a fixed config: sampling seeds are derived
per cell from the master seed, distance evaluations are memoized per
unordered pair, and thread count affects timing only.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import ClassifierConfig, accuracy, fit_predict
from .datasets import (
    GraphDataset,
    InfeasibleSplitError,
    SplitConfig,
    load_tudataset,
    stratified_kfold,
    stratified_sample,
)
from .embedding import EmbedConfig, EmbeddingTable, VectorSet, embed_decomposition, train_pvdbow
from .fragments import (
    Fragment,
    FragmentDecomposition,
    MiningConfig,
    decompose,
    mine_with_decompositions,
)
from .metric import DistanceCache, build_support_set, embed_all
from .transport import SinkhornConfig, graph_distance_full

__all__ = [
    "ExperimentConfig",
    "Report",
    "PipelineArtifacts",
    "prepare_artifacts",
    "run_cv",
    "run_fewshot",
    "minsup_sweep",
    "drift_study",
]


class LeakageError(RuntimeError):
    """A test graph ended up inside its own run's support set."""


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str | None = None
    mining: MiningConfig = field(default_factory=MiningConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    folds: int = 10
    eta_list: tuple[float, ...] = (0.05, 0.2, 0.5)
    zeta: float = 0.1
    repeats: int = 10
    reference_eta: float = 0.9
    seed: int = 0
    mine_on: str = "all"  # all | train
    cache_dir: str | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        for eta in self.eta_list:
            if not (0.0 < eta < 1.0):
                raise ValueError(f"eta values must lie in (0, 1), got {eta}")
        if self.mine_on not in ("all", "train"):
            raise ValueError(f"mine_on must be 'all' or 'train', got {self.mine_on!r}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    def params_dict(self) -> dict:
        d = asdict(self)
        d["eta_list"] = list(self.eta_list)
        d["classifier"]["c_grid"] = list(self.classifier.c_grid)
        return d


@dataclass
class Report:
    meta: dict
    runs: list[dict]
    aggregate: dict

    def payload(self) -> dict:
        return {"meta": self.meta, "runs": self.runs, "aggregate": self.aggregate}

    # Execution details that may differ between byte-identical experiments
    # (eval counters depend on warm-cache state, not on the experiment).
    _VOLATILE_KEYS = ("timing", "threads", "cache_dir", "distance_evals",
                      "nonconverged_pairs")

    def canonical_payload(self) -> bytes:
        """Stable bytes for determinism checks: timing and host knobs stripped."""

        def strip(obj):
            if isinstance(obj, dict):
                return {
                    k: strip(v)
                    for k, v in sorted(obj.items())
                    if k not in Report._VOLATILE_KEYS
                }
            if isinstance(obj, list):
                return [strip(v) for v in obj]
            return obj

        return json.dumps(strip(self.payload()), sort_keys=True,
                          separators=(",", ":")).encode()

    def save_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.payload(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path: str | Path) -> None:
        import csv

        cells = self.aggregate.get("by_cell", {})
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cell", "classifier", "mean", "std", "n_runs"])
            clf = self.meta.get("params", {}).get("classifier", {}).get("kind", "")
            if cells:
                for key in sorted(cells):
                    row = cells[key]
                    writer.writerow(
                        [key, row.get("classifier", clf), row["mean"], row["std"],
                         row["n_runs"]]
                    )
            overall = self.aggregate.get("overall")
            if overall is not None:
                writer.writerow(["overall", clf, overall["mean"], overall["std"],
                                 overall["n_runs"]])


def _aggregate(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "std": None, "n_runs": 0}
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "std": float(arr.std()),  # population std, matching mean-over-runs reports
        "n_runs": len(values),
    }


@dataclass
class PipelineArtifacts:
    fragments: list[Fragment]
    supports: list[float]
    decompositions: list[FragmentDecomposition]
    table: EmbeddingTable
    vector_sets: list[VectorSet]
    timing: dict


def prepare_artifacts(
    dataset: GraphDataset,
    mining: MiningConfig,
    embed: EmbedConfig,
    scope_ids: list[int] | None = None,
) -> PipelineArtifacts:
    """Mine fragments, train vectors, and build every graph's point cloud.

    ``scope_ids`` restricts mining and vector training to a subset (the
    training split); decompositions of out-of-scope graphs are computed by
    containment against the mined fragment list.
    """
    timing = {}
    t0 = time.perf_counter()
    if scope_ids is None:
        fragments, supports, decomps = mine_with_decompositions(dataset, mining)
        corpus = decomps
    else:
        scope = sorted(scope_ids)
        sub = GraphDataset(
            graphs=tuple(dataset.graphs[i] for i in scope),
            labels=tuple(0 for _ in scope),
            class_count=1,
            name=dataset.name + ":scope",
        )
        fragments, supports, sub_decomps = mine_with_decompositions(sub, mining)
        by_global: dict[int, FragmentDecomposition] = {
            gid: FragmentDecomposition(gid, sub_decomps[k].fragment_ids)
            for k, gid in enumerate(scope)
        }
        decomps = [
            by_global.get(i) or decompose(dataset.graphs[i], fragments)
            for i in range(len(dataset))
        ]
        corpus = [decomps[i] for i in scope]
    timing["mining_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    table = train_pvdbow(dataset, corpus, embed, n_fragments=len(fragments))
    timing["embedding_s"] = time.perf_counter() - t0
    vector_sets = [embed_decomposition(d, table) for d in decomps]
    return PipelineArtifacts(fragments, supports, decomps, table, vector_sets, timing)


def _make_pair_fn(vector_sets, sinkhorn_cfg: SinkhornConfig, cache: DistanceCache):
    def fn(i: int, j: int) -> float:
        d, plan = graph_distance_full(vector_sets[i], vector_sets[j], sinkhorn_cfg)
        if not plan.converged:
            cache.flag_nonconverged(i, j)
        return d

    return fn


def _warm_cache(cache: DistanceCache, pair_fn, row_ids, support_ids, threads: int):
    """Compute all missing (row, support) distances, optionally in parallel.

    Each unordered pair is computed exactly once and lands in its own cache
    slot, so the result is independent of thread scheduling.
    """
    pairs = []
    seen = set()
    for i in row_ids:
        for j in support_ids:
            key = (i, j) if i <= j else (j, i)
            if key not in seen and key not in cache.values:
                seen.add(key)
                pairs.append(key)
    if threads > 1 and len(pairs) > 1:
        results: dict[tuple[int, int], float] = {}

        def work(key):
            results[key] = pair_fn(key[0], key[1])

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, pairs))
        for key in pairs:
            cache.values[key] = results[key]
            cache.eval_count += 1
    else:
        for key in pairs:
            cache.distance(key[0], key[1], pair_fn)


def _cache_params(dataset: GraphDataset, config: ExperimentConfig, theta=None) -> dict:
    return {
        "dataset": dataset.content_hash(),
        "min_sup": config.mining.theta if theta is None else theta,
        "max_edges": config.mining.max_edges,
        "dim": config.embed.dim,
        "lambda": config.sinkhorn.reg_lambda,
        "t": config.sinkhorn.max_iters,
        "seed": config.embed.seed,
        "mine_on": config.mine_on,
    }


def _open_cache(
    dataset: GraphDataset, config: ExperimentConfig, theta=None
) -> tuple[DistanceCache, Path | None]:
    """In-memory cache, warm-loaded from cache_dir when a matching file exists.

    A file whose parameter sidecar disagrees is ignored and recomputed.
    """
    import hashlib

    params = _cache_params(dataset, config, theta)
    if not config.cache_dir:
        return DistanceCache(params=params), None
    key = hashlib.sha256(
        json.dumps(params, sort_keys=True).encode()
    ).hexdigest()[:16]
    path = Path(config.cache_dir) / f"distances_{key}.bin"
    if path.is_file():
        try:
            return DistanceCache.load(path, expected_params=params), path
        except ValueError:
            pass
    return DistanceCache(params=params), path


def _persist_cache(cache: DistanceCache, path: Path | None, n_graphs: int) -> None:
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        cache.save(path, n_graphs)


def _load(config: ExperimentConfig, dataset: GraphDataset | None) -> GraphDataset:
    if dataset is not None:
        return dataset
    if config.data_dir is None:
        raise ValueError("no dataset given and no data_dir configured")
    return load_tudataset(config.data_dir)


def _meta(dataset: GraphDataset, config: ExperimentConfig, experiment: str) -> dict:
    return {
        "experiment": experiment,
        "dataset": {
            "name": dataset.name,
            "n_graphs": len(dataset),
            "classes": dataset.class_count,
            "hash": dataset.content_hash(),
        },
        "params": config.params_dict(),
    }


def _check_leakage(support_ids, test_ids) -> None:
    overlap = set(support_ids) & set(test_ids)
    if overlap:
        raise LeakageError(f"test graphs {sorted(overlap)} found in support set")


def _evaluate_split(
    dataset: GraphDataset,
    art: PipelineArtifacts,
    cache: DistanceCache,
    config: ExperimentConfig,
    train_ids: list[int],
    test_ids: list[int],
    classifier: ClassifierConfig,
) -> tuple[float, dict]:
    """Embed train+test rows against the train support set and score."""
    support = build_support_set(train_ids, dataset.labels)
    _check_leakage(support.ordered_ids, test_ids)
    pair_fn = _make_pair_fn(art.vector_sets, config.sinkhorn, cache)
    evals_before = cache.eval_count
    nonconverged_before = len(cache.nonconverged)
    t0 = time.perf_counter()
    _warm_cache(cache, pair_fn, list(train_ids) + list(test_ids),
                support.ordered_ids, config.threads)
    row_ids = list(train_ids) + list(test_ids)
    matrix, vectors = embed_all(dataset, support, pair_fn, cache, graph_ids=row_ids)
    distance_time = time.perf_counter() - t0
    n_train = len(train_ids)
    x_train, x_test = matrix[:n_train], matrix[n_train:]
    y = np.asarray(dataset.labels)
    t0 = time.perf_counter()
    predictions = fit_predict(x_train, y[list(train_ids)], x_test, classifier)
    fit_time = time.perf_counter() - t0
    acc = accuracy(predictions, y[list(test_ids)])
    stats = {
        "n_train": n_train,
        "n_test": len(test_ids),
        "support_size": len(support),
        "distance_evals": cache.eval_count - evals_before,
        "nonconverged_pairs": len(cache.nonconverged) - nonconverged_before,
        "degenerate_rows": sum(v.degenerate for v in vectors),
        "timing": {"distances_s": distance_time, "fit_s": fit_time},
    }
    return acc, stats


def run_cv(config: ExperimentConfig, dataset: GraphDataset | None = None) -> Report:
    """Stratified k-fold cross-validation of the full pipeline."""
    dataset = _load(config, dataset)
    folds = stratified_kfold(dataset, config.folds, config.seed)
    runs: list[dict] = []
    art = None
    cache, cache_path = _open_cache(dataset, config)
    prep_timing: dict = {}
    if config.mine_on == "all":
        art = prepare_artifacts(dataset, config.mining, config.embed)
        prep_timing = art.timing
    for fold_idx, (train_ids, test_ids) in enumerate(folds):
        if config.mine_on == "train":
            art = prepare_artifacts(dataset, config.mining, config.embed, train_ids)
            cache, cache_path = DistanceCache(params=_cache_params(dataset, config)), None
        acc, stats = _evaluate_split(
            dataset, art, cache, config, train_ids, test_ids, config.classifier
        )
        record = {"fold": fold_idx, "accuracy": acc, **stats}
        if config.mine_on == "train":
            record["timing"] = {**record["timing"], **art.timing}
        runs.append(record)
    _persist_cache(cache, cache_path, len(dataset))
    meta = _meta(dataset, config, "cv")
    meta["fragment_count"] = len(art.fragments)
    meta["timing"] = prep_timing
    aggregate = {"overall": _aggregate([r["accuracy"] for r in runs])}
    return Report(meta=meta, runs=runs, aggregate=aggregate)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def run_fewshot(config: ExperimentConfig, dataset: GraphDataset | None = None) -> Report:
    """Sampling-rate sweep: train on an eta fraction, test on a zeta sample.

    Train and test sets are redrawn for every repeat; infeasible rates
    (too few items to cover all classes) are recorded as skips.
    """
    dataset = _load(config, dataset)
    if not config.eta_list:
        raise ValueError("eta_list must be nonempty")
    runs: list[dict] = []
    art = None
    cache, cache_path = _open_cache(dataset, config)
    if config.mine_on == "all":
        art = prepare_artifacts(dataset, config.mining, config.embed)
    for eta_idx, eta in enumerate(config.eta_list):
        for rep in range(config.repeats):
            seed = _derived_seed(config.seed, 1, eta_idx, rep)
            try:
                train_ids, test_ids = stratified_sample(
                    dataset, SplitConfig(eta=eta, zeta=config.zeta, seed=seed)
                )
            except InfeasibleSplitError as exc:
                runs.append(
                    {"eta": eta, "repeat": rep, "skipped": str(exc), "accuracy": None}
                )
                continue
            local_art = art
            local_cache = cache
            if config.mine_on == "train":
                local_art = prepare_artifacts(
                    dataset, config.mining, config.embed, train_ids
                )
                local_cache = DistanceCache(params=_cache_params(dataset, config))
            acc, stats = _evaluate_split(
                dataset, local_art, local_cache, config, train_ids, test_ids,
                config.classifier,
            )
            runs.append({"eta": eta, "repeat": rep, "accuracy": acc, **stats})
    _persist_cache(cache, cache_path, len(dataset))
    by_cell = {}
    for eta in config.eta_list:
        accs = [r["accuracy"] for r in runs
                if r.get("eta") == eta and r.get("accuracy") is not None]
        by_cell[f"eta={eta:g}"] = _aggregate(accs)
    all_accs = [r["accuracy"] for r in runs if r.get("accuracy") is not None]
    meta = _meta(dataset, config, "fewshot")
    if art is not None:
        meta["fragment_count"] = len(art.fragments)
    return Report(
        meta=meta,
        runs=runs,
        aggregate={"overall": _aggregate(all_accs), "by_cell": by_cell},
    )


SWEEP_CLASSIFIERS = ("knn", "logreg", "svm_rbf")


def minsup_sweep(
    config: ExperimentConfig,
    thetas: tuple[float, ...],
    dataset: GraphDataset | None = None,
    classifiers: tuple[str, ...] = SWEEP_CLASSIFIERS,
) -> Report:
    """Fragment-threshold sweep: per theta, fragment count and CV accuracy.

    Mining runs once at the smallest theta; higher thresholds reuse the
    recorded supports (support fractions do not depend on theta), so every
    sweep row is exactly what a standalone mining run would produce.
    """
    thetas = tuple(thetas)
    if not thetas or list(thetas) != sorted(thetas, reverse=True):
        raise ValueError("thetas must be a nonempty descending sequence")
    if not all(0.0 < t <= 1.0 for t in thetas):
        raise ValueError("thetas must lie in (0, 1]")
    dataset = _load(config, dataset)
    base_mining = MiningConfig(theta=min(thetas), max_edges=config.mining.max_edges)
    fragments, supports, decomps = mine_with_decompositions(dataset, base_mining)
    folds = stratified_kfold(dataset, config.folds, config.seed)
    runs: list[dict] = []
    for theta in thetas:
        keep = [i for i, s in enumerate(supports) if s >= theta]
        remap = {old: new for new, old in enumerate(keep)}
        frag_count = len(keep)
        theta_decomps = [
            FragmentDecomposition(
                d.graph_id,
                frozenset(remap[f] for f in d.fragment_ids if f in remap),
            )
            for d in decomps
        ]
        covered = sum(1 for d in theta_decomps if d.fragment_ids)
        if frag_count == 0:
            for kind in classifiers:
                runs.append(
                    {"theta": theta, "classifier": kind, "fragment_count": 0,
                     "degenerate": True, "accuracy": None, "fold_accuracies": []}
                )
            continue
        table = train_pvdbow(
            dataset, theta_decomps, config.embed, n_fragments=frag_count
        )
        vector_sets = [embed_decomposition(d, table) for d in theta_decomps]
        art = PipelineArtifacts(
            [fragments[i] for i in keep], [supports[i] for i in keep],
            theta_decomps, table, vector_sets, {},
        )
        cache, cache_path = _open_cache(dataset, config, theta=theta)
        fold_features = []
        for train_ids, test_ids in folds:
            support = build_support_set(train_ids, dataset.labels)
            _check_leakage(support.ordered_ids, test_ids)
            pair_fn = _make_pair_fn(vector_sets, config.sinkhorn, cache)
            _warm_cache(cache, pair_fn, list(train_ids) + list(test_ids),
                        support.ordered_ids, config.threads)
            matrix, _ = embed_all(dataset, support, pair_fn, cache,
                                  graph_ids=list(train_ids) + list(test_ids))
            fold_features.append((train_ids, test_ids, matrix))
        _persist_cache(cache, cache_path, len(dataset))
        y = np.asarray(dataset.labels)
        for kind in classifiers:
            clf = ClassifierConfig(
                kind=kind, k=config.classifier.k, c_grid=config.classifier.c_grid,
                gamma=config.classifier.gamma, l2=config.classifier.l2,
                max_iters=config.classifier.max_iters, tol=config.classifier.tol,
                seed=config.classifier.seed,
            )
            accs = []
            for train_ids, test_ids, matrix in fold_features:
                n_train = len(train_ids)
                preds = fit_predict(
                    matrix[:n_train], y[list(train_ids)], matrix[n_train:], clf
                )
                accs.append(accuracy(preds, y[list(test_ids)]))
            agg = _aggregate(accs)
            runs.append(
                {"theta": theta, "classifier": kind, "fragment_count": frag_count,
                 "degenerate": False, "covered_graphs": covered,
                 "accuracy": agg["mean"], "std": agg["std"],
                 "fold_accuracies": accs}
            )
    by_cell = {
        f"theta={r['theta']:g}/{r['classifier']}": {
            "classifier": r["classifier"],
            "mean": r["accuracy"],
            "std": r.get("std"),
            "n_runs": len(r["fold_accuracies"]),
            "fragment_count": r["fragment_count"],
        }
        for r in runs
    }
    meta = _meta(dataset, config, "minsup_sweep")
    meta["thetas"] = list(thetas)
    valid = [r["accuracy"] for r in runs if r["accuracy"] is not None]
    return Report(meta=meta, runs=runs,
                  aggregate={"overall": _aggregate(valid), "by_cell": by_cell})


def drift_study(config: ExperimentConfig, dataset: GraphDataset | None = None) -> Report:
    """Distance between each graph's profiles at small vs reference rates.

    For every repeat, a reference support is drawn at reference_eta and one
    support per eta; the per-graph drift is the exact 1-D Wasserstein-2
    between the two normalized profile vectors viewed as scalar point sets.
    """
    from .transport import wasserstein2_1d

    dataset = _load(config, dataset)
    if config.reference_eta < max(config.eta_list):
        raise ValueError("reference_eta must be at least max(eta_list)")
    art = prepare_artifacts(dataset, config.mining, config.embed)
    cache, cache_path = _open_cache(dataset, config)
    pair_fn = _make_pair_fn(art.vector_sets, config.sinkhorn, cache)
    runs: list[dict] = []
    all_ids = list(range(len(dataset)))

    def profile_rows(eta: float, rep: int) -> np.ndarray | None:
        seed = _derived_seed(config.seed, 2, int(round(eta * 1_000_000)), rep)
        try:
            train_ids, _ = stratified_sample(
                dataset, SplitConfig(eta=eta, zeta=min(config.zeta, 1 - eta), seed=seed)
            )
        except InfeasibleSplitError:
            return None
        support = build_support_set(train_ids, dataset.labels)
        _warm_cache(cache, pair_fn, all_ids, support.ordered_ids, config.threads)
        matrix, _ = embed_all(dataset, support, pair_fn, cache)
        return matrix

    for rep in range(config.repeats):
        ref = profile_rows(config.reference_eta, rep)
        if ref is None:
            runs.append({"repeat": rep, "skipped": "reference split infeasible"})
            continue
        for eta in config.eta_list:
            rows = profile_rows(eta, rep)
            if rows is None:
                runs.append({"eta": eta, "repeat": rep,
                             "skipped": "split infeasible", "mean_drift": None})
                continue
            drifts = [
                wasserstein2_1d(ref[i], rows[i]) for i in range(len(dataset))
            ]
            runs.append(
                {"eta": eta, "repeat": rep,
                 "mean_drift": float(np.mean(drifts)),
                 "per_graph_drift": [float(d) for d in drifts]}
            )
    _persist_cache(cache, cache_path, len(dataset))
    by_cell = {}
    for eta in config.eta_list:
        vals = [r["mean_drift"] for r in runs
                if r.get("eta") == eta and r.get("mean_drift") is not None]
        by_cell[f"eta={eta:g}"] = _aggregate(vals)
    meta = _meta(dataset, config, "drift")
    meta["reference_eta"] = config.reference_eta
    all_vals = [r["mean_drift"] for r in runs if r.get("mean_drift") is not None]
    return Report(meta=meta, runs=runs,
                  aggregate={"overall": _aggregate(all_vals), "by_cell": by_cell})
