"""Command-line front end for the pipeline.

Subcommands mirror the pipeline stages (mine, embed-fragments, distances,
embed-metric) and the experiment drivers (cv, fewshot, sweep, drift), plus
cache inspection. Every flag has a config-file equivalent (JSON, same key
with dashes as underscores); precedence is flag > config file > default.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .classifiers import DEFAULT_C_GRID, ClassifierConfig
from .datasets import SplitConfig, load_tudataset, stratified_sample
from .embedding import EmbedConfig, save_table
from .fragments import MiningConfig, save_fragments
from .harness import (
    ExperimentConfig,
    drift_study,
    minsup_sweep,
    prepare_artifacts,
    run_cv,
    run_fewshot,
)
from .metric import DistanceCache, build_support_set, embed_all, export_metric_matrix
from .transport import SinkhornConfig, load_distance_matrix, save_distance_matrix

DEFAULTS: dict = {
    "data_dir": None,
    "min_sup": 0.5,
    "max_edges": 5,
    "dim": 16,
    "epochs": 100,
    "negatives": 5,
    "reg_lambda": 1e-2,
    "sinkhorn_iters": 30,
    "classifier": "knn",
    "k": 3,
    "c_grid": ",".join(f"{c:g}" for c in DEFAULT_C_GRID),
    "gamma": "scale",
    "folds": 10,
    "eta": "0.05,0.2,0.5",
    "zeta": 0.1,
    "repeats": 10,
    "seed": 0,
    "mine_on": "all",
    "cache_dir": None,
    "threads": 1,
    "out": "out",
    "thetas": None,
    "reference_eta": 0.9,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--data-dir", help="dataset directory (TU text format)")
    p.add_argument("--min-sup", type=float, help="fragment support threshold")
    p.add_argument("--max-edges", type=int, help="fragment size cap in edges")
    p.add_argument("--dim", type=int, help="fragment embedding dimension")
    p.add_argument("--epochs", type=int, help="embedding training epochs")
    p.add_argument("--negatives", type=int, help="negative samples per target")
    p.add_argument("--reg-lambda", type=float, help="entropic regularization")
    p.add_argument("--sinkhorn-iters", type=int, help="scaling iteration cap")
    p.add_argument("--classifier", choices=["knn", "logreg", "svm_rbf"])
    p.add_argument("--k", type=int, help="neighbors for knn")
    p.add_argument("--c-grid", help="comma-separated SVM C grid")
    p.add_argument("--gamma", help="'scale' or a fixed RBF gamma value")
    p.add_argument("--folds", type=int, help="cross-validation folds")
    p.add_argument("--eta", help="training rate(s), comma separated")
    p.add_argument("--zeta", type=float, help="test sampling rate")
    p.add_argument("--repeats", type=int, help="repeats per sampling cell")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--mine-on", choices=["all", "train"], dest="mine_on")
    p.add_argument("--cache-dir", help="distance cache directory")
    p.add_argument("--threads", type=int, help="parallel distance workers")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricvec",
        description="Graph classification by transport-distance profiles",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("mine", "mine frequent fragments and write them to a text file"),
        ("embed-fragments", "mine and train fragment/graph vectors"),
        ("distances", "compute the full pairwise distance matrix"),
        ("embed-metric", "export per-graph profile vectors as CSV"),
        ("cv", "stratified k-fold cross-validation"),
        ("fewshot", "training-rate sweep with repeated sampling"),
        ("sweep", "support-threshold sweep (accuracy and fragment counts)"),
        ("drift", "profile drift versus a reference sampling rate"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--thetas", help="descending thresholds, comma separated")
        if name == "drift":
            p.add_argument("--reference-eta", type=float,
                           dest="reference_eta", help="reference sampling rate")
    pc = sub.add_parser("cache", help="list or clear cached distance matrices")
    pc.add_argument("action", choices=["list", "clear"])
    pc.add_argument("--cache-dir", required=True)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)

    def get(key):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        if key in file_cfg and file_cfg[key] is not None:
            return file_cfg[key]
        return DEFAULTS[key]

    return {key: get(key) for key in DEFAULTS}


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x != "")


def _experiment_config(raw: dict) -> ExperimentConfig:
    gamma = raw["gamma"]
    if gamma != "scale":
        gamma = float(gamma)
    return ExperimentConfig(
        data_dir=raw["data_dir"],
        mining=MiningConfig(theta=float(raw["min_sup"]),
                            max_edges=int(raw["max_edges"])),
        embed=EmbedConfig(dim=int(raw["dim"]), epochs=int(raw["epochs"]),
                          negatives=int(raw["negatives"]), seed=int(raw["seed"])),
        sinkhorn=SinkhornConfig(reg_lambda=float(raw["reg_lambda"]),
                                max_iters=int(raw["sinkhorn_iters"])),
        classifier=ClassifierConfig(
            kind=raw["classifier"], k=int(raw["k"]),
            c_grid=tuple(sorted(_floats(raw["c_grid"]))), gamma=gamma,
            seed=int(raw["seed"]),
        ),
        folds=int(raw["folds"]),
        eta_list=_floats(raw["eta"]),
        zeta=float(raw["zeta"]),
        repeats=int(raw["repeats"]),
        reference_eta=float(raw["reference_eta"]),
        seed=int(raw["seed"]),
        mine_on=raw["mine_on"],
        cache_dir=raw["cache_dir"],
        threads=int(raw["threads"]),
    )


def _require_data(raw: dict) -> "GraphDataset":
    if not raw["data_dir"]:
        raise SystemExit2("--data-dir (or config data_dir) is required")
    return load_tudataset(raw["data_dir"])


class SystemExit2(RuntimeError):
    """Validation failure: maps to exit code 2."""


def _print_cells(report) -> None:
    cells = report.aggregate.get("by_cell")
    if cells:
        for key in sorted(cells):
            cell = cells[key]
            extra = (f" fragments={cell['fragment_count']}"
                     if "fragment_count" in cell else "")
            if cell["mean"] is None:
                print(f"{key}: no valid runs{extra}")
            else:
                print(f"{key}: mean={cell['mean']:.4f} std={cell['std']:.4f} "
                      f"n={cell['n_runs']}{extra}")
    overall = report.aggregate.get("overall")
    if overall and overall["mean"] is not None:
        print(f"overall: mean={overall['mean']:.4f} std={overall['std']:.4f} "
              f"n={overall['n_runs']}")


def _emit(report, out_dir: Path) -> None:
    from .plotting import render_report

    out_dir.mkdir(parents=True, exist_ok=True)
    report.save_json(out_dir / "report.json")
    report.save_csv(out_dir / "summary.csv")
    figure = render_report(report, out_dir)
    _print_cells(report)
    print(f"report: {out_dir / 'report.json'}")
    print(f"summary: {out_dir / 'summary.csv'}")
    if figure:
        print(f"figure: {figure}")


def _cmd_mine(raw: dict, out_dir: Path) -> None:
    from .fragments import mine_with_decompositions

    dataset = _require_data(raw)
    cfg = MiningConfig(theta=float(raw["min_sup"]), max_edges=int(raw["max_edges"]))
    fragments, supports, _ = mine_with_decompositions(dataset, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "fragments.txt"
    save_fragments(path, fragments, supports)
    print(f"{dataset.name}: {len(fragments)} frequent fragments at "
          f"min-sup={raw['min_sup']} -> {path}")


def _cmd_embed_fragments(raw: dict, out_dir: Path) -> None:
    dataset = _require_data(raw)
    cfg = _experiment_config(raw)
    art = prepare_artifacts(dataset, cfg.mining, cfg.embed)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_fragments(out_dir / "fragments.txt", art.fragments, art.supports)
    save_table(out_dir / "embeddings.txt", art.table)
    print(f"{dataset.name}: {len(art.fragments)} fragments embedded in "
          f"dim={cfg.embed.dim} -> {out_dir / 'embeddings.txt'}")


def _pairwise_matrix(dataset, cfg: ExperimentConfig) -> np.ndarray:
    from .harness import _make_pair_fn, _warm_cache, _cache_params

    art = prepare_artifacts(dataset, cfg.mining, cfg.embed)
    cache = DistanceCache(params=_cache_params(dataset, cfg))
    pair_fn = _make_pair_fn(art.vector_sets, cfg.sinkhorn, cache)
    ids = list(range(len(dataset)))
    _warm_cache(cache, pair_fn, ids, ids, cfg.threads)
    n = len(dataset)
    matrix = np.zeros((n, n))
    for (i, j), d in cache.values.items():
        matrix[i, j] = matrix[j, i] = d
    return matrix


def _cmd_distances(raw: dict, out_dir: Path) -> None:
    from .harness import _cache_params

    dataset = _require_data(raw)
    cfg = _experiment_config(raw)
    matrix = _pairwise_matrix(dataset, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "distances.bin"
    save_distance_matrix(path, matrix, _cache_params(dataset, cfg))
    print(f"{dataset.name}: {matrix.shape[0]}x{matrix.shape[1]} distances -> {path}")


def _cmd_embed_metric(raw: dict, out_dir: Path) -> None:
    from .harness import _cache_params, _make_pair_fn, _warm_cache

    dataset = _require_data(raw)
    cfg = _experiment_config(raw)
    etas = cfg.eta_list
    if len(etas) != 1:
        raise SystemExit2("embed-metric needs exactly one --eta value")
    train_ids, _ = stratified_sample(
        dataset, SplitConfig(eta=etas[0], zeta=min(cfg.zeta, 1 - etas[0]),
                             seed=cfg.seed)
    )
    art = prepare_artifacts(dataset, cfg.mining, cfg.embed)
    support = build_support_set(train_ids, dataset.labels)
    cache = DistanceCache(params=_cache_params(dataset, cfg))
    pair_fn = _make_pair_fn(art.vector_sets, cfg.sinkhorn, cache)
    _warm_cache(cache, pair_fn, list(range(len(dataset))), support.ordered_ids,
                cfg.threads)
    matrix, _ = embed_all(dataset, support, pair_fn, cache)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "metric_vectors.csv"
    export_metric_matrix(path, matrix, dataset.labels)
    print(f"{dataset.name}: {matrix.shape[0]} profiles of width "
          f"{matrix.shape[1]} -> {path}")


def _cmd_cache(args: argparse.Namespace) -> None:
    cache_dir = Path(args.cache_dir)
    entries = sorted(cache_dir.glob("*.bin")) if cache_dir.is_dir() else []
    if args.action == "list":
        if not entries:
            print(f"no cache entries under {cache_dir}")
        for path in entries:
            try:
                matrix, params = load_distance_matrix(path)
                print(f"{path.name}: {matrix.shape[0]}x{matrix.shape[1]} {params}")
            except ValueError as exc:
                print(f"{path.name}: unreadable ({exc})")
    else:
        for path in entries:
            path.unlink()
            sidecar = path.with_suffix(path.suffix + ".json")
            if sidecar.is_file():
                sidecar.unlink()
        print(f"cleared {len(entries)} cache entries under {cache_dir}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "cache":
            _cmd_cache(args)
            return 0
        raw = _resolve(args)
        if args.command == "sweep" and not raw.get("thetas"):
            raise SystemExit2("sweep requires --thetas (descending, comma separated)")
        out_dir = Path(raw["out"])
        if args.command == "mine":
            _cmd_mine(raw, out_dir)
        elif args.command == "embed-fragments":
            _cmd_embed_fragments(raw, out_dir)
        elif args.command == "distances":
            _cmd_distances(raw, out_dir)
        elif args.command == "embed-metric":
            _cmd_embed_metric(raw, out_dir)
        else:
            cfg = _experiment_config(raw)
            dataset = _require_data(raw)
            if args.command == "cv":
                report = run_cv(cfg, dataset)
            elif args.command == "fewshot":
                report = run_fewshot(cfg, dataset)
            elif args.command == "sweep":
                thetas = tuple(sorted(_floats(raw["thetas"]), reverse=True))
                report = minsup_sweep(cfg, thetas, dataset)
            else:
                report = drift_study(cfg, dataset)
            _emit(report, out_dir)
    except (SystemExit2, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failure
        print(f"pipeline failure: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        traceback.print_exc(limit=4)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
