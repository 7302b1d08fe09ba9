"""Command line pipeline: synth, preprocess, cluster, consensus, select-k, report.

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .algorithms import cut_dendrogram, gaussian_affinity, hierarchical, kmeans, spectral
from .config import BASE_NAMES, load_config, parse_k_range
from .consensus import (
    BaseParams,
    child_seed,
    consensus_cdf,
    consensus_matrix,
    consensus_partition,
    generate_ensemble,
    select_k,
    PARTITION_STREAM,
)
from .errors import ClusteringError, ConfigError
from .ingestion import (
    load_expression_matrix,
    merge_views,
    select_by_variance,
    transform,
    write_expression_matrix,
    write_selection_report,
    ViewSet,
)
from .matrix import pairwise_distances
from .metrics import adjusted_rand_index, reorder_for_heatmap, silhouette_widths, write_order_csv, write_silhouette_csv
from .report import render_report
from .snf import SNFParams, snf_network
from .synthetic import SyntheticSpec, generate

log = logging.getLogger("consensus_subtypes")


def snf_params(cfg):
    return SNFParams(cfg.snf_k_neighbors or None, cfg.snf_mu, cfg.snf_iterations, cfg.metric)


def base_params(cfg):
    return BaseParams(
        metric=cfg.metric,
        linkage=cfg.linkage,
        kmeans_init=cfg.init,
        n_init=cfg.ensemble_n_init,
        affinity_scale=cfg.affinity_scale,
        snf=snf_params(cfg),
    )


def prepare_views(cfg):
    """Load, transform, merge and variance-filter the configured inputs."""
    raw = []
    for path in cfg.inputs:
        X = load_expression_matrix(path, cfg.orientation)
        if cfg.log2 or cfg.standardize:
            X = transform(X, cfg.log2, cfg.standardize)
        raw.append(X)
    merged = merge_views(raw)
    views, reports = [], []
    for i, X in enumerate(merged):
        n_top = cfg.n_top_for(i)
        if n_top is not None:
            if n_top > X.n_features:
                raise ConfigError(f"n_top={n_top} exceeds the {X.n_features} complete features of {X.name!r}")
            X, rep = select_by_variance(X, n_top)
            reports.append(rep)
        views.append(X)
    return ViewSet(views), reports


def silhouette_distance(views, cfg, network=None):
    """Distance used to score a partition: fused-network based for SNF."""
    if cfg.algorithm == "snf":
        network = network or snf_network(views, snf_params(cfg))
        return network.silhouette_distance()
    return pairwise_distances(views.concatenated(), cfg.metric)


def cluster_views(views, cfg):
    """Run the configured base algorithm at ``cfg.k``; returns (assignment, extras)."""
    k, seed = cfg.k, cfg.seed
    if k > views.n_samples:
        raise ConfigError(f"k={k} exceeds the {views.n_samples} samples")
    extras = {}
    if cfg.algorithm == "kmeans":
        res = kmeans(views.concatenated(), k, init=cfg.init, seed=seed, n_init=cfg.n_init)
        extras["kmeans"] = res
        return res.assignment, extras
    if cfg.algorithm == "snf":
        net = snf_network(views, snf_params(cfg))
        A = net.fused.copy()
        A[np.diag_indices_from(A)] = 0.0
        extras["network"] = net
        return spectral(A, k, seed=seed), extras
    D = pairwise_distances(views.concatenated(), cfg.metric)
    extras["distances"] = D
    if cfg.algorithm == "hier":
        dend = hierarchical(D, cfg.linkage)
        extras["dendrogram"] = dend
        return cut_dendrogram(dend, k), extras
    return spectral(gaussian_affinity(D, cfg.affinity_scale), k, seed=seed), extras


def _outdir(cfg, command):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.ini")
    with open(out / "config.ini", "a", encoding="utf-8") as fh:
        fh.write(f"[command]\nname = {command}\n")
    return out


def _write_silhouette(out, views, assignment, D, summary):
    if assignment.k < 2:
        summary.append("ASW: undefined for a single cluster")
        artifacts.write_rows(out / "silhouette.csv", ["sample_id", "cluster", "width"],
                             [(s, 0, 0.0) for s in views.sample_ids])
        return None
    rep = silhouette_widths(D, assignment)
    write_silhouette_csv(rep, views.sample_ids, out / "silhouette.csv")
    summary.append(f"ASW: {rep.asw:.6f}")
    return rep


def _planted_ari(cfg, views, assignment, summary):
    if not cfg.labels:
        return None
    ids, labels = artifacts.read_assignment(cfg.labels)
    index = dict(zip(ids, labels))
    missing = [s for s in views.sample_ids if s not in index]
    if missing:
        raise ConfigError(f"labels file lacks sample {missing[0]!r}")
    ari = adjusted_rand_index([index[s] for s in views.sample_ids], assignment.labels)
    summary.append(f"ARI vs reference labels: {ari:.6f}")
    return ari


def _finish(out, summary):
    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    print("\n".join(summary))


def cmd_synth(cfg):
    spec = SyntheticSpec(
        cfg.synth_k, cfg.synth_n_per_cluster, cfg.synth_dims, cfg.synth_separation,
        cfg.synth_views, cfg.synth_noise_views, cfg.seed,
    )
    views, labels = generate(spec)
    out = _outdir(cfg, "synth")
    for v in views:
        write_expression_matrix(v, out / f"{v.name}.tsv")
    artifacts.write_assignment(out / "labels.csv", views.sample_ids, labels)
    _finish(out, [f"wrote {len(views)} view(s) and labels.csv for {views.n_samples} samples, k={spec.k}"])
    return 0


def cmd_preprocess(cfg):
    views, reports = prepare_views(cfg)
    out = _outdir(cfg, "preprocess")
    summary = [f"samples after merge: {views.n_samples}"]
    for v in views:
        write_expression_matrix(v, out / f"{v.name}.tsv")
        summary.append(f"view {v.name}: {v.n_features} features")
    for rep in reports:
        write_selection_report(rep, out / f"selection_{rep.view}.csv")
        summary.append(f"view {rep.view}: kept {int(rep.kept.sum())} features, variance explained {rep.variance_explained:.6f}")
    _finish(out, summary)
    return 0


def cmd_cluster(cfg):
    views, _ = prepare_views(cfg)
    assignment, extras = cluster_views(views, cfg)
    out = _outdir(cfg, "cluster")
    artifacts.write_assignment(out / "assignment.csv", views.sample_ids, assignment)
    summary = [f"algorithm: {cfg.algorithm}", f"k: {assignment.k}", f"samples: {views.n_samples}"]
    if "kmeans" in extras:
        res = extras["kmeans"]
        artifacts.write_rows(out / "centers.csv", ["cluster", *[f"dim{j}" for j in range(res.centers.shape[1])]],
                             [(c, *map(float, row)) for c, row in enumerate(res.centers)])
        artifacts.write_rows(out / "objective_trace.csv", ["iteration", "objective"],
                             [(i + 1, float(v)) for i, v in enumerate(res.objective_trace)])
        summary.append(f"k-means objective: {res.objective:.6f} after {res.iterations} iterations")
    if "dendrogram" in extras:
        artifacts.write_rows(out / "dendrogram.csv", ["left", "right", "height", "size"],
                             [(l, r, float(h), s) for l, r, h, s in extras["dendrogram"].merges])
    if "network" in extras:
        artifacts.write_square(out / "fused.csv", views.sample_ids, extras["network"].fused)
    D = extras.get("distances")
    if D is None:
        D = silhouette_distance(views, cfg, extras.get("network"))
    _write_silhouette(out, views, assignment, D, summary)
    _planted_ari(cfg, views, assignment, summary)
    _finish(out, summary)
    return 0


def run_consensus_pipeline(views, cfg, k):
    base = BASE_NAMES[cfg.algorithm]
    ens = generate_ensemble(base, views, k, cfg.ensemble_size, cfg.resample_fraction, cfg.feature_fraction,
                            cfg.seed, base_params(cfg), cfg.threads)
    M = consensus_matrix(ens, views.n_samples)
    assignment = consensus_partition(M, k, seed=child_seed(cfg.seed, PARTITION_STREAM))
    return M, assignment


def cmd_consensus(cfg):
    views, _ = prepare_views(cfg)
    M, assignment = run_consensus_pipeline(views, cfg, cfg.k)
    curve = consensus_cdf(M)
    out = _outdir(cfg, "consensus")
    ids = views.sample_ids
    artifacts.write_square(out / "consensus_matrix.csv", ids, M.values)
    artifacts.write_square(out / "together_counts.csv", ids, M.together, integer=True)
    artifacts.write_square(out / "cosample_counts.csv", ids, M.cosample, integer=True)
    order = reorder_for_heatmap(M, assignment)
    write_order_csv(order, ids, out / "heatmap_order.csv")
    artifacts.write_square(out / "consensus_heatmap.csv", [ids[i] for i in order], M.values[np.ix_(order, order)])
    artifacts.write_cdf(out / "cdf.csv", curve)
    artifacts.write_assignment(out / "assignment.csv", ids, assignment)
    summary = [
        f"algorithm: consensus over {cfg.algorithm}",
        f"k: {assignment.k}",
        f"samples: {views.n_samples}",
        f"ensemble size: {cfg.ensemble_size}, resample fraction: {cfg.resample_fraction}",
        f"CDF flatness on [0.1, 0.9]: {curve.flatness:.6f}",
        f"never co-sampled pairs: {int(np.triu(M.never_cosampled, 1).sum())}",
    ]
    _write_silhouette(out, views, assignment, silhouette_distance(views, cfg), summary)
    _planted_ari(cfg, views, assignment, summary)
    _finish(out, summary)
    return 0


def cmd_select_k(cfg):
    views, _ = prepare_views(cfg)
    report = select_k(BASE_NAMES[cfg.algorithm], views, cfg.k_range, cfg.ensemble_size, cfg.resample_fraction,
                      cfg.feature_fraction, cfg.seed, base_params(cfg), cfg.threads, cfg.tau, cfg.flatness_max)
    out = _outdir(cfg, "select-k")
    ids = views.sample_ids
    for k in report.ks:
        artifacts.write_cdf(out / f"cdf_k{k}.csv", report.curves[k])
        artifacts.write_square(out / f"consensus_matrix_k{k}.csv", ids, report.matrices[k].values)
        part = consensus_partition(report.matrices[k], k, seed=child_seed(cfg.seed, k, PARTITION_STREAM))
        write_order_csv(reorder_for_heatmap(report.matrices[k], part), ids, out / f"heatmap_order_k{k}.csv")
    artifacts.write_k_selection(out / "k_selection.csv", report)
    _finish(out, [f"algorithm: consensus over {cfg.algorithm}", report.summary()])
    return 0


def cmd_report(cfg, run_dir):
    written = render_report(run_dir)
    print((Path(run_dir) / "report.txt").read_text(encoding="utf-8"), end="")
    for name, path in written.items():
        log.info("wrote %s: %s", name, path)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file; flags override its values")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--threads", type=int, help="worker threads for ensemble generation")
    common.add_argument("--output-dir", help="directory for all artifacts")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", action="append", help="expression file (repeat per view)")
    data.add_argument("--orientation", choices=["features_as_rows", "samples_as_rows"])
    data.add_argument("--n-top", action="append", type=int, help="top-variance features to keep (repeat per view)")
    data.add_argument("--log2", action="store_true", default=None, help="apply log2(x+1)")
    data.add_argument("--standardize", action="store_true", default=None, help="z-score each feature")
    data.add_argument("--labels", help="reference labels CSV (sample_id,cluster) for ARI")

    algo = argparse.ArgumentParser(add_help=False)
    algo.add_argument("--algorithm", choices=["kmeans", "hier", "spectral", "snf"])
    algo.add_argument("--k", type=int)
    algo.add_argument("--linkage", choices=["single", "complete", "average"])
    algo.add_argument("--metric", choices=["euclidean", "squared_euclidean", "correlation"])
    algo.add_argument("--init", choices=["kmeanspp", "random"])
    algo.add_argument("--n-init", type=int)
    algo.add_argument("--affinity-scale", choices=["global_median", "local_knn"])
    algo.add_argument("--snf-k-neighbors", type=int)
    algo.add_argument("--snf-mu", type=float)
    algo.add_argument("--snf-iterations", type=int)

    ens = argparse.ArgumentParser(add_help=False)
    ens.add_argument("--ensemble-size", type=int)
    ens.add_argument("--resample-fraction", type=float)
    ens.add_argument("--feature-fraction", type=float)
    ens.add_argument("--ensemble-n-init", type=int, help="k-means restarts inside each ensemble instance")
    ens.add_argument("--k-range", help="e.g. 2-6 or 2,3,4")
    ens.add_argument("--tau", type=float, help="delta-area threshold")
    ens.add_argument("--flatness-max", type=float)

    parser = _Parser(prog="consensus-subtypes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("preprocess", parents=[common, data], help="merge views and select features")
    sub.add_parser("cluster", parents=[common, data, algo], help="one base clustering at fixed k")
    sub.add_parser("consensus", parents=[common, data, algo, ens], help="consensus clustering at fixed k")
    sub.add_parser("select-k", parents=[common, data, algo, ens], help="consensus CDF model selection")
    rep = sub.add_parser("report", parents=[common], help="render SVG figures for a run directory")
    rep.add_argument("run_dir")
    syn = sub.add_parser("synth", parents=[common], help="write a planted-partition dataset")
    syn.add_argument("--k", dest="synth_k", type=int)
    syn.add_argument("--n-per-cluster", dest="synth_n_per_cluster", type=int)
    syn.add_argument("--dims", dest="synth_dims", type=int)
    syn.add_argument("--separation", dest="synth_separation", type=float)
    syn.add_argument("--views", dest="synth_views", type=int)
    syn.add_argument("--noise-views", dest="synth_noise_views", type=int)
    return parser


COMMANDS = {
    "preprocess": cmd_preprocess,
    "cluster": cmd_cluster,
    "consensus": cmd_consensus,
    "select-k": cmd_select_k,
    "synth": cmd_synth,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "run_dir")}
    overrides["inputs"] = overrides.pop("input", None)
    if overrides.get("k_range") is not None:
        overrides["k_range"] = parse_k_range(overrides["k_range"])
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "report":
            return cmd_report(cfg, args.run_dir)
        cfg.validate(args.command)
        return COMMANDS[args.command](cfg)
    except ClusteringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
