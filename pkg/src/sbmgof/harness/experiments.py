"""Simulation experiments and the real-data workflow.

Every replicate draws all of its randomness from ``SeededRng(seed, key)``
where ``key`` starts with the replicate index and continues with the cell of
the design it belongs to. Replicates may therefore run in any order, in any
number of worker processes, and still produce the same rows; rows are always
collected in replicate order before they are written.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import gaussian_kde
from threadpoolctl import threadpool_limits

from .. import __version__
from ..errors import ParameterError
from ..gof import DEFAULT_CLAMP, bootstrap_result, edge_statistics, fit_null, gof_test, bootstrap_corrected_test, plain_result
from ..netgen import (
    BlockMatrix,
    DcbmParams,
    Membership,
    MmbmParams,
    balanced_membership,
    generate_dcbm,
    generate_mmbm,
    generate_sbm,
    largest_connected_component,
    random_membership,
    read_edge_list,
    read_labels,
    sample_dirichlet_rows,
)
from ..rng import GRAPH, MEMBERSHIP, PARAMS, TEST, SeededRng
from ..select import QuantileThreshold, estimate_k
from ..tracy_widom import load_tw1
from .config import ExperimentSpec, ModelConfig, level_power_blocks

log = logging.getLogger(__name__)

MODEL_CODES = {"null": 0, "finer": 1, "dcbm": 2, "mmbm": 3}
NULL_DIST_MODEL = {"within": 0.7, "between": 0.3, "membership": "balanced"}


@dataclass
class ExperimentOutput:
    """Rows produced by an experiment and the files they were written to."""

    tables: dict[str, list[dict]]
    files: list[Path] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Replicate execution and output
# ---------------------------------------------------------------------------


def _single_thread_init():
    threadpool_limits(1)


def _run_one(job):
    func, task = job
    with threadpool_limits(1):
        return func(task)


def run_replicates(func: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Apply ``func`` to every task and return results in task order.

    BLAS is pinned to one thread in every mode so that results are
    bit-identical whatever the worker count.
    """
    jobs = [(func, t) for t in tasks]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_single_thread_init) as pool:
        return list(pool.map(_run_one, jobs, chunksize=1))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, rows: list[dict], columns: Sequence[str] | None = None) -> Path:
    columns = list(columns or (rows[0].keys() if rows else []))
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def write_metadata(data_path: Path, spec: dict, seed: int) -> Path:
    """Sidecar JSON next to a data file; the only place a timestamp appears."""
    meta = {
        "data_file": data_path.name,
        "spec": spec,
        "seed": seed,
        "artifact_version": __version__,
        "tw1_table_sha256": load_tw1().sha256,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    meta_path = data_path.with_name(data_path.name + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta_path


def write_density(path: Path, samples: np.ndarray, points: int = 256) -> Path:
    """Two-column Gaussian kernel density estimate, Silverman bandwidth."""
    samples = np.asarray(samples, dtype=float)
    kde = gaussian_kde(samples, bw_method="silverman")
    bw = float(np.sqrt(kde.covariance[0, 0]))
    grid = np.linspace(samples.min() - 3 * bw, samples.max() + 3 * bw, points)
    dens = kde(grid)
    path.write_text("# x density\n" + "".join(f"{x!r} {d!r}\n" for x, d in zip(grid.tolist(), dens.tolist())))
    return path


def _emit(spec: ExperimentSpec, output: ExperimentOutput, name: str, rows: list[dict], columns=None) -> None:
    output.tables[name] = rows
    if spec.out is None:
        return
    path = write_csv(Path(spec.out) / f"{name}.csv", rows, columns)
    output.files += [path, write_metadata(path, spec.to_dict(), spec.seed)]


# ---------------------------------------------------------------------------
# Null distribution
# ---------------------------------------------------------------------------


def _null_replicate(task):
    spec_doc, r = task
    spec = ExperimentSpec.from_dict(spec_doc)
    cfg = _null_model(spec)
    rng = SeededRng(spec.seed, (r,))
    g = cfg.draw_membership(rng.child(MEMBERSHIP))
    graph = generate_sbm(g, cfg.blocks(), rng.child(GRAPH))
    test_rng = rng.child(TEST)
    fit = fit_null(graph, cfg.K, ghat=g if spec.use_true_membership else None, rng=test_rng)
    t1, tn = edge_statistics(fit.extremes, graph.n)
    row = {
        "replicate": r,
        "lambda_1": fit.extremes.lambda_1,
        "lambda_n": fit.extremes.lambda_n,
        "scaled_lambda_1": t1,
        "scaled_lambda_n": tn,
        "boot_lambda_1": None,
        "boot_lambda_n": None,
    }
    if "bootstrap" in spec.modes:
        res = bootstrap_result(fit, 0.05, spec.M, test_rng)
        row["boot_lambda_1"] = res.bootstrap.corrected_lambda_1
        row["boot_lambda_n"] = res.bootstrap.corrected_lambda_n
    return row


def _null_model(spec: ExperimentSpec) -> ModelConfig:
    doc = dict(NULL_DIST_MODEL) if not spec.model else {}
    return spec.model_config(**doc)


NULL_COLUMNS = ["replicate", "lambda_1", "lambda_n", "scaled_lambda_1", "scaled_lambda_n", "boot_lambda_1", "boot_lambda_n"]


def run_null_distribution(spec: ExperimentSpec) -> ExperimentOutput:
    """Scaled and bootstrap-corrected extreme eigenvalues under the null."""
    if spec.kind != "null-dist":
        raise ParameterError(f"expected a null-dist spec, got {spec.kind!r}")
    _null_model(spec)
    doc = spec.to_dict()
    rows = run_replicates(_null_replicate, [(doc, r) for r in range(spec.reps)], spec.workers)
    out = ExperimentOutput({})
    _emit(spec, out, "null_samples", rows, NULL_COLUMNS)
    if spec.out is not None:
        out_dir = Path(spec.out)
        # a kernel estimate needs at least two distinct samples
        for col in NULL_COLUMNS[3:]:
            vals = np.array([row[col] for row in rows if row[col] is not None], dtype=float)
            if vals.size >= 2 and np.ptp(vals) > 0:
                out.files.append(write_density(out_dir / f"density_{col}.dat", vals))
        tw = load_tw1()
        grid = np.linspace(-6.0, 6.0, 481)
        ref = out_dir / "density_tw1.dat"
        ref.write_text("# x density\n" + "".join(f"{x!r} {d!r}\n" for x, d in zip(grid.tolist(), tw.pdf(grid).tolist())))
        out.files.append(ref)
    return out


# ---------------------------------------------------------------------------
# Level and power
# ---------------------------------------------------------------------------


def error_table_graph(model: str, K0: int, n: int, rng: SeededRng):
    """A graph from one column of the level/power design for hypothesis ``K0``."""
    K = K0 + 1 if model == "finer" else K0
    b = level_power_blocks(K)
    if model == "mmbm":
        phi = sample_dirichlet_rows(n, K, 0.5, rng.child(PARAMS))
        return generate_mmbm(MmbmParams(b, phi), rng.child(GRAPH))
    g = random_membership(n, K, rng.child(MEMBERSHIP))
    if model == "dcbm":
        psi = rng.child(PARAMS).generator.uniform(0.0, 1.0, size=n)
        return generate_dcbm(DcbmParams(g, b, psi), rng.child(GRAPH))
    return generate_sbm(g, b, rng.child(GRAPH))


def _error_replicate(task):
    spec_doc, r, K0, model = task
    spec = ExperimentSpec.from_dict(spec_doc)
    rng = SeededRng(spec.seed, (r, K0, MODEL_CODES[model]))
    graph = error_table_graph(model, K0, spec.n, rng)
    test_rng = rng.child(TEST)
    fit = fit_null(graph, K0, rng=test_rng)
    row = {"replicate": r, "K0": K0, "model": model}
    for mode in ("plain", "bootstrap"):
        row[f"statistic_{mode}"] = None
        row[f"reject_{mode}"] = None
    if "plain" in spec.modes:
        res = plain_result(fit, spec.alpha)
        row["statistic_plain"], row["reject_plain"] = res.statistic, res.reject
    if "bootstrap" in spec.modes:
        res = bootstrap_result(fit, spec.alpha, spec.M, test_rng)
        row["statistic_bootstrap"], row["reject_bootstrap"] = res.statistic, res.reject
    return row


def run_error_table(spec: ExperimentSpec) -> ExperimentOutput:
    """Rejection proportions for every (mode, K0, model) cell."""
    if spec.kind != "error-table":
        raise ParameterError(f"expected an error-table spec, got {spec.kind!r}")
    doc = spec.to_dict()
    tasks = [(doc, r, int(k0), m) for k0 in spec.K0 for m in spec.models for r in range(spec.reps)]
    rows = run_replicates(_error_replicate, tasks, spec.workers)
    table = []
    for mode in spec.modes:
        for k0 in spec.K0:
            for m in spec.models:
                hits = [row[f"reject_{mode}"] for row in rows if row["K0"] == k0 and row["model"] == m]
                table.append(
                    {
                        "mode": mode,
                        "K0": k0,
                        "model": m,
                        "rejections": int(sum(hits)),
                        "reps": len(hits),
                        "proportion": sum(hits) / len(hits),
                    }
                )
    out = ExperimentOutput({})
    _emit(spec, out, "error_replicates", rows,
          ["replicate", "K0", "model", "statistic_plain", "reject_plain", "statistic_bootstrap", "reject_bootstrap"])
    _emit(spec, out, "error_table", table, ["mode", "K0", "model", "rejections", "reps", "proportion"])
    return out


# ---------------------------------------------------------------------------
# Estimating K
# ---------------------------------------------------------------------------


def random_blocks(K: int, rng: SeededRng, min_singular: float = 0.1, max_draws: int = 1000) -> BlockMatrix:
    """Upper-triangular entries iid Unif(0, 0.5), redrawn until sigma_min >= min_singular."""
    gen = rng.generator
    iu = np.triu_indices(K)
    for _ in range(max_draws):
        b = np.zeros((K, K))
        b[iu] = gen.uniform(0.0, 0.5, size=iu[0].size)
        b = b + np.triu(b, 1).T
        if np.linalg.svd(b, compute_uv=False).min() >= min_singular:
            return BlockMatrix(b)
    raise ParameterError(f"no {K}x{K} block matrix with sigma_min >= {min_singular} in {max_draws} draws")


def _select_cells(spec: ExperimentSpec) -> list[tuple]:
    if spec.design == "r-sweep":
        return [("r-sweep", spec.n, float(r), int(K)) for r in spec.r_values for K in spec.K]
    return [("random-B", int(n), None, int(K)) for n in spec.n_values for K in spec.K]


def _select_replicate(task):
    spec_doc, rep, cell = task
    spec = ExperimentSpec.from_dict(spec_doc)
    design, n, r, K = cell
    if design == "r-sweep":
        rng = SeededRng(spec.seed, (rep, 0, K, int(round(r * 1e6))))
        g = balanced_membership(n, K)
        b = BlockMatrix(r * (1 + 2 * np.eye(K)))
    else:
        rng = SeededRng(spec.seed, (rep, 1, K, n))
        if spec.resample_blocks:
            b = random_blocks(K, rng.child(PARAMS), spec.min_singular, spec.max_block_draws)
        else:
            b = BlockMatrix(np.asarray(spec.model["B"], dtype=float))
        g = random_membership(n, K, rng.child(MEMBERSHIP))
    graph = generate_sbm(g, b, rng.child(GRAPH))
    rows = []
    for mode in spec.modes:
        res = estimate_k(
            graph,
            QuantileThreshold(spec.alpha),
            k_max=spec.k_max,
            bootstrap=mode == "bootstrap",
            M=spec.M,
            rng=rng.child(TEST),
        )
        rows.append(
            {
                "replicate": rep,
                "design": design,
                "n": n,
                "r": r,
                "K": K,
                "mode": mode,
                "k_hat": res.k_hat,
                "correct": res.k_hat == K,
                "capped": res.capped,
                "statistics": " ".join(repr(s.statistic) for s in res.trace),
            }
        )
    return rows


def run_select_k_table(spec: ExperimentSpec) -> ExperimentOutput:
    """Proportion of correct sequential estimates of K for every design cell."""
    if spec.kind != "select-k":
        raise ParameterError(f"expected a select-k spec, got {spec.kind!r}")
    doc = spec.to_dict()
    cells = _select_cells(spec)
    tasks = [(doc, rep, cell) for cell in cells for rep in range(spec.reps)]
    rows = [row for chunk in run_replicates(_select_replicate, tasks, spec.workers) for row in chunk]
    table = []
    for mode in spec.modes:
        for design, n, r, K in cells:
            hits = [row["correct"] for row in rows
                    if row["mode"] == mode and row["n"] == n and row["r"] == r and row["K"] == K]
            table.append(
                {
                    "design": design,
                    "mode": mode,
                    "n": n,
                    "r": r,
                    "K": K,
                    "correct": int(sum(hits)),
                    "reps": len(hits),
                    "proportion": sum(hits) / len(hits),
                }
            )
    out = ExperimentOutput({})
    _emit(spec, out, "select_k_replicates", rows,
          ["replicate", "design", "n", "r", "K", "mode", "k_hat", "correct", "capped", "statistics"])
    _emit(spec, out, "select_k_table", table, ["design", "mode", "n", "r", "K", "correct", "reps", "proportion"])
    return out


# ---------------------------------------------------------------------------
# Single-graph experiments
# ---------------------------------------------------------------------------


def run_single_test(spec: ExperimentSpec) -> ExperimentOutput:
    cfg = spec.model_config()
    rows = []
    for rep in range(spec.reps):
        rng = SeededRng(spec.seed, (rep,))
        graph, _ = cfg.generate(rng)
        for k0 in spec.K0:
            for mode in spec.modes:
                if mode == "bootstrap":
                    res = bootstrap_corrected_test(graph, int(k0), spec.alpha, spec.M, rng=rng.child(TEST))
                else:
                    res = gof_test(graph, int(k0), spec.alpha, rng=rng.child(TEST))
                rows.append({"replicate": rep, **{k: v for k, v in res.to_dict().items() if k != "bootstrap"}})
    out = ExperimentOutput({})
    _emit(spec, out, "single_test", rows)
    return out


def run_estimate_k(spec: ExperimentSpec) -> ExperimentOutput:
    cfg = spec.model_config()
    rows = []
    for rep in range(spec.reps):
        rng = SeededRng(spec.seed, (rep,))
        graph, _ = cfg.generate(rng)
        for mode in spec.modes:
            res = estimate_k(graph, QuantileThreshold(spec.alpha), spec.k_max, mode == "bootstrap", spec.M, rng.child(TEST))
            rows.append({"replicate": rep, "mode": mode, "k_hat": res.k_hat, "capped": res.capped,
                         "trace": json.dumps(res.to_dict()["trace"])})
    out = ExperimentOutput({})
    _emit(spec, out, "estimate_k", rows)
    return out


RUNNERS = {
    "null-dist": run_null_distribution,
    "error-table": run_error_table,
    "select-k": run_select_k_table,
    "single-test": run_single_test,
    "estimate-k": run_estimate_k,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentOutput:
    return RUNNERS[spec.kind](spec)


# ---------------------------------------------------------------------------
# Real data
# ---------------------------------------------------------------------------


def _align_labels(tokens: list[str], n_full: int, index_map: np.ndarray) -> Membership:
    if len(tokens) == n_full:
        tokens = [tokens[k] for k in index_map]
    elif len(tokens) != index_map.size:
        raise ParameterError(
            f"label file has {len(tokens)} labels but the graph has {n_full} nodes "
            f"and its largest component {index_map.size}"
        )
    return Membership.from_labels(tokens)


def run_real_data(
    path,
    labels=None,
    K0: int = 2,
    alpha: float = 0.05,
    bootstrap: int | None = None,
    seed: int = 0,
    indexing: int = 0,
    sequential_alpha: float | None = None,
    k_max: int | None = None,
    clamp_eps: float = DEFAULT_CLAMP,
) -> dict:
    """Test a network read from an edge list, restricted to its largest component.

    Labels (one per line) may cover every node of the file or only the
    component; they serve as the estimated membership when given. With
    ``sequential_alpha`` the report also carries a sequential estimate of K
    and its partition.
    """
    full = read_edge_list(path, indexing=indexing)
    graph, index_map = largest_connected_component(full)
    ghat = None
    if labels is not None:
        ghat = _align_labels(read_labels(labels), full.n, index_map)
        if ghat.K != K0:
            raise ParameterError(f"labels define {ghat.K} communities but K0={K0}")
    rng = SeededRng(seed)
    fit = fit_null(graph, K0, ghat=ghat, rng=rng.child(TEST), clamp_eps=clamp_eps)
    report = {
        "input": str(path),
        "n_nodes_file": full.n,
        "n_nodes_component": graph.n,
        "n_edges_component": graph.n_edges,
        "membership_source": "labels" if ghat is not None else "spectral clustering",
        "plain": plain_result(fit, alpha).to_dict(),
    }
    if bootstrap:
        report["bootstrap"] = bootstrap_result(fit, alpha, int(bootstrap), rng.child(TEST)).to_dict()
    if sequential_alpha is not None:
        est = estimate_k(graph, QuantileThreshold(sequential_alpha), k_max, bool(bootstrap),
                         int(bootstrap or 50), rng.child(TEST + 1))
        seq = est.to_dict()
        groups = est.membership.labels
        seq["group_sizes"] = np.bincount(groups).tolist()
        if ghat is not None:
            seq["crosstab"] = [np.bincount(ghat.labels[groups == k], minlength=ghat.K).tolist()
                               for k in range(est.k_hat)]
        report["sequential"] = seq
    return report
