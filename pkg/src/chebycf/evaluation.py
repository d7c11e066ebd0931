"""Top-N evaluation (Recall@N, NDCG@N), grid search and inference timing."""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from chebycf.chebyshev import chebyshev_terms, combine_terms, plateau_filter_spec
from chebycf.model import (
    ALPHA_GRID,
    BETA_GRID,
    DEFAULT_ORDER,
    ETA_GRID,
    PHI_GRID,
    DatasetMismatchError,
    HyperParams,
    _mix,
    _scaled_signal,
    _unscale,
    compute_ideal,
    degree_powers,
    top_n,
)
from chebycf.sparse import InteractionDataset, normalize
from chebycf.svd import apply_ideal

logger = logging.getLogger(__name__)

CSV_HEADER = "dataset,phi,alpha,eta,beta,K,recall@10,recall@20,ndcg@10,ndcg@20,mean_user_time_s"

# elements per (num_items x batch) signal block
_BLOCK_BUDGET = 1 << 24


def recall_at_n(recommended: Sequence[int], relevant, n: int) -> float:
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty")
    hits = sum(1 for item in list(recommended)[:n] if item in relevant)
    return hits / len(relevant)


def ndcg_at_n(recommended: Sequence[int], relevant, n: int) -> float:
    """Binary-relevance NDCG with a ``1/log2(p+1)`` discount.

    The ideal DCG is taken over ``min(n, |relevant|)`` positions.
    """
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty")
    dcg = sum(1.0 / math.log2(p + 2) for p, item in enumerate(list(recommended)[:n]) if item in relevant)
    idcg = sum(1.0 / math.log2(p + 2) for p in range(min(n, len(relevant))))
    return dcg / idcg


@dataclass
class MetricsReport:
    recall_at: dict[int, float]
    ndcg_at: dict[int, float]
    per_user_time: float
    num_evaluated_users: int
    params: HyperParams | None = None
    extra: dict = field(default_factory=dict)

    def csv_row(self, dataset_name: str) -> str:
        return format_csv_row(dataset_name, self)


def _fmt_param(v) -> str:
    return "" if v is None else f"{v:g}"


def format_csv_row(dataset_name: str, report: MetricsReport) -> str:
    p = report.params
    fields = [dataset_name]
    if p is None:
        fields += [""] * 5
    else:
        fields += [_fmt_param(p.phi), _fmt_param(p.alpha), str(p.eta), _fmt_param(p.beta), str(p.order_k)]
    for table, n in ((report.recall_at, 10), (report.recall_at, 20), (report.ndcg_at, 10), (report.ndcg_at, 20)):
        fields.append(f"{table[n]:.10f}" if n in table else "")
    fields.append(f"{report.per_user_time:.6e}")
    return ",".join(fields)


def evaluated_users(dataset: InteractionDataset) -> np.ndarray:
    """Users with at least one held-out item."""
    return np.flatnonzero(np.diff(dataset.test.indptr) > 0)


def default_batch_size(num_items: int) -> int:
    return int(min(1024, max(16, _BLOCK_BUDGET // max(num_items, 1))))


def _batches(users: np.ndarray, batch_size: int) -> list[np.ndarray]:
    return [users[i : i + batch_size] for i in range(0, len(users), batch_size)]


def _rank_metrics(scores: np.ndarray, users: np.ndarray, dataset: InteractionDataset, n_values) -> np.ndarray:
    """Mask train items, rank, and score each user; returns (len(users), 2 * len(n_values))."""
    train, test = dataset.train, dataset.test
    n_max = max(n_values)
    out = np.empty((len(users), 2 * len(n_values)))
    for row, u in enumerate(users):
        s = scores[row].copy()
        s[train.indices[train.indptr[u] : train.indptr[u + 1]]] = -np.inf
        top = top_n(s, n_max).tolist()
        relevant = test.indices[test.indptr[u] : test.indptr[u + 1]]
        for j, n in enumerate(n_values):
            out[row, j] = recall_at_n(top, relevant, n)
            out[row, len(n_values) + j] = ndcg_at_n(top, relevant, n)
    return out


def _report(per_user: np.ndarray, elapsed: float, n_values, params) -> MetricsReport:
    count = per_user.shape[0]
    k = len(n_values)
    mean = [math.fsum(per_user[:, j]) / count if count else 0.0 for j in range(2 * k)]
    return MetricsReport(
        recall_at={n: mean[j] for j, n in enumerate(n_values)},
        ndcg_at={n: mean[k + j] for j, n in enumerate(n_values)},
        per_user_time=elapsed / count if count else 0.0,
        num_evaluated_users=count,
        params=params,
    )


def _run_batches(fn, batches, threads: int):
    if threads <= 1 or len(batches) <= 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, batches))  # map preserves batch order


def evaluate(
    model,
    dataset: InteractionDataset,
    n_values: Iterable[int] = (10, 20),
    batch_size: int | None = None,
    threads: int = 1,
) -> MetricsReport:
    """Recall@N / NDCG@N averaged over users with held-out items.

    ``model`` needs ``predict(rows)`` and ``dataset_checksum``. Timing covers
    scoring plus top-N selection.
    """
    n_values = tuple(sorted(set(int(n) for n in n_values)))
    if model.dataset_checksum != dataset.checksum():
        raise DatasetMismatchError("model was fitted on a different dataset split")
    users = evaluated_users(dataset)
    batch_size = batch_size or default_batch_size(dataset.num_items)

    def run(batch):
        t0 = time.perf_counter()
        rows = dataset.train[batch].toarray()
        scores = model.predict(rows)
        metrics = _rank_metrics(scores, batch, dataset, n_values)
        return metrics, time.perf_counter() - t0

    results = _run_batches(run, _batches(users, batch_size), threads)
    per_user = np.vstack([m for m, _ in results]) if results else np.empty((0, 2 * len(n_values)))
    elapsed = sum(t for _, t in results)
    return _report(per_user, elapsed, n_values, getattr(model, "params", None))


@dataclass
class Grid:
    phi: Sequence[float] = PHI_GRID
    alpha: Sequence[float] = ALPHA_GRID
    eta: Sequence[int] = ETA_GRID
    beta: Sequence[float] = BETA_GRID
    order_k: Sequence[int] = (DEFAULT_ORDER,)

    def combinations(self) -> list[HyperParams]:
        return [
            HyperParams(phi=float(p), alpha=float(a), eta=int(e), beta=float(b), order_k=int(k))
            for p, a, e, b, k in itertools.product(self.phi, self.alpha, self.eta, self.beta, self.order_k)
        ]

    def __len__(self) -> int:
        return len(self.phi) * len(self.alpha) * len(self.eta) * len(self.beta) * len(self.order_k)


def _selection_key(params: HyperParams, report: MetricsReport, n_select: int):
    return (-report.recall_at[n_select], -report.ndcg_at.get(20, 0.0), (params.phi, params.alpha, params.eta, params.beta, params.order_k))


def select_best(results, n_select: int = 20):
    """Highest Recall@n_select, then NDCG@20, then smallest params."""
    return min(results, key=lambda pr: _selection_key(pr[0], pr[1], n_select))


def grid_search(
    dataset: InteractionDataset,
    grid: Grid | None = None,
    n_select: int = 20,
    n_values: Iterable[int] = (10, 20),
    seed: int = 42,
    batch_size: int | None = None,
    threads: int = 1,
    svd_method: str = "subspace",
):
    """Evaluate every combination of ``grid``; return ``(best_params, [(params, report), ...])``.

    Work is shared: the graph is normalized once, one singular basis is
    computed per ``eta``, and per ``beta`` the Chebyshev terms ``T_k(L~) y``
    are computed once per user batch and recombined for every ``phi``.
    Scores are bit-identical to fitting each combination separately.
    """
    grid = grid or Grid()
    combos = grid.combinations()
    if not combos:
        raise ValueError("empty grid")
    n_values = tuple(sorted(set(int(n) for n in n_values) | {n_select}))

    g = normalize(dataset)
    bases = {}
    if any(a > 0 for a in grid.alpha):
        for eta in sorted(set(grid.eta)):
            bases[eta] = compute_ideal(g, eta, seed, svd_method)
    specs = {(p, k): plateau_filter_spec(p, k) for p in set(c.phi for c in combos) for k in set(grid.order_k)}
    powers = {b: degree_powers(g.item_degrees, b) for b in set(grid.beta)}
    max_order = max(grid.order_k)

    # alpha = 0 makes eta irrelevant: one evaluation stands for all eta values
    def canon(c: HyperParams):
        return (c.phi, c.alpha, None if c.alpha == 0 else c.eta, c.beta, c.order_k)

    distinct = {}
    for c in combos:
        distinct.setdefault(canon(c), c)
    logger.info("grid: %d combinations, %d distinct evaluations", len(combos), len(distinct))

    users = evaluated_users(dataset)
    batch_size = batch_size or default_batch_size(dataset.num_items)

    def run(batch):
        rows = dataset.train[batch].toarray()
        metrics, times = {}, {}
        for beta in sorted(powers):
            up, down = powers[beta]
            t0 = time.perf_counter()
            y = _scaled_signal(rows, down)
            terms = list(chebyshev_terms(g, y, max_order))
            t_terms = time.perf_counter() - t0
            ideal_parts, t_ideal = {}, {}
            for key, c in distinct.items():
                if c.beta != beta:
                    continue
                if c.alpha > 0 and c.eta not in ideal_parts:
                    t1 = time.perf_counter()
                    ideal_parts[c.eta] = apply_ideal(bases[c.eta], y)
                    t_ideal[c.eta] = time.perf_counter() - t1
                t1 = time.perf_counter()
                spec = specs[(c.phi, c.order_k)]
                cheb = combine_terms(spec.coefficients, terms[: c.order_k + 1])
                z = _mix(cheb, c.alpha, ideal_parts.get(c.eta) if c.alpha > 0 else None)
                scores = _unscale(z, up)
                metrics[key] = _rank_metrics(scores, batch, dataset, n_values)
                times[key] = t_terms + (t_ideal[c.eta] if c.alpha > 0 else 0.0) + time.perf_counter() - t1
        return metrics, times

    results = _run_batches(run, _batches(users, batch_size), threads)
    reports = {}
    for key, c in distinct.items():
        if results:
            per_user = np.vstack([m[key] for m, _ in results])
        else:
            per_user = np.empty((0, 2 * len(n_values)))
        reports[key] = (per_user, sum(t[key] for _, t in results))

    out = []
    for c in combos:
        per_user, elapsed = reports[canon(c)]
        out.append((c, _report(per_user, elapsed, n_values, c)))
    best_params, _ = select_best(out, n_select)
    return best_params, out


def write_metrics_csv(path, dataset_name: str, results, best=None) -> None:
    """One row per report; ``best`` (a report) appends a final ``BEST`` row."""
    lines = [CSV_HEADER]
    for item in results:
        report = item[1] if isinstance(item, tuple) else item
        lines.append(format_csv_row(dataset_name, report))
    if best is not None:
        lines.append(format_csv_row("BEST", best))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
