"""Command-line entry point.

Exit status:
  0  success
  1  unexpected error
  2  bad usage (unknown flag, invalid value)
  3  missing or unreadable input file
  4  model file error (version mismatch, checksum mismatch, wrong dataset)
  5  a verification check failed
  6  malformed dataset
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from chebycf.chebyshev import format_transfer_csv, plateau_filter_spec, transfer_samples
from chebycf.evaluation import Grid, evaluate, grid_search, write_metrics_csv
from chebycf.model import (
    ALPHA_GRID,
    BETA_GRID,
    DEFAULT_ORDER,
    ETA_GRID,
    PHI_GRID,
    DatasetMismatchError,
    HyperParams,
    ModelFormatError,
    fit,
    load_model,
    recommend_topn,
    save_model,
)
from chebycf.sparse import DatasetError, load_interactions, resolve_split

logger = logging.getLogger("chebycf")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_IO, EXIT_MODEL, EXIT_VERIFY, EXIT_DATA = 0, 1, 2, 3, 4, 5, 6
DATA_ROOT_ENV = "CHEBYCF_DATA_ROOT"


class UsageError(Exception):
    pass


def _add_data_args(p):
    p.add_argument("--dataset", help=f"split name under ${DATA_ROOT_ENV} (<root>/<name>/train.txt, test.txt)")
    p.add_argument("--train", type=Path, help="train adjacency file")
    p.add_argument("--test", type=Path, help="test adjacency file")
    p.add_argument("--data-root", type=Path, default=None, help=f"overrides ${DATA_ROOT_ENV}")


def _add_param_args(p):
    p.add_argument("--phi", type=float, default=1.0, help="plateau flatness")
    p.add_argument("--alpha", type=float, default=0.0, help="ideal pass filter weight")
    p.add_argument("--eta", type=int, default=256, help="number of ideal-pass singular vectors")
    p.add_argument("--beta", type=float, default=0.0, help="degree normalization power")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER, help="Chebyshev order K")


def _add_run_args(p):
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1, help="worker threads for batched scoring")
    p.add_argument("--batch-size", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chebycf",
        description="Chebyshev graph filtering for collaborative filtering.",
        epilog="exit codes: 0 ok, 1 error, 2 usage, 3 missing file, 4 model file/version/checksum, "
        "5 verification failed, 6 malformed dataset",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model and write it to a file")
    _add_data_args(p)
    _add_param_args(p)
    _add_run_args(p)
    p.add_argument("--svd", choices=("subspace", "arpack"), default="subspace")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="Recall/NDCG of a fitted model on the test split")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--name", default=None, help="dataset label for the CSV (default: --dataset or 'data')")
    p.add_argument("--n", type=int, nargs="+", default=[10, 20])
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("recommend", help="top-N unseen items per user")
    _add_data_args(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--users", type=int, nargs="*", default=None, help="external user ids (default: all)")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out", type=Path, default=None, help="write here instead of stdout")

    p = sub.add_parser("grid", help="grid search; writes one CSV row per combination and the best model")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--phi", type=float, nargs="+", default=list(PHI_GRID))
    p.add_argument("--alpha", type=float, nargs="+", default=list(ALPHA_GRID))
    p.add_argument("--eta", type=int, nargs="+", default=list(ETA_GRID))
    p.add_argument("--beta", type=float, nargs="+", default=list(BETA_GRID))
    p.add_argument("--order", type=int, nargs="+", default=[DEFAULT_ORDER])
    p.add_argument("--select-n", type=int, default=20, help="select by Recall@N")
    p.add_argument("--svd", choices=("subspace", "arpack"), default="subspace")
    p.add_argument("--name", default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--model-out", type=Path, default=None)

    p = sub.add_parser("export-filter", help="sample the filter response on a 1001-point grid")
    p.add_argument("--phi", type=float, default=1.0)
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("verify", help="run the dense-oracle checks on seeded random graphs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _split_paths(args):
    if args.train and args.test:
        return args.train, args.test
    if args.dataset:
        root = args.data_root or os.environ.get(DATA_ROOT_ENV)
        if not root:
            raise UsageError(f"--dataset needs --data-root or ${DATA_ROOT_ENV}")
        return resolve_split(root, args.dataset)
    raise UsageError("give --train and --test, or --dataset")


def _load_data(args):
    train, test = _split_paths(args)
    for path in (train, test):
        if not Path(path).is_file():
            raise FileNotFoundError(f"no such file: {path}")
    return load_interactions(train, test), (str(train), str(test))


def _config(args, **extra) -> dict:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    cfg.update(extra)
    return cfg


def _write_config(out: Path, cfg: dict) -> None:
    Path(str(out) + ".config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_fit(args) -> int:
    data, paths = _load_data(args)
    params = HyperParams(phi=args.phi, alpha=args.alpha, eta=args.eta, beta=args.beta, order_k=args.order)
    model = fit(data, params, seed=args.seed, svd_method=args.svd)
    save_model(model, args.out)
    _write_config(args.out, _config(args, resolved_paths=paths, params=params.as_dict()))
    logger.info("wrote %s", args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data, paths = _load_data(args)
    model = load_model(args.model)
    # the CSV always carries @10 and @20
    n_values = sorted(set(args.n) | {10, 20})
    report = evaluate(model, data, n_values, batch_size=args.batch_size, threads=args.threads)
    name = args.name or args.dataset or "data"
    write_metrics_csv(args.out, name, [report])
    _write_config(
        args.out,
        _config(
            args,
            resolved_paths=paths,
            params=model.params.as_dict(),
            recall_at=report.recall_at,
            ndcg_at=report.ndcg_at,
            num_evaluated_users=report.num_evaluated_users,
        ),
    )
    return EXIT_OK


def cmd_recommend(args) -> int:
    data, paths = _load_data(args)
    model = load_model(args.model)
    if model.dataset_checksum != data.checksum():
        raise DatasetMismatchError("model was fitted on a different dataset split")
    index = {int(u): k for k, u in enumerate(data.user_ids)}
    users = args.users if args.users is not None else [int(u) for u in data.user_ids]
    lines = ["# config: " + json.dumps(_config(args, resolved_paths=paths), sort_keys=True)]
    for uid in users:
        if uid not in index:
            raise UsageError(f"unknown user id {uid}")
        row = data.train[index[uid]].toarray().ravel()
        recs = recommend_topn(model, row, args.n)
        lines.append(f"{uid}\t" + " ".join(f"{int(data.item_ids[i])}:{s:.6g}" for i, s in recs))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    data, paths = _load_data(args)
    grid = Grid(phi=args.phi, alpha=args.alpha, eta=args.eta, beta=args.beta, order_k=args.order)
    best, results = grid_search(
        data,
        grid,
        n_select=args.select_n,
        seed=args.seed,
        batch_size=args.batch_size,
        threads=args.threads,
        svd_method=args.svd,
    )
    best_report = next(r for p, r in results if p == best)
    name = args.name or args.dataset or "data"
    write_metrics_csv(args.out, name, results, best=best_report)
    _write_config(
        args.out,
        _config(args, resolved_paths=paths, best=best.as_dict(), selection=f"recall@{args.select_n}",
                protocol="selected on the test split"),
    )
    if args.model_out:
        save_model(fit(data, best, seed=args.seed, svd_method=args.svd), args.model_out)
    return EXIT_OK


def cmd_export_filter(args) -> int:
    spec = plateau_filter_spec(args.phi, args.order)
    lam, weight = transfer_samples(spec, args.points)
    _emit(format_transfer_csv(lam, weight), args.out)
    if args.out:
        _write_config(args.out, _config(args, coefficients=spec.coefficients.tolist()))
    return EXIT_OK


def cmd_verify(args) -> int:
    from chebycf.verify import format_report, run_checks

    results = run_checks(seed=args.seed, instances=args.instances)
    header = f"# chebycf verify seed={args.seed} instances={args.instances}\n"
    _emit(header + format_report(results), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "recommend": cmd_recommend,
    "grid": cmd_grid,
    "export-filter": cmd_export_filter,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad usage
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"chebycf: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, PermissionError, IsADirectoryError) as e:
        print(f"chebycf: {e}", file=sys.stderr)
        return EXIT_IO
    except (ModelFormatError, DatasetMismatchError) as e:
        print(f"chebycf: {e}", file=sys.stderr)
        return EXIT_MODEL
    except DatasetError as e:
        print(f"chebycf: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"chebycf: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        logger.exception("unexpected failure")
        print(f"chebycf: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
