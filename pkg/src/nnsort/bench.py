"""Command line front end: dataset generation, training, sorting, benchmark
matrix, iteration sweep and cost-model report.

Tabular reports are CSV and nested metrics JSON.  Wall-clock values sit in
their own columns/keys (``sorting_time``, ``sorting_rate``, ``total_time``,
``elapsed_seconds``, ``timing``) so everything else can be diffed between
runs with identical flags.

Exit codes: 0 ok, 1 usage error, 2 data/validation error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analysis, datagen
from .baselines import SORTERS, single_pass_learned_sort
from .core import (DEFAULT_THETA, ConfigError, InvalidKeyError, OpCounters, SortConfig,
                   read_keys, write_keys)
from .model import (Constant, ModelFileError, OracleRank, RandomPredictor, TrainConfig,
                    TrainingError, load_model, save_model, train)
from .sorter import PHASES, nn_sort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3

BENCH_COLUMNS = [
    "algorithm", "distribution", "n", "trial", "status", "conflict_rate", "ops",
    "comparisons", "moves", "model_invocations", "insert_shifts",
    "sorting_time", "sorting_rate",
]
TIMING_COLUMNS = ("sorting_time", "sorting_rate", "total_time", "elapsed_seconds")
ALGORITHMS = ("nnsort", "single_pass", "quicksort", "heapsort", "mergesort", "redis")


class InvariantError(RuntimeError):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# --- helpers -------------------------------------------------------------------

def verify_sorted(original: np.ndarray, output, oracle_limit: int = 100_000) -> None:
    """Raise InvariantError unless ``output`` is a sorted permutation of ``original``.

    Checks order, count, min/max and an exact sum; inputs up to
    ``oracle_limit`` keys are also compared against a library sort.
    """
    out = np.asarray(output, dtype=np.float64)
    if out.size != original.size:
        raise InvariantError(f"output has {out.size} keys, input had {original.size}")
    if out.size == 0:
        return
    if np.any(out[1:] < out[:-1]):
        raise InvariantError("output is not sorted")
    if out[0] != original.min() or out[-1] != original.max():
        raise InvariantError("output min/max differ from input")
    if math.fsum(out.tolist()) != math.fsum(original.tolist()):
        raise InvariantError("output checksum differs from input")
    if original.size <= oracle_limit and not np.array_equal(out, np.sort(original)):
        raise InvariantError("output differs from oracle sort")


def _load_dataset(args) -> np.ndarray:
    if getattr(args, "dataset", None):
        column = getattr(args, "column", None)
        if column is not None:
            col = int(column) if column.isdigit() else column
            return datagen.load_csv_keys(args.dataset, col)
        path = Path(args.dataset)
        if not path.exists():
            raise FileNotFoundError(f"dataset not found: {path}")
        return read_keys(path)
    if args.dist is None or args.n is None:
        raise UsageError("give a dataset path or --dist and --n")
    return _generate(args.dist, args.n, args.seed, getattr(args, "noise", 0.45))


def _generate(dist: str, n: int, seed: int, noise: float = 0.45) -> np.ndarray:
    if dist == "noisy":
        return datagen.noisy_mix(n, noise, seed)
    return datagen.generate(dist, n, seed)


def _predictor(args, keys: np.ndarray):
    kind = args.predictor
    if kind == "model":
        if not args.model:
            raise UsageError("--model is required with --predictor model")
        return load_model(args.model)
    if kind == "oracle":
        return OracleRank.from_keys(keys)
    if kind == "constant":
        return Constant(args.constant)
    if kind == "random":
        return RandomPredictor(args.seed)
    raise UsageError(f"unknown predictor {kind!r}")


def _sort_config(args) -> SortConfig:
    return SortConfig(m=args.m, tau=args.tau, epsilon=args.epsilon)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _emit_json(payload: dict, out) -> None:
    text = json.dumps(_json_safe(payload), indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(path, columns, rows) -> None:
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in columns})
    finally:
        if path:
            fh.close()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def sort_metrics(rs, cfg: SortConfig, theta: float = DEFAULT_THETA) -> dict:
    """Deterministic metrics for one sort (wall-clock kept apart under ``timing``)."""
    phases = {}
    for name in PHASES:
        c = rs.phase_counters[name]
        phases[name] = {**c.as_dict(), "ops": c.total(theta)}
    return {
        "n": rs.n,
        "config": asdict(cfg),
        "theta": theta,
        "bypassed": rs.bypassed,
        "iterations": [m.as_dict() for m in rs.metrics],
        "conflict_sizes": [m.conflict_size for m in rs.metrics],
        "final_conflict_size": int(len(rs.final_conflicts)),
        "fallback_fraction": rs.fallback_fraction,
        "out_of_order_count": rs.out_of_order_count,
        "counters": rs.counters.as_dict(),
        "ops": rs.counters.total(theta),
        "phases": phases,
        "timing": {
            "total_seconds": sum(rs.phase_seconds.values()),
            "phase_seconds": dict(rs.phase_seconds),
        },
    }


# --- commands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    keys = _generate(args.dist, args.n, args.seed, args.noise)
    write_keys(args.out, keys)
    print(f"wrote {keys.size} keys to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    keys = _load_dataset(args)
    cfg = TrainConfig(delta=args.delta, epochs=args.epochs, batch_size=min(args.batch, keys.size),
                      rng_seed=args.seed, learning_rate=args.lr)
    res = train(keys, cfg)
    save_model(res.model, args.model)
    loss_path = args.loss_out or str(args.model) + ".loss.csv"
    rows = [{"epoch": i + 1, "mean_huber_loss": l, "elapsed_seconds": t}
            for i, (l, t) in enumerate(zip(res.loss_history, res.elapsed))]
    _write_csv(loss_path, ["epoch", "mean_huber_loss", "elapsed_seconds"], rows)
    print(f"trained on {keys.size} keys: loss {res.loss_history[0]:.3e} -> "
          f"{res.loss_history[-1]:.3e}; model {args.model}, losses {loss_path}")
    return EXIT_OK


def cmd_sort(args) -> int:
    keys = _load_dataset(args)
    p = _predictor(args, keys)
    cfg = _sort_config(args)
    t0 = time.perf_counter()
    out, rs = nn_sort(keys, p, cfg)
    wall = time.perf_counter() - t0
    if args.self_check:
        verify_sorted(keys, out)
    metrics = sort_metrics(rs, cfg)
    metrics["predictor"] = args.predictor
    metrics["self_check"] = "passed" if args.self_check else "skipped"
    metrics["timing"]["wall_seconds"] = wall
    if args.out:
        write_keys(args.out, np.asarray(out, dtype=np.float64))
    _emit_json(metrics, args.metrics)
    return EXIT_OK


def _train_for(dist: str, n: int, seed: int, epochs: int, batch: int):
    # noisy mixes are sorted with a model trained on clean uniform data
    base = "uniform" if dist == "noisy" else dist
    keys = datagen.generate(base, n, seed + 10_000_019)
    cfg = TrainConfig(epochs=epochs, batch_size=min(batch, n), rng_seed=seed)
    return train(keys, cfg).model


def run_cell(alg: str, dist: str, n: int, trial: int, keys: np.ndarray, model,
             cfg: SortConfig) -> dict:
    row = {"algorithm": alg, "distribution": dist, "n": n, "trial": trial}
    if alg == "redis":
        row["status"] = "unavailable"
        return row
    ctr = OpCounters()
    conflict = ""
    t0 = time.perf_counter()
    try:
        if alg == "nnsort":
            out, rs = nn_sort(keys, model, cfg)
            ctr = rs.counters
            conflict = rs.fallback_fraction
        elif alg == "single_pass":
            out, conflict = single_pass_learned_sort(keys, model, cfg.m, ctr)
        else:
            out = SORTERS[alg](keys, ctr)
        elapsed = time.perf_counter() - t0
        verify_sorted(keys, out)
        row["status"] = "ok"
    except Exception as exc:  # failed cells are recorded, not fatal
        row["status"] = f"failed: {type(exc).__name__}"
        return row
    row.update(ctr.as_dict())
    row["ops"] = ctr.total()
    row["conflict_rate"] = conflict
    row["sorting_time"] = elapsed
    row["sorting_rate"] = n / elapsed if elapsed > 0 else math.inf
    return row


def _cell_task(task):
    return run_cell(*task)


def median_rows(rows: list) -> list:
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["algorithm"], r["distribution"], r["n"]), []).append(r)
    out = []
    for (alg, dist, n), rs in groups.items():
        agg = {"algorithm": alg, "distribution": dist, "n": n, "trial": "median"}
        ok = [r for r in rs if r.get("status") == "ok"]
        if not ok:
            agg["status"] = rs[0].get("status", "failed")
            out.append(agg)
            continue
        agg["status"] = "ok"
        for col in ("conflict_rate", "ops", "comparisons", "moves", "model_invocations",
                    "insert_shifts", "sorting_time", "sorting_rate"):
            vals = [r[col] for r in ok if r.get(col, "") != ""]
            if vals:
                agg[col] = statistics.median(vals)
        out.append(agg)
    return out


def cmd_bench(args) -> int:
    dists = args.dist or ["uniform", "normal", "lognormal"]
    sizes = args.n or [10_000]
    algs = args.algorithms or list(ALGORITHMS)
    for a in algs:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
    cfg = _sort_config(args)
    learned = {"nnsort", "single_pass"} & set(algs)

    models = {}
    if learned:
        for dist in dists:
            if args.model:
                models[dist] = load_model(args.model)
            else:
                train_n = args.train_n or max(sizes)
                models[dist] = _train_for(dist, train_n, args.seed, args.epochs, args.batch)

    tasks = []
    for dist in dists:
        for n in sizes:
            for trial in range(args.trials):
                keys = _generate(dist, n, args.seed + 7919 * trial + n, args.noise)
                for alg in algs:
                    tasks.append((alg, dist, n, trial, keys, models.get(dist), cfg))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_cell_task, tasks))
    else:
        rows = [_cell_task(t) for t in tasks]
    rows += median_rows(rows)
    _write_csv(args.out, BENCH_COLUMNS, rows)
    return EXIT_OK


def iteration_sweep(keys: np.ndarray, p, epsilons, m: float = 2.0, tau: int = 1000) -> list:
    rows = []
    for eps in epsilons:
        cfg = SortConfig(m=m, tau=tau, epsilon=eps)
        t0 = time.perf_counter()
        out, rs = nn_sort(keys, p, cfg)
        elapsed = time.perf_counter() - t0
        verify_sorted(keys, out)
        rows.append({"epsilon": eps, "last_conflict_size": int(len(rs.final_conflicts)),
                     "iterations": rs.iterations, "ops": rs.counters.total(),
                     "total_time": elapsed})
    return rows


def cmd_iterations(args) -> int:
    keys = _load_dataset(args)
    p = _predictor(args, keys)
    if args.epsilons:
        epsilons = [int(x) for x in args.epsilons.split(",")]
    else:
        epsilons = list(range(1, args.eps_max + 1))
    if any(e < 1 for e in epsilons):
        raise UsageError("epsilon values must be >= 1")
    rows = iteration_sweep(keys, p, epsilons, args.m, args.tau)
    _write_csv(args.out, ["epsilon", "last_conflict_size", "iterations", "ops", "total_time"], rows)
    return EXIT_OK


def cmd_costmodel(args) -> int:
    if args.metrics:
        try:
            data = json.loads(Path(args.metrics).read_text())
            its = data["iterations"]
            n = int(data["n"])
            measured = float(data["ops"])
            theta = float(data.get("theta", args.theta))
            eps = int(data.get("config", {}).get("epsilon", args.epsilon))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InvalidKeyError(f"{args.metrics}: malformed metrics JSON ({exc})") from None
        if its:
            sigmas = [float(i["sigma"]) for i in its]
            sigma = 0.0 if min(sigmas) == 0 else math.exp(sum(map(math.log, sigmas)) / len(sigmas))
            e = sum(float(i["out_of_order_rate"]) for i in its) / len(its)
            t = len(its)
        else:
            sigma, e, t = 0.0, 0.0, 1
        p = analysis.CostParams(n=n, theta=theta, sigma=min(sigma, 1 - 1e-12), e=e, t=t, epsilon=eps)
    else:
        measured = None
        p = analysis.CostParams(n=args.cm_n, theta=args.theta, sigma=args.sigma, e=args.e,
                                t=args.t, epsilon=args.epsilon)
    c1, c2 = analysis.coeffs_general(p)
    be = analysis.break_even_n(p)
    report = {
        "sigma": p.sigma, "e": p.e, "t": p.t, "theta": p.theta, "epsilon": p.epsilon, "n": p.n,
        "C1": c1, "C2": c2,
        "break_even_n": be if math.isfinite(be) else "no finite break-even",
        "predicted_general": analysis.t_general(p),
        "predicted_best": analysis.t_best(p.n, p.theta),
        "predicted_worst": analysis.t_worst(p.n, p.theta, p.epsilon),
        "n_log_n": p.n * math.log(p.n) if p.n > 0 else 0.0,
    }
    if measured is not None:
        report["measured_ops"] = measured
        for key in ("general", "best", "worst"):
            pred = report[f"predicted_{key}"]
            report[f"ratio_{key}"] = measured / pred if pred else math.nan
    _emit_json(report, args.out)
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------

def _add_data_args(sp, dataset=True):
    if dataset:
        sp.add_argument("dataset", nargs="?", help=".bin or .csv dataset (omit to generate)")
        sp.add_argument("--column", help="CSV column name or index (multi-column files)")
    sp.add_argument("--dist", choices=["uniform", "normal", "lognormal", "noisy"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.45, help="normal fraction for --dist noisy")


def _add_sort_args(sp):
    sp.add_argument("--m", type=float, default=2.0)
    sp.add_argument("--tau", type=int, default=1000)
    sp.add_argument("--epsilon", type=int, default=3)


def _add_predictor_args(sp):
    sp.add_argument("--model", help="model file written by 'train'")
    sp.add_argument("--predictor", choices=["model", "oracle", "constant", "random"],
                    default=None, help="defaults to 'model' when --model is given, else 'oracle'")
    sp.add_argument("--constant", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nnsort", description="learned sorting library and benchmark harness")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("gen", help="write a synthetic dataset")
    sp.add_argument("--dist", choices=["uniform", "normal", "lognormal", "noisy"], required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.45)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("train", help="train a position model")
    _add_data_args(sp)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--epochs", type=int, default=500)
    sp.add_argument("--batch", type=int, default=256)
    sp.add_argument("--lr", type=float, default=0.1)
    sp.add_argument("--model", required=True, help="output model path")
    sp.add_argument("--loss-out", help="loss CSV path (default: <model>.loss.csv)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sort", help="sort a dataset and report metrics JSON")
    _add_data_args(sp)
    _add_sort_args(sp)
    _add_predictor_args(sp)
    sp.add_argument("--out", help="write sorted keys here (.bin/.csv)")
    sp.add_argument("--metrics", help="metrics JSON path (default: stdout)")
    sp.add_argument("--self-check", action=argparse.BooleanOptionalAction, default=True)
    sp.set_defaults(func=cmd_sort)

    sp = sub.add_parser("bench", help="run the algorithm x distribution x size matrix")
    sp.add_argument("--dist", action="append",
                    choices=["uniform", "normal", "lognormal", "noisy"])
    sp.add_argument("--n", type=int, action="append")
    sp.add_argument("--algorithms", type=lambda s: s.split(","))
    sp.add_argument("--trials", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--noise", type=float, default=0.45)
    sp.add_argument("--model", help="use one trained model for every distribution")
    sp.add_argument("--epochs", type=int, default=500)
    sp.add_argument("--batch", type=int, default=256)
    sp.add_argument("--train-n", type=int)
    sp.add_argument("--jobs", type=int, default=1, help="run cells in N worker processes")
    _add_sort_args(sp)
    sp.add_argument("--out", help="results CSV (default: stdout)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("iterations", help="sweep the iteration cap")
    _add_data_args(sp)
    _add_predictor_args(sp)
    sp.add_argument("--m", type=float, default=2.0)
    sp.add_argument("--tau", type=int, default=1000)
    sp.add_argument("--eps-max", type=int, default=5)
    sp.add_argument("--epsilons", help="comma separated list, overrides --eps-max")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_iterations)

    sp = sub.add_parser("costmodel", help="evaluate the operation-count model")
    sp.add_argument("--metrics", help="metrics JSON from 'sort'")
    sp.add_argument("--sigma", type=float, default=0.1)
    sp.add_argument("--e", type=float, default=0.0)
    sp.add_argument("--t", type=int, default=1)
    sp.add_argument("--theta", type=float, default=DEFAULT_THETA)
    sp.add_argument("--epsilon", type=int, default=3)
    sp.add_argument("--cm-n", dest="cm_n", type=float, default=1e6, help="n for the prediction")
    sp.add_argument("--out", help="JSON path (default: stdout)")
    sp.set_defaults(func=cmd_costmodel)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "predictor", "unset") is None:
        args.predictor = "model" if args.model else "oracle"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nnsort: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"nnsort: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InvalidKeyError, ConfigError, ModelFileError, TrainingError, OSError) as exc:
        print(f"nnsort: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
