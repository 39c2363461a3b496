"""Batch command-line harness: gen, solve, metrics, oracle, simulate.

Exit codes: 0 success, 2 usage, 3 infeasible or no solution, 4 I/O.
All CSV output is deterministic for a given command line and seed;
timing columns stay empty unless ``--timing`` is given.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from .ga import FitnessKind, GaParams, ga_solve
from .gvns import GvnsParams, gvns_solve
from .instancegen import Recipe, generate, preset
from .metrics import coverage, hypervolume, normalize
from .model import Instance, InstanceError, load_chromosome, load_instance
from .moea import Front, MoeadParams, NsgaParams, hybrid_solve, moead_solve, nsga2_solve
from .oracle import OracleLimitError, brute_force_solve
from .recourse import Estimator, RecourseKind, StochasticConfig, estimate
from .schedule import DEFAULT_PARAMS, DecodeParams, Variant, decode

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

SINGLE = ("gvns", "ga")
MULTI = ("nsga2", "moead", "hybrid")


class UsageError(Exception):
    pass


def _num(x: float | None) -> str:
    if x is None:
        return ""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    r = round(x, 6)
    return str(int(r)) if r == int(r) else repr(r)


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- parameter overrides ------------------------------------------------------------------


def _coerce(value: str, current):
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        return tuple(float(v) for v in value.split(","))
    if current is None:
        try:
            return int(value)
        except ValueError:
            return float(value)
    return value


def _overrides(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise UsageError(f"bad --param {pair!r}, expected key=value")
        out[key.strip()] = value.strip()
    return out


def _apply(params, overrides: dict[str, str], used: set[str]):
    """Replace matching fields of ``params`` and of its nested decode params."""
    changes = {}
    names = {f.name for f in dataclasses.fields(params)}
    for key, value in overrides.items():
        if key in names and key != "decode_params":
            changes[key] = _coerce(value, getattr(params, key))
            used.add(key)
    if "decode_params" in names:
        dp = params.decode_params
        dnames = {f.name for f in dataclasses.fields(dp)}
        dchanges = {}
        for key, value in overrides.items():
            if key in dnames:
                dchanges[key] = _coerce(value, getattr(dp, key))
                used.add(key)
        if dchanges:
            changes["decode_params"] = dataclasses.replace(dp, **dchanges)
    try:
        return dataclasses.replace(params, **changes) if changes else params
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _check_used(overrides: dict[str, str], used: set[str]) -> None:
    unknown = sorted(set(overrides) - used)
    if unknown:
        raise UsageError(f"unknown parameter(s): {', '.join(unknown)}")


def _stochastic(args, seed: int) -> StochasticConfig:
    return StochasticConfig(epsilon=args.epsilon, max_iter=args.max_iter, gap_window=args.gap_window,
                            seed=seed, common_random_numbers=args.crn)


# -- gen ---------------------------------------------------------------------------------------


def _recipe(args) -> Recipe:
    if args.preset:
        try:
            return preset(args.preset)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"unknown preset {args.preset!r}") from exc
    try:
        with open(args.recipe, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"recipe is not valid JSON: {exc}") from exc
    try:
        return Recipe.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad recipe: {exc}") from exc


def _feasibility_params() -> DecodeParams:
    """Weights that leave only the penalty, so GVNS searches for feasibility."""
    return dataclasses.replace(DEFAULT_PARAMS, soft_weights=(0.0, 0.0, 0.0), hard_weights=(0.0, 0.0),
                               penalty_weight=1.0)


def cmd_gen(args) -> int:
    recipe = _recipe(args)
    if args.feasible is None:
        try:
            save = generate(recipe, args.seed)
        except RuntimeError as exc:
            print(f"hhcrsp: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
    else:
        variant = Variant(args.feasible)
        params = GvnsParams(stop=args.feasible_stop, decode_params=_feasibility_params())
        save = None
        for attempt in range(args.max_tries):
            inst = generate(recipe, args.seed + attempt)
            if variant is Variant.SOFT_MTW and any(len(p.demands) > 1 for p in inst.patients):
                raise UsageError("soft-mtw feasibility needs a single-service recipe")
            result = gvns_solve(inst, variant, params, args.seed)
            if result.schedule.feasible:
                save = inst
                print(f"feasible instance found with seed {args.seed + attempt}", file=sys.stderr)
                break
        if save is None:
            print(f"no feasible instance in {args.max_tries} tries", file=sys.stderr)
            return EXIT_INFEASIBLE
    _emit(json.dumps(save.to_dict(), indent=1) + "\n", args.output)
    return EXIT_OK


# -- solve --------------------------------------------------------------------------------------


def _variant_for(args) -> Variant:
    if args.variant is None:
        return Variant.MULTIOBJ if args.alg in MULTI else Variant.HARD_MSMTW
    return Variant(args.variant)


def _check_pair(alg: str, variant: Variant) -> None:
    if alg in MULTI and variant is not Variant.MULTIOBJ:
        raise UsageError(f"{alg} solves the multi-objective model only")
    if alg in SINGLE and variant is Variant.MULTIOBJ:
        raise UsageError(f"{alg} does not solve the multi-objective model; use nsga2, moead or hybrid")
    if alg == "gvns" and variant in (Variant.SPR_PENALTY, Variant.SPR_SKIP):
        raise UsageError("gvns cannot be combined with the recourse simulation; use --alg ga")


SOLVE_HEADER = ["run", "seed", "value", "cost", "expected_recourse", "penalty", "feasible", "gap_pct",
                "cpu_ms", "solution"]


def _solve_single(args, instance: Instance, variant: Variant, overrides: dict[str, str]) -> tuple[str, bool]:
    used: set[str] = set()
    rows = []
    records = []
    for r in range(args.repeat):
        seed = args.seed + r
        started = time.process_time()
        recourse = None
        if args.alg == "gvns":
            params = _apply(GvnsParams(), overrides, used)
            res = gvns_solve(instance, variant, params, seed, args.time_limit_ms)
            best, sched, key = res.best, res.schedule, (res.value,)
            value = res.value
            dparams = params.decode_params
        else:
            if variant is Variant.SPR_PENALTY and not args.deterministic:
                kind = FitnessKind.SPR
            elif variant is Variant.SPR_SKIP and not args.deterministic:
                kind = FitnessKind.LEX
            else:
                kind = FitnessKind.DETERMINISTIC
            params = _apply(GaParams.defaults(instance, kind), overrides, used)
            estimator = None
            if kind is not FitnessKind.DETERMINISTIC:
                rk = RecourseKind.PENALTY if kind is FitnessKind.SPR else RecourseKind.SKIP
                estimator = Estimator(rk, _stochastic(args, seed), params.decode_params)
            res = ga_solve(instance, variant, params, seed, estimator, threads=args.threads,
                           time_limit_ms=args.time_limit_ms)
            dparams = dataclasses.replace(params.decode_params, penalty_weight=params.beta)
            best, key = res.best, res.fitness
            sched = decode(instance, best, variant, dparams, check=False)
            if kind is FitnessKind.SPR:
                value = res.fitness[0]
                recourse = value - sched.total_cost if math.isfinite(value) else math.inf
            elif kind is FitnessKind.LEX:
                recourse = res.fitness[1]
                value = sched.total_cost
            else:
                value = res.fitness[0]
        cpu = (time.process_time() - started) * 1000 if args.timing else None
        if recourse is None and variant in (Variant.SPR_PENALTY, Variant.SPR_SKIP) and args.deterministic:
            rk = RecourseKind.PENALTY if variant is Variant.SPR_PENALTY else RecourseKind.SKIP
            recourse = estimate(instance, best, rk, _stochastic(args, seed), 0, dparams).mean
        records.append((key, value, recourse, sched, cpu))
        rows.append([r + 1, seed, value, sched.total_cost, recourse, sched.penalty, int(sched.feasible),
                     None, cpu, best.serialize()])
    _check_used(overrides, used)
    reference = args.reference
    for row in rows:
        if reference not in (None, 0) and math.isfinite(row[2]):
            row[7] = (row[2] - reference) / abs(reference) * 100
    order = sorted(range(len(records)), key=lambda i: records[i][0])
    b, w = order[0], order[-1]
    out = [[row[0], row[1], _num(row[2]), _num(row[3]), _num(row[4]), _num(row[5]), row[6], _num(row[7]),
            _num(row[8]), row[9]] for row in rows]
    for label, i in (("best", b), ("worst", w)):
        out.append([label, rows[i][1]] + out[i][2:])

    def avg(col: int):
        vals = [row[col] for row in rows if row[col] is not None]
        return sum(vals) / len(vals) if vals else None

    out.append(["average", "", _num(avg(2)), _num(avg(3)), _num(avg(4)), _num(avg(5)),
                _num(sum(row[6] for row in rows) / len(rows)), _num(avg(7)), _num(avg(8)), ""])
    return _csv(out, SOLVE_HEADER), bool(records[b][3].feasible)


MULTI_HEADER = ["run", "seed", "front_size", "feasible_points", "hypervolume", "cpu_ms"]


def _solve_multi(args, instance: Instance, overrides: dict[str, str]) -> tuple[str, bool]:
    used: set[str] = set()
    fronts: list[Front] = []
    labels: list[str] = []
    extra: list[tuple[str, Front]] = []
    cpus = []
    seeds = []
    for r in range(args.repeat):
        seed = args.seed + r
        started = time.process_time()
        if args.alg == "nsga2":
            front = nsga2_solve(instance, _apply(NsgaParams.defaults(instance), overrides, used), seed,
                                args.threads, args.time_limit_ms)
        elif args.alg == "moead":
            front = moead_solve(instance, _apply(MoeadParams.defaults(instance), overrides, used), seed,
                                threads=args.threads, time_limit_ms=args.time_limit_ms)
        else:
            res = hybrid_solve(instance, _apply(NsgaParams.defaults(instance), overrides, used),
                               _apply(MoeadParams.defaults(instance), overrides, used), seed,
                               args.threads, args.time_limit_ms)
            front = res.front
            extra.append((f"nsga2-run{r + 1}", res.nsga2_front))
        cpus.append((time.process_time() - started) * 1000 if args.timing else None)
        fronts.append(front)
        labels.append(f"run{r + 1}")
        seeds.append(seed)
    _check_used(overrides, used)
    if args.output not in (None, "-") or args.front_prefix:
        prefix = args.front_prefix or str(Path(args.output).with_suffix("")) + "_"
        for label, front in list(zip(labels, fronts)) + extra:
            _emit(front.to_csv(), f"{prefix}front_{label}.csv")
        all_labels = labels + [lab for lab, _ in extra]
        all_points = [f.feasible_points() for f in fronts] + [f.feasible_points() for _, f in extra]
        if any(all_points):
            _emit(indicator_csv(all_labels, all_points), f"{prefix}indicators.csv")
    points = [f.feasible_points() for f in fronts]
    hvs: list[float | None] = [None] * len(fronts)
    if any(points):
        normed, _ = normalize([p for p in points if p])
        it = iter(normed)
        hvs = [hypervolume(next(it)) if p else 0.0 for p in points]
    rows = [[r + 1, seeds[r], len(fronts[r]), len(points[r]), _num(hvs[r]), _num(cpus[r])]
            for r in range(len(fronts))]
    if any(points):
        order = sorted(range(len(fronts)), key=lambda i: (-hvs[i], i))
        for label, i in (("best", order[0]), ("worst", order[-1])):
            rows.append([label] + rows[i][1:])
        timed = [c for c in cpus if c is not None]
        rows.append(["average", "", _num(sum(len(f) for f in fronts) / len(fronts)),
                     _num(sum(len(p) for p in points) / len(points)), _num(sum(hvs) / len(hvs)),
                     _num(sum(timed) / len(timed) if timed else None)])
    return _csv(rows, MULTI_HEADER), any(points)


def cmd_solve(args) -> int:
    if args.repeat < 1:
        raise UsageError("--repeat must be at least 1")
    variant = _variant_for(args)
    _check_pair(args.alg, variant)
    instance = load_instance(args.instance)
    overrides = _overrides(args.param)
    try:
        if args.alg in MULTI:
            text, ok = _solve_multi(args, instance, overrides)
        else:
            text, ok = _solve_single(args, instance, variant, overrides)
    except ValueError as exc:
        if isinstance(exc, InstanceError):
            raise
        raise UsageError(str(exc)) from exc
    _emit(text, args.output)
    return EXIT_OK if ok else EXIT_INFEASIBLE


# -- metrics -------------------------------------------------------------------------------------


def read_front(path: str) -> list[tuple[float, ...]]:
    """Feasible objective vectors of a front CSV (rows with penalty 0)."""
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                point = tuple(float(row[k]) for k in ("f1", "f2", "f3"))
                penalty = float(row.get("penalty") or 0)
            except (KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"{path}: not a front CSV") from exc
            if penalty <= 0:
                points.append(point)
    return points


def indicator_csv(labels: Sequence[str], fronts: Sequence[Sequence[Sequence[float]]]) -> str:
    """Hypervolume per front and the pairwise coverage matrix, after shared normalization."""
    if not any(fronts):
        raise UsageError("all fronts are empty")
    kept = [f for f in fronts if f]
    normed, _ = normalize(kept)
    it = iter(normed)
    scaled = [next(it) if f else [] for f in fronts]
    rows = []
    for label, pts in zip(labels, scaled):
        rows.append(["hypervolume", label, "", _num(hypervolume(pts))])
    for la, a in zip(labels, scaled):
        for lb, b in zip(labels, scaled):
            rows.append(["coverage", la, lb, _num(coverage(a, b)) if b else ""])
    return _csv(rows, ["indicator", "front", "other", "value"])


def cmd_metrics(args) -> int:
    if not args.fronts:
        raise UsageError("metrics needs at least one front file")
    fronts = [read_front(p) for p in args.fronts]
    _emit(indicator_csv(list(args.fronts), fronts), args.output)
    return EXIT_OK


# -- oracle ----------------------------------------------------------------------------------------


def cmd_oracle(args) -> int:
    instance = load_instance(args.instance)
    variant = Variant(args.variant)
    try:
        res = brute_force_solve(instance, variant)
    except (OracleLimitError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if variant is Variant.MULTIOBJ:
        rows = [[_num(f[0]), _num(f[1]), _num(f[2]), _num(p), ch.serialize()] for f, p, ch in res.pareto]
        _emit(_csv(rows, ["f1", "f2", "f3", "penalty", "chromosome"]), args.output)
    else:
        rows = [["optimum", _num(res.value), res.evaluated, res.chromosome.serialize() if res.chromosome else ""],
                ["best_feasible", _num(res.best_feasible_value), res.evaluated,
                 res.best_feasible.serialize() if res.best_feasible else ""]]
        _emit(_csv(rows, ["row", "value", "evaluated", "solution"]), args.output)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


# -- simulate -------------------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    instance = load_instance(args.instance)
    plan = load_chromosome(args.plan)
    kind = RecourseKind(args.kind)
    variant = Variant.SPR_PENALTY if kind is RecourseKind.PENALTY else Variant.SPR_SKIP
    try:
        sched = decode(instance, plan, variant, DEFAULT_PARAMS)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    config = _stochastic(args, args.seed)
    result = estimate(instance, plan, kind, config)
    comps = ";".join(_num(c) for c in result.components)
    rows = [[_num(sched.total_cost), _num(result.mean), _num(result.std_error), result.iterations,
             result.stop_reason.value, comps, _num(sched.total_cost + result.mean)]]
    _emit(_csv(rows, ["cost", "expected_recourse", "std_error", "iterations", "stop_reason", "components",
                      "total"]), args.output)
    return EXIT_OK if math.isfinite(result.mean) else EXIT_INFEASIBLE


# -- parser --------------------------------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get("HHC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        return 0


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--seed", type=int, default=default(_default_seed()),
                        help="base seed (default: $HHC_SEED or 0)")
    parser.add_argument("--threads", type=int, default=default(1), help="worker threads for evaluation")
    parser.add_argument("--time-limit-ms", type=float, default=default(None),
                        help="advisory wall-clock limit per run, checked between iterations")
    parser.add_argument("--timing", action="store_true", default=default(False),
                        help="fill the cpu_ms columns (makes output run-dependent)")


def _stochastic_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, default=0.05, help="relative-gap threshold of the estimator")
    parser.add_argument("--max-iter", type=int, default=100, help="maximum replications per estimate")
    parser.add_argument("--gap-window", type=int, default=10, help="consecutive small gaps needed to stop")
    parser.add_argument("--crn", action="store_true", help="common random numbers across candidate plans")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hhcrsp", description="Home health care routing and scheduling toolkit")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    variants = [v.value for v in Variant]

    gen = sub.add_parser("gen", help="generate an instance")
    _global_flags(gen, suppress=True)
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="named recipe, e.g. A1, MTW-B, Int3_1, Large-N100s")
    src.add_argument("--recipe", help="recipe JSON file")
    gen.add_argument("-o", "--output", help="instance JSON path (default stdout)")
    gen.add_argument("--feasible", choices=["soft-mtw", "hard-msmtw", "spr-penalty"],
                     help="regenerate with seed, seed+1, ... until GVNS finds a feasible plan")
    gen.add_argument("--max-tries", type=int, default=20)
    gen.add_argument("--feasible-stop", type=int, default=10, help="GVNS stop count of the feasibility search")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="run a solver repeatedly and tabulate the runs")
    _global_flags(solve, suppress=True)
    solve.add_argument("instance")
    solve.add_argument("--alg", choices=SINGLE + MULTI, required=True)
    solve.add_argument("--variant", choices=variants)
    solve.add_argument("--repeat", type=int, default=1)
    solve.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="override a solver or decoding parameter")
    solve.add_argument("--deterministic", action="store_true",
                       help="GA on a recourse variant: optimize the deterministic objective instead")
    solve.add_argument("--reference", type=float, help="reference value for the gap_pct column")
    solve.add_argument("--front-prefix", help="path prefix for front and indicator CSVs")
    solve.add_argument("-o", "--output", help="results CSV path (default stdout)")
    _stochastic_flags(solve)
    solve.set_defaults(func=cmd_solve)

    met = sub.add_parser("metrics", help="hypervolume and coverage of front CSVs")
    _global_flags(met, suppress=True)
    met.add_argument("fronts", nargs="*")
    met.add_argument("-o", "--output")
    met.set_defaults(func=cmd_metrics)

    ora = sub.add_parser("oracle", help="exhaustive optimum of a tiny instance")
    _global_flags(ora, suppress=True)
    ora.add_argument("instance")
    ora.add_argument("--variant", choices=variants, default="hard-msmtw")
    ora.add_argument("-o", "--output")
    ora.set_defaults(func=cmd_oracle)

    sim = sub.add_parser("simulate", help="Monte Carlo recourse estimate of a plan")
    _global_flags(sim, suppress=True)
    sim.add_argument("instance")
    sim.add_argument("plan", help="chromosome JSON")
    sim.add_argument("--kind", choices=[k.value for k in RecourseKind], default="penalty")
    sim.add_argument("-o", "--output")
    _stochastic_flags(sim)
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hhcrsp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, InstanceError, json.JSONDecodeError, KeyError) as exc:
        print(f"hhcrsp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
