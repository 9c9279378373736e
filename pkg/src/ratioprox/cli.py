"""Command-line front end: ``ratioprox {prox,sweep,bench,check}``.

Exit codes: 0 ok, 1 oracle check failure, 2 unreadable input, 3 numerical
failure (some support size could not be solved to tolerance).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import ProxInputError, ProxProblem, canonicalize, q_value, validate
from .oracle import MAX_N, OracleConfig, oracle_prox
from .prox import MODES, enumerate_candidates, prox

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3
CHECK_TOL = 1e-6
NAIVE_BENCH_MAX = 10_000
SWEEP_HEADER = ("k", "A_k", "exists", "lambda_star", "F", "Q")


class ParseError(Exception):
    pass


@dataclass(frozen=True)
class Record:
    index: int
    problem: ProxProblem


def _infer_format(path: str, fmt: str | None) -> str:
    if fmt:
        return fmt
    return "csv" if Path(path).suffix.lower() in (".csv", ".txt") else "jsonl"


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _problem(index, y, mu, a):
    if mu is None:
        raise ParseError(f"record {index}: no mu given (use --mu)")
    try:
        return validate(ProxProblem(y, mu, a))
    except (ProxInputError, TypeError, ValueError) as exc:
        raise ParseError(f"record {index}: {exc}") from None


def read_records(path: str, fmt: str | None, mu: float | None,
                 a: float) -> list[Record]:
    """Parse a vector file; per-record ``mu``/``a`` override the defaults."""
    fmt = _infer_format(path, fmt)
    text = _read_text(path)
    out: list[Record] = []
    if fmt == "csv":
        rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
        for i, row in enumerate(rows):
            try:
                y = [float(c) for c in row if c.strip()]
            except ValueError as exc:
                raise ParseError(f"record {i}: {exc}") from None
            out.append(Record(i, _problem(i, y, mu, a)))
    else:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        for i, line in enumerate(lines):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"record {i}: invalid JSON ({exc.msg})") from None
            if isinstance(obj, list):
                obj = {"y": obj}
            if not isinstance(obj, dict) or "y" not in obj:
                raise ParseError(f"record {i}: expected an object with field 'y'")
            y = obj["y"]
            if not isinstance(y, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in y):
                raise ParseError(f"record {i}: 'y' must be a list of numbers")
            out.append(Record(i, _problem(
                i, y, obj.get("mu", mu), obj.get("a", a))))
    if not out:
        raise ParseError(f"{path}: no records")
    return out


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _prox_record(rec: Record, mode: str, all_solutions: bool):
    res = prox(rec.problem, mode=mode)
    chosen = res.members if all_solutions else (res.best,)
    members = [{"k": m.k, "x": [float(v) for v in m.x],
                "Q": q_value(m.x, rec.problem)} for m in chosen]
    return {
        "record": rec.index,
        "members": members,
        "contains_zero": res.contains_zero,
        "is_set_valued": res.is_set_valued,
        "failures": list(res.failures),
    }


def _table(rows) -> str:
    lines = []
    for row in rows:
        flags = []
        if row["is_set_valued"]:
            flags.append("set-valued")
        if row["contains_zero"]:
            flags.append("contains 0")
        for m in row["members"]:
            x = ", ".join(f"{v:.3f}" for v in m["x"])
            extra = f"  ({', '.join(flags)})" if flags else ""
            lines.append(f"{row['record']:>4}  k={m['k']:<3} Q={m['Q']:.3f}  [{x}]{extra}")
    return "\n".join(lines) + "\n"


def cmd_prox(args) -> int:
    records = read_records(args.input, args.format, args.mu, args.a)
    rows = [_prox_record(r, args.mode, args.all_solutions) for r in records]
    if args.table:
        text = _table(rows)
    else:
        text = "".join(json.dumps(r) + "\n" for r in rows)
    _emit(args.out, text)
    return EXIT_NUMERIC if any(r["failures"] for r in rows) else EXIT_OK


def sweep_rows(problem: ProxProblem, mode: str = "optimized"):
    """Per-k rows ``(k, A_k, exists, lambda_star, F, Q)``; ``None`` when absent."""
    enum = enumerate_candidates(canonicalize(problem.y), problem.mu, mode)
    d = enum.diagnostics
    rows = []
    for i in range(len(d.A_k)):
        has = not math.isnan(d.f_value[i])
        rows.append((i + 1, float(d.A_k[i]), bool(d.exists[i]),
                     float(d.lambda_star[i]) if has else None,
                     float(d.f_value[i]) if has else None,
                     float(d.q_value[i]) if has else None))
    return rows, d.failures


def cmd_sweep(args) -> int:
    records = read_records(args.input, args.format, args.mu, args.a)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    failed = False
    for j, rec in enumerate(records):
        rows, failures = sweep_rows(rec.problem, args.mode)
        failed |= bool(failures)
        if j:
            buf.write("\n")
        w.writerow(SWEEP_HEADER)
        for k, A, ex, lam, F, Q in rows:
            w.writerow([k, _fmt(A), int(ex), _fmt(lam), _fmt(F), _fmt(Q)])
    _emit(args.out, buf.getvalue())
    return EXIT_NUMERIC if failed else EXIT_OK


def bench(sizes, trials: int = 5, seed: int = 0, mu: float = 1.0):
    """Median wall time of one prox call per ``(n, mode)``."""
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        ys = [rng.standard_normal(n) for _ in range(trials)]
        modes = MODES if n <= NAIVE_BENCH_MAX else MODES[:1]
        for mode in modes:
            times = []
            for y in ys:
                p = ProxProblem(y, mu)
                t0 = time.perf_counter()
                prox(p, mode=mode).x
                times.append(time.perf_counter() - t0)
            out.append((n, float(np.median(times)), mode))
    return out


def cmd_bench(args) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n", "time", "mode"))
    for n, t, mode in bench(args.sizes, args.trials, args.seed, args.mu or 1.0):
        w.writerow((n, repr(t), mode))
    _emit(args.out, buf.getvalue())
    return EXIT_OK


def _random_records(count, n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        y = rng.standard_normal(n)
        mu = 10.0 ** rng.uniform(-3, 2)
        a = float(rng.choice((0.0, 0.5, 1.0)))
        out.append(Record(i, ProxProblem(y, mu, a)))
    return out


def cmd_check(args) -> int:
    if args.random:
        records = _random_records(args.random, args.n, args.seed)
    elif args.input:
        records = read_records(args.input, args.format, args.mu, args.a)
    else:
        raise ParseError("check needs an input file or --random COUNT")
    for rec in records:
        if rec.problem.n > MAX_N:
            raise ParseError(f"record {rec.index}: oracle needs n <= {MAX_N}")
    cfg = OracleConfig(n_starts=args.n_starts, seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("record", "n", "mu", "a", "Q_prox", "Q_oracle", "gap", "ok"))
    worst, failures, numeric = -math.inf, 0, False
    for rec in records:
        res = prox(rec.problem)
        numeric |= bool(res.failures)
        qp = q_value(res.x, rec.problem)
        qo = oracle_prox(rec.problem, cfg).q
        gap = qp - qo
        ok = gap <= CHECK_TOL
        failures += not ok
        worst = max(worst, gap)
        p = rec.problem
        w.writerow((rec.index, p.n, repr(p.mu), repr(p.a), repr(qp), repr(qo),
                    repr(gap), int(ok)))
    _emit(args.out, buf.getvalue())
    print(f"checked {len(records)} records: max gap {worst:.3e}, "
          f"{failures} failure(s)", file=sys.stderr)
    if failures:
        return EXIT_CHECK
    return EXIT_NUMERIC if numeric else EXIT_OK


def _emit(out: str | None, text: str):
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ratioprox",
        description="Exact prox of mu * ||x||_1 / ||x||_2.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("input", help="vector file (.csv or .jsonl), '-' for stdin")
        sp.add_argument("--mu", type=float, help="default mu for records without one")
        sp.add_argument("--a", type=float, default=1.0, help="h(0), default 1")
        sp.add_argument("--format", choices=("csv", "jsonl"),
                        help="input format; inferred from the extension")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path (default stdout)")

    sp = sub.add_parser("prox", help="evaluate the prox for every record")
    common(sp)
    sp.add_argument("--mode", choices=MODES, default="optimized")
    sp.add_argument("--all-solutions", action="store_true",
                    help="emit every tied member, not only the best one")
    sp.add_argument("--table", action="store_true",
                    help="human-readable table instead of JSON lines")
    sp.set_defaults(func=cmd_prox)

    sp = sub.add_parser("sweep", help="per-k diagnostics as CSV")
    common(sp)
    sp.add_argument("--mode", choices=MODES, default="optimized")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bench", help="timing table, CSV n,time,mode")
    common(sp, needs_input=False)
    sp.add_argument("--sizes", type=int, nargs="+",
                    default=[1_000, 10_000, 100_000])
    sp.add_argument("--trials", type=int, default=5)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("check", help="compare prox against the brute-force oracle")
    sp.add_argument("input", nargs="?")
    common(sp, needs_input=False)
    sp.add_argument("--random", type=int, metavar="COUNT",
                    help="check COUNT random Gaussian instances instead")
    sp.add_argument("--n", type=int, default=3, help="size of random instances")
    sp.add_argument("--n-starts", type=int, default=128)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
