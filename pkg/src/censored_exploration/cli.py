"""Command-line entry point: ``simulate``, ``fit`` and ``estimate``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import math
import os
import sys

import numpy as np

from . import config as config_mod
from ._validation import DomainError, InsufficientDataError
from .km import VenueCounters, _check_params, concentration_halfwidth, cutoff, km_tail, optimistic_km
from .models import Family, fit_mle, log_loss
from .simulator import run_experiment

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# schema_version: {SCHEMA_VERSION}"
FINAL_WINDOW = 50

CURVE_COLUMNS = ["episode", "mean", "smoothed", "stderr"]
SUMMARY_COLUMNS = ["policy", "metric", "final_mean", "final_stderr", "window"]
FIT_COLUMNS = ["venue_id", "family", "n_train", "n_test", "s_max", "zero_prob", "shape",
               "train_loss", "test_loss", "flagged", "note"]
ESTIMATE_COLUMNS = ["venue_id", "s", "d", "n", "km_tail", "optimistic_tail", "half_width",
                    "cutoff"]


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_table(fh, columns, rows):
    fh.write(SCHEMA_LINE + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(x) if not isinstance(x, str) else x for x in row])


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


def read_observations(path) -> dict:
    """Read ``venue_id,submitted,consumed`` rows into per-venue ``(n, 2)`` arrays.

    Venue order follows first appearance in the file.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith("#")]
    if not body:
        return {}
    header = [h.strip() for h in body[0][1].split(",")]
    if header != ["venue_id", "submitted", "consumed"]:
        raise UsageError(f"{path}:{body[0][0]}: header must be venue_id,submitted,consumed")
    venues: dict = {}
    for lineno, ln in body[1:]:
        parts = [p.strip() for p in next(csv.reader([ln]))]
        if len(parts) != 3:
            raise UsageError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            v, r = int(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"{path}:{lineno}: submitted and consumed must be integers") from None
        if not 0 <= r <= v:
            raise UsageError(f"{path}:{lineno}: need 0 <= consumed <= submitted")
        venues.setdefault(parts[0], []).append((v, r))
    return {k: np.array(v, dtype=np.int64).reshape(-1, 2) for k, v in venues.items()}


def cmd_simulate(args) -> int:
    try:
        cfg = config_mod.load(args.config)
    except config_mod.ConfigError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    for flag in ("seed", "trials", "episodes"):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg.sim, flag, value)
    out_dir = args.out or cfg.output_path
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out_dir}: {exc}", file=sys.stderr)
        return 3

    want_hl = "half_life" in cfg.metrics
    curves = []
    for spec in cfg.policies:
        result = run_experiment(cfg.sim, spec.build(cfg.sim), half_life=want_hl)
        for metric in cfg.metrics:
            curves.append((spec.name, metric, getattr(result, metric)))

    try:
        summary = []
        for name, metric, curve in curves:
            path = os.path.join(out_dir, f"{name}__{metric}.csv")
            rows = zip(curve.episode, curve.mean, curve.smoothed, curve.stderr)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                _write_table(fh, CURVE_COLUMNS, rows)
            mean, se = curve.final_window(FINAL_WINDOW)
            summary.append((name, metric, mean, se, min(FINAL_WINDOW, len(curve.episode))))
        with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
            _write_table(fh, SUMMARY_COLUMNS, summary)
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return 3
    return 0


def fit_report(data: dict, family, split: float = 0.5, seed: int = 0) -> list:
    """Per-venue train/test log-loss rows for one model family."""
    family = Family.parse(family)
    rng = np.random.default_rng(seed)
    rows = []
    for venue_id, X in data.items():
        n = len(X)
        perm = rng.permutation(n)
        n_train = int(round(split * n))
        train, test = X[perm[:n_train]], X[perm[n_train:]]
        s_max = max(int(X[:, 0].max()) if n else 1, 1)
        base = [venue_id, family.value, len(train), len(test), s_max]
        try:
            result = fit_mle(train, family, s_max)
        except (InsufficientDataError, DomainError) as exc:
            rows.append(base + [None, None, None, None, True, str(exc)])
            continue
        model = result.model
        zero_prob = None if family is Family.NONPARAMETRIC else model.zero_prob
        rows.append(base + [
            zero_prob, model.shape, log_loss(model, train),
            log_loss(model, test) if len(test) else None, result.flagged, result.reason,
        ])
    return rows


def cmd_fit(args) -> int:
    if not 0 < args.split < 1:
        raise UsageError("--split must lie in (0, 1)")
    try:
        family = Family.parse(args.family)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    data = read_observations(args.data)
    rows = fit_report(data, family, args.split, args.seed)
    with _open_out(args.out) as fh:
        _write_table(fh, FIT_COLUMNS, rows)
    return 0


def estimate_report(data: dict, epsilon, delta, v_cap, explore_const) -> list:
    rows = []
    for venue_id, X in data.items():
        counters = VenueCounters(v_cap)
        try:
            counters.ingest_many(X)
        except DomainError as exc:
            raise UsageError(f"venue {venue_id}: {exc}") from None
        raw = km_tail(counters).t
        opt = optimistic_km(counters, epsilon, delta, v_cap, explore_const)
        width = concentration_halfwidth(counters, delta, v_cap)
        c = cutoff(counters, epsilon, delta, v_cap, explore_const)
        for s in range(v_cap + 1):
            rows.append([venue_id, s, counters.d[s], counters.n[s], raw[s], opt.t[s],
                         width[s], c])
    return rows


def cmd_estimate(args) -> int:
    try:
        _check_params(args.epsilon, args.delta, args.vcap, args.explore_const)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    data = read_observations(args.data)
    rows = estimate_report(data, args.epsilon, args.delta, args.vcap, args.explore_const)
    with _open_out(args.out) as fh:
        _write_table(fh, ESTIMATE_COLUMNS, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="censored-exploration", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the venue simulator and write learning curves")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output.path)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a venue model family and report train/test log-loss")
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True, help=", ".join(f.value for f in Family))
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("estimate", help="optimistic Kaplan-Meier curves per venue")
    p.add_argument("--data", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--vcap", type=int, required=True)
    p.add_argument("--explore-const", type=float, default=128.0)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
