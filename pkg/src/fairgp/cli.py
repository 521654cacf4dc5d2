"""Experiment harness and command-line surface.

Commands:
  train       one method, one trial; writes model JSONs and a metrics CSV
  experiment  repeated paired trials across methods with audits and
              hypervolume reports; resumable and parallel over trials
  audit       standalone subgroup audit of external predictions
  stats       all-pairs Bonferroni-adjusted Wilcoxon tests over a summary CSV

Exit codes: 0 success, 1 partial trial failure, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import analysis, auditor, metrics
from .data import Dataset, GroupSet, build_simple_groups, load_csv, train_test_split
from .errors import FairGPError, ValidationError
from .evolution import METHODS, EvolutionConfig, run
from .model import export_model, predict_proba

logger = logging.getLogger(__name__)

OBJECTIVE_PAIRS = ("fp_acc", "fp_aps", "fn_acc", "fn_aps")
SUMMARY_COLUMNS = ["dataset", "trial", "method",
                   "hv_fp_acc", "hv_fp_aps", "hv_fn_acc", "hv_fn_aps"]
METRICS_COLUMNS = ["trial", "method", "individual_id", "accuracy", "aps",
                   "fp_violation", "fn_violation", "marginal_fairness"]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    label: str
    sensitive: tuple[str, ...]
    methods: tuple[str, ...] = METHODS
    trials: int = 50
    split_fraction: float = 0.5
    seed: int = 0
    outdir: str = "results"
    max_terms: int = 3
    max_bins: int = 5
    jobs: int = 1
    fairness_rate_mode: str = "FP"     # rate behind the marginal_fairness column
    evolution: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.methods:
            raise ValidationError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValidationError(f"unknown methods {unknown}; choose from {METHODS}")

    def evolution_config(self, method: str, seed: int) -> EvolutionConfig:
        return EvolutionConfig(method=method, seed=seed, **self.evolution)

    @property
    def dataset_name(self) -> str:
        return Path(self.dataset).stem

    @classmethod
    def from_args(cls, args) -> "ExperimentConfig":
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw = json.load(fh)
        overrides = {
            "trials": args.trials,
            "seed": args.seed,
            "outdir": args.outdir or os.environ.get("FAIRGP_OUTDIR"),
            "max_terms": args.max_terms,
            "jobs": args.jobs,
        }
        if getattr(args, "method", None):
            overrides["methods"] = [args.method]
        raw.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("sensitive", "methods"):
            if key in raw:
                raw[key] = tuple(raw[key])
        missing = [k for k in ("dataset", "label", "sensitive") if k not in raw]
        if missing:
            raise ValidationError(f"config is missing required keys: {missing}")
        return cls(**raw)


def _format(value: float) -> str:
    return format(float(value), ".12g")


def _evaluate_population(pop, train: Dataset, test: Dataset, groups: GroupSet,
                         cfg: ExperimentConfig, trial: int, method: str):
    """Per-individual test metrics and audits for one final population."""
    probs = [predict_proba(ind, test) for ind in pop.individuals]
    hard = [(p >= 0.5).astype(int) for p in probs]
    fp_audits = auditor.audit_all(hard, test.labels, groups, test, "FP", cfg.max_terms)
    fn_audits = auditor.audit_all(hard, test.labels, groups, test, "FN", cfg.max_terms)

    rows = []
    audits = []
    for i, ind in enumerate(pop.individuals):
        for res in (fp_audits[i], fn_audits[i]):
            if isinstance(res, Exception):
                raise res
        aps = metrics.average_precision(probs[i], test.labels)
        rates = metrics.group_rates(hard[i], test.labels, groups, test)
        rows.append({
            "trial": trial,
            "method": method,
            "individual_id": i,
            "accuracy": _format(metrics.accuracy(hard[i], test.labels)),
            "aps": _format(0.0 if aps is None else aps),
            "fp_violation": _format(fp_audits[i].violation),
            "fn_violation": _format(fn_audits[i].violation),
            "marginal_fairness": _format(
                metrics.rate_based_marginal_fairness(rates, cfg.fairness_rate_mode)),
        })
        audits.append({
            "individual_id": i,
            "FP": fp_audits[i].to_json(list(groups.sensitive_names)),
            "FN": fn_audits[i].to_json(list(groups.sensitive_names)),
        })
    return rows, audits


def _hypervolume_reports(rows_by_method: dict[str, list[dict]]):
    """Per-method hypervolume for the four objective pairs, with violations
    normalized across all methods of the trial."""
    reports: dict[str, dict[str, analysis.HypervolumeReport]] = \
        {m: {} for m in rows_by_method}
    for pair in OBJECTIVE_PAIRS:
        viol_col = "fp_violation" if pair.startswith("fp") else "fn_violation"
        acc_col = "accuracy" if pair.endswith("acc") else "aps"
        tagged = []
        for method, rows in rows_by_method.items():
            for row in rows:
                tagged.append(analysis.SolutionPoint(
                    accuracy_metric=float(row[acc_col]),
                    violation_metric=float(row[viol_col]),
                    individual_id=int(row["individual_id"]),
                    method=method,
                ))
        normalized = analysis.normalize_violations(tagged)
        for method in rows_by_method:
            own = [p for p in normalized if p.method == method]
            front = analysis.pareto_front(own)
            reports[method][pair] = analysis.HypervolumeReport(
                method=method, objective_pair=pair,
                hypervolume=analysis.hypervolume_2d(front), front=tuple(front))
    return reports


def _trial_dir(cfg: ExperimentConfig, method: str, trial: int) -> Path:
    return Path(cfg.outdir) / cfg.dataset_name / method / f"trial_{trial}"


def _trial_report_path(cfg: ExperimentConfig, trial: int) -> Path:
    return Path(cfg.outdir) / cfg.dataset_name / f"trial_{trial}_hypervolumes.json"


def run_trial(cfg: ExperimentConfig, trial: int) -> list[dict]:
    """One paired trial: split once, run every method on the same split,
    audit test predictions, and write per-method artifacts. Returns the
    aggregate summary rows."""
    ds = load_csv(cfg.dataset, list(cfg.sensitive), cfg.label)
    seed = cfg.seed + trial
    train, test = train_test_split(ds, cfg.split_fraction, seed)
    groups = build_simple_groups(train, cfg.max_bins)

    rows_by_method: dict[str, list[dict]] = {}
    for method in cfg.methods:
        pop = run(cfg.evolution_config(method, seed), train, groups)
        rows, audits = _evaluate_population(pop, train, test, groups, cfg, trial, method)
        rows_by_method[method] = rows

        tdir = _trial_dir(cfg, method, trial)
        (tdir / "models").mkdir(parents=True, exist_ok=True)
        for i, ind in enumerate(pop.individuals):
            export_model(ind, str(tdir / "models" / f"model_{i:03d}.json"))
        with open(tdir / "metrics.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        with open(tdir / "audit.json", "w") as fh:
            json.dump(audits, fh, indent=1, sort_keys=True)

    reports = _hypervolume_reports(rows_by_method)
    with open(_trial_report_path(cfg, trial), "w") as fh:
        json.dump({m: {pair: r.to_json() for pair, r in by_pair.items()}
                   for m, by_pair in reports.items()}, fh, indent=1, sort_keys=True)

    return [
        {"dataset": cfg.dataset_name, "trial": trial, "method": method,
         **{f"hv_{pair}": _format(reports[method][pair].hypervolume)
            for pair in OBJECTIVE_PAIRS}}
        for method in cfg.methods
    ]


def _load_completed_trial(cfg: ExperimentConfig, trial: int) -> list[dict] | None:
    path = _trial_report_path(cfg, trial)
    if not path.exists():
        return None
    with open(path) as fh:
        reports = json.load(fh)
    if set(reports) != set(cfg.methods):
        return None
    return [
        {"dataset": cfg.dataset_name, "trial": trial, "method": method,
         **{f"hv_{pair}": _format(reports[method][pair]["hypervolume"])
            for pair in OBJECTIVE_PAIRS}}
        for method in cfg.methods
    ]


def cmd_train(cfg: ExperimentConfig) -> int:
    """Run the first configured method for trial 0 and write its artifacts."""
    run_trial(dataclasses.replace(cfg, methods=(cfg.methods[0],), trials=1), 0)
    return 0


def cmd_experiment(cfg: ExperimentConfig) -> int:
    """All trials x methods; completed trials (by report presence) are skipped."""
    load_csv(cfg.dataset, list(cfg.sensitive), cfg.label)   # fail fast on bad config
    pending = []
    all_rows: list[dict] = []
    for t in range(cfg.trials):
        done = _load_completed_trial(cfg, t)
        if done is None:
            pending.append(t)
        else:
            all_rows.extend(done)

    failures = []
    if cfg.jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {t: pool.submit(run_trial, cfg, t) for t in pending}
            for t in pending:
                try:
                    all_rows.extend(futures[t].result())
                except Exception as exc:  # noqa: BLE001 - recorded per trial
                    failures.append((t, exc))
    else:
        for t in pending:
            try:
                all_rows.extend(run_trial(cfg, t))
            except Exception as exc:  # noqa: BLE001
                failures.append((t, exc))

    for t, exc in failures:
        logger.error("trial %d failed: %s", t, exc)

    all_rows.sort(key=lambda r: (int(r["trial"]), str(r["method"])))
    summary = Path(cfg.outdir) / cfg.dataset_name / "summary.csv"
    summary.parent.mkdir(parents=True, exist_ok=True)
    with open(summary, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(all_rows)
    return 1 if failures else 0


def cmd_audit(dataset_path: str, predictions_path: str, cfg_sensitive: list[str],
              label: str, max_terms: int = 3, max_bins: int = 5,
              groups_from: str | None = None, out=None) -> int:
    """Audit external predictions (headerless CSV: probability, hard label)."""
    out = out or sys.stdout
    ds = load_csv(dataset_path, cfg_sensitive, label)
    raw = np.loadtxt(predictions_path, delimiter=",", ndmin=2)
    if raw.shape[0] != ds.m or raw.shape[1] != 2:
        print(f"error: predictions ({raw.shape[0]} rows) do not align with "
              f"dataset ({ds.m} rows)", file=sys.stderr)
        return 2
    hard = raw[:, 1].astype(int)
    groups_ds = ds if groups_from is None else load_csv(groups_from, cfg_sensitive, label)
    groups = build_simple_groups(groups_ds, max_bins)
    result = {
        mode: auditor.audit_exhaustive(hard, ds.labels, groups, ds, mode, max_terms)
              .to_json(list(groups.sensitive_names))
        for mode in ("FP", "FN")
    }
    json.dump(result, out, indent=1, sort_keys=True)
    out.write("\n")
    return 0


def cmd_stats(summary_path: str, out_path: str | None = None) -> int:
    """All-pairs Wilcoxon signed-rank tests with Bonferroni adjustment,
    one table per hypervolume measure."""
    with open(summary_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    methods = sorted({r["method"] for r in rows})
    trials = sorted({int(r["trial"]) for r in rows})
    if len(trials) < 5:
        print(f"error: need >= 5 trials for paired statistics, got {len(trials)}",
              file=sys.stderr)
        return 2

    by_key = {(int(r["trial"]), r["method"]): r for r in rows}
    stats_rows = []
    pairs = list(combinations(methods, 2))
    for pair_name in OBJECTIVE_PAIRS:
        col = f"hv_{pair_name}"
        raw_ps = []
        for a, b in pairs:
            va = [float(by_key[(t, a)][col]) for t in trials]
            vb = [float(by_key[(t, b)][col]) for t in trials]
            diffs = [x - y for x, y in zip(va, vb)]
            if all(d == 0 for d in diffs) or sum(d != 0 for d in diffs) >= 5:
                raw_ps.append(analysis.wilcoxon_signed_rank(va, vb))
            else:
                raw_ps.append(float("nan"))
        adjusted = [p if np.isnan(p) else min(1.0, p * len(pairs)) for p in raw_ps]
        for (a, b), p_raw, p_adj in zip(pairs, raw_ps, adjusted):
            stats_rows.append({
                "measure": col, "method_a": a, "method_b": b,
                "p_raw": _format(p_raw) if not np.isnan(p_raw) else "nan",
                "p_adjusted": _format(p_adj) if not np.isnan(p_adj) else "nan",
            })

    out_path = out_path or str(Path(summary_path).with_name("pairwise_stats.csv"))
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["measure", "method_a", "method_b", "p_raw", "p_adjusted"])
        writer.writeheader()
        writer.writerows(stats_rows)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairgp",
                                     description="Fair symbolic classification experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--outdir")
        p.add_argument("--max-terms", type=int, dest="max_terms")

    add_config_flags(sub.add_parser("train", help="run one method for one trial"))
    add_config_flags(sub.add_parser("experiment", help="run all trials and methods"))

    p_audit = sub.add_parser("audit", help="audit external predictions")
    p_audit.add_argument("dataset")
    p_audit.add_argument("predictions")
    p_audit.add_argument("--label", required=True)
    p_audit.add_argument("--sensitive", required=True,
                         help="comma-separated sensitive column names")
    p_audit.add_argument("--max-terms", type=int, default=3, dest="max_terms")
    p_audit.add_argument("--max-bins", type=int, default=5, dest="max_bins")
    p_audit.add_argument("--groups-from",
                         help="CSV whose rows define the simple groups "
                              "(default: the audited dataset)")

    p_stats = sub.add_parser("stats", help="pairwise tests over a summary CSV")
    p_stats.add_argument("summary")
    p_stats.add_argument("--out")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("train", "experiment"):
            cfg = ExperimentConfig.from_args(args)
            return cmd_train(cfg) if args.command == "train" else cmd_experiment(cfg)
        if args.command == "audit":
            return cmd_audit(args.dataset, args.predictions,
                             args.sensitive.split(","), args.label,
                             max_terms=args.max_terms, max_bins=args.max_bins,
                             groups_from=args.groups_from)
        return cmd_stats(args.summary, args.out)
    except FairGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001 - diagnostics for unexpected failures
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
