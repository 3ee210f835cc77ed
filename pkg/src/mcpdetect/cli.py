"""Command-line interface.

stdout carries data only; progress and errors go to stderr. Errors are a
single JSON object on stderr and the exit status is 1 (usage), 2 (data) or
3 (numeric/fit).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from . import formats
from .attacks import EditAttackSpec, attack_text, edit_count, tokenize_ws
from .baselines import KINDS as BASELINE_KINDS
from .baselines import fit_calibrator, predict_labels, predict_proba
from .calibration import CalibrationSet, calibrate
from .core import HUMAN, MACHINE, DetectorProfile, nonconformity_array
from .detection import detect_batch
from .evaluation import ALPHA_GRID, align_by_id, confusion, metrics, pearson_length_score, sweep
from .exceptions import InputError, MCPError, UsageError
from .synthetic import SynthConfig, coverage_trial, generate

FORMAT_ENV = "MCPDETECT_FORMAT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@contextlib.contextmanager
def _open(path: str, mode: str = "r"):
    if path == "-":
        yield sys.stdin if "r" in mode else sys.stdout
        return
    try:
        fh = open(path, mode, encoding="utf-8", newline="" if "w" in mode else None)
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}", code="FILE_ERROR",
                         path=path) from None
    with fh:
        yield fh


def _load_profile(path: str) -> DetectorProfile:
    with _open(path) as fh:
        return formats.profile_from_json(formats.load_json(fh))


def _emit(obj, fmt: str, columns, out: str = "-"):
    rows = obj if isinstance(obj, list) else [obj]
    with _open(out, "w") as fh:
        if fmt == "csv":
            fh.write(formats.rows_to_csv(rows, columns))
        else:
            formats.dump_json(obj, fh)


def _log(msg: str):
    print(msg, file=sys.stderr)


# -- subcommands -----------------------------------------------------------

def cmd_calibrate(args):
    profile = _load_profile(args.profile)
    with _open(args.cal) as fh:
        records = formats.read_instances(fh)
    cal = CalibrationSet.from_instances(profile, records, allow_unlabeled=args.allow_unlabeled)
    table = calibrate(cal, args.alpha, w=args.width, mode=args.mode,
                      merge_sparse=args.merge_sparse)
    with _open(args.out, "w") as fh:
        formats.dump_json(formats.table_to_json(table, profile), fh)
    _log(f"calibrated {len(cal)} records: K={table.k_bins} bins, "
         f"n per bin={[b.n for b in table.bins]}, sentinel bins={table.sentinel_count}")


def cmd_detect(args):
    with _open(args.table) as fh:
        table, profile = formats.table_from_json(formats.load_json(fh))
    with _open(args.input) as fh:
        instances = formats.read_instances(fh)
    verdicts = detect_batch(table, profile, instances, n_jobs=args.jobs)
    with _open(args.out, "w") as fh:
        formats.write_jsonl(fh, (v.to_dict() for v in verdicts))


EVAL_COLUMNS = ("n", "tp", "fp", "tn", "fn", "fpr", "tpr", "precision", "f1")


def cmd_evaluate(args):
    with _open(args.verdicts) as fh:
        verdicts = formats.read_verdicts(fh)
    with _open(args.truth) as fh:
        truth_records = formats.read_instances(fh)
    truth = {}
    for rec in truth_records:
        if rec.label is None:
            raise InputError(f"truth record {rec.id!r} has no label", code="TEST_UNLABELED",
                             id=rec.id)
        truth[rec.id] = rec.label
    predicted, labels = align_by_id(verdicts, truth)
    c = confusion(predicted, labels)
    report = {"n": c.total, **c.to_dict(), **metrics(c).to_dict()}
    _emit(report, args.format, EVAL_COLUMNS)


SWEEP_COLUMNS = ("mode", "method", "alpha", "fpr", "tpr", "f1")


def cmd_sweep(args):
    profile = _load_profile(args.profile)
    with _open(args.cal) as fh:
        cal = CalibrationSet.from_instances(profile, formats.read_instances(fh),
                                            allow_unlabeled=args.allow_unlabeled)
    with _open(args.test) as fh:
        test = formats.read_instances(fh)
    baselines = {}
    for path in args.baseline_model or ():
        with _open(path) as fh:
            model, _ = formats.model_from_json(formats.load_json(fh))
        baselines[f"{model.kind}:{os.path.basename(path)}"] = model
    modes = list(args.modes)
    if baselines and "baseline" not in modes:
        modes.append("baseline")
    report = sweep(cal, test, args.alphas, w=args.width, modes=modes, baselines=baselines,
                   cut=args.cut, merge_sparse=args.merge_sparse)
    _emit(report.to_records(), args.format, SWEEP_COLUMNS)


def _synth_config(args) -> SynthConfig:
    profile = DetectorProfile(name="synthetic", k=args.k, tau=args.tau, l_max=args.l_max)
    return SynthConfig(seed=args.seed, n_cal=args.n_cal, n_human=args.n_human,
                       n_machine=args.n_machine, l_min=args.l_min, l_max=args.l_max,
                       length_law=args.length_law, a_human=args.a_human, b_human=args.b_human,
                       sigma_human=args.sigma_human, a_machine=args.a_machine,
                       b_machine=args.b_machine, sigma_machine=args.sigma_machine,
                       profile=profile, with_text=args.with_text)


def cmd_synth(args):
    cfg = _synth_config(args)
    _, test, cal_records = generate(cfg)
    with _open(args.cal_out, "w") as fh:
        formats.write_instances(fh, cal_records)
    if args.profile_out:
        with _open(args.profile_out, "w") as fh:
            formats.dump_json(cfg.profile.to_dict(), fh)
    with _open(args.test_out, "w") as fh:
        formats.write_instances(fh, test)
    _log(f"synth: {len(cal_records)} calibration, {len(test)} test records (seed {args.seed})")


COVERAGE_COLUMNS = ("alpha", "w", "trials", "mean_fpr", "max_fpr", "band", "violations")


def cmd_coverage(args):
    cfg = _synth_config(args)
    rows = []
    for w in args.widths:
        for a in args.alphas:
            res = coverage_trial(cfg, a, w, args.trials, merge_sparse=args.merge_sparse)
            rows.append({"alpha": a, "w": w, "trials": args.trials, "mean_fpr": res.mean_fpr,
                         "max_fpr": float(res.per_trial_fprs.max()), "band": res.band,
                         "violations": res.violations})
    _emit(rows, args.format, COVERAGE_COLUMNS)


def cmd_attack(args):
    with _open(args.input) as fh:
        records = formats.read_instances(fh)
    if args.vocab:
        with _open(args.vocab) as fh:
            vocab = [line.strip() for line in fh if line.strip()]
    else:
        vocab = sorted({t for r in records if r.text for t in tokenize_ws(r.text)})
    seeds = np.random.SeedSequence(args.seed).generate_state(max(len(records), 1), np.uint64)
    out = []
    for rec, seed in zip(records, seeds):
        if args.only_machine and rec.label != MACHINE:
            out.append(rec)
            continue
        if rec.text is None:
            raise InputError(f"record {rec.id!r} has no text to attack", code="MISSING_TEXT",
                             id=rec.id)
        spec = EditAttackSpec(kind=args.kind, rate=args.rate, vocabulary=vocab, seed=int(seed))
        text = attack_text(rec.text, spec)
        n_before = len(tokenize_ws(rec.text))
        extra = dict(rec.extra)
        extra["attack"] = {"kind": args.kind, "rate": args.rate,
                           "edits": min(edit_count(n_before, args.rate), n_before - 1)
                           if args.kind == "delete" else edit_count(n_before, args.rate)}
        # the old raw score described the unedited text, so it is dropped
        out.append(replace(rec, text=text, length=len(tokenize_ws(text)), raw_score=None,
                           extra=extra))
    with _open(args.out, "w") as fh:
        formats.write_instances(fh, out)


CORRELATE_COLUMNS = ("n", "label", "pearson")


def cmd_correlate(args):
    profile = _load_profile(args.profile)
    with _open(args.input) as fh:
        records = formats.read_instances(fh)
    if args.label != "all":
        records = [r for r in records if r.label == args.label]
    missing = [r.id for r in records if r.raw_score is None]
    if missing:
        raise InputError(f"record {missing[0]!r} has no raw_score", code="MISSING_SCORE")
    scores = nonconformity_array(profile, [r.raw_score for r in records]) if records else []
    rho = pearson_length_score(list(zip([r.length for r in records], scores)))
    _emit({"n": len(records), "label": args.label, "pearson": rho}, args.format,
          CORRELATE_COLUMNS)


def cmd_baseline_fit(args):
    profile = _load_profile(args.profile)
    with _open(args.input) as fh:
        records = formats.read_instances(fh)
    for r in records:
        if r.label is None or r.raw_score is None:
            raise InputError(f"record {r.id!r} needs both label and raw_score",
                             code="BAD_RECORD", id=r.id)
    scores = nonconformity_array(profile, [r.raw_score for r in records])
    model = fit_calibrator(args.kind, scores, [r.label for r in records])
    with _open(args.out, "w") as fh:
        formats.dump_json(formats.model_to_json(model, profile), fh)


def cmd_baseline_apply(args):
    with _open(args.model) as fh:
        model, profile = formats.model_from_json(formats.load_json(fh))
    with _open(args.input) as fh:
        records = formats.read_instances(fh)
    missing = [r.id for r in records if r.raw_score is None]
    if missing:
        raise InputError(f"record {missing[0]!r} has no raw_score", code="MISSING_SCORE")
    scores = nonconformity_array(profile, [r.raw_score for r in records]) if records else np.empty(0)
    probs = predict_proba(model, scores)
    labels = predict_labels(model, scores, args.cut)
    with _open(args.out, "w") as fh:
        formats.write_jsonl(fh, ({"id": r.id, "score": float(s), "prob_machine": float(p),
                                  "label_out": MACHINE if lab else HUMAN}
                                 for r, s, p, lab in zip(records, scores, probs, labels)))


# -- parser ----------------------------------------------------------------

def _alpha_list(text: str) -> List[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _add_synth_options(p):
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-cal", type=int, default=5000)
    p.add_argument("--n-human", type=int, default=2500)
    p.add_argument("--n-machine", type=int, default=2500)
    p.add_argument("--l-min", type=int, default=10)
    p.add_argument("--l-max", type=int, default=1024)
    p.add_argument("--length-law", choices=("uniform", "geometric"), default="uniform")
    p.add_argument("--a-human", type=float, default=0.0)
    p.add_argument("--b-human", type=float, default=0.002)
    p.add_argument("--sigma-human", type=float, default=0.5)
    p.add_argument("--a-machine", type=float, default=2.0)
    p.add_argument("--b-machine", type=float, default=0.0)
    p.add_argument("--sigma-machine", type=float, default=0.5)
    p.add_argument("--k", type=int, choices=(-1, 1), default=1)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--with-text", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    default_format = os.environ.get(FORMAT_ENV, "json")
    if default_format not in ("json", "csv"):
        default_format = "json"
    parser = _Parser(prog="mcpdetect", description="Multiscaled conformal MGT detection")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fmt(p):
        p.add_argument("--format", choices=("json", "csv"), default=default_format)

    p = sub.add_parser("calibrate", help="fit a quantile table on human calibration data")
    p.add_argument("--cal", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--mode", choices=("mcp", "cp"), default="mcp")
    p.add_argument("--merge-sparse", action="store_true")
    p.add_argument("--allow-unlabeled", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="classify instances with a quantile table")
    p.add_argument("--table", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="confusion counts and metrics for verdicts")
    p.add_argument("--verdicts", default="-")
    p.add_argument("--truth", required=True)
    fmt(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="metrics across an alpha grid for several modes")
    p.add_argument("--cal", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--alphas", type=_alpha_list, default=list(ALPHA_GRID))
    p.add_argument("--modes", type=lambda s: [m for m in s.split(",") if m],
                   default=["vanilla_roc", "cp", "mcp"])
    p.add_argument("--baseline-model", action="append")
    p.add_argument("--cut", type=float, default=0.5)
    p.add_argument("--merge-sparse", action="store_true")
    p.add_argument("--allow-unlabeled", action="store_true")
    fmt(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic scored corpus")
    _add_synth_options(p)
    p.add_argument("--cal-out", required=True)
    p.add_argument("--test-out", default="-")
    p.add_argument("--profile-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("coverage", help="Monte Carlo FPR of MCP on synthetic data")
    _add_synth_options(p)
    p.add_argument("--alphas", type=_alpha_list, default=list(ALPHA_GRID))
    p.add_argument("--widths", type=_int_list, default=[50, 100, 200])
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--merge-sparse", action="store_true")
    fmt(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("attack", help="random token edits on the text field")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--kind", choices=("insert", "delete", "substitute"), required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--vocab", help="file with one token per line (default: corpus tokens)")
    p.add_argument("--only-machine", action="store_true")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("correlate", help="Pearson correlation of length and score")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--profile", required=True)
    p.add_argument("--label", choices=("human", "machine", "all"), default="human")
    fmt(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("baseline-fit", help="fit a max-F1, Platt or isotonic calibrator")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--kind", choices=BASELINE_KINDS, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_baseline_fit)

    p = sub.add_parser("baseline-apply", help="score records with a fitted calibrator")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--cut", type=float, default=0.5)
    p.set_defaults(func=cmd_baseline_apply)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except MCPError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
