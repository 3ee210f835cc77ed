"""On-disk formats: JSONL instance/verdict streams and JSON documents for
profiles, quantile tables and fitted baseline models."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import IO, Iterable, List, Mapping, Sequence, Tuple

from .attacks import tokenize_ws
from .baselines import CalibratorModel
from .calibration import BinRecord, QuantileTable
from .core import DetectorProfile, ScoredInstance
from .detection import Verdict
from .exceptions import InputError, MCPError

FORMAT_VERSION = 1
_KNOWN = ("id", "length", "raw_score", "label", "text")


def _finite_number(value, what, lineno):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"line {lineno}: {what} must be a number", code="BAD_RECORD",
                         line=lineno)
    return value


def record_to_instance(obj: Mapping, lineno: int = 0) -> ScoredInstance:
    if not isinstance(obj, dict):
        raise InputError(f"line {lineno}: expected a JSON object", code="BAD_RECORD", line=lineno)
    if "id" not in obj:
        raise InputError(f"line {lineno}: missing id", code="BAD_RECORD", line=lineno)
    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        raise InputError(f"line {lineno}: text must be a string", code="BAD_RECORD", line=lineno)
    if "length" in obj:
        length = _finite_number(obj["length"], "length", lineno)
    elif text is not None:
        length = len(tokenize_ws(text))
    else:
        raise InputError(f"line {lineno}: need length or text", code="BAD_RECORD", line=lineno)
    raw = obj.get("raw_score")
    if raw is not None:
        _finite_number(raw, "raw_score", lineno)
    extra = {k: v for k, v in obj.items() if k not in _KNOWN}
    try:
        return ScoredInstance(id=str(obj["id"]), length=length, raw_score=raw,
                              label=obj.get("label"), text=text, extra=extra)
    except MCPError as exc:
        raise InputError(f"line {lineno}: {exc}", code=exc.code, line=lineno) from None


def instance_to_record(inst: ScoredInstance) -> dict:
    rec = {"id": inst.id, "length": inst.length}
    if inst.raw_score is not None:
        rec["raw_score"] = inst.raw_score
    if inst.label is not None:
        rec["label"] = inst.label
    if inst.text is not None:
        rec["text"] = inst.text
    rec.update(inst.extra)
    return rec


def _parse_json(line: str, lineno: int):
    try:
        return json.loads(line, parse_constant=_reject_constant)
    except ValueError as exc:
        raise InputError(f"line {lineno}: {exc}", code="PARSE_ERROR", line=lineno) from None


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} not allowed")


def read_jsonl(fh: IO[str]) -> List[dict]:
    out = []
    for lineno, line in enumerate(fh, start=1):
        if lineno == 1 and line.startswith("\ufeff"):
            raise InputError("line 1: byte-order mark not allowed", code="PARSE_ERROR", line=1)
        if line.strip():
            out.append((lineno, _parse_json(line, lineno)))
    return out


def read_instances(fh: IO[str]) -> List[ScoredInstance]:
    return [record_to_instance(obj, lineno) for lineno, obj in read_jsonl(fh)]


def dumps_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, allow_nan=False) + "\n"


def write_jsonl(fh: IO[str], records: Iterable[Mapping]) -> None:
    for rec in records:
        fh.write(dumps_line(rec))


def write_instances(fh: IO[str], instances: Iterable[ScoredInstance]) -> None:
    write_jsonl(fh, (instance_to_record(i) for i in instances))


def read_verdicts(fh: IO[str]) -> List[Verdict]:
    out = []
    for lineno, obj in read_jsonl(fh):
        try:
            out.append(Verdict(id=str(obj["id"]), bin=int(obj["bin"]), score=float(obj["score"]),
                               threshold=float(obj["threshold"]), label_out=obj["label_out"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"line {lineno}: bad verdict ({exc})", code="BAD_RECORD",
                             line=lineno) from None
    return out


def profile_from_json(doc: Mapping) -> DetectorProfile:
    return DetectorProfile.from_dict(doc.get("detector", doc))


def table_to_json(table: QuantileTable, profile: DetectorProfile) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "detector": profile.to_dict(),
        "alpha": table.alpha,
        "w": table.w,
        "bins": [{"lo": b.lo, "hi": b.hi, "n": b.n, "q": b.q} for b in table.bins],
    }


def _check_version(doc: Mapping):
    if doc.get("format_version") != FORMAT_VERSION:
        raise InputError(f"unsupported format_version {doc.get('format_version')!r}",
                         code="BAD_VERSION")


def table_from_json(doc: Mapping) -> Tuple[QuantileTable, DetectorProfile]:
    _check_version(doc)
    try:
        profile = DetectorProfile.from_dict(doc["detector"])
        bins = tuple(BinRecord(lo=int(b["lo"]), hi=int(b["hi"]), n=int(b["n"]), q=float(b["q"]))
                     for b in doc["bins"])
        table = QuantileTable(alpha=float(doc["alpha"]), w=int(doc["w"]), l_max=profile.l_max,
                              k_bins=len(bins), bins=bins)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MCPError):
            raise
        raise InputError(f"malformed quantile table: {exc}", code="BAD_TABLE") from None
    return table, profile


def model_to_json(model: CalibratorModel, profile: DetectorProfile) -> dict:
    doc = {"format_version": FORMAT_VERSION, "detector": profile.to_dict(), "kind": model.kind}
    if model.kind == "max_f1":
        t = model.max_f1_threshold
        # JSON has no infinities; the two sentinel thresholds are spelled out
        doc["threshold"] = t if math.isfinite(t) else ("-inf" if t < 0 else "inf")
    elif model.kind == "platt":
        doc["a"], doc["b"] = model.platt_a, model.platt_b
    else:
        doc["steps"] = [list(s) for s in model.isotonic_steps]
    return doc


def model_from_json(doc: Mapping) -> Tuple[CalibratorModel, DetectorProfile]:
    _check_version(doc)
    try:
        profile = DetectorProfile.from_dict(doc["detector"])
        kind = doc["kind"]
        if kind == "max_f1":
            model = CalibratorModel(kind=kind, max_f1_threshold=float(doc["threshold"]))
        elif kind == "platt":
            model = CalibratorModel(kind=kind, platt_a=float(doc["a"]), platt_b=float(doc["b"]))
        else:
            model = CalibratorModel(kind=kind, isotonic_steps=tuple(
                (float(x), float(p)) for x, p in doc["steps"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MCPError):
            raise
        raise InputError(f"malformed model file: {exc}", code="BAD_MODEL") from None
    return model, profile


def load_json(fh: IO[str]):
    try:
        return json.load(fh, parse_constant=_reject_constant)
    except ValueError as exc:
        raise InputError(f"invalid JSON: {exc}", code="PARSE_ERROR") from None


def dump_json(obj, fh: IO[str]) -> None:
    json.dump(obj, fh, indent=2, allow_nan=False)
    fh.write("\n")


def rows_to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n",
                            extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()
