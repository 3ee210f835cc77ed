from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcpdetect import (CalibrationSet, ConfigurationError, DetectorProfile, ScoredInstance,
                       calibrate_cp, calibrate_mcp, detect, detect_batch)
from mcpdetect.calibration import BinRecord, QuantileTable


def one_bin_table(q, l_max=1024):
    return QuantileTable(alpha=0.1, w=l_max, l_max=l_max, k_bins=1,
                         bins=(BinRecord(0, l_max, 10, q),))


def instance_with_score(profile, s, length=10, id_="x"):
    # invert the sigmoid so the instance lands on score s exactly enough
    raw = profile.tau + np.log(s / (1 - s)) * profile.k
    return ScoredInstance(id_, length, float(raw))


def test_strict_inequality(profile):
    v = detect(one_bin_table(0.6), profile, instance_with_score(profile, 0.7))
    assert v.label_out == "machine"
    assert (v.bin, v.threshold) == (0, 0.6)


def test_tie_is_human(profile):
    inst = ScoredInstance("t", 5, 0.0)  # score exactly 0.5
    assert detect(one_bin_table(0.5), profile, inst).label_out == "human"


@given(st.floats(-1e300, 1e300, allow_nan=False), st.integers(0, 5000))
def test_sentinel_bin_always_human(raw, length):
    p = DetectorProfile("p", 1, 0.0, 1024)
    v = detect(one_bin_table(1.0), p, ScoredInstance("s", length, raw))
    assert v.label_out == "human"


def test_lmax_mismatch(profile):
    with pytest.raises(ConfigurationError):
        detect(one_bin_table(0.5, l_max=512), profile, ScoredInstance("a", 1, 0.0))


def test_empty_batch(profile):
    assert detect_batch(one_bin_table(0.5), profile, []) == []


def test_batch_equals_elementwise(profile, labeled_instances):
    cal = CalibrationSet.from_instances(
        profile, [i for i in labeled_instances if i.label == "human"])
    table = calibrate_mcp(cal, 0.1, 200)
    batch = detect_batch(table, profile, labeled_instances)
    assert batch == [detect(table, profile, i) for i in labeled_instances]
    assert [v.id for v in batch] == [i.id for i in labeled_instances]


def test_parallel_matches_sequential(profile, rng):
    lengths = rng.integers(0, 1500, 5000)
    raws = rng.normal(0.002 * lengths, 0.5)
    items = [ScoredInstance(f"i{j}", int(n), float(r)) for j, (n, r) in enumerate(zip(lengths, raws))]
    cal = CalibrationSet(profile, lengths, 1 / (1 + np.exp(-raws)))
    table = calibrate_mcp(cal, 0.05, 100)
    seq = detect_batch(table, profile, items)
    par = detect_batch(table, profile, items, n_jobs=4, chunk_size=257)
    assert seq == par


def test_batch_reports_first_bad_id(profile):
    items = [ScoredInstance("a", 1, 0.0), ScoredInstance("b", 1, None), ScoredInstance("c", 1, None)]
    with pytest.raises(Exception) as exc:
        detect_batch(one_bin_table(0.5), profile, items)
    assert exc.value.details["id"] == "b"


def test_verdict_trace_matches_table_entry(profile, labeled_instances):
    cal = CalibrationSet.from_instances(
        profile, [i for i in labeled_instances if i.label == "human"])
    table = calibrate_mcp(cal, 0.05, 100)
    for v, inst in zip(detect_batch(table, profile, labeled_instances), labeled_instances):
        b = table.bins[v.bin]
        assert b.lo <= inst.length and (inst.length < b.hi or v.bin == table.k_bins - 1)
        assert v.threshold == b.q
        assert (v.label_out == "machine") == (v.score > v.threshold)


@settings(max_examples=50)
@given(st.lists(st.floats(0.01, 0.99), min_size=10, max_size=10),
       st.integers(0, 9), st.floats(0.0, 0.5))
def test_raising_a_threshold_never_creates_machine_verdicts(qs, which, bump):
    p = DetectorProfile("p", 1, 0.0, 1000)
    bins = tuple(BinRecord(i * 100, (i + 1) * 100, 10, q) for i, q in enumerate(qs))
    table = QuantileTable(0.1, 100, 1000, 10, bins)
    raised = list(bins)
    raised[which] = replace(bins[which], q=min(1.0, bins[which].q + bump))
    table2 = replace(table, bins=tuple(raised))
    items = [ScoredInstance(str(j), j * 37 % 1200, (j % 13 - 6) / 3) for j in range(200)]
    for a, b in zip(detect_batch(table, p, items), detect_batch(table2, p, items)):
        if a.label_out == "human":
            assert b.label_out == "human"


def test_cp_verdicts_ignore_length(profile, labeled_instances, rng):
    cal = CalibrationSet.from_instances(
        profile, [i for i in labeled_instances if i.label == "human"])
    table = calibrate_cp(cal, 0.05)
    perm = rng.permutation(len(labeled_instances))
    moved = [replace(inst, length=labeled_instances[j].length)
             for inst, j in zip(labeled_instances, perm)]
    a = {v.id: v.label_out for v in detect_batch(table, profile, labeled_instances)}
    b = {v.id: v.label_out for v in detect_batch(table, profile, moved)}
    assert a == b


@settings(max_examples=30)
@given(st.floats(-5, 5), st.floats(0.1, 3.0))
def test_verdicts_invariant_when_sigmoid_argument_preserved(shift, scale):
    # raw -> scale*raw + shift with tau moved identically keeps k*(raw - tau) up to the
    # positive factor scale; scale == 1 leaves it literally unchanged
    p = DetectorProfile("p", 1, 0.4, 1000)
    p2 = DetectorProfile("p", 1, 0.4 + shift, 1000)
    items = [ScoredInstance(str(j), j * 17 % 1000, (j % 11 - 5) / 4) for j in range(120)]
    moved = [replace(i, raw_score=i.raw_score + shift) for i in items]
    table = QuantileTable(0.1, 100, 1000, 10,
                          tuple(BinRecord(i * 100, (i + 1) * 100, 10, 0.3 + 0.05 * i)
                                for i in range(10)))
    assert ([v.label_out for v in detect_batch(table, p, items)]
            == [v.label_out for v in detect_batch(table, p2, moved)])
