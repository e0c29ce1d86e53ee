"""Smoke test for the pygridprint extension module.

Build the module and run this script:

    cargo build --release -p gridprint-python --features extension-module
    cp target/release/libpygridprint.so python/pygridprint.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pygridprint as gp

HERE = os.path.dirname(os.path.abspath(__file__))
SAMPLE = os.path.join(HERE, "..", "crates", "core", "testdata", "sample_signature.txt")
SAMPLE_KEY = "1-1-1-1-0-1-4-2-2-0-2-1-2-0-0-1-0-0-1-1-1-0-1-0-0"


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        sys.exit(1)


def main():
    with open(SAMPLE) as f:
        sample = gp.Signature.parse(f.read(), "sample")
    check(len(sample) == 23, "sample has 23 minutiae")
    check(gp.compute_index(sample) == SAMPLE_KEY, "sample index key")
    check(sample.index_key(5) == SAMPLE_KEY, "index_key method")
    back = gp.Signature.parse(sample.to_text(), "sample")
    check(back == sample, "text round trip")

    moved = gp.Signature("moved", [(x + 37, y + 11, t, c) for x, y, t, c in sample.minutiae])
    score, matched = gp.match_score(sample, moved)
    check(score == 100.0 and matched > 0, "translated copy scores 100")

    sigs, truth = gp.generate(subjects=300, dup_fraction=0.1, seed=5)
    check(len(sigs) == 330 and len(truth) == 30, "generator sizes")

    table = gp.ClusterTable.build(sigs)
    check(table.size == 330, "table size")
    found = gp.identify(sigs[0], table, sigs)
    check(found["candidates"][0][:2] == (sigs[0].record_id, 100.0), "identify finds the enrolled print")

    report = gp.deduplicate(sigs)
    groups = [g for _, gs in report["groups"] for g in gs if len(g) > 1]
    planted = {(min(d, s), max(d, s)) for d, s in truth}
    got = {(min(g), max(g)) for g in groups if len(g) == 2}
    check(len(groups) == 30 and got == planted, "dedup recovers planted duplicates")

    oracle = gp.exhaustive_dedup(sigs)
    check(sum(1 for g in oracle if len(g) > 1) == 30, "oracle agrees on group count")

    stats = gp.corpus_stats(sigs)
    check(stats["size"] == 330 and stats["duplicates"] == 30, "corpus stats")

    slope, intercept = gp.fit_regression([
        (320, 1), (1011, 1.002), (4001, 1.0025), (10000, 1.0014), (20000, 1.0033),
        (30000, 1.0059), (40000, 1.0053), (50000, 1.0049), (54000, 1.0053), (113609, 1.0086),
    ])
    check(math.isclose(slope, 6.62936e-08, rel_tol=1e-4), "regression slope")
    check(math.isclose(gp.predict_avg(slope, intercept, 1e7), 1.664715563, rel_tol=1e-6), "prediction at 1e7")

    w = gp.estimate_workload(1e7, 2, 1)
    check(w["comparisons"] == 5e6 and w["wall"] == "1h23'20\"", "workload estimate")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "th1.tsv")
        table.save(path)
        check(gp.ClusterTable.load(path).buckets() == table.buckets(), "table save and load")

    try:
        gp.MatchParams(min_edge=200)
        check(False, "invalid params rejected")
    except ValueError:
        check(True, "invalid params rejected")

    strict = gp.MatchParams(score_threshold=100.0, min_matched_descriptors=10**6)
    check(not any(len(g) > 1 for _, gs in gp.deduplicate(sigs, params=strict)["groups"] for g in gs),
          "params reach the matcher")
    print("all checks passed")


if __name__ == "__main__":
    main()
