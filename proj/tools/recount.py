#!/usr/bin/env python3
"""Recount metrics from trace JSONL and check them against an actguard report directory.

Usage:
  recount.py --base base.traces.jsonl --guided oracle=oracle.jsonl icm=icm.jsonl --report-dir out/report

Exits 0 when report.json, table.csv and pass_at_n.csv agree exactly with the recount.
"""

import argparse
import json
import sys
from pathlib import Path

SERIES_N = (1, 2, 4, 8)


def load_traces(path):
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    if not rows:
        raise SystemExit(f"{path}: no traces")
    return rows


def pick(candidates, k):
    if not candidates[0].get("judgment"):
        return 0
    best = None
    for i, c in enumerate(candidates[:k]):
        j = c.get("judgment") or {"label": "wrong", "confidence": 0.0}
        if j["label"] != "correct":
            continue
        if best is None or j["confidence"] > best[1]:
            best = (i, j["confidence"])
    return 0 if best is None else best[0]


def metrics(traces):
    n = len(traces)
    type_ok = sum(1 for t in traces if t["step_judgment"]["type_ok"])
    step_ok = sum(1 for t in traces if t["step_judgment"]["step_ok"])
    grounded = [t["step_judgment"]["ground_ok"] for t in traces if t["step_judgment"]["ground_ok"] is not None]
    out = {
        "type_acc": 100.0 * type_ok / n,
        "gr_acc": 100.0 * sum(1 for g in grounded if g) / len(grounded) if grounded else None,
        "sr": 100.0 * step_ok / n,
        "n_steps": n,
        "n_grounding_steps": len(grounded),
    }

    n_max = min(len(t["pass_at_n_flags"]) for t in traces)
    if n_max == 0:
        raise SystemExit("trace without pass@N flags")
    series = []
    for k in SERIES_N:
        if k > n_max:
            break
        passed = sum(1 for t in traces if t["pass_at_n_flags"][k - 1])
        chosen = 0
        for t in traces:
            cands = t["candidates"]
            if cands and cands[pick(cands, k)]["oracle_ok"]:
                chosen += 1
        series.append({"n": k, "pass_at_n": 100.0 * passed / n, "guided_sr_at_n": 100.0 * chosen / n})
    out["pass_at_n"] = {str(r["n"]): r["pass_at_n"] for r in series}
    return out, series


def fmt(x):
    return "" if x is None else "%.4f" % x


def expected_outputs(configs):
    reports = []
    for name, traces in configs:
        m, series = metrics(traces)
        reports.append({"name": name, "metrics": m, "pass_at_n_series": series})
    base, guided = reports[0], reports[1:]
    deltas = []
    for g in guided:
        b, m = base["metrics"], g["metrics"]
        gr = None if b["gr_acc"] is None or m["gr_acc"] is None else m["gr_acc"] - b["gr_acc"]
        deltas.append({"name": g["name"], "type_acc": m["type_acc"] - b["type_acc"], "gr_acc": gr, "sr": m["sr"] - b["sr"]})

    table = ["config,type_acc,gr_acc,sr,n_steps,n_grounding_steps,delta_type_acc,delta_gr_acc,delta_sr"]
    for i, r in enumerate(reports):
        m = r["metrics"]
        d = deltas[i - 1] if i > 0 else None
        cells = [r["name"], fmt(m["type_acc"]), fmt(m["gr_acc"]), fmt(m["sr"]), str(m["n_steps"]), str(m["n_grounding_steps"])]
        cells += [fmt(d["type_acc"]), fmt(d["gr_acc"]), fmt(d["sr"])] if d else ["", "", ""]
        table.append(",".join(cells))

    pass_rows = ["config,n,pass_at_n,guided_sr_at_n"]
    for r in reports:
        for row in r["pass_at_n_series"]:
            pass_rows.append(f"{r['name']},{row['n']},{fmt(row['pass_at_n'])},{fmt(row['guided_sr_at_n'])}")

    return {"base": base, "guided": guided, "deltas": deltas}, "\n".join(table) + "\n", "\n".join(pass_rows) + "\n"


def diff(path, expect, actual, out):
    if isinstance(expect, dict) and isinstance(actual, dict):
        for key in sorted(set(expect) | set(actual)):
            if key not in expect or key not in actual:
                out.append(f"{path}.{key}: present on one side only")
            else:
                diff(f"{path}.{key}", expect[key], actual[key], out)
    elif isinstance(expect, list) and isinstance(actual, list):
        if len(expect) != len(actual):
            out.append(f"{path}: length {len(expect)} != {len(actual)}")
        for i, (a, b) in enumerate(zip(expect, actual)):
            diff(f"{path}[{i}]", a, b, out)
    elif expect != actual or type(expect) is bool and type(actual) is not bool:
        out.append(f"{path}: recount {expect!r} != report {actual!r}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--base", required=True)
    ap.add_argument("--guided", action="extend", nargs="+", default=[], metavar="NAME=TRACES")
    ap.add_argument("--report-dir", required=True)
    args = ap.parse_args()

    configs = [("base", load_traces(args.base))]
    for g in args.guided:
        name, sep, path = g.partition("=")
        if not sep or not name:
            ap.error(f"--guided expects NAME=TRACES, got {g!r}")
        configs.append((name, load_traces(path)))

    expect_json, expect_table, expect_pass = expected_outputs(configs)
    rep = Path(args.report_dir)
    problems = []
    diff("report", expect_json, json.loads((rep / "report.json").read_text(encoding="utf-8")), problems)
    if (rep / "table.csv").read_text(encoding="utf-8") != expect_table:
        problems.append("table.csv differs from recount")
    if (rep / "pass_at_n.csv").read_text(encoding="utf-8") != expect_pass:
        problems.append("pass_at_n.csv differs from recount")

    for name, traces in configs:
        m, _ = metrics(traces)
        print(f"{name}: steps={m['n_steps']} type_acc={fmt(m['type_acc'])} gr_acc={fmt(m['gr_acc'])} sr={fmt(m['sr'])}")
    if problems:
        for p in problems:
            print("MISMATCH", p)
        return 1
    print("recount matches report")
    return 0


if __name__ == "__main__":
    sys.exit(main())
