#!/usr/bin/env python3
"""Writes the small synthetic base/cot trace pairs under data/traces/.

Constraint tokens get depressed attention during the cot answer phase, so the
pairs exercise a positive attention drop. Output is deterministic.
"""
import json
import random
import re
import struct
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
L = 3


def prompt_tokens(prompt):
    return [[m.start(), m.end()] for m in re.finditer(r"\S+", prompt)]


def spans_for(record, overrides):
    out = []
    for o in overrides:
        if o["record_id"] == record["id"]:
            out.append({"constraint_id": o["constraint_id"], "start": o["start"], "end": o["end"]})
    return out


def overlaps(tok, span):
    return max(tok[0], span["start"]) < min(tok[1], span["end"])


def write_trace(path, record, spans, T, think_start, answer_start, damp, rng):
    offsets = prompt_tokens(record["prompt"])
    T0 = len(offsets)
    constraint = {j for j, tok in enumerate(offsets) for s in spans if overlaps(tok, s)}
    values = []
    for t in range(T):
        for _ in range(L):
            raw = [rng.uniform(0.2, 1.0) for _ in range(T0)]
            if t >= answer_start and damp:
                raw = [w * (0.35 if j in constraint else 1.0) for j, w in enumerate(raw)]
            scale = rng.uniform(0.6, 0.9) / sum(raw)
            values.extend(w * scale for w in raw)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "model_id": "synthetic-tiny",
        "T0": T0,
        "T": T,
        "L": L,
        "think_start": think_start,
        "answer_start": answer_start,
        "token_offsets": offsets,
        "dtype": "f32",
        "layout": "[T][L][T0] row-major",
        "constraint_spans": spans,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (path / "attn.f32").write_bytes(struct.pack("<%df" % len(values), *values))


def main():
    records = {}
    for line in (ROOT / "data" / "ifeval_tiny.jsonl").read_text().splitlines():
        r = json.loads(line)
        records[r["id"]] = r
    overrides = [json.loads(l) for l in (ROOT / "data" / "ifeval_tiny_spans.jsonl").read_text().splitlines()]
    rng = random.Random(20240611)
    for rid in ("ife-001", "ife-004"):
        spans = spans_for(records[rid], overrides)
        write_trace(ROOT / "data" / "traces" / "base" / rid, records[rid], spans, 8, 0, 0, False, rng)
        write_trace(ROOT / "data" / "traces" / "cot" / rid, records[rid], spans, 14, 0, 9, True, rng)


if __name__ == "__main__":
    main()
