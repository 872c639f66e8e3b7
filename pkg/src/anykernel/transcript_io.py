"""Line-delimited JSON transcripts.

Line 1 is a header record (schema, mode, seed, kernel description and its
SHA-256, the run configuration).  Every further line is one round with fields
t, x, q, q2, tau, p, y.  Python's JSON encoder writes floats with repr, so the
round trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import numpy as np

from .graphs import EvolvingGraph, GraphHistory, UniverseElement
from .transcript import PredictionDistribution, Round, Transcript

SCHEMA = "anykernel-transcript/1"


class TranscriptFormatError(ValueError):
    pass


def kernel_hash(description: str) -> str:
    return hashlib.sha256(description.encode("utf-8")).hexdigest()


def encode_value(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, np.ndarray):
        return {"v": [float(a) for a in v.ravel()], "shape": list(v.shape)}
    if isinstance(v, UniverseElement):
        return {"pair": [int(v.i), int(v.j)], "version": int(v.version)}
    if isinstance(v, (list, tuple)):
        return [encode_value(a) for a in v]
    raise TypeError(f"cannot serialize features of type {type(v).__name__}")


def decode_value(v, graph: GraphHistory | None = None):
    if isinstance(v, dict):
        if "pair" in v:
            if graph is None:
                raise TranscriptFormatError("graph features need the graph file")
            return UniverseElement(v["pair"][0], v["pair"][1], EvolvingGraph(graph, v["version"]))
        if "v" in v:
            return np.array(v["v"], dtype=float).reshape(v.get("shape", [len(v["v"])]))
        raise TranscriptFormatError(f"unknown feature record {sorted(v)}")
    if isinstance(v, list):
        return [decode_value(a, graph) for a in v]
    return v


def _json_float(v):
    if isinstance(v, np.ndarray):
        return [float(a) for a in v.ravel()]
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    return v


def round_record(rnd: Round, mode: str) -> dict:
    d = rnd.dist
    rec = {"t": rnd.t, "x": encode_value(rnd.x), "q": _json_float(d.q), "q2": _json_float(d.q2),
           "tau": float(d.tau), "p": _json_float(rnd.p), "y": _json_float(rnd.y) if mode != "binary" else int(rnd.y)}
    if mode == "vector":
        rec["residual"] = float(d.residual)
        rec["approximate"] = bool(d.approximate)
    return rec


def write_transcript(transcript: Transcript, path, config: dict | None = None,
                     extra: dict | None = None) -> None:
    header = {"record": "header", "schema": SCHEMA, "mode": transcript.mode,
              "seed": transcript.seed, "kernel": transcript.kernel,
              "kernel_sha256": kernel_hash(transcript.kernel),
              "meta": transcript.meta, "config": config or {}}
    if extra:
        header.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rnd in transcript:
            fh.write(json.dumps(round_record(rnd, transcript.mode), sort_keys=True) + "\n")


def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise TranscriptFormatError(f"{path}: line 1: {exc.msg}") from None
    if header.get("schema") != SCHEMA:
        raise TranscriptFormatError(f"{path}: line 1: unsupported schema {header.get('schema')!r}")
    return header


def _vector(v):
    return np.array(v, dtype=float) if isinstance(v, list) else float(v)


def read_transcript(path, graph: GraphHistory | None = None) -> tuple[Transcript, dict]:
    header = read_header(path)
    mode = header["mode"]
    transcript = Transcript(seed=header.get("seed"), kernel=header.get("kernel", ""), mode=mode,
                            meta=header.get("meta", {}))
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for number, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                q, q2 = _vector(rec["q"]), _vector(rec["q2"])
                tau = float(rec["tau"])
                dist = PredictionDistribution(q=q, q2=q2, tau=tau,
                                              residual=float(rec.get("residual", 0.0)),
                                              approximate=bool(rec.get("approximate", False)))
                y = rec["y"] if mode == "binary" else _vector(rec["y"])
                transcript.append(Round(t=int(rec["t"]), x=decode_value(rec["x"], graph), dist=dist,
                                        p=_vector(rec["p"]), y=y))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise TranscriptFormatError(f"{path}: line {number}: malformed record ({exc})") from None
    return transcript, header
