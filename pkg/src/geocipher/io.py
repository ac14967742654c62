"""Point-cloud files and JSON documents.

Clouds are CSV (one point per line, optional header) or ASCII PLY with
vertex elements.  Floats are written with 17 significant digits; JSON
uses Python's shortest round-trip repr, so values survive a reload bit
for bit.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .cipher import CipherParams, PermutationPlan, PipelineTrace
from .geometry import BoundingSphere, as_cloud
from .keystream import ChaoticKey, Keystream

TRACE_SCHEMA = "geocipher.trace/1"
REPORT_SCHEMA = "geocipher.report/1"
PLOT_SCHEMA = "geocipher.plot/1"
DIAGNOSIS_SCHEMA = "geocipher.diagnosis/1"
VERIFY_SCHEMA = "geocipher.verify/1"


class ParseError(ValueError):
    """Input file could not be understood."""


# -- clouds -----------------------------------------------------------------

def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    # a header row has no numeric fields; a partly numeric row is bad data
    if rows and not any(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ParseError("no points in CSV input")
    try:
        values = [[float(c) for c in r] for r in rows]
    except ValueError as exc:
        raise ParseError(f"bad CSV value: {exc}") from None
    if len({len(r) for r in values}) != 1:
        raise ParseError("CSV rows have differing numbers of fields")
    try:
        return as_cloud(values)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def parse_ply(text: str) -> np.ndarray:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic line")
    n_vertex = None
    props: list[str] = []
    element = None
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            if parts[1:2] != ["ascii"]:
                raise ParseError("only ASCII PLY is supported")
        elif parts[0] == "element":
            element = parts[1]
            if element == "vertex":
                n_vertex = int(parts[2])
            elif int(parts[2]) > 0:
                raise ParseError(f"unsupported PLY element '{element}'")
        elif parts[0] == "property" and element == "vertex":
            if parts[1] == "list":
                raise ParseError("list properties are not supported on vertices")
            props.append(parts[-1])
        elif parts[0] == "end_header":
            body_start = i + 1
            break
    if body_start is None or n_vertex is None:
        raise ParseError("incomplete PLY header")
    axes = [props.index(a) for a in ("x", "y", "z") if a in props]
    if len(axes) not in (2, 3):
        raise ParseError("PLY vertices need x, y (and optionally z) properties")
    body = [ln.split() for ln in lines[body_start:] if ln.strip()]
    if len(body) < n_vertex:
        raise ParseError(f"PLY declares {n_vertex} vertices but has {len(body)}")
    try:
        values = [[float(row[a]) for a in axes] for row in body[:n_vertex]]
        return as_cloud(values)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"bad PLY vertex: {exc}") from None


def read_cloud(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    if path.suffix.lower() == ".ply" or text.startswith("ply"):
        return parse_ply(text)
    return parse_csv(text)


def format_cloud(cloud) -> str:
    cloud = np.atleast_2d(cloud)
    header = ",".join("xyz"[: cloud.shape[1]])
    lines = [header] + [",".join(format(float(v), ".17g") for v in row) for row in cloud]
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    """Write via a temporary file so a failure never leaves a partial file."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_cloud(path, cloud) -> None:
    write_text(path, format_cloud(cloud))


# -- JSON -------------------------------------------------------------------

def jsonable(obj):
    """Convert numpy containers and scalars to plain Python."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(jsonable(doc), indent=2, allow_nan=False) + "\n"


def write_json(path, doc: dict) -> None:
    write_text(path, dumps(doc))


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


# -- structured documents ---------------------------------------------------

def sphere_to_dict(sphere: BoundingSphere) -> dict:
    return {"center": sphere.center, "radius": sphere.radius}


def sphere_from_dict(doc: dict) -> BoundingSphere:
    return BoundingSphere(doc["center"], doc["radius"])


def plan_to_dict(plan: PermutationPlan) -> dict:
    # permutations are stored 1-based, as written in the literature
    return {
        "pool_len": plan.pool_len,
        "blocks": [list(b) for b in plan.blocks],
        "perms": [(p + 1).tolist() for p in plan.perms],
        "direction": plan.direction,
    }


def plan_from_dict(doc: dict) -> PermutationPlan:
    perms = [np.asarray(p, dtype=int) - 1 for p in doc["perms"]]
    return PermutationPlan(doc["pool_len"], doc["blocks"], perms, doc.get("direction", "gather"))


def params_to_dict(params: CipherParams) -> dict:
    perm = params.permutation_source
    if perm != "derived":
        perm = [[[i + 1 for i in p] for p in blocks] for blocks in perm]
    return {
        "psi": params.psi,
        "key": None if params.key is None else {"k0": list(params.key.k0),
                                                "degree": params.key.degree},
        "dimension": params.dimension,
        "rounds": params.rounds,
        "variant": params.variant,
        "permutation": perm,
        "pool_order": params.pool_order,
        "perm_direction": params.perm_direction,
        "handedness": params.handedness,
        "composition": params.composition,
        "rotation_decimals": params.rotation_decimals,
    }


def params_from_dict(doc: dict) -> CipherParams:
    key = doc.get("key")
    perm = doc.get("permutation", "derived")
    if perm != "derived":
        perm = [[[i - 1 for i in p] for p in blocks] for blocks in perm]
    return CipherParams(
        psi=doc["psi"],
        key=None if key is None else ChaoticKey(tuple(key["k0"]), key["degree"]),
        dimension=doc.get("dimension", 3),
        rounds=doc.get("rounds", 1),
        variant=doc.get("variant", "original"),
        permutation_source=perm,
        pool_order=doc.get("pool_order", "point-major"),
        perm_direction=doc.get("perm_direction", "gather"),
        handedness=doc.get("handedness", "ccw"),
        composition=doc.get("composition", "xyz"),
        rotation_decimals=doc.get("rotation_decimals"),
    )


def trace_to_dict(trace: PipelineTrace, params: CipherParams) -> dict:
    return {
        "schema": TRACE_SCHEMA,
        "params": params_to_dict(params),
        "sphere": sphere_to_dict(trace.sphere),
        "keystream": {"degree": trace.keystream.degree, "states": trace.keystream.states},
        "plain": trace.plain,
        "rounds": [
            {
                "round": r.round,
                "anchors": r.anchors,
                "angles": r.angles,
                "pool": r.pool,
                "plan": plan_to_dict(r.plan),
                "shuffled_plain": r.shuffled_plain,
                "shuffled_anchors": r.shuffled_anchors,
                "cipher": r.cipher,
            }
            for r in trace.rounds
        ],
        "cipher": trace.cipher,
    }


def load_trace(doc: dict):
    """Pieces needed to decrypt: (params, plans, sphere, keystream, cipher)."""
    if doc.get("schema") != TRACE_SCHEMA:
        raise ParseError(f"not a trace document (schema {doc.get('schema')!r})")
    try:
        params = params_from_dict(doc["params"])
        plans = [plan_from_dict(r["plan"]) for r in doc["rounds"]]
        sphere = sphere_from_dict(doc["sphere"])
        ks = Keystream(doc["keystream"]["states"], doc["keystream"]["degree"])
        cipher = np.asarray(doc["cipher"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed trace: {exc}") from None
    return params, plans, sphere, ks, cipher
