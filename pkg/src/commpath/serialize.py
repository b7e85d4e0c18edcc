"""JSON encoding of tuples, instances, paths and certificates.

Complex entries are ``[re, im]`` pairs in row-major order and doubles are
written with 17 significant digits, so a load after a dump reproduces every
array bit for bit. Output is compact and key order is fixed, which makes
files byte-identical across runs.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .linalg import MatrixTuple, check_variety
from .manifold import builtin_atlas
from .paths import ChartLine, Constant, HermitianLine, MatrixPath, Rotation, POST_MAPS

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Raised when a document does not match the expected layout."""


# ---------------------------------------------------------------- writer


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = "%.17g" % x
    if text in ("0", "-0"):
        return text + ".0"
    return text


def dumps(obj) -> str:
    """Compact JSON with 17-digit floats and NaN written as ``null``."""
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj, out: list) -> None:
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _write(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _write(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc


# ---------------------------------------------------------------- arrays


def matrix_to_list(A: np.ndarray) -> list:
    A = np.asarray(A, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in A.ravel()]


def matrix_from_list(data, n: int) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError("matrix entries must be [re, im] pairs") from exc
    if arr.shape != (n * n, 2):
        raise SchemaError(f"expected {n * n} [re, im] pairs, got shape {arr.shape}")
    out = np.empty(n * n, dtype=complex)
    # set parts separately: re + 1j * im would turn an imaginary -0.0 into 0.0
    out.real = arr[:, 0]
    out.imag = arr[:, 1]
    return out.reshape(n, n)


def tuple_to_dict(T) -> dict:
    comps = np.asarray(getattr(T, "components", T), dtype=complex)
    if comps.ndim == 2:
        comps = comps[None]
    return {
        "n": int(comps.shape[1]),
        "m": int(comps.shape[0]),
        "variety": getattr(T, "variety", "none"),
        "components": [matrix_to_list(C) for C in comps],
    }


def _require(doc, key, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"field {key!r} has the wrong type")
    return value


def tuple_from_dict(doc) -> MatrixTuple:
    n = _require(doc, "n", int)
    m = _require(doc, "m", int)
    comps = _require(doc, "components", list)
    if n < 1 or m < 1 or len(comps) != m:
        raise SchemaError("tuple dimensions do not match its components")
    try:
        variety = check_variety(doc.get("variety", "none"))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    arr = np.stack([matrix_from_list(c, n) for c in comps])
    if not np.all(np.isfinite(arr)):
        raise SchemaError("non-finite matrix entries")
    return MatrixTuple(arr, variety)


def _real_array(data, shape_len: int, name: str) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{name} must be numeric") from exc
    if arr.ndim != shape_len:
        raise SchemaError(f"{name} has the wrong shape")
    return arr


# ---------------------------------------------------------------- instances


def instance_to_dict(tuples, variety: str, seed=None, meta: dict | None = None) -> dict:
    return {
        "kind": "instance",
        "schema": SCHEMA_VERSION,
        "variety": variety,
        "seed": seed,
        "tuples": [tuple_to_dict(T) for T in tuples],
        "meta": dict(meta or {}),
    }


def instance_from_dict(doc) -> tuple[list[MatrixTuple], dict]:
    if _require(doc, "kind") != "instance":
        raise SchemaError("document is not an instance")
    variety = _require(doc, "variety", str)
    try:
        check_variety(variety)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    tuples = [tuple_from_dict(t).with_variety(variety) for t in _require(doc, "tuples", list)]
    if not tuples:
        raise SchemaError("instance holds no tuples")
    return tuples, doc


# ---------------------------------------------------------------- paths


def _segment_to_dict(seg, interval) -> dict:
    head = {"kind": seg.kind, "interval": [float(interval[0]), float(interval[1])]}
    if isinstance(seg, HermitianLine):
        head.update(start=tuple_to_dict(seg.start), end=tuple_to_dict(seg.end))
    elif isinstance(seg, Rotation):
        head.update(xtilde=tuple_to_dict(seg.xtilde), H=matrix_to_list(seg.H))
    elif isinstance(seg, ChartLine):
        head.update(
            atlas=seg.atlas.atlas_id,
            basis=matrix_to_list(seg.basis),
            x0=seg.x0.tolist(),
            x1=seg.x1.tolist(),
            charts=[int(c) for c in seg.charts],
            off0=seg.off0.tolist(),
            off1=seg.off1.tolist(),
        )
    elif isinstance(seg, Constant):
        head.update(value=tuple_to_dict(seg.value))
    else:
        raise TypeError(f"unknown segment type {type(seg).__name__}")
    return head


def _segment_from_dict(doc):
    kind = _require(doc, "kind", str)
    if kind == "hermitian-linear":
        return HermitianLine(
            tuple_from_dict(_require(doc, "start")).components,
            tuple_from_dict(_require(doc, "end")).components,
        )
    if kind == "rotation":
        xt = tuple_from_dict(_require(doc, "xtilde")).components
        return Rotation(xt, matrix_from_list(_require(doc, "H"), xt.shape[1]))
    if kind == "chart-linear":
        try:
            atlas = builtin_atlas(_require(doc, "atlas", str))
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
        charts = np.array(_require(doc, "charts", list), dtype=int)
        n = len(charts)
        return ChartLine(
            atlas,
            matrix_from_list(_require(doc, "basis"), n),
            _real_array(_require(doc, "x0"), 2, "x0"),
            _real_array(_require(doc, "x1"), 2, "x1"),
            charts,
            _real_array(_require(doc, "off0"), 2, "off0"),
            _real_array(_require(doc, "off1"), 2, "off1"),
        )
    if kind == "constant":
        return Constant(tuple_from_dict(_require(doc, "value")).components)
    raise SchemaError(f"unknown segment kind {kind!r}")


def path_to_dict(path: MatrixPath) -> dict:
    return {
        "kind": "path",
        "schema": SCHEMA_VERSION,
        "variety": path.variety,
        "post": path.post,
        "atlas": path.atlas,
        "epsilon": float(path.epsilon),
        "budgets": None if path.budgets is None else dict(path.budgets),
        "start": tuple_to_dict(path.start),
        "end": tuple_to_dict(path.end),
        "segments": [_segment_to_dict(s, b) for s, b in zip(path.segments, path.breaks)],
    }


def path_from_dict(doc) -> MatrixPath:
    if _require(doc, "kind") != "path":
        raise SchemaError("document is not a path")
    variety = _require(doc, "variety", str)
    post = doc.get("post")
    if post not in POST_MAPS:
        raise SchemaError(f"unknown post map {post!r}")
    seg_docs = _require(doc, "segments", list)
    if not seg_docs:
        raise SchemaError("path has no segments")
    segments = tuple(_segment_from_dict(s) for s in seg_docs)
    breaks = _real_array([_require(s, "interval") for s in seg_docs], 2, "interval")
    if breaks.shape[1] != 2 or breaks[0, 0] != 0.0 or breaks[-1, 1] != 1.0:
        raise SchemaError("segment intervals must cover [0, 1]")
    epsilon = _require(doc, "epsilon")
    if not isinstance(epsilon, (int, float)):
        raise SchemaError("epsilon must be a number")
    try:
        check_variety(variety)
        start = tuple_from_dict(_require(doc, "start")).with_variety(variety)
        end = tuple_from_dict(_require(doc, "end")).with_variety(variety)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    return MatrixPath(
        segments=segments,
        breaks=breaks,
        variety=variety,
        start=start,
        end=end,
        epsilon=float(epsilon),
        budgets=doc.get("budgets"),
        post=post,
        atlas=doc.get("atlas"),
    )


def save(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))
        fh.write("\n")


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
