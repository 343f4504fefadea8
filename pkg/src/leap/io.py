"""Dataset files, feature matrices and key=value configs.

Layout of a dataset directory::

    edges.txt       "src dst [edge_type]" per line, '#' starts a comment line
    features.bin    b"LEAPF1", u64 rows, u64 cols, row-major float32 (LE)
    node_types.txt  "node_id type_name" per line (optional: one type)

``features.csv`` (comma separated, one row per node) is accepted in place
of ``features.bin``.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .autodiff import atomic_write_bytes
from .graph import Graph, GraphError, build_graph

FEATURE_MAGIC = b"LEAPF1"
DEFAULT_TYPE = "default"


class DataError(ValueError):
    """Dataset files are missing, malformed or inconsistent."""


class ConfigError(ValueError):
    """Bad configuration key or value."""


@dataclass(frozen=True)
class DatasetBundle:
    edges: Path
    features: Path
    node_types: Path | None = None
    name: str = "dataset"

    @classmethod
    def from_dir(cls, directory, name: str | None = None) -> "DatasetBundle":
        d = Path(directory)
        if not d.is_dir():
            raise DataError(f"dataset directory {d} does not exist")
        features = d / "features.bin"
        if not features.exists() and (d / "features.csv").exists():
            features = d / "features.csv"
        types = d / "node_types.txt"
        return cls(d / "edges.txt", features, types if types.exists() else None, name or d.name)


def write_features(path, x: np.ndarray) -> None:
    x = np.asarray(x)
    header = FEATURE_MAGIC + struct.pack("<QQ", *x.shape)
    atomic_write_bytes(path, header + np.ascontiguousarray(x, dtype="<f4").tobytes())


def read_features(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file {path} does not exist")
    if path.suffix == ".csv":
        try:
            x = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2, comments="#")
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
        return x
    data = path.read_bytes()
    if not data.startswith(FEATURE_MAGIC):
        raise DataError(f"{path}: missing {FEATURE_MAGIC!r} header")
    rows, cols = struct.unpack_from("<QQ", data, len(FEATURE_MAGIC))
    body = data[len(FEATURE_MAGIC) + 16:]
    if len(body) != rows * cols * 4:
        raise DataError(f"{path}: header says {rows}x{cols} floats but payload has {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float64)


def _parse_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if text and not text.startswith("#"):
                yield lineno, text.split()


def _parse_int(token: str, path: Path, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise DataError(f"{path}:{lineno}: expected a node id, got {token!r}") from None
    if value < 0:
        raise DataError(f"{path}:{lineno}: negative node id {value}")
    return value


def read_edges(path) -> list[tuple[int, int, str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"edge file {path} does not exist")
    out = []
    for lineno, parts in _parse_lines(path):
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 'src dst [edge_type]', got {len(parts)} fields")
        u, v = _parse_int(parts[0], path, lineno), _parse_int(parts[1], path, lineno)
        out.append((u, v, parts[2] if len(parts) == 3 else DEFAULT_TYPE))
    return out


def read_node_types(path) -> dict[int, str]:
    path = Path(path)
    out: dict[int, str] = {}
    for lineno, parts in _parse_lines(path):
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'node_id type_name'")
        node = _parse_int(parts[0], path, lineno)
        if node in out:
            raise DataError(f"{path}:{lineno}: node {node} listed twice")
        out[node] = parts[1]
    return out


def load_dataset(bundle: DatasetBundle) -> Graph:
    """Read a bundle into a canonical :class:`Graph`.

    Node ids must be exactly ``0..N-1``. N comes from the node-type file when
    present, otherwise from the largest id in the edge file; the feature
    matrix must have exactly N rows. Type ids follow sorted type names.
    """
    edges = read_edges(bundle.edges)
    features = read_features(bundle.features)
    max_edge_id = max((max(u, v) for u, v, _ in edges), default=-1)
    if bundle.node_types is not None:
        typed = read_node_types(bundle.node_types)
        n = len(typed)
        if set(typed) != set(range(n)):
            missing = sorted(set(range(max(typed, default=-1) + 1)) - set(typed))
            raise DataError(f"{bundle.node_types}: node ids are not contiguous from 0 (gaps at {missing[:5]})")
        if max_edge_id >= n:
            raise DataError(f"{bundle.edges}: node {max_edge_id} is not in {bundle.node_types} ({n} nodes)")
        names = sorted(set(typed.values()))
        ntype = [names.index(typed[i]) for i in range(n)]
    else:
        n = max_edge_id + 1
        names = [DEFAULT_TYPE]
        ntype = n
    if features.shape[0] != n:
        raise DataError(f"feature file has {features.shape[0]} rows but the graph has {n} nodes")
    if n == 0:
        raise DataError("dataset has no nodes")
    etnames = sorted({t for _, _, t in edges}) or [DEFAULT_TYPE]
    lookup = {t: i for i, t in enumerate(etnames)}
    triples = [(u, v, lookup[t]) for u, v, t in edges]
    try:
        return build_graph(triples, ntype, features, names, etnames)
    except GraphError as exc:
        raise DataError(str(exc)) from exc


def write_dataset(g: Graph, directory, name: str | None = None) -> DatasetBundle:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    typed = g.edge_type_names != (DEFAULT_TYPE,)
    lines = []
    for (u, v), t in zip(g.edges.tolist(), g.edge_type.tolist()):
        lines.append(f"{u} {v} {g.edge_type_names[t]}" if typed else f"{u} {v}")
    atomic_write_bytes(d / "edges.txt", ("\n".join(lines) + "\n").encode("utf-8"))
    types = "".join(f"{i} {g.node_type_names[t]}\n" for i, t in enumerate(g.node_type.tolist()))
    atomic_write_bytes(d / "node_types.txt", types.encode("utf-8"))
    write_features(d / "features.bin", g.features)
    return DatasetBundle(d / "edges.txt", d / "features.bin", d / "node_types.txt", name or d.name)


def write_json(path, obj: Any) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=False) + "\n").encode("utf-8"))


# --- key=value configs ----------------------------------------------------------

def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in text.split("=", 1))
        out[key] = value
    return out


def write_config(path, values: dict[str, Any]) -> None:
    text = "".join(f"{k}={'' if v is None else v}\n" for k, v in values.items())
    atomic_write_bytes(path, text.encode("utf-8"))


def _coerce(raw: str, kind: Any, key: str):
    kind = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
    try:
        if raw in ("", "None") and "None" in kind:
            return None
        if kind.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot read {raw!r} as {kind}") from None


def apply_config(cls, values: dict[str, str], base=None):
    """Build dataclass ``cls`` from string values, on top of ``base`` if given."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config keys for {cls.__name__}: {unknown}")
    current = dataclasses.asdict(base) if base is not None else {}
    for key, raw in values.items():
        current[key] = _coerce(raw, fields[key].type, key)
    try:
        return cls(**current)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
