"""Readers and writers for graph files, clique matrices and covariance CSVs.

Supported graph formats:

``dimacs``
    ``p edge V E`` header, ``e i j`` edge lines (1-indexed), ``c`` comments.
``edgelist``
    optional ``# vertices V`` header, then one ``i j`` pair per line
    (0-indexed).  Without a header ``V`` is one more than the largest index.
``gml``
    the ``graph [ node [ id N label ".." value ".." ] edge [ source A target B ] ]``
    subset.  Node ids are mapped to vertices in order of appearance.

All parse errors raise :class:`ParseError` carrying the offending line number.
"""
from __future__ import annotations

import io
import re
from typing import IO, Iterable, List, Optional, Tuple, Union

import numpy as np

from .graph import AdjacencyMatrix, CliqueMatrix

FORMATS = ("dimacs", "edgelist", "gml")


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _text_lines(stream) -> List[str]:
    data = stream.read() if hasattr(stream, "read") else stream
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines()


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected integer, got {tok!r}", lineno) from None


def _build(v: int, edges: Iterable[Tuple[int, int, int]], labels=None) -> AdjacencyMatrix:
    bits = np.eye(v, dtype=bool)
    for i, j, lineno in edges:
        if not (0 <= i < v and 0 <= j < v):
            raise ParseError(f"vertex index out of range for V={v}", lineno)
        if i != j:
            bits[i, j] = bits[j, i] = True
    return AdjacencyMatrix(bits, labels)


def parse_dimacs(stream) -> AdjacencyMatrix:
    v = None
    edges = []
    for lineno, line in enumerate(_text_lines(stream), 1):
        tok = line.split()
        if not tok or tok[0] == "c":
            continue
        if tok[0] == "p":
            if v is not None:
                raise ParseError("duplicate problem line", lineno)
            if len(tok) != 4 or tok[1] not in ("edge", "col"):
                raise ParseError("malformed header, expected 'p edge <V> <E>'", lineno)
            v = _int(tok[2], lineno)
            _int(tok[3], lineno)
            if v <= 0:
                raise ParseError("vertex count must be positive", lineno)
        elif tok[0] == "e":
            if v is None:
                raise ParseError("edge line before 'p edge' header", lineno)
            if len(tok) != 3:
                raise ParseError("malformed edge line, expected 'e <i> <j>'", lineno)
            edges.append((_int(tok[1], lineno) - 1, _int(tok[2], lineno) - 1, lineno))
        else:
            raise ParseError(f"unknown line type {tok[0]!r}", lineno)
    if v is None:
        raise ParseError("missing 'p edge <V> <E>' header")
    return _build(v, edges)


_VERTICES_RE = re.compile(r"#\s*vertices\s+(\S+)\s*$")


def parse_edgelist(stream) -> AdjacencyMatrix:
    v = None
    edges = []
    for lineno, line in enumerate(_text_lines(stream), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _VERTICES_RE.match(s)
            if m:
                if v is not None or edges:
                    raise ParseError("'# vertices' header must come first", lineno)
                v = _int(m.group(1), lineno)
                if v <= 0:
                    raise ParseError("vertex count must be positive", lineno)
            continue
        tok = s.split()
        if len(tok) != 2:
            raise ParseError("expected 'i j' pair", lineno)
        i, j = _int(tok[0], lineno), _int(tok[1], lineno)
        if i < 0 or j < 0:
            raise ParseError("vertex index out of range", lineno)
        edges.append((i, j, lineno))
    if v is None:
        if not edges:
            raise ParseError("empty edge list without '# vertices' header")
        v = 1 + max(max(i, j) for i, j, _ in edges)
    return _build(v, edges)


_GML_TOKEN = re.compile(r'"[^"]*"|\[|\]|[^\s\[\]"]+')


def _gml_tokens(lines: List[str]):
    for lineno, line in enumerate(lines, 1):
        for m in _GML_TOKEN.finditer(line):
            yield m.group(0), lineno


def parse_gml(stream) -> AdjacencyMatrix:
    """Parse the node/edge subset of GML.

    Node ``label`` and ``value`` fields become vertex annotations of the form
    ``"label (value)"``; all other keys are skipped.
    """
    tokens = list(_gml_tokens(_text_lines(stream)))
    pos = 0

    def parse_list(end_line):
        # returns list of (key, value, lineno); value is a str or nested list
        nonlocal pos
        out = []
        while pos < len(tokens):
            tok, lineno = tokens[pos]
            if tok == "]":
                pos += 1
                return out
            if tok == "[":
                raise ParseError("unexpected '['", lineno)
            pos += 1
            if pos >= len(tokens):
                raise ParseError(f"missing value for key {tok!r}", lineno)
            val, vline = tokens[pos]
            pos += 1
            if val == "[":
                out.append((tok, parse_list(vline), lineno))
            elif val == "]":
                raise ParseError(f"missing value for key {tok!r}", vline)
            else:
                out.append((tok, val.strip('"') if val.startswith('"') else val, lineno))
        if end_line is not None:
            raise ParseError("unterminated '['", end_line)
        return out

    top = parse_list(None)
    graphs = [(v, ln) for k, v, ln in top if k == "graph"]
    if len(graphs) != 1 or not isinstance(graphs[0][0], list):
        raise ParseError("expected exactly one 'graph [ ... ]' block", top[0][2] if top else None)
    body = graphs[0][0]

    ids = {}
    labels = []
    edges = []
    for key, val, lineno in body:
        if key == "node":
            if not isinstance(val, list):
                raise ParseError("node must be a [ ... ] block", lineno)
            fields = {k: (v, ln) for k, v, ln in val}
            if "id" not in fields:
                raise ParseError("node without id", lineno)
            nid = _int(fields["id"][0], fields["id"][1])
            if nid in ids:
                raise ParseError(f"duplicate node id {nid}", lineno)
            ids[nid] = len(ids)
            label = fields.get("label", (None,))[0]
            value = fields.get("value", (None,))[0]
            if label is not None and value is not None:
                labels.append(f"{label} ({value})")
            else:
                labels.append(label if label is not None else value)
        elif key == "edge":
            if not isinstance(val, list):
                raise ParseError("edge must be a [ ... ] block", lineno)
            fields = {k: (v, ln) for k, v, ln in val}
            if "source" not in fields or "target" not in fields:
                raise ParseError("edge without source/target", lineno)
            edges.append((_int(fields["source"][0], fields["source"][1]),
                          _int(fields["target"][0], fields["target"][1]), lineno))
    if not ids:
        raise ParseError("graph has no nodes")
    mapped = []
    for s, t, lineno in edges:
        if s not in ids or t not in ids:
            raise ParseError("edge refers to unknown node id", lineno)
        mapped.append((ids[s], ids[t], lineno))
    has_labels = any(lab is not None for lab in labels)
    return _build(len(ids), mapped, labels if has_labels else None)


_PARSERS = {"dimacs": parse_dimacs, "edgelist": parse_edgelist, "gml": parse_gml}


def parse_graph(stream: Union[IO, bytes, str], format: str) -> AdjacencyMatrix:
    """Parse a graph from a byte/text stream (or raw bytes/str) in ``format``."""
    try:
        parser = _PARSERS[format]
    except KeyError:
        raise ValueError(f"unknown graph format {format!r}; choose from {FORMATS}") from None
    return parser(stream)


def read_graph(path, format: Optional[str] = None) -> AdjacencyMatrix:
    if format is None:
        format = guess_format(str(path))
    with open(path, "rb") as fh:
        return parse_graph(fh, format)


def guess_format(path: str) -> str:
    low = path.lower()
    if low.endswith(".gml"):
        return "gml"
    if low.endswith((".clq", ".col", ".dimacs")):
        return "dimacs"
    return "edgelist"


def format_dimacs(a: AdjacencyMatrix) -> str:
    edges = a.edges()
    lines = [f"p edge {a.v} {len(edges)}"]
    lines += [f"e {i + 1} {j + 1}" for i, j in edges]
    return "\n".join(lines) + "\n"


def format_edgelist(a: AdjacencyMatrix) -> str:
    lines = [f"# vertices {a.v}"] + [f"{i} {j}" for i, j in a.edges()]
    return "\n".join(lines) + "\n"


# clique matrices

def format_clique_csv(z: CliqueMatrix) -> str:
    buf = io.StringIO()
    for row in z.bits.astype(np.uint8):
        buf.write(",".join(map(str, row.tolist())) + "\n")
    return buf.getvalue()


def format_clique_sparse(z: CliqueMatrix, labels=None) -> str:
    """One line per column, ``c<k>: v1 v2 ...`` with 0-indexed vertices.

    With ``labels``, each line is followed by a comment listing vertex labels.
    """
    lines = []
    for k, col in enumerate(z.column_sets()):
        lines.append(f"c{k}: " + " ".join(map(str, col)))
        if labels is not None:
            lines.append("# " + "; ".join(str(labels[i]) for i in col))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_clique_csv(stream) -> CliqueMatrix:
    rows = []
    for lineno, line in enumerate(_text_lines(stream), 1):
        s = line.strip()
        if not s:
            continue
        row = [_int(t.strip(), lineno) for t in s.split(",")]
        if any(x not in (0, 1) for x in row):
            raise ParseError("clique matrix entries must be 0 or 1", lineno)
        if rows and len(row) != len(rows[0]):
            raise ParseError("ragged clique matrix row", lineno)
        rows.append(row)
    if not rows:
        raise ParseError("empty clique matrix")
    return CliqueMatrix(np.array(rows, dtype=np.uint8))


def parse_clique_sparse(stream, v: int) -> CliqueMatrix:
    cols = []
    for lineno, line in enumerate(_text_lines(stream), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        head, sep, rest = s.partition(":")
        if not sep or not head.startswith("c"):
            raise ParseError("expected 'c<k>: v1 v2 ...'", lineno)
        col = [_int(t, lineno) for t in rest.split()]
        if not col:
            raise ParseError("empty column", lineno)
        if any(not 0 <= i < v for i in col):
            raise ParseError(f"vertex index out of range for V={v}", lineno)
        cols.append(col)
    return CliqueMatrix.from_columns(v, cols)


def read_clique_matrix(path, v: Optional[int] = None) -> CliqueMatrix:
    """Read a clique matrix saved as dense CSV or sparse ``c<k>:`` text."""
    with open(path, "rb") as fh:
        data = fh.read().decode("utf-8")
    first = next((ln.strip() for ln in data.splitlines() if ln.strip() and not ln.startswith("#")), "")
    if first.startswith("c") and ":" in first:
        if v is None:
            raise ValueError("vertex count required to read a sparse clique matrix")
        return parse_clique_sparse(data, v)
    return parse_clique_csv(data)


# dense real matrices

def parse_matrix_csv(stream) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(_text_lines(stream), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            row = [float(t) for t in s.split(",")]
        except ValueError:
            raise ParseError("non-numeric entry", lineno) from None
        if rows and len(row) != len(rows[0]):
            raise ParseError("ragged matrix row", lineno)
        rows.append(row)
    if not rows:
        raise ParseError("empty matrix")
    return np.array(rows)


def parse_covariance_csv(stream, sym_tol: float = 1e-9) -> np.ndarray:
    """Read a symmetric matrix; asymmetry above ``sym_tol`` is a ParseError."""
    s = parse_matrix_csv(stream)
    if s.shape[0] != s.shape[1]:
        raise ParseError(f"covariance must be square, got {s.shape}")
    if np.abs(s - s.T).max() > sym_tol:
        raise ParseError("covariance matrix is not symmetric")
    return 0.5 * (s + s.T)


def format_matrix_csv(m: np.ndarray) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in np.asarray(m))
