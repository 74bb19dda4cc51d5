"""Instance files: a QAPLIB-style matrix file plus a JSON metadata sidecar.

Matrix file layout (ASCII, LF line endings, single-space separators)::

    # qapsat: flow matrix A then distance matrix B
    n
    <blank>
    n rows of A
    <blank>
    n rows of B

Lines starting with ``#`` are comments.  Files without the header are read
as A-then-B as well.

The sidecar is a JSON object with ``format_version`` 1 and the generative
clause structure.  Variable indices in the sidecar are 1-based.  Each entry
of ``a_clauses`` is either a variable list, read as ``a_submatrix`` placed on
the variables in the listed order, or an object
``{"variables": [...], "submatrix": [[...]]}``.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ClauseSpec, QapInstance, QapSatInstance, b_clause, A3
from .errors import ContractError, ParseError, ValidationError

FORMAT_VERSION = 1
HEADER = "# qapsat: flow matrix A then distance matrix B"


@dataclass(frozen=True)
class InstanceFilePair:
    data_path: Path
    meta_path: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "data_path", Path(self.data_path))
        if self.meta_path is not None:
            object.__setattr__(self, "meta_path", Path(self.meta_path))

    @classmethod
    def from_data_path(cls, data_path) -> "InstanceFilePair":
        """Pair a matrix file with the ``.json`` sidecar next to it."""
        data_path = Path(data_path)
        return cls(data_path, data_path.with_suffix(".json"))


def _matrix_lines(M) -> list[str]:
    return [" ".join(str(int(v)) for v in row) for row in np.asarray(M)]


def format_matrices(inst: QapInstance) -> str:
    lines = [HEADER, str(inst.n), ""]
    lines += _matrix_lines(inst.A)
    lines.append("")
    lines += _matrix_lines(inst.B)
    return "\n".join(lines) + "\n"


def _ordered_variables(clause: ClauseSpec, base: np.ndarray):
    """Variable order under which ``clause`` is exactly ``base``, or None."""
    if clause.submatrix.shape != base.shape:
        return None
    vs = clause.variables
    for perm in itertools.permutations(range(len(vs))):
        p = np.array(perm)
        if np.array_equal(clause.submatrix, base[np.ix_(p, p)]):
            ordered = [0] * len(vs)
            for a, pa in enumerate(perm):
                ordered[pa] = vs[a]
            return ordered
    return None


def sidecar_dict(qs: QapSatInstance, base: np.ndarray = A3) -> dict:
    a_entries = []
    for c in qs.a_clauses:
        ordered = _ordered_variables(c, base)
        if ordered is None:
            a_entries.append({"variables": [v + 1 for v in c.variables],
                              "submatrix": c.submatrix.tolist()})
        else:
            a_entries.append([v + 1 for v in ordered])
    return {
        "format_version": FORMAT_VERSION,
        "seed": qs.seed,
        "n": qs.n,
        "k": qs.k,
        "m": qs.m,
        "m1": qs.m1,
        "a_submatrix": np.asarray(base).tolist(),
        "a_clauses": a_entries,
        "b_clauses": [[v + 1 for v in c.variables] for c in qs.b_clauses],
        "global_lower_bound": qs.global_lower_bound,
    }


def format_sidecar(qs: QapSatInstance) -> str:
    doc = sidecar_dict(qs)
    # one clause per line keeps the file readable and diffable
    lines = ["{"]
    items = list(doc.items())
    for idx, (key, value) in enumerate(items):
        comma = "," if idx < len(items) - 1 else ""
        if key in ("a_clauses", "b_clauses") and value:
            inner = ",\n".join("    " + json.dumps(v, separators=(", ", ": ")) for v in value)
            lines.append(f'  "{key}": [\n{inner}\n  ]{comma}')
        else:
            lines.append(f'  "{key}": {json.dumps(value, separators=(", ", ": "))}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _write_text(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def write_instance(qs, pair: InstanceFilePair):
    """Write the matrix file and, for a QapSatInstance with a meta path, the sidecar."""
    inst = qs.instance if isinstance(qs, QapSatInstance) else qs
    pair.data_path.parent.mkdir(parents=True, exist_ok=True)
    _write_text(pair.data_path, format_matrices(inst))
    if isinstance(qs, QapSatInstance) and pair.meta_path is not None:
        _write_text(pair.meta_path, format_sidecar(qs))


def parse_matrices(text: str, path=None) -> QapInstance:
    rows = []  # (line number, tokens)
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise ParseError("empty matrix file", path)

    def to_int(tok, lineno):
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"not an integer: {tok!r}", path, lineno) from None

    lineno, toks = rows[0]
    if len(toks) != 1:
        raise ParseError("first line must hold the dimension n only", path, lineno)
    n = to_int(toks[0], lineno)
    if n < 1:
        raise ParseError(f"dimension must be positive, got {n}", path, lineno)
    body = rows[1:]
    if len(body) != 2 * n:
        where = body[min(len(body), 2 * n) - 1][0] if body else lineno
        raise ParseError(f"expected {2 * n} matrix rows (A then B), found {len(body)}", path, where)
    mats = []
    for which, chunk in (("A", body[:n]), ("B", body[n:])):
        M = np.zeros((n, n), dtype=np.int64)
        for i, (lineno, toks) in enumerate(chunk):
            if len(toks) != n:
                raise ParseError(f"row {i + 1} of {which} has {len(toks)} entries, expected {n}", path, lineno)
            vals = [to_int(t, lineno) for t in toks]
            for j, v in enumerate(vals):
                if v < 0:
                    raise ParseError(f"negative entry {v} in {which}[{i + 1},{j + 1}]", path, lineno)
            if vals[i] != 0:
                raise ParseError(f"non-zero diagonal entry {which}[{i + 1},{i + 1}] = {vals[i]}", path, lineno)
            M[i] = vals
        mats.append(M)
    try:
        return QapInstance(*mats)
    except ContractError as exc:
        raise ParseError(str(exc), path) from exc


def _clauses_from_sidecar(doc: dict, n: int):
    base = np.asarray(doc.get("a_submatrix", A3.tolist()), dtype=np.int64)
    a_clauses = []
    for entry in doc["a_clauses"]:
        if isinstance(entry, dict):
            vs = [int(v) - 1 for v in entry["variables"]]
            sub = np.asarray(entry["submatrix"], dtype=np.int64)
        else:
            vs = [int(v) - 1 for v in entry]
            sub = base
        if any(not 0 <= v < n for v in vs):
            raise ValidationError(f"A-clause variable out of range 1..{n}: {[v + 1 for v in vs]}")
        a_clauses.append(ClauseSpec(tuple(vs), sub))
    b_clauses = []
    for entry in doc["b_clauses"]:
        vs = [int(v) - 1 for v in entry]
        if any(not 0 <= v < n for v in vs):
            raise ValidationError(f"B-clause variable out of range 1..{n}: {[v + 1 for v in vs]}")
        b_clauses.append(b_clause(tuple(vs)))
    return a_clauses, b_clauses


def parse_sidecar(text: str, inst: QapInstance, path=None) -> QapSatInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"sidecar is not valid JSON: {exc.msg}", path, exc.lineno) from None
    required = ("format_version", "seed", "n", "k", "m", "m1", "a_clauses", "b_clauses", "global_lower_bound")
    missing = [key for key in required if key not in doc]
    if missing:
        raise ValidationError(f"{path}: sidecar lacks fields {missing}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported format_version {doc['format_version']}")
    if doc["n"] != inst.n:
        raise ValidationError(f"{path}: sidecar n={doc['n']} but matrices have n={inst.n}")
    if doc["m"] != len(doc["a_clauses"]):
        raise ValidationError(f"{path}: sidecar m={doc['m']} but lists {len(doc['a_clauses'])} A-clauses")
    if doc["m1"] != len(doc["b_clauses"]):
        raise ValidationError(f"{path}: sidecar m1={doc['m1']} but lists {len(doc['b_clauses'])} B-clauses")
    try:
        a_clauses, b_clauses = _clauses_from_sidecar(doc, inst.n)
        qs = QapSatInstance(inst, a_clauses, b_clauses, seed=int(doc["seed"]),
                            global_lower_bound=int(doc["global_lower_bound"]))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    except (ContractError, KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed clause data: {exc}") from exc
    if doc["k"] != qs.k:
        raise ValidationError(f"{path}: sidecar k={doc['k']} disagrees with clause sizes")
    return qs


def read_instance(pair: InstanceFilePair):
    """Load an instance; a QapSatInstance if the sidecar exists, else a QapInstance."""
    try:
        text = pair.data_path.read_text(encoding="ascii")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {pair.data_path}: {exc.strerror}") from exc
    except UnicodeDecodeError:
        raise ParseError("matrix file is not ASCII", pair.data_path) from None
    inst = parse_matrices(text, pair.data_path)
    if pair.meta_path is None or not pair.meta_path.exists():
        return inst
    return parse_sidecar(pair.meta_path.read_text(encoding="utf-8"), inst, pair.meta_path)
