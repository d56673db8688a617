"""Free-format MPS export and a minimal reader for round-trip checks."""
from __future__ import annotations

import math

import numpy as np

from .milp import LinearConstraint, MilpProblem, Relation, VariableDef, parse_var_name

OBJ_ROW = "COST"
_ROW_TYPE = {Relation.LE: "L", Relation.EQ: "E", Relation.GE: "G"}
_TYPE_REL = {"L": Relation.LE, "E": Relation.EQ, "G": Relation.GE}


class MpsFormatError(ValueError):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def export_mps(problem: MilpProblem) -> str:
    """MPS text with rows and columns in model order.

    Binary columns sit between INTORG/INTEND markers and every column gets
    explicit bounds, so no reader default is relied on.
    """
    arr = problem.arrays
    names = [v.name for v in problem.variables]
    rows = [c.tag for c in problem.constraints]
    if len(set(rows)) != len(rows):
        raise ValueError("constraint tags must be unique to serve as MPS row names")
    out = [f"NAME {problem.name}", "ROWS", f" N {OBJ_ROW}"]
    for con in problem.constraints:
        out.append(f" {_ROW_TYPE[Relation(con.relation)]} {con.tag}")
    out.append("COLUMNS")
    A = arr.A.tocsc()
    in_int = False
    marker = 0
    for j, name in enumerate(names):
        if bool(arr.integer[j]) != in_int:
            tag = "INTORG" if not in_int else "INTEND"
            out.append(f" MARKER{marker} 'MARKER' '{tag}'")
            marker += 1
            in_int = not in_int
        s, e = A.indptr[j], A.indptr[j + 1]
        entries = []
        if arr.c[j] != 0.0:
            entries.append((OBJ_ROW, arr.c[j]))
        entries += [(rows[i], v) for i, v in zip(A.indices[s:e], A.data[s:e])]
        if not entries:
            entries = [(OBJ_ROW, 0.0)]
        for row, v in entries:
            out.append(f" {name} {row} {_num(v)}")
    if in_int:
        out.append(f" MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    if arr.obj_offset:
        out.append(f" RHS {OBJ_ROW} {_num(-arr.obj_offset)}")
    for tag, r in zip(rows, arr.rhs):
        if r != 0.0:
            out.append(f" RHS {tag} {_num(r)}")
    out.append("BOUNDS")
    for name, lo, hi in zip(names, arr.lo, arr.hi):
        if lo == hi:
            out.append(f" FX BND {name} {_num(lo)}")
            continue
        if math.isinf(lo) and math.isinf(hi):
            out.append(f" FR BND {name}")
            continue
        out.append(f" MI BND {name}" if math.isinf(lo) else f" LO BND {name} {_num(lo)}")
        out.append(f" PL BND {name}" if math.isinf(hi) else f" UP BND {name} {_num(hi)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_mps(text: str) -> MilpProblem:
    """Parse the subset of free MPS written by :func:`export_mps`.

    Column names must follow the ``kind(i,j)`` convention; row names become
    constraint tags.  Columns default to ``[0, inf)`` when no bound is given.
    Any malformed line raises :class:`MpsFormatError` naming the line.
    """
    reader = _Reader()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        try:
            if reader.feed(raw):
                break
        except MpsFormatError as exc:
            raise MpsFormatError(f"line {lineno}: {exc}") from None
        except (ValueError, IndexError) as exc:
            raise MpsFormatError(f"line {lineno}: {exc or 'missing field'}") from None
    else:
        raise MpsFormatError("document has no ENDATA line")
    try:
        return reader.problem()
    except (ValueError, KeyError) as exc:
        raise MpsFormatError(str(exc)) from None


class _Reader:
    def __init__(self):
        self.section = None
        self.name = ""
        self.row_type, self.row_order = {}, []
        self.col_order, self.col_int = [], {}
        self.entries = {}  # row -> list of (col, value)
        self.obj, self.rhs, self.bounds = {}, {}, {}
        self.in_int = False
        self.offset = 0.0

    def feed(self, raw: str) -> bool:
        """Consume one line; True once ENDATA is reached."""
        line = raw.strip()
        if not line or line.startswith("*"):
            return False
        if not raw[0].isspace():
            head, *rest = line.split()
            if head == "NAME":
                self.name = rest[0] if rest else ""
            elif head == "ENDATA":
                return True
            elif head not in ("ROWS", "COLUMNS", "RHS", "BOUNDS"):
                raise MpsFormatError(f"unsupported section {head}")
            self.section = head
            return False
        f = line.split()
        if self.section == "ROWS":
            self._row(*f)
        elif self.section == "COLUMNS":
            self._column(f)
        elif self.section == "RHS":
            for r, v in _pairs(f[1:]):
                if r == OBJ_ROW:
                    self.offset = -float(v)
                else:
                    self.rhs[r] = float(v)
        elif self.section == "BOUNDS":
            self._bound(f)
        else:
            raise MpsFormatError("data outside a section")
        return False

    def _row(self, t, r):
        if t == "N":
            return
        if t not in _TYPE_REL:
            raise MpsFormatError(f"bad row type {t}")
        self.row_type[r] = t
        self.row_order.append(r)
        self.entries[r] = []

    def _column(self, f):
        if len(f) == 3 and f[1] == "'MARKER'":
            self.in_int = f[2] == "'INTORG'"
            return
        col = f[0]
        if col not in self.col_int:
            self.col_order.append(col)
            self.col_int[col] = self.in_int
        for r, v in _pairs(f[1:]):
            val = float(v)
            if r == OBJ_ROW:
                if val != 0.0:
                    self.obj[col] = self.obj.get(col, 0.0) + val
            elif r in self.entries:
                self.entries[r].append((col, val))
            else:
                raise MpsFormatError(f"unknown row {r}")

    def _bound(self, f):
        kind, col = f[0], f[2]
        lo, hi = self.bounds.get(col, (0.0, math.inf))
        val = float(f[3]) if kind in ("FX", "LO", "UP") else None
        if kind == "FX":
            lo = hi = val
        elif kind == "LO":
            lo = val
        elif kind == "UP":
            hi = val
        elif kind == "MI":
            lo = -math.inf
        elif kind == "PL":
            hi = math.inf
        elif kind == "FR":
            lo, hi = -math.inf, math.inf
        elif kind == "BV":
            lo, hi = 0.0, 1.0
        else:
            raise MpsFormatError(f"unsupported bound type {kind}")
        self.bounds[col] = (lo, hi)

    def problem(self) -> MilpProblem:
        pos = {c: j for j, c in enumerate(self.col_order)}
        variables = []
        for c in self.col_order:
            kind, index = parse_var_name(c)
            lo, hi = self.bounds.get(c, (0.0, math.inf))
            variables.append(VariableDef(kind, index, lo, hi, self.col_int[c]))
        constraints = [
            LinearConstraint(tuple((pos[c], v) for c, v in self.entries[r]), _TYPE_REL[self.row_type[r]],
                             self.rhs.get(r, 0.0), r)
            for r in self.row_order
        ]
        objective = [(pos[c], v) for c, v in self.obj.items()]
        prob = MilpProblem(variables, constraints, objective, {}, self.name)
        if self.offset:
            prob.arrays.obj_offset = self.offset
        return prob


def _pairs(fields):
    if len(fields) % 2:
        raise MpsFormatError("row/value fields must come in pairs")
    return zip(fields[0::2], fields[1::2])


def same_problem(a: MilpProblem, b: MilpProblem) -> list:
    """Differences between two problems' arrays, names and tags (empty when identical)."""
    diffs = []
    A, B = a.arrays, b.arrays
    if A.A.shape != B.A.shape:
        return [f"shape {A.A.shape} != {B.A.shape}"]
    if [v.name for v in a.variables] != [v.name for v in b.variables]:
        diffs.append("column names differ")
    if [c.tag for c in a.constraints] != [c.tag for c in b.constraints]:
        diffs.append("row names differ")
    for field in ("c", "rhs", "lo", "hi", "sense", "integer"):
        if not np.array_equal(getattr(A, field), getattr(B, field)):
            diffs.append(f"{field} differs")
    if (A.A != B.A).nnz:
        diffs.append("matrix coefficients differ")
    if A.obj_offset != B.obj_offset:
        diffs.append("objective offset differs")
    return diffs
