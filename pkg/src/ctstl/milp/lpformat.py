"""CPLEX LP-format export and a matching reader.

Layout written by :func:`export_model` (one item per line)::

    \\ <model name>
    Minimize
     obj: + 1 x + 2 y [ + [ 2 x ^2 ] / 2 ]
    Subject To
     c0: + 1 x - 1 y >= 0.5
    Bounds
     0 <= x <= 1
     y free
    Binaries
     z
    End

Every variable appears in ``Bounds`` in index order (binaries as
``0 <= z <= 1``), which lets the reader restore the variable order.  Numbers
are written with ``repr`` so export -> import -> export is byte-identical.
Lines longer than ``WRAP`` characters are continued on the next line with a
leading space, which LP readers treat as whitespace.
"""

from __future__ import annotations

import math
import re
from typing import List

from .model import BINARY, CONTINUOUS, MilpModel

WRAP = 255
_NAME_RE = re.compile(r"^[A-Za-z_!\"#$%&()/,;?@`'{}|~][A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]*$")
_SECTIONS = {
    "minimize": "min", "minimum": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "end": "end",
}


def _num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def _check_name(name: str) -> str:
    if not _NAME_RE.match(name) or name[0] in "eE" and re.match(r"^[eE][0-9+-]", name):
        raise ValueError(f"name {name!r} is not valid in LP format")
    return name


def _linear(coefs, names) -> List[str]:
    out = []
    for j, a in coefs.items():
        sign = "-" if a < 0 else "+"
        out.append(f"{sign} {_num(abs(a))} {names[j]}")
    return out


def _wrap(head: str, tokens: List[str]) -> List[str]:
    lines, cur = [], head
    for tok in tokens:
        if len(cur) + 1 + len(tok) > WRAP and cur.strip():
            lines.append(cur)
            cur = "  " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def export_model(model: MilpModel) -> str:
    """Deterministic LP-format text for ``model``."""
    names = [_check_name(v.name) for v in model.variables]
    lines = [f"\\ {model.name}", "Minimize"]
    obj = _linear(model.objective, names)
    if model.quad:
        q = []
        for (i, j), a in sorted(model.quad.items()):
            sign = "-" if a < 0 else "+"
            term = f"{names[i]} ^2" if i == j else f"{names[i]} * {names[j]}"
            q.append(f"{sign} {_num(abs(2.0 * a))} {term}")
        obj += ["+", "["] + q + ["]", "/", "2"]
    lines += _wrap(" obj:", obj)
    lines.append("Subject To")
    for con in model.constraints:
        toks = _linear(con.coefs, names)
        if not toks:
            if not names:
                raise ValueError("a constraint needs at least one declared variable")
            toks = [f"+ 0 {names[0]}"]
        toks += [con.sense, _num(con.rhs)]
        lines += _wrap(f" {_check_name(con.name)}:", toks)
    if model.variables:
        lines.append("Bounds")
        for v in model.variables:
            lo, hi = v.lb, v.ub
            if lo == -math.inf and hi == math.inf:
                lines.append(f" {v.name} free")
            elif hi == math.inf:
                lines.append(f" {v.name} >= {_num(lo)}")
            elif lo == hi:
                lines.append(f" {v.name} = {_num(lo)}")
            else:
                lines.append(f" {_num(lo)} <= {v.name} <= {_num(hi)}")
    bins = [v.name for v in model.variables if v.kind == BINARY]
    if bins:
        lines.append("Binaries")
        lines += [f" {nm}" for nm in bins]
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: MilpModel, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(export_model(model))


# ------------------------------------------------------------------ reader

class LPFormatError(ValueError):
    pass


def _section_of(line: str):
    key = line.strip().lower()
    return _SECTIONS.get(key)


def _parse_linear(tokens: List[str], pos: int, stop):
    """Parse ``[+|-] [coef] name ...`` until a token in ``stop``."""
    terms = []
    while pos < len(tokens) and tokens[pos] not in stop:
        sign = 1.0
        if tokens[pos] in "+-":
            if pos + 1 < len(tokens) and tokens[pos + 1] in stop:
                pos += 1
                break
            sign = -1.0 if tokens[pos] == "-" else 1.0
            pos += 1
        coef = 1.0
        try:
            coef = float(tokens[pos])
            pos += 1
        except (ValueError, IndexError):
            pass
        if pos >= len(tokens):
            raise LPFormatError("dangling coefficient")
        terms.append((tokens[pos], sign * coef))
        pos += 1
    return terms, pos


_TOKEN_RE = re.compile(
    r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|<=|>=|=<|=>|[<>=+\-\[\]*/^:]|[^\s<>=+\-\[\]*/^:]+")


def _tokens(text: str) -> List[str]:
    return _TOKEN_RE.findall(text)


def _signed(tk: List[str]) -> List[str]:
    """Glue a leading sign onto the number that follows it (bounds, rhs)."""
    out: List[str] = []
    k = 0
    while k < len(tk):
        if tk[k] in "+-" and k + 1 < len(tk) and (not out or out[-1] in ("<=", ">=", "=", "=<", "=>")):
            out.append(tk[k] + tk[k + 1] if tk[k] == "-" else tk[k + 1])
            k += 2
        else:
            out.append(tk[k])
            k += 1
    return out


def read_lp(text: str) -> MilpModel:
    """Parse LP-format text (the subset written by :func:`export_model`)."""
    name = "model"
    blocks = {"min": [], "st": [], "bounds": [], "bin": []}
    section = None
    current: List[str] = []

    def flush():
        if section and current:
            blocks[section].append(" ".join(current))

    for raw in text.splitlines():
        if raw.startswith("\\"):
            if section is None and raw[1:].strip():
                name = raw[1:].strip()
            continue
        line = raw.split("\\", 1)[0]
        if not line.strip():
            continue
        sec = _section_of(line)
        if sec is not None:
            flush()
            current = []
            if sec == "end":
                section = None
                break
            section = sec
            continue
        if section is None:
            raise LPFormatError(f"content outside a section: {raw!r}")
        if raw.startswith("  ") and current:
            current.append(line.strip())
        else:
            flush()
            current = [line.strip()]
    flush()

    order: List[str] = []
    bounds = {}
    for entry in blocks["bounds"]:
        tk = _signed(_tokens(entry))
        if len(tk) == 2 and tk[1].lower() == "free":
            nm, lo, hi = tk[0], -math.inf, math.inf
        elif len(tk) == 3 and tk[1] in (">=", "=>"):
            nm, lo, hi = tk[0], float(tk[2]), math.inf
        elif len(tk) == 3 and tk[1] in ("<=", "=<"):
            nm, lo, hi = tk[0], 0.0, float(tk[2])
        elif len(tk) == 3 and tk[1] == "=":
            nm, lo, hi = tk[0], float(tk[2]), float(tk[2])
        elif len(tk) == 5 and tk[1] in ("<=", "=<") and tk[3] in ("<=", "=<"):
            nm, lo, hi = tk[2], float(tk[0]), float(tk[4])
        else:
            raise LPFormatError(f"cannot parse bound {entry!r}")
        if nm not in bounds:
            order.append(nm)
        bounds[nm] = (lo, hi)
    binaries = []
    for entry in blocks["bin"]:
        binaries += entry.split()

    def note(nm):
        if nm not in bounds and nm not in extra:
            extra.append(nm)

    extra: List[str] = []
    # objective
    obj_terms, quad_terms = [], []
    for entry in blocks["min"]:
        tk = _tokens(entry)
        pos = 2 if len(tk) > 1 and tk[1] == ":" else 0
        terms, pos = _parse_linear(tk, pos, {"["})
        obj_terms += terms
        if pos < len(tk):
            # "+ [ ... ] / 2"
            close = tk.index("]", pos)
            inner = tk[pos + 1: close]
            if tk[close + 1: close + 3] != ["/", "2"]:
                raise LPFormatError("quadratic objective must be divided by 2")
            k = 0
            while k < len(inner):
                sign = -1.0 if inner[k] == "-" else 1.0
                if inner[k] in "+-":
                    k += 1
                coef = float(inner[k])
                a = inner[k + 1]
                if inner[k + 2] == "^":
                    quad_terms.append((a, a, sign * coef / 2.0))
                    k += 4
                else:
                    quad_terms.append((a, inner[k + 3], sign * coef / 2.0))
                    k += 4
    rows = []
    for entry in blocks["st"]:
        tk = _tokens(entry)
        cname = None
        pos = 0
        if len(tk) > 1 and tk[1] == ":":
            cname, pos = tk[0], 2
        terms, pos = _parse_linear(tk, pos, {"<=", ">=", "=", "=<", "=>"})
        if pos + 1 >= len(tk):
            raise LPFormatError(f"constraint without right-hand side: {entry!r}")
        sense = {"=<": "<=", "=>": ">="}.get(tk[pos], tk[pos])
        rhs = float(_signed(tk[pos:])[1])
        rows.append((cname, terms, sense, rhs))
    for nm, _ in obj_terms:
        note(nm)
    for a, b2, _ in quad_terms:
        note(a)
        note(b2)
    for _, terms, _, _ in rows:
        for nm, _ in terms:
            note(nm)
    for nm in binaries:
        note(nm)

    model = MilpModel(name=name)
    binset = set(binaries)
    for nm in order + extra:
        lo, hi = bounds.get(nm, (0.0, math.inf))
        model.add_var(nm, lo, hi, BINARY if nm in binset else CONTINUOUS)
    idx = model.index
    model.set_objective([(idx(nm), a) for nm, a in obj_terms])
    for a, b2, q in quad_terms:
        key = (idx(a), idx(b2))
        model.quad[key] = model.quad.get(key, 0.0) + q
    for cname, terms, sense, rhs in rows:
        coefs = {}
        for nm, a in terms:
            coefs[idx(nm)] = coefs.get(idx(nm), 0.0) + a
        model.add_constraint(coefs, sense, rhs, name=cname)
    return model


def read_lp_file(path) -> MilpModel:
    with open(path, encoding="ascii") as fh:
        return read_lp(fh.read())
