"""CPLEX LP text format for MilpModel.

Numbers are written with 17 significant digits so that reading a file back
reproduces the model exactly. Every variable is listed in the Bounds
section in declaration order, which the reader uses to restore that order.
"""

from __future__ import annotations

import math

from .milp import BINARY, CONTINUOUS, MilpModel

_TERMS_PER_LINE = 6


def _num(v):
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    text = format(v, ".17g")
    return "0" if text == "-0" else text


def _terms(row, names):
    out = []
    for idx in sorted(row):
        c = row[idx]
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {names[idx]}")
    return out


def _wrap(head, terms, tail):
    lines, line = [], head
    for k, term in enumerate(terms):
        if k and k % _TERMS_PER_LINE == 0:
            lines.append(line)
            line = "  "
        line += " " + term
    line += tail
    lines.append(line)
    return "\n".join(lines)


def export_lp(milp, title="PARC model"):
    """Render ``milp`` as CPLEX LP text."""
    names = milp.names
    out = [f"\\ {title}", "Minimize"]
    terms = _terms(milp.objective, names)
    if not terms and names:
        terms = [f"+ 0 {names[0]}"]
    out.append(_wrap(" obj:", terms, ""))
    out.append("Subject To")
    for r, row in enumerate(milp.rows):
        terms = _terms(row, names) or [f"+ 0 {names[0]}"]
        sense = milp.senses[r]
        out.append(_wrap(f" {milp.row_names[r]}:", terms, f" {sense} {_num(milp.rhs[r])}"))
    out.append("Bounds")
    for name, lo, hi in zip(names, milp.lower, milp.upper):
        if math.isinf(lo) and lo < 0 and math.isinf(hi):
            out.append(f" {name} free")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    binaries = [n for n, k in zip(names, milp.kinds) if k == BINARY]
    if binaries:
        out.append("Binaries")
        for k in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(milp, path, title="PARC model"):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(export_lp(milp, title))


_SECTIONS = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject": "rows", "st": "rows", "s.t.": "rows", "such": "rows",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen",
    "end": "end",
}


def _parse_float(tok):
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def _is_number(tok):
    try:
        _parse_float(tok)
    except ValueError:
        return False
    return True


def _parse_expr(tokens):
    """Parse ``[sign] [coef] name ...`` into a list of (coef, name)."""
    terms, sign, coef, k = [], 1.0, None, 0
    while k < len(tokens):
        tok = tokens[k]
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
        elif _is_number(tok):
            coef = _parse_float(tok)
        else:
            terms.append((sign * (1.0 if coef is None else coef), tok))
            sign, coef = 1.0, None
        k += 1
    return terms


def read_lp(text):
    """Parse LP text written by :func:`export_lp` (and simple hand-written files)."""
    sections = {"obj": [], "rows": [], "bounds": [], "bin": [], "gen": []}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.split()[0].lower()
        if key in _SECTIONS and (len(line.split()) == 1 or key in ("subject", "such")):
            current = _SECTIONS[key]
            if current == "end":
                break
            continue
        if current is None:
            raise ValueError(f"content outside of a section: {raw!r}")
        sections[current].append(line)

    milp = MilpModel()
    binaries = set(" ".join(sections["bin"]).split())
    declared = []
    bounds = {}
    for line in sections["bounds"]:
        tok = line.split()
        if len(tok) == 2 and tok[1].lower() == "free":
            declared.append(tok[0])
            bounds[tok[0]] = (-math.inf, math.inf)
        elif len(tok) == 5 and tok[1] == "<=" and tok[3] == "<=":
            declared.append(tok[2])
            bounds[tok[2]] = (_parse_float(tok[0]), _parse_float(tok[4]))
        elif len(tok) == 3 and tok[1] in (">=", "<=", "="):
            lo, hi = bounds.get(tok[0], (0.0, math.inf))
            v = _parse_float(tok[2])
            if tok[1] == ">=":
                lo = v
            elif tok[1] == "<=":
                hi = v
            else:
                lo = hi = v
            if tok[0] not in bounds:
                declared.append(tok[0])
            bounds[tok[0]] = (lo, hi)
        else:
            raise ValueError(f"cannot parse bound {line!r}")

    obj_tokens = " ".join(sections["obj"]).split()
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    obj_terms = _parse_expr(obj_tokens)

    rows = []
    tokens = " ".join(sections["rows"]).split()
    k = 0
    while k < len(tokens):
        name = None
        if tokens[k].endswith(":"):
            name = tokens[k][:-1]
            k += 1
        start = k
        while tokens[k] not in ("<=", ">=", "=", "=<", "=>"):
            k += 1
        sense = {"=<": "<=", "=>": ">="}.get(tokens[k], tokens[k])
        rows.append((name, _parse_expr(tokens[start:k]), sense, _parse_float(tokens[k + 1])))
        k += 2

    # variables: Bounds order first, then first appearance elsewhere
    order = list(declared)
    seen = set(order)
    for _, name in obj_terms:
        if name not in seen:
            order.append(name)
            seen.add(name)
    for _, terms, _, _ in rows:
        for _, name in terms:
            if name not in seen:
                order.append(name)
                seen.add(name)
    for name in sorted(binaries - seen):
        order.append(name)
    for name in order:
        kind = BINARY if name in binaries else CONTINUOUS
        lo, hi = bounds.get(name, (0.0, 1.0) if kind == BINARY else (0.0, math.inf))
        milp.add_var(name, kind, lo, hi)
    milp.set_objective({name: c for c, name in obj_terms})
    for name, terms, sense, rhs in rows:
        coeffs = {}
        for c, var in terms:
            coeffs[var] = coeffs.get(var, 0.0) + c
        milp.add_row(coeffs, sense, rhs, name)
    return milp


def load_lp(path):
    with open(path, encoding="ascii") as fh:
        return read_lp(fh.read())
