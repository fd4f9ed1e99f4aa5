"""Line-oriented problem files.

A file has sections ``[g]``, ``[Phi]``, optional ``[f]``, ``[points]`` and
``[params]``; inside a section every line is ``key = value``.  Blank lines and
text after ``#`` are ignored.  See the README for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL, DimensionError, Tolerances, VarpolyError
from .polyhedral import PolyhedralFunction
from .smooth import CompositeProblem, PolyMap


class ParseError(VarpolyError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


SECTIONS = ("g", "Phi", "f", "points", "params")
POINT_KEYS = ("x", "v", "u", "lambda")
PARAM_KEYS = {
    "r": "floats",
    "rho_user": "float",
    "radius": "float",
    "count": "int",
    "rho": "float",
    "levels": "floats",
    "base_count": "int",
    "w": "vectors",
}
TOL_KEYS = tuple(Tolerances.__dataclass_fields__)


# ---------------------------------------------------------------------------
# polynomials

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|x(?P<var>\d+)|(?P<op>[-+*^]))")


def _tokens(text: str, line: int):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"cannot read polynomial near {text[pos:pos + 12]!r}", line)
        if m.group("num") is not None:
            out.append(("num", float(m.group("num"))))
        elif m.group("var") is not None:
            out.append(("var", int(m.group("var"))))
        else:
            out.append(("op", m.group("op")))
        pos = m.end()
    return out


def parse_polynomial(text: str, n: int, line: int | None = None) -> dict:
    """Sum of signed terms; a term is a product of numbers and powers x<i>^<k>."""
    toks = _tokens(text, line)
    if not toks:
        raise ParseError("empty polynomial", line)
    poly: dict = {}
    i = 0
    while i < len(toks):
        sign = 1.0
        while i < len(toks) and toks[i] in (("op", "+"), ("op", "-")):
            if toks[i][1] == "-":
                sign = -sign
            i += 1
        coef, exp = sign, [0] * n
        expect = True
        while i < len(toks):
            kind, val = toks[i]
            if expect:
                if kind == "num":
                    coef *= val
                elif kind == "var":
                    if not 1 <= val <= n:
                        raise ParseError(f"variable x{val} outside x1..x{n}", line)
                    k = 1
                    if i + 1 < len(toks) and toks[i + 1] == ("op", "^"):
                        if i + 2 >= len(toks) or toks[i + 2][0] != "num" or toks[i + 2][1] != int(toks[i + 2][1]):
                            raise ParseError("exponent must be a nonnegative integer", line)
                        k = int(toks[i + 2][1])
                        i += 2
                    exp[val - 1] += k
                else:
                    raise ParseError(f"unexpected {val!r}", line)
                expect = False
                i += 1
            elif (kind, val) == ("op", "*"):
                expect = True
                i += 1
            elif kind == "op" and val in "+-":
                break
            else:
                raise ParseError(f"unexpected {val!r}", line)
        if expect:
            raise ParseError("polynomial ends with an operator", line)
        key = tuple(exp)
        poly[key] = poly.get(key, 0.0) + coef
    return {e: c for e, c in poly.items() if c != 0.0}


def format_polynomial(poly: dict) -> str:
    if not poly:
        return "0.0"
    terms = []
    for exp, c in sorted(poly.items(), key=lambda t: (-sum(t[0]), tuple(-e for e in t[0]))):
        factors = [repr(float(c))]
        for i, e in enumerate(exp):
            if e == 1:
                factors.append(f"x{i + 1}")
            elif e > 1:
                factors.append(f"x{i + 1}^{e}")
        terms.append("*".join(factors))
    return " + ".join(terms)


# ---------------------------------------------------------------------------
# the file model


def _vec(v) -> tuple:
    return tuple(float(c) for c in np.atleast_1d(np.asarray(v, float)))


@dataclass
class ProblemFile:
    m: int
    pieces: list                      # [(a tuple, alpha)]
    rows: list                        # [(b tuple, beta)]
    n: int
    phi: list                         # [poly dict]
    f: list | None = None
    points: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    tol: dict = field(default_factory=dict)

    # builders ----------------------------------------------------------------
    def tolerances(self, extra: dict | None = None) -> Tolerances:
        return DEFAULT_TOL.with_overrides(**{**self.tol, **(extra or {})})

    def g(self) -> PolyhedralFunction:
        return PolyhedralFunction.build(self.pieces, self.rows)

    def Phi(self) -> PolyMap:
        return PolyMap(self.phi, self.n)

    def problem(self, tol: Tolerances | None = None, base: bool = True) -> CompositeProblem:
        x = self.points.get("x") if base else None
        v = self.points.get("v") if base else None
        return CompositeProblem(self.g(), self.Phi(), x, v, tol or self.tolerances())

    def f_map(self) -> PolyMap:
        return PolyMap(self.f, self.n) if self.f is not None else PolyMap.identity(self.n)

    def point(self, key: str) -> np.ndarray:
        if key not in self.points:
            raise ParseError(f"[points] needs '{key}' for this command")
        return np.array(self.points[key])

    def validate(self) -> None:
        """Dimension checks that parsing alone does not catch."""
        if not self.pieces:
            raise ParseError("[g] needs at least one piece")
        for a, _ in self.pieces:
            if len(a) != self.m:
                raise ParseError(f"piece has {len(a)} entries, expected m={self.m}")
        for b, _ in self.rows:
            if len(b) != self.m:
                raise ParseError(f"row has {len(b)} entries, expected m={self.m}")
        if len(self.phi) != self.m:
            raise ParseError(f"[Phi] has {len(self.phi)} components, expected m={self.m}")
        if self.f is not None and len(self.f) != self.n:
            raise ParseError(f"[f] has {len(self.f)} components, expected n={self.n}")
        sizes = {"x": self.n, "v": self.n, "u": self.n, "lambda": self.m}
        for k, val in self.points.items():
            if len(val) != sizes[k]:
                raise ParseError(f"point '{k}' has {len(val)} entries, expected {sizes[k]}")
        for w in self.params.get("w", ()):
            if len(w) != self.n:
                raise ParseError(f"direction has {len(w)} entries, expected n={self.n}")
        try:
            self.tolerances()
            self.g()
        except (KeyError, ValueError, DimensionError) as exc:
            raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# reading and writing


def _floats(text: str, line: int) -> tuple:
    try:
        vals = tuple(float(t) for t in text.split())
    except ValueError:
        raise ParseError(f"expected numbers, got {text!r}", line) from None
    if not all(np.isfinite(vals)):
        raise ParseError("numbers must be finite", line)
    return vals


def _int(text: str, line: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"expected an integer, got {text!r}", line) from None


def _split_bar(text: str, line: int):
    if text.count("|") != 1:
        raise ParseError("expected 'coefficients | offset'", line)
    left, right = text.split("|")
    off = _floats(right, line)
    if len(off) != 1:
        raise ParseError("offset must be a single number", line)
    return _floats(left, line), off[0]


def parse(text: str) -> ProblemFile:
    section = None
    seen: set = set()
    m = n = None
    pieces, rows, phi_lines, f_lines = [], [], [], []
    points, params, tol = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = re.fullmatch(r"\[(\w+)\]", line)
        if head:
            section = head.group(1)
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", lineno)
            if section in seen:
                raise ParseError(f"section [{section}] appears twice", lineno)
            seen.add(section)
            continue
        if section is None:
            raise ParseError("content before the first section header", lineno)
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if section == "g":
            if key == "m":
                m = _int(val, lineno)
            elif key == "piece":
                pieces.append(_split_bar(val, lineno))
            elif key == "row":
                rows.append(_split_bar(val, lineno))
            else:
                raise ParseError(f"unknown key '{key}' in [g]", lineno)
        elif section in ("Phi", "f"):
            if key == "n" and section == "Phi":
                n = _int(val, lineno)
            elif key == "component":
                (phi_lines if section == "Phi" else f_lines).append((val, lineno))
            else:
                raise ParseError(f"unknown key '{key}' in [{section}]", lineno)
        elif section == "points":
            if key not in POINT_KEYS:
                raise ParseError(f"unknown key '{key}' in [points]", lineno)
            if key in points:
                raise ParseError(f"'{key}' given twice", lineno)
            points[key] = _floats(val, lineno)
        else:
            if key.startswith("tol."):
                name = key[4:]
                if name not in TOL_KEYS:
                    raise ParseError(f"unknown tolerance '{name}'", lineno)
                tol[name] = _int(val, lineno) if name == "dd_bound" else _floats(val, lineno)[0]
                continue
            kind = PARAM_KEYS.get(key)
            if kind is None:
                raise ParseError(f"unknown key '{key}' in [params]", lineno)
            if kind == "int":
                params[key] = _int(val, lineno)
            elif kind == "float":
                vals = _floats(val, lineno)
                if len(vals) != 1:
                    raise ParseError(f"'{key}' takes one number", lineno)
                params[key] = vals[0]
            elif kind == "floats":
                params[key] = _floats(val, lineno)
            else:
                params[key] = tuple(_floats(part, lineno) for part in val.split(";"))
    for name, got in (("[g]", "g" in seen), ("[Phi]", "Phi" in seen)):
        if not got:
            raise ParseError(f"missing section {name}")
    if m is None:
        raise ParseError("[g] needs 'm'")
    if n is None:
        raise ParseError("[Phi] needs 'n'")
    phi = [parse_polynomial(t, n, ln) for t, ln in phi_lines]
    f = [parse_polynomial(t, n, ln) for t, ln in f_lines] if "f" in seen else None
    pf = ProblemFile(m, pieces, rows, n, phi, f, points, params, tol)
    pf.validate()
    return pf


def load(path) -> ProblemFile:
    with open(path) as fh:
        return parse(fh.read())


def _fmt(vals) -> str:
    return " ".join(repr(float(v)) for v in vals)


def serialize(pf: ProblemFile) -> str:
    out = ["[g]", f"m = {pf.m}"]
    out += [f"piece = {_fmt(a)} | {float(al)!r}" for a, al in pf.pieces]
    out += [f"row = {_fmt(b)} | {float(be)!r}" for b, be in pf.rows]
    out += ["", "[Phi]", f"n = {pf.n}"]
    out += [f"component = {format_polynomial(p)}" for p in pf.phi]
    if pf.f is not None:
        out += ["", "[f]"] + [f"component = {format_polynomial(p)}" for p in pf.f]
    if pf.points:
        out += ["", "[points]"]
        out += [f"{k} = {_fmt(pf.points[k])}" for k in POINT_KEYS if k in pf.points]
    if pf.params or pf.tol:
        out += ["", "[params]"]
        for k in PARAM_KEYS:
            if k not in pf.params:
                continue
            val, kind = pf.params[k], PARAM_KEYS[k]
            if kind == "int":
                out.append(f"{k} = {int(val)}")
            elif kind == "float":
                out.append(f"{k} = {float(val)!r}")
            elif kind == "floats":
                out.append(f"{k} = {_fmt(val)}")
            else:
                out.append(f"{k} = " + " ; ".join(_fmt(w) for w in val))
        for k in TOL_KEYS:
            if k in pf.tol:
                out.append(f"tol.{k} = {pf.tol[k]!r}")
    return "\n".join(out) + "\n"


def from_problem(cp: CompositeProblem, f: PolyMap | None = None, points: dict | None = None,
                 params: dict | None = None) -> ProblemFile:
    """File model of an in-memory problem (polynomial maps only)."""
    if not isinstance(cp.Phi, PolyMap):
        raise TypeError("only polynomial maps can be written to a problem file")
    g = cp.g
    pts = {}
    if cp.x_bar is not None:
        pts["x"] = _vec(cp.x_bar)
    if cp.v_bar is not None:
        pts["v"] = _vec(cp.v_bar)
    pts.update({k: _vec(v) for k, v in (points or {}).items()})
    return ProblemFile(
        g.m,
        [(_vec(a), float(al)) for a, al in zip(g.a, g.alpha)],
        [(_vec(b), float(be)) for b, be in zip(g.b, g.beta)],
        cp.n,
        [dict(p) for p in cp.Phi.components],
        None if f is None else [dict(p) for p in f.components],
        pts,
        dict(params or {}),
    )
