"""Text and LaTeX forms for the operator types, plus the inverse parser.

The plain-text operator grammar is a contract: every renderer here emits
strings `parse_diffop` / `parse_tdo` read back to an equal object, and the
LaTeX forms normalize to the same token stream before parsing.  Waves render
(text and LaTeX) but are display-only; nothing consumes a wave as input.

Grammar, both modes:

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom
    atom   := primary ('^' exponent)?

x-mode primaries: numbers, i, x, e^<factor>, Dx, parenthesized exprs.
z-mode primaries: numbers, i, z, Dz, S[<scalar expr>], parenthesized exprs.
Division is only defined between plain functions, powers of operators take
nonnegative integer exponents, and there is no implicit multiplication.
"""

from __future__ import annotations

import re

from .errors import ParseError
from .exact_algebra import (
    ExpPoly,
    ExpRat,
    Scalar,
    ZPoly,
    ZRat,
    _frac_str,
)
from .operator_calculus import DiffOpX, TDO, Wave


# ---------------------------------------------------------------------------
# Plain-text renderers
# ---------------------------------------------------------------------------


def _wrap_factor(txt: str) -> str:
    """Parenthesize a rendered coefficient when it could bind wrongly."""
    if any(ch in txt for ch in " */+"):
        return f"({txt})"
    return txt


def _join_terms(pieces) -> str:
    if not pieces:
        return "0"
    out = pieces[0]
    for piece in pieces[1:]:
        if piece.startswith("-"):
            out += " - " + piece[1:]
        else:
            out += " + " + piece
    return out


def diffop_text(op: DiffOpX) -> str:
    if op.is_zero:
        return "0"
    one = ExpRat.constant(1)
    pieces = []
    for k in range(len(op.coeffs) - 1, -1, -1):
        c = op.coeffs[k]
        if c.is_zero:
            continue
        dpart = "" if k == 0 else ("Dx" if k == 1 else f"Dx^{k}")
        if not dpart:
            pieces.append(_wrap_factor(c.text()))
        elif c == one:
            pieces.append(dpart)
        elif c == -one:
            pieces.append(f"-{dpart}")
        else:
            pieces.append(f"{_wrap_factor(c.text())}*{dpart}")
    return _join_terms(pieces)


def _tdo_sorted_terms(t: TDO):
    for lam in sorted(t.parts, key=Scalar.sort_key, reverse=True):
        vec = t.parts[lam]
        for k in range(len(vec) - 1, -1, -1):
            if not vec[k].is_zero:
                yield lam, k, vec[k]


def tdo_text(t: TDO) -> str:
    if t.is_zero:
        return "0"
    pieces = []
    for lam, k, r in _tdo_sorted_terms(t):
        factors = []
        if k:
            factors.append("Dz" if k == 1 else f"Dz^{k}")
        if not lam.is_zero:
            factors.append(f"S[{lam}]")
        ctxt = _wrap_factor(r.text())
        if not factors:
            pieces.append(ctxt)
        elif ctxt == "1":
            pieces.append("*".join(factors))
        elif ctxt == "-1":
            pieces.append("-" + "*".join(factors))
        else:
            pieces.append("*".join([ctxt] + factors))
    return _join_terms(pieces)


def wave_text(w: Wave) -> str:
    if w.is_zero:
        return "0"
    body = []
    for k in range(len(w.coeffs) - 1, -1, -1):
        c = w.coeffs[k]
        if c.is_zero:
            continue
        zpart = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
        ctxt = _wrap_factor(c.text())
        if not zpart:
            body.append(ctxt)
        elif ctxt == "1":
            body.append(zpart)
        else:
            body.append(f"{ctxt}*{zpart}")
    num = _join_terms(body)
    if w.den.is_constant:
        core = f"({num})" if len(body) > 1 else num
    else:
        core = f"({num})/({w.den.text()})"
    return f"{core} * e^(x*z)"


# ---------------------------------------------------------------------------
# LaTeX renderers
# ---------------------------------------------------------------------------


def _frac_latex(f) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    sign = "-" if f.numerator < 0 else ""
    return f"{sign}\\frac{{{abs(f.numerator)}}}{{{f.denominator}}}"


def scalar_latex(c: Scalar) -> str:
    if c.is_real:
        return _frac_latex(c.re)
    if c.im == 1:
        imag = "i"
    elif c.im == -1:
        imag = "-i"
    elif c.im.denominator == 1:
        imag = f"{c.im.numerator}i"
    else:
        imag = f"{_frac_latex(c.im)} \\cdot i"
    if not c.re:
        return imag
    joined = imag if imag.startswith("-") else f"+{imag}"
    return f"{_frac_latex(c.re)}{joined}"


def _pow_latex(var: str, k: int) -> str:
    return var if k == 1 else f"{var}^{{{k}}}"


def zpoly_latex(p: ZPoly, var: str = "z") -> str:
    if p.is_zero:
        return "0"
    pieces = []
    for k in range(len(p.coeffs) - 1, -1, -1):
        c = p.coeffs[k]
        if c.is_zero:
            continue
        if k == 0:
            body = scalar_latex(c) if c.is_real else f"\\left({scalar_latex(c)}\\right)"
            pieces.append(body)
            continue
        if c.is_one:
            pieces.append(_pow_latex(var, k))
        elif (-c).is_one:
            pieces.append("-" + _pow_latex(var, k))
        else:
            body = scalar_latex(c) if c.is_real else f"\\left({scalar_latex(c)}\\right)"
            pieces.append(f"{body} \\cdot {_pow_latex(var, k)}")
    return _join_terms(pieces)


def zrat_latex(r: ZRat, var: str = "z") -> str:
    if r.den.is_constant:
        return zpoly_latex(r.num, var)
    return f"\\frac{{{zpoly_latex(r.num, var)}}}{{{zpoly_latex(r.den, var)}}}"


def _exp_latex(lam: Scalar, var: str) -> str:
    if lam.is_one:
        return f"e^{{{var}}}"
    if (-lam).is_one:
        return f"e^{{-{var}}}"
    body = scalar_latex(lam)
    if not lam.is_real:
        body = f"\\left({body}\\right)"
    return f"e^{{{body} \\cdot {var}}}"


def exppoly_latex(a: ExpPoly, var: str = "x") -> str:
    if a.is_zero:
        return "0"
    pieces = []
    for lam in sorted(a.terms, key=Scalar.sort_key, reverse=True):
        p = a.terms[lam]
        if lam.is_zero:
            pieces.append(zpoly_latex(p, var))
            continue
        ex = _exp_latex(lam, var)
        if p == ZPoly.constant(1):
            pieces.append(ex)
        elif p == ZPoly.constant(-1):
            pieces.append(f"-{ex}")
        else:
            ptxt = zpoly_latex(p, var)
            nonzero = sum(1 for c in p.coeffs if not c.is_zero)
            if nonzero > 1:
                ptxt = f"\\left({ptxt}\\right)"
            pieces.append(f"{ptxt} \\cdot {ex}")
    return _join_terms(pieces)


def exprat_latex(r: ExpRat, var: str = "x") -> str:
    r = r.reduced()
    if r.den == ExpPoly.constant(1):
        return exppoly_latex(r.num, var)
    return f"\\frac{{{exppoly_latex(r.num, var)}}}{{{exppoly_latex(r.den, var)}}}"


def _latex_coeff_piece(body: str, multi: bool, dpart: str) -> str:
    if not dpart:
        return f"\\left({body}\\right)" if multi else body
    if body == "1":
        return dpart
    if body == "-1":
        return f"-{dpart}"
    if multi:
        body = f"\\left({body}\\right)"
    return f"{body} \\cdot {dpart}"


def diffop_latex(op: DiffOpX) -> str:
    if op.is_zero:
        return "0"
    pieces = []
    for k in range(len(op.coeffs) - 1, -1, -1):
        c = op.coeffs[k]
        if c.is_zero:
            continue
        dpart = "" if k == 0 else _pow_latex("\\partial_x", k)
        body = exprat_latex(c)
        multi = c.den == ExpPoly.constant(1) and c.num.monomial_count() > 1
        pieces.append(_latex_coeff_piece(body, multi, dpart))
    return _join_terms(pieces)


def tdo_latex(t: TDO) -> str:
    if t.is_zero:
        return "0"
    pieces = []
    for lam, k, r in _tdo_sorted_terms(t):
        factors = []
        if k:
            factors.append(_pow_latex("\\partial_z", k))
        if not lam.is_zero:
            factors.append(f"S_{{{scalar_latex(lam)}}}")
        dpart = " \\cdot ".join(factors)
        body = zrat_latex(r)
        multi = r.den.is_constant and sum(1 for c in r.num.coeffs if not c.is_zero) > 1
        pieces.append(_latex_coeff_piece(body, multi, dpart))
    return _join_terms(pieces)


def wave_latex(w: Wave) -> str:
    if w.is_zero:
        return "0"
    body = []
    for k in range(len(w.coeffs) - 1, -1, -1):
        c = w.coeffs[k]
        if c.is_zero:
            continue
        zpart = "" if k == 0 else _pow_latex("z", k)
        ctxt = exprat_latex(c)
        multi = c.den == ExpPoly.constant(1) and c.num.monomial_count() > 1
        body.append(_latex_coeff_piece(ctxt, multi, zpart))
    num = _join_terms(body)
    if w.den.is_constant:
        core = f"\\left({num}\\right)" if len(body) > 1 else num
    else:
        core = f"\\frac{{{num}}}{{{zpoly_latex(w.den)}}}"
    return f"{core} \\, e^{{xz}}"


# ---------------------------------------------------------------------------
# LaTeX normalization: reduce LaTeX output to the plain-text token stream
# ---------------------------------------------------------------------------


def _brace_group(s: str, i: int):
    if i >= len(s) or s[i] != "{":
        raise ParseError("expected '{'", s[i:i + 12])
    depth = 0
    for j in range(i, len(s)):
        if s[j] == "{":
            depth += 1
        elif s[j] == "}":
            depth -= 1
            if depth == 0:
                return s[i + 1:j], j + 1
    raise ParseError("unbalanced braces", s[i:i + 12])


def _normalize_latex(s: str) -> str:
    out = []
    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch == "\\":
            j = i + 1
            while j < n and s[j].isalpha():
                j += 1
            cmd = s[i + 1:j]
            i = j
            if cmd == "frac":
                a, i = _brace_group(s, i)
                b, i = _brace_group(s, i)
                out.append(f"(({_normalize_latex(a)})/({_normalize_latex(b)}))")
            elif cmd == "partial":
                if i >= n or s[i] != "_":
                    raise ParseError("\\partial needs a variable subscript", s[max(0, i - 8):i + 4])
                i += 1
                if i < n and s[i] == "{":
                    var, i = _brace_group(s, i)
                else:
                    var, i = s[i], i + 1
                if var not in ("x", "z"):
                    raise ParseError(f"unknown derivative variable {var!r}", cmd)
                out.append("D" + var)
            elif cmd in ("left", "right"):
                continue
            elif cmd == "cdot":
                out.append("*")
            elif cmd == "":
                # escaped punctuation/space: \, \; \! \<space>
                if i < n and s[i] in ",;! ":
                    i += 1
                out.append(" ")
            else:
                raise ParseError(f"unsupported LaTeX command \\{cmd}", s[max(0, i - 12):i])
        elif ch == "_":
            i += 1
            if i < n and s[i] == "{":
                grp, i = _brace_group(s, i)
                out.append(f"[{_normalize_latex(grp)}]")
            elif i < n:
                out.append(f"[{s[i]}]")
                i += 1
            else:
                raise ParseError("dangling subscript", s[-8:])
        elif ch == "^":
            i += 1
            if i < n and s[i] == "{":
                grp, i = _brace_group(s, i)
                out.append(f"^({_normalize_latex(grp)})")
            else:
                out.append("^")
        elif ch == "{":
            grp, i = _brace_group(s, i)
            out.append(f"({_normalize_latex(grp)})")
        elif ch == "}":
            raise ParseError("unbalanced '}'", s[max(0, i - 8):i + 8])
        else:
            out.append(ch)
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"(\d+i)|(\d+)|([A-Za-z]+)|(\*\*)|([()\[\]+\-*/^])|(\S)")

_NAMES = {"Dx", "Dz", "S", "e", "i", "x", "z"}


def _tokenize(s: str):
    tokens = []
    for m in _TOKEN_RE.finditer(s):
        imag, num, name, dstar, op, bad = m.groups()
        if imag is not None:
            tokens.append(("imag", int(imag[:-1])))
        elif num is not None:
            tokens.append(("num", int(num)))
        elif name is not None:
            if name not in _NAMES:
                raise ParseError(f"unknown name {name!r}", s)
            tokens.append(("name", name))
        elif dstar is not None:
            tokens.append(("op", "^"))
        elif op is not None:
            tokens.append(("op", op))
        elif bad is not None and not bad.isspace():
            raise ParseError(f"unexpected character {bad!r}", s)
    return tokens


class _Val:
    """Parser value: either a plain function or an operator."""

    __slots__ = ("kind", "val")

    def __init__(self, kind, val):
        self.kind = kind  # "f" or "o"
        self.val = val


class _OpParser:
    """Recursive-descent evaluator over the shared operator grammar.

    mode "x": functions are ExpRat, operators DiffOpX.
    mode "z": functions are ZRat, operators TDO.
    """

    def __init__(self, tokens, mode: str, source: str):
        self.tokens = tokens
        self.pos = 0
        self.mode = mode
        self.source = source

    # -- token plumbing --------------------------------------------------------------

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def _next(self):
        tok = self._peek()
        self.pos += 1
        return tok

    def _expect(self, op):
        kind, val = self._next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, got {val!r}", self.source)

    def _fail(self, message):
        raise ParseError(message, self.source)

    # -- value helpers ---------------------------------------------------------------

    def _func(self, value):
        if self.mode == "x":
            return _Val("f", ExpRat.coerce(value))
        return _Val("f", ZRat.coerce(value))

    def _scalar_func(self, c: Scalar):
        if self.mode == "x":
            return _Val("f", ExpRat.constant(c))
        return _Val("f", ZRat.constant(c))

    def _to_op(self, v: _Val):
        if v.kind == "o":
            return v.val
        if self.mode == "x":
            return DiffOpX.mult(v.val)
        return TDO.mult(v.val)

    def _add(self, a, b, sub=False):
        if a.kind == "f" and b.kind == "f":
            return _Val("f", a.val - b.val if sub else a.val + b.val)
        x, y = self._to_op(a), self._to_op(b)
        return _Val("o", x - y if sub else x + y)

    def _mul(self, a, b):
        if a.kind == "f" and b.kind == "f":
            return _Val("f", a.val * b.val)
        return _Val("o", self._to_op(a) * self._to_op(b))

    def _div(self, a, b):
        if a.kind != "f" or b.kind != "f":
            self._fail("division is only defined between plain functions")
        if b.val.is_zero:
            self._fail("division by zero")
        return _Val("f", a.val / b.val)

    def _neg(self, a):
        if a.kind == "f":
            return _Val("f", -a.val)
        return _Val("o", -a.val)

    def _pow(self, a, k: int):
        if k < 0:
            self._fail("negative exponents are not part of the grammar")
        if a.kind == "f":
            out = self._func(1)
            for _ in range(k):
                out = self._mul(out, a)
            return out
        base = DiffOpX.identity() if self.mode == "x" else TDO.identity()
        out = _Val("o", base)
        for _ in range(k):
            out = self._mul(out, a)
        return out

    def _as_scalar(self, v: _Val) -> Scalar:
        if v.kind != "f" or not v.val.is_constant:
            self._fail("expected a constant scalar expression")
        return v.val.constant_value()

    # -- grammar ---------------------------------------------------------------------

    def expr(self) -> _Val:
        out = self.term()
        while True:
            kind, val = self._peek()
            if kind == "op" and val in "+-":
                self._next()
                out = self._add(out, self.term(), sub=(val == "-"))
            else:
                return out

    def term(self) -> _Val:
        out = self.factor()
        while True:
            kind, val = self._peek()
            if kind == "op" and val in "*/":
                self._next()
                rhs = self.factor()
                out = self._mul(out, rhs) if val == "*" else self._div(out, rhs)
            else:
                return out

    def factor(self) -> _Val:
        kind, val = self._peek()
        if kind == "op" and val == "-":
            self._next()
            return self._neg(self.factor())
        return self.atom()

    def atom(self) -> _Val:
        out = self.primary()
        kind, val = self._peek()
        if kind == "op" and val == "^":
            self._next()
            return self._pow(out, self.exponent())
        return out

    def exponent(self) -> int:
        kind, val = self._peek()
        if kind == "num":
            self._next()
            return val
        if kind == "op" and val == "(":
            self._next()
            inner = self.expr()
            self._expect(")")
            c = self._as_scalar(inner)
            if not c.is_integer:
                self._fail("exponents must be integers")
            return int(c.re)
        self._fail("expected an exponent")

    def primary(self) -> _Val:
        kind, val = self._next()
        if kind == "num":
            return self._scalar_func(Scalar(val))
        if kind == "imag":
            return self._scalar_func(Scalar(0, val))
        if kind == "op" and val == "(":
            inner = self.expr()
            self._expect(")")
            return inner
        if kind == "name":
            return self._named(val)
        self._fail(f"unexpected token {val!r}")

    def _named(self, name: str) -> _Val:
        if name == "i":
            return self._scalar_func(Scalar(0, 1))
        if name == "x":
            if self.mode != "x":
                self._fail("'x' is not available in the shift-operator grammar")
            return self._func(ExpPoly.x_power(1))
        if name == "z":
            if self.mode != "z":
                self._fail("'z' is not available in the x-operator grammar")
            return self._func(ZPoly.variable())
        if name == "Dx":
            if self.mode != "x":
                self._fail("'Dx' is not available in the shift-operator grammar")
            return _Val("o", DiffOpX.derivative_op(1))
        if name == "Dz":
            if self.mode != "z":
                self._fail("'Dz' is not available in the x-operator grammar")
            return _Val("o", TDO.dz(1))
        if name == "S":
            if self.mode != "z":
                self._fail("shifts are not available in the x-operator grammar")
            self._expect("[")
            lam = self._as_scalar(self.expr())
            self._expect("]")
            return _Val("o", TDO.shift(lam))
        if name == "e":
            if self.mode != "x":
                self._fail("'e' is not available in the shift-operator grammar")
            self._expect("^")
            arg = self.factor()
            return self._exp_atom(arg)
        self._fail(f"unknown name {name!r}")

    def _exp_atom(self, arg: _Val) -> _Val:
        if arg.kind != "f":
            self._fail("the exponent of e must be a function")
        f = arg.val
        if not f.is_exp_poly:
            self._fail("the exponent of e must be linear in x")
        poly = f.as_exp_poly()
        if not poly.is_polynomial:
            self._fail("the exponent of e must be linear in x")
        p = poly.poly_part()
        if p.degree > 1 or not p.coeff(0).is_zero:
            self._fail("the exponent of e must be c*x with no constant term")
        lam = p.coeff(1)
        return self._func(ExpPoly.exponential(lam))

    def run(self) -> _Val:
        out = self.expr()
        kind, val = self._peek()
        if kind is not None:
            self._fail(f"trailing input at token {val!r}")
        return out


def _parse(text: str, mode: str) -> _Val:
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty operator text", repr(text))
    if "\\" in text or "{" in text or "_" in text:
        text = _normalize_latex(text)
    tokens = _tokenize(text)
    return _OpParser(tokens, mode, text).run()


def parse_diffop(text: str) -> DiffOpX:
    """Read an x-side operator (plain text or the LaTeX this module emits)."""
    v = _parse(text, "x")
    if v.kind == "f":
        return DiffOpX.mult(v.val)
    return v.val


def parse_tdo(text: str) -> TDO:
    """Read a shift-side operator (plain text or the LaTeX this module emits)."""
    v = _parse(text, "z")
    if v.kind == "f":
        return TDO.mult(v.val)
    return v.val


def parse_exprat(text: str) -> ExpRat:
    v = _parse(text, "x")
    if v.kind != "f":
        raise ParseError("expected a function of x, found an operator", text)
    return v.val


def parse_zrat(text: str) -> ZRat:
    v = _parse(text, "z")
    if v.kind != "f":
        raise ParseError("expected a rational function of z, found an operator", text)
    return v.val


# ---------------------------------------------------------------------------
# JSON loaders (inverses of the to_json methods on the operator types)
# ---------------------------------------------------------------------------


def diffop_from_json(data) -> DiffOpX:
    if not isinstance(data, dict) or "coeffs" not in data:
        raise ParseError("x-operator JSON needs a 'coeffs' list", repr(data)[:60])
    return DiffOpX([parse_exprat(c) for c in data["coeffs"]])


def tdo_from_json(data) -> TDO:
    if not isinstance(data, dict) or "parts" not in data:
        raise ParseError("shift-operator JSON needs a 'parts' list", repr(data)[:60])
    parts = {}
    for part in data["parts"]:
        if not isinstance(part, dict) or "shift" not in part or "coeffs" not in part:
            raise ParseError("each part needs 'shift' and 'coeffs'", repr(part)[:60])
        lam = Scalar.coerce(part["shift"])
        vec = [parse_zrat(c) for c in part["coeffs"]]
        if lam in parts:
            raise ParseError("duplicate shift in operator JSON", str(lam))
        parts[lam] = tuple(vec)
    return TDO(parts)


def wave_from_json(data) -> Wave:
    if not isinstance(data, dict) or "coeffs" not in data or "den" not in data:
        raise ParseError("wave JSON needs 'coeffs' and 'den'", repr(data)[:60])
    coeffs = [parse_exprat(c) for c in data["coeffs"]]
    den = ZPoly([Scalar.coerce(c) for c in data["den"]])
    return Wave(coeffs, den)
