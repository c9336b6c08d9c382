"""Exact arithmetic foundation: Gaussian rationals, polynomials and rational
functions in the spectral variable z, and exponential polynomials in x.

Everything downstream (condition spaces, dressing operators, shift-differential
operators, wave objects) is built over these types, so all of them are exact
and immutable.  The four layers:

  Scalar   -- a + bi with a, b rational, the coefficient field throughout.
  ZPoly    -- dense univariate polynomial over Scalar.  Named for its main job
              (polynomials in z: kernel polynomial q, eigenvalue candidates p,
              operator coefficients) but variable-agnostic; the x-polynomials
              inside ExpPoly reuse it.
  ZRat     -- reduced rational function num/den with monic denominator, the
              canonical coefficient type for operators in z.
  ExpPoly  -- finite sums p_j(x) e^{l_j x}; houses phi, tau, eigenvalues pi(x).
  ExpRat   -- formal quotient of ExpPoly values.  The exponential-polynomial
              ring has no usable gcd, so quotients stay unreduced; equality is
              by cross-multiplication, with cheap heuristics (common monomial,
              denominator normalization, bounded exact-division attempt) to
              keep sizes in check.

Values never mutate after construction; every operation returns a new object,
so values can be shared freely across threads.
"""

from __future__ import annotations

import re as _re
from fractions import Fraction
from math import gcd

from .errors import ParseError

# ---------------------------------------------------------------------------
# Scalar: the field Q(i)
# ---------------------------------------------------------------------------

_TERM_RE = _re.compile(r"([+-]?)(\d+(?:/\d+)?)?(i?)")


def _int_lift(coeffs):
    """Gaussian-integer coefficient arrays and the cleared denominator."""
    den = 1
    for c in coeffs:
        d = c.re.denominator
        den = den // gcd(den, d) * d
        d = c.im.denominator
        if d != 1:
            den = den // gcd(den, d) * d
    re = [c.re.numerator * (den // c.re.denominator) for c in coeffs]
    im = [c.im.numerator * (den // c.im.denominator) for c in coeffs]
    return re, im, den


class Scalar:
    """A Gaussian rational ``re + im*i`` with exact, reduced rational parts.

    Fraction keeps both parts in lowest terms with positive denominator, so
    equality and hashing are structural.  Extension point: algebraic-number
    scalars would swap this class for a number-field element with the same
    interface (arithmetic, sort_key, text form).
    """

    __slots__ = ("re", "im", "_hash")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, Fraction) else Fraction(re)
        self.im = im if isinstance(im, Fraction) else Fraction(im)
        self._hash = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def coerce(cls, value) -> "Scalar":
        if isinstance(value, Scalar):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(value)
        raise TypeError(f"cannot treat {value!r} as a scalar")

    @classmethod
    def parse(cls, value) -> "Scalar":
        """Parse the JSON/text forms: int, "p/q", "a+bi", {"re": .., "im": ..}."""
        if isinstance(value, Scalar):
            return value
        if isinstance(value, bool):
            raise ParseError(f"not a scalar: {value!r}")
        if isinstance(value, int):
            return cls(value)
        if isinstance(value, float):
            if value != int(value):
                raise ParseError(f"non-integral float {value!r} would lose exactness")
            return cls(int(value))
        if isinstance(value, dict):
            extra = set(value) - {"re", "im"}
            if extra:
                raise ParseError(f"unknown scalar fields {sorted(extra)}")
            re_part = cls.parse(value.get("re", 0))
            im_part = cls.parse(value.get("im", 0))
            if re_part.im or im_part.im:
                raise ParseError("re/im fields must themselves be rational")
            return cls(re_part.re, im_part.re)
        if isinstance(value, str):
            return cls._parse_text(value)
        raise ParseError(f"not a scalar: {value!r}")

    @classmethod
    def _parse_text(cls, text: str) -> "Scalar":
        s = text.replace(" ", "")
        if not s:
            raise ParseError("empty scalar", text)
        re_part = Fraction(0)
        im_part = Fraction(0)
        pos = 0
        seen = 0
        while pos < len(s):
            m = _TERM_RE.match(s, pos)
            if not m or m.end() == pos:
                raise ParseError(f"bad scalar syntax {text!r}", s[pos:])
            sign, mag, imag = m.groups()
            if mag is None and not imag:
                raise ParseError(f"bad scalar syntax {text!r}", s[pos:])
            coeff = Fraction(mag) if mag else Fraction(1)
            if sign == "-":
                coeff = -coeff
            if imag:
                im_part += coeff
            else:
                re_part += coeff
            pos = m.end()
            seen += 1
            if seen > 2:
                raise ParseError(f"too many terms in scalar {text!r}")
        return cls(re_part, im_part)

    # -- predicates ----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.re and not self.im

    @property
    def is_one(self) -> bool:
        return self.re == 1 and not self.im

    @property
    def is_real(self) -> bool:
        return not self.im

    @property
    def is_integer(self) -> bool:
        return self.re.denominator == 1 and self.im.denominator == 1

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = Scalar.coerce(other)
        return Scalar(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = Scalar.coerce(other)
        return Scalar(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return Scalar.coerce(other) - self

    def __neg__(self):
        return Scalar(-self.re, -self.im)

    def __mul__(self, other):
        other = Scalar.coerce(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return Scalar(a * c)
        return Scalar(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Scalar.coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("scalar division by zero")
        a, b, c, d = self.re, self.im, other.re, other.im
        if not d:
            return Scalar(a / c, b / c)
        n = c * c + d * d
        return Scalar((a * c + b * d) / n, (b * c - a * d) / n)

    def __rtruediv__(self, other):
        return Scalar.coerce(other) / self

    def inverse(self) -> "Scalar":
        return Scalar(1) / self

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im)

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = Scalar(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # -- comparison / hashing ---------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Scalar(other)
        if not isinstance(other, Scalar):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.re, self.im))
        return self._hash

    def sort_key(self):
        """Lexicographic (re, im) key: the exponent/shift order used everywhere."""
        return (self.re, self.im)

    # -- conversion ---------------------------------------------------------------

    def to_complex(self) -> complex:
        return complex(self.re, self.im)

    def to_json(self):
        """Reduced-fraction text form; complex values become {"re", "im"}."""
        if self.is_real:
            return _frac_str(self.re)
        return {"re": _frac_str(self.re), "im": _frac_str(self.im)}

    def __str__(self):
        if self.is_real:
            return _frac_str(self.re)
        if not self.re:
            return _imag_str(self.im)
        sign = "+" if self.im > 0 else "-"
        return f"{_frac_str(self.re)}{sign}{_imag_str(abs(self.im))}"

    def __repr__(self):
        return f"Scalar({str(self)!r})"


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _imag_str(f: Fraction) -> str:
    if f == 1:
        return "i"
    if f == -1:
        return "-i"
    # "3/2i" would read as 3/(2i); keep the product explicit for fractions
    if f.denominator == 1:
        return f"{f.numerator}i"
    return f"{_frac_str(f)}*i"


ZERO = Scalar(0)
ONE = Scalar(1)
I = Scalar(0, 1)


# ---------------------------------------------------------------------------
# ZPoly: dense univariate polynomials over Scalar
# ---------------------------------------------------------------------------


def _trim(coeffs):
    while coeffs and coeffs[-1].is_zero:
        coeffs.pop()
    return coeffs


class ZPoly:
    """Polynomial in one variable, coefficients ascending by power.

    Trailing zeros are stripped, so equality is structural.  The zero
    polynomial has degree -1 by convention.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        self.coeffs = tuple(_trim([Scalar.coerce(c) for c in coeffs]))

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, value) -> "ZPoly":
        return cls([Scalar.coerce(value)])

    @classmethod
    def monomial(cls, degree: int, coeff=1) -> "ZPoly":
        return cls([ZERO] * degree + [Scalar.coerce(coeff)])

    @classmethod
    def variable(cls) -> "ZPoly":
        return cls([ZERO, ONE])

    @classmethod
    def from_roots(cls, roots) -> "ZPoly":
        p = cls.constant(1)
        for r in roots:
            p = p * cls([-Scalar.coerce(r), ONE])
        return p

    @classmethod
    def parse(cls, value) -> "ZPoly":
        """Coefficient list (ascending), bare scalar, or another ZPoly."""
        if isinstance(value, ZPoly):
            return value
        if isinstance(value, (list, tuple)):
            return cls([Scalar.parse(c) for c in value])
        return cls.constant(Scalar.parse(value))

    # -- basic queries ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    @property
    def leading(self) -> Scalar:
        if not self.coeffs:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    @property
    def valuation(self) -> int:
        """Lowest power with nonzero coefficient (0 for the zero polynomial)."""
        for k, c in enumerate(self.coeffs):
            if not c.is_zero:
                return k
        return 0

    def coeff(self, k: int) -> Scalar:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else ZERO

    def constant_term(self) -> Scalar:
        return self.coeff(0)

    # -- arithmetic ----------------------------------------------------------------

    def __add__(self, other):
        other = _as_zpoly(other)
        if other is NotImplemented:
            return NotImplemented
        n = max(len(self.coeffs), len(other.coeffs))
        return ZPoly([self.coeff(k) + other.coeff(k) for k in range(n)])

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_zpoly(other)
        if other is NotImplemented:
            return NotImplemented
        n = max(len(self.coeffs), len(other.coeffs))
        return ZPoly([self.coeff(k) - other.coeff(k) for k in range(n)])

    def __rsub__(self, other):
        return _as_zpoly(other) - self

    def __neg__(self):
        return ZPoly([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, (int, Scalar)):
            s = Scalar.coerce(other)
            return ZPoly([c * s for c in self.coeffs])
        other = _as_zpoly(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero or other.is_zero:
            return ZPoly()
        # fraction arithmetic pays a gcd per operation; above a small size
        # the integer convolution with one normalization per output
        # coefficient is much cheaper
        if len(self.coeffs) * len(other.coeffs) > 25:
            return self._mul_lifted(other)
        return self._mul_schoolbook(other)

    def _mul_schoolbook(self, other: "ZPoly") -> "ZPoly":
        out = [ZERO] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return ZPoly(out)

    def _mul_lifted(self, other: "ZPoly") -> "ZPoly":
        """Convolution over Z[i] after clearing denominators."""
        are, aim, da = _int_lift(self.coeffs)
        bre, bim, db = _int_lift(other.coeffs)
        if da.bit_length() + db.bit_length() > 1024:
            # mutually coprime denominators piled up; clearing them would
            # inflate every integer, so stay with direct fraction products
            return self._mul_schoolbook(other)
        n = len(are) + len(bre) - 1
        out_re = [0] * n
        out_im = [0] * n
        if any(aim) or any(bim):
            for i, (ar, ai) in enumerate(zip(are, aim)):
                if not ar and not ai:
                    continue
                s = ar + ai
                for j, (br, bi) in enumerate(zip(bre, bim)):
                    if not br and not bi:
                        continue
                    # 3-multiplication complex product
                    t1 = ar * br
                    t2 = ai * bi
                    out_re[i + j] += t1 - t2
                    out_im[i + j] += s * (br + bi) - t1 - t2
        else:
            for i, ar in enumerate(are):
                if not ar:
                    continue
                for j, br in enumerate(bre):
                    if br:
                        out_re[i + j] += ar * br
        den = da * db
        return ZPoly([Scalar(Fraction(r, den), Fraction(m, den))
                      for r, m in zip(out_re, out_im)])

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if exponent < 0:
            raise ValueError("negative polynomial power")
        result = ZPoly.constant(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __divmod__(self, other):
        other = _as_zpoly(other)
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        den = other.coeffs
        dq = len(rem) - len(den)
        if dq < 0:
            return ZPoly(), self
        quot = [ZERO] * (dq + 1)
        inv_lead = den[-1].inverse()
        for k in range(dq, -1, -1):
            c = rem[k + len(den) - 1] * inv_lead
            quot[k] = c
            if not c.is_zero:
                for j, d in enumerate(den):
                    rem[k + j] = rem[k + j] - c * d
        return ZPoly(quot), ZPoly(rem)

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_div(self, other) -> "ZPoly":
        q, r = divmod(self, other)
        if not r.is_zero:
            raise ValueError("polynomial division left a remainder")
        return q

    # -- calculus / substitution -----------------------------------------------------

    def derivative(self) -> "ZPoly":
        return ZPoly([self.coeffs[k] * k for k in range(1, len(self.coeffs))])

    def shift(self, lam) -> "ZPoly":
        """p(z + lam), by Horner in (z + lam)."""
        lam = Scalar.coerce(lam)
        if lam.is_zero or self.is_constant:
            return self
        result = ZPoly()
        linear = ZPoly([lam, ONE])
        for c in reversed(self.coeffs):
            result = result * linear + ZPoly.constant(c)
        return result

    def __call__(self, point):
        if isinstance(point, ZPoly):
            result = ZPoly()
            for c in reversed(self.coeffs):
                result = result * point + ZPoly.constant(c)
            return result
        point = Scalar.coerce(point)
        acc = ZERO
        for c in reversed(self.coeffs):
            acc = acc * point + c
        return acc

    def eval_complex(self, point: complex) -> complex:
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * point + c.to_complex()
        return acc

    # -- normal forms --------------------------------------------------------------------

    def monic(self) -> "ZPoly":
        if self.is_zero or self.leading.is_one:
            return self
        inv = self.leading.inverse()
        return ZPoly([c * inv for c in self.coeffs])

    def gcd(self, other: "ZPoly") -> "ZPoly":
        a, b = self, other
        while not b.is_zero:
            a, b = b, a % b
        return a.monic()

    # -- comparison / output -----------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Scalar)):
            other = ZPoly.constant(other)
        if not isinstance(other, ZPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def to_json(self):
        return [c.to_json() for c in self.coeffs]

    def text(self, var: str = "z") -> str:
        if self.is_zero:
            return "0"
        pieces = []
        first = True
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c.is_zero:
                continue
            pieces.append(_term_text(c, k, var, first))
            first = False
        return "".join(pieces)

    def __str__(self):
        return self.text()

    def __repr__(self):
        return f"ZPoly({self.text()!r})"


def _term_text(c: Scalar, k: int, var: str, first: bool) -> str:
    negated = False
    if c.is_real and c.re < 0:
        negated = True
        c = -c
    body = f"({c})" if not c.is_real else str(c)
    if k == 0:
        term = body
    else:
        xpart = var if k == 1 else f"{var}^{k}"
        term = xpart if c.is_one else f"{body}*{xpart}"
    if first:
        return f"-{term}" if negated else term
    return f" - {term}" if negated else f" + {term}"


def _multi_term(p: ZPoly) -> bool:
    return sum(1 for c in p.coeffs if not c.is_zero) > 1


def _as_zpoly(value):
    if isinstance(value, ZPoly):
        return value
    if isinstance(value, (int, Scalar)):
        return ZPoly.constant(value)
    return NotImplemented


# ---------------------------------------------------------------------------
# ZRat: reduced rational functions num/den, monic denominator
# ---------------------------------------------------------------------------


class ZRat:
    """Canonical rational function: gcd-reduced, monic denominator.

    Canonicity makes equality structural, which the operator normal forms
    rely on.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None, _reduced=False):
        num = _as_zpoly(num)
        den = ZPoly.constant(1) if den is None else _as_zpoly(den)
        if den.is_zero:
            raise ZeroDivisionError("rational function with zero denominator")
        if not _reduced:
            if num.is_zero:
                den = ZPoly.constant(1)
            else:
                g = num.gcd(den)
                if g.degree > 0:
                    num = num.exact_div(g)
                    den = den.exact_div(g)
            lead = den.leading
            if not lead.is_one:
                inv = lead.inverse()
                num = num * inv
                den = den * inv
        self.num = num
        self.den = den

    # -- constructors ----------------------------------------------------------

    @classmethod
    def constant(cls, value) -> "ZRat":
        return cls(ZPoly.constant(value), None, _reduced=True)

    @classmethod
    def coerce(cls, value) -> "ZRat":
        if isinstance(value, ZRat):
            return value
        if isinstance(value, ZPoly):
            return cls(value, None, _reduced=True)
        if isinstance(value, (int, Scalar)):
            return cls.constant(value)
        raise TypeError(f"cannot treat {value!r} as a rational function")

    # -- queries ------------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_constant(self) -> bool:
        return self.num.is_constant and self.den.is_constant

    def constant_value(self) -> Scalar:
        if not self.is_constant:
            raise ValueError("not a constant rational function")
        return self.num.constant_term()

    @property
    def is_polynomial(self) -> bool:
        return self.den.is_constant

    # -- arithmetic --------------------------------------------------------------------

    def __add__(self, other):
        other = ZRat.coerce(other)
        return ZRat(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other):
        other = ZRat.coerce(other)
        return ZRat(self.num * other.den - other.num * self.den, self.den * other.den)

    def __rsub__(self, other):
        return ZRat.coerce(other) - self

    def __neg__(self):
        return ZRat(-self.num, self.den, _reduced=True)

    def __mul__(self, other):
        if isinstance(other, (int, Scalar)):
            s = Scalar.coerce(other)
            if s.is_zero:
                return ZRat.constant(0)
            return ZRat(self.num * s, self.den, _reduced=True)
        other = ZRat.coerce(other)
        return ZRat(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = ZRat.coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by zero rational function")
        return ZRat(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return ZRat.coerce(other) / self

    # -- calculus / substitution ------------------------------------------------------------

    def derivative(self) -> "ZRat":
        n, d = self.num, self.den
        return ZRat(n.derivative() * d - n * d.derivative(), d * d)

    def shift(self, lam) -> "ZRat":
        """Substitute z <- z + lam (the translation action)."""
        return ZRat(self.num.shift(lam), self.den.shift(lam))

    def eval_complex(self, point: complex) -> complex:
        return self.num.eval_complex(point) / self.den.eval_complex(point)

    # -- comparison / output -------------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Scalar, ZPoly)):
            other = ZRat.coerce(other)
        if not isinstance(other, ZRat):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def text(self, var: str = "z") -> str:
        if self.den.is_constant:
            return self.num.text(var)
        ntxt = self.num.text(var)
        dtxt = self.den.text(var)
        if _multi_term(self.num):
            ntxt = f"({ntxt})"
        if _multi_term(self.den):
            dtxt = f"({dtxt})"
        return f"{ntxt}/{dtxt}"

    def __str__(self):
        return self.text()

    def __repr__(self):
        return f"ZRat({self.text()!r})"


def zr_shift(r: ZRat, lam) -> ZRat:
    """r(z + lam): translation acting on a rational function in z."""
    return ZRat.coerce(r).shift(lam)


# ---------------------------------------------------------------------------
# ExpPoly: exponential polynomials sum p_j(x) e^{l_j x}
# ---------------------------------------------------------------------------


class ExpPoly:
    """Finite sum of terms poly(x) * e^(lam*x), stored as {lam: ZPoly}.

    Canonical: no exponent maps to the zero polynomial.  This ring is an
    integral domain (leading monomials multiply under the (re, im, degree)
    lexicographic order), which both the Wronskian construction and the
    bounded exact-division routine lean on.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for lam, p in terms.items():
                lam = Scalar.coerce(lam)
                p = _as_zpoly(p)
                if p.is_zero:
                    continue
                if lam in clean:
                    p = clean[lam] + p
                    if p.is_zero:
                        del clean[lam]
                        continue
                clean[lam] = p
        self.terms = clean

    # -- constructors ----------------------------------------------------------

    @classmethod
    def zero(cls) -> "ExpPoly":
        return cls()

    @classmethod
    def constant(cls, value) -> "ExpPoly":
        return cls({ZERO: ZPoly.constant(value)})

    @classmethod
    def from_poly(cls, p) -> "ExpPoly":
        return cls({ZERO: _as_zpoly(p)})

    @classmethod
    def exponential(cls, lam, poly=1) -> "ExpPoly":
        return cls({Scalar.coerce(lam): _as_zpoly(poly)})

    @classmethod
    def x_power(cls, k: int, coeff=1) -> "ExpPoly":
        return cls({ZERO: ZPoly.monomial(k, coeff)})

    @classmethod
    def coerce(cls, value) -> "ExpPoly":
        if isinstance(value, ExpPoly):
            return value
        if isinstance(value, ZPoly):
            return cls.from_poly(value)
        if isinstance(value, (int, Scalar)):
            return cls.constant(value)
        raise TypeError(f"cannot treat {value!r} as an exponential polynomial")

    # -- queries -------------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        if not self.terms:
            return True
        return set(self.terms) == {ZERO} and self.terms[ZERO].is_constant

    def constant_value(self) -> Scalar:
        if not self.is_constant:
            raise ValueError("not a constant exponential polynomial")
        return ZERO if self.is_zero else self.terms[ZERO].constant_term()

    @property
    def is_polynomial(self) -> bool:
        return not self.terms or set(self.terms) == {ZERO}

    def poly_part(self) -> ZPoly:
        """The lam = 0 polynomial (the whole value when is_polynomial)."""
        return self.terms.get(ZERO, ZPoly())

    def exponents(self):
        return sorted(self.terms, key=Scalar.sort_key)

    def monomial_count(self) -> int:
        return sum(sum(1 for c in p.coeffs if not c.is_zero) for p in self.terms.values())

    def leading_monomial(self):
        """((lam, degree), coeff) maximal under (re, im, degree) lex order."""
        best = None
        for lam, p in self.terms.items():
            key = (lam.re, lam.im, p.degree)
            if best is None or key > best[0]:
                best = (key, p.leading)
        if best is None:
            raise ValueError("zero exponential polynomial has no leading monomial")
        (re_, im_, deg), coeff = best
        return Scalar(re_, im_), deg, coeff

    def _extreme_keys(self):
        """((re, im, degree) of leading, (re, im, valuation) of trailing)."""
        hi = lo = None
        for lam, p in self.terms.items():
            khi = (lam.re, lam.im, p.degree)
            klo = (lam.re, lam.im, p.valuation)
            if hi is None or khi > hi:
                hi = khi
            if lo is None or klo < lo:
                lo = klo
        return hi, lo

    # -- arithmetic --------------------------------------------------------------------

    def __add__(self, other):
        other = ExpPoly.coerce(other)
        merged = dict(self.terms)
        for lam, p in other.terms.items():
            merged[lam] = merged[lam] + p if lam in merged else p
        return ExpPoly(merged)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-ExpPoly.coerce(other))

    def __rsub__(self, other):
        return ExpPoly.coerce(other) + (-self)

    def __neg__(self):
        return ExpPoly({lam: -p for lam, p in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Scalar)):
            s = Scalar.coerce(other)
            if s.is_zero:
                return ExpPoly()
            return ExpPoly({lam: p * s for lam, p in self.terms.items()})
        other = ExpPoly.coerce(other)
        out = {}
        for l1, p1 in self.terms.items():
            for l2, p2 in other.terms.items():
                lam = l1 + l2
                prod = p1 * p2
                out[lam] = out[lam] + prod if lam in out else prod
        return ExpPoly(out)

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if exponent < 0:
            raise ValueError("negative exponential-polynomial power")
        result = ExpPoly.constant(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def derivative(self) -> "ExpPoly":
        """d/dx term-wise: (p e^{lx})' = (p' + l p) e^{lx}."""
        return ExpPoly({lam: p.derivative() + p * lam for lam, p in self.terms.items()})

    def scale_exponents(self, shift) -> "ExpPoly":
        """Multiply by e^{shift*x}: add shift to every exponent."""
        shift = Scalar.coerce(shift)
        if shift.is_zero:
            return self
        return ExpPoly({lam + shift: p for lam, p in self.terms.items()})

    def exact_div(self, other: "ExpPoly", step_bound: int | None = None):
        """Exact quotient self/other, or None.

        Peels leading monomials under the multiplicative (re, im, degree)
        order.  When the quotient exists the loop takes exactly one step per
        quotient monomial; when it does not, remainders can wander down the
        exponent lattice forever, so a step bound cuts the attempt off (a
        false None only means a quotient stays unreduced, never wrongness).
        """
        if other.is_zero:
            raise ZeroDivisionError("division by zero exponential polynomial")
        if self.is_zero:
            return ExpPoly()
        if step_bound is None:
            step_bound = 4 * (self.monomial_count() + other.monomial_count()) + 16
        # flat monomial dicts {(re, im, xdeg): Scalar} keep the peel loop
        # allocation-free; lex order on the key tuples is the monomial order
        rem = {}
        for lam, p in self.terms.items():
            for k, c in enumerate(p.coeffs):
                if not c.is_zero:
                    rem[(lam.re, lam.im, k)] = c
        bmons = []
        for lam, p in other.terms.items():
            for k, c in enumerate(p.coeffs):
                if not c.is_zero:
                    bmons.append(((lam.re, lam.im, k), c))
        bmons.sort(reverse=True)
        (bre, bim, bdeg), blead = bmons[0]
        (bre0, bim0, bval0), _ = bmons[-1]
        quotient = {}
        steps = 0
        while rem:
            steps += 1
            if steps > step_bound:
                return None
            rre, rim, rdeg = hi = max(rem)
            rre0, rim0, rval0 = min(rem)
            if rdeg < bdeg or rval0 < bval0:
                return None
            # any residual quotient q satisfies trailing(rem) = trailing(q)*trailing(other)
            # and leading(rem) = leading(q)*leading(other); the lattice order then forces
            # trailing(rem)/trailing(other) <= leading(rem)/leading(other)
            if (rre0 - bre0, rim0 - bim0, rval0 - bval0) > (rre - bre, rim - bim, rdeg - bdeg):
                return None
            ct = rem[hi] / blead
            tre, tim, tdeg = rre - bre, rim - bim, rdeg - bdeg
            quotient[(tre, tim, tdeg)] = ct
            for (mre, mim, mk), mc in bmons:
                key = (mre + tre, mim + tim, mk + tdeg)
                cur = rem.get(key)
                if cur is None:
                    rem[key] = -(mc * ct)
                else:
                    new = cur - mc * ct
                    if new.is_zero:
                        del rem[key]
                    else:
                        rem[key] = new
        out = {}
        for (re_, im_, k), c in quotient.items():
            out.setdefault(Scalar(re_, im_), {})[k] = c
        return ExpPoly({
            lam: ZPoly([ks.get(i, ZERO) for i in range(max(ks) + 1)])
            for lam, ks in out.items()
        })

    # -- evaluation -----------------------------------------------------------------------

    def eval_complex(self, x: complex) -> complex:
        import cmath

        acc = 0j
        for lam, p in self.terms.items():
            acc += cmath.exp(lam.to_complex() * x) * p.eval_complex(x)
        return acc

    # -- comparison / output -------------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Scalar, ZPoly)):
            other = ExpPoly.coerce(other)
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def text(self, var: str = "x") -> str:
        if not self.terms:
            return "0"
        pieces = []
        for lam in sorted(self.terms, key=Scalar.sort_key, reverse=True):
            pieces.append(_xp_term_text(lam, self.terms[lam], var))
        out = pieces[0]
        for piece in pieces[1:]:
            if piece.startswith("-"):
                out += " - " + piece[1:]
            else:
                out += " + " + piece
        return out

    def __str__(self):
        return self.text()

    def __repr__(self):
        return f"ExpPoly({self.text()!r})"


def _exp_text(lam: Scalar, var: str) -> str:
    if lam.is_one:
        return f"e^{var}"
    if lam == Scalar(-1):
        return f"e^(-{var})"
    body = str(lam)
    if not lam.is_real:
        body = f"({body})"
    return f"e^({body}*{var})"


def _xp_term_text(lam: Scalar, p: ZPoly, var: str) -> str:
    if lam.is_zero:
        return p.text(var)
    ex = _exp_text(lam, var)
    if p == ZPoly.constant(1):
        return ex
    if p == ZPoly.constant(-1):
        return f"-{ex}"
    ptxt = p.text(var)
    if _multi_term(p):
        ptxt = f"({ptxt})"
    return f"{ptxt}*{ex}"


def xp_mul(a: ExpPoly, b: ExpPoly) -> ExpPoly:
    """Product in the exponential-polynomial ring."""
    return ExpPoly.coerce(a) * ExpPoly.coerce(b)


def xp_derive(a: ExpPoly) -> ExpPoly:
    """d/dx on an exponential polynomial."""
    return ExpPoly.coerce(a).derivative()


def gauge_normalize(a: ExpPoly):
    """Strip the overall e^{cx} with c the midpoint of the extreme exponents.

    Exponents are ordered (re, im)-lexicographically; the result's exponent
    set is symmetric about 0 in that order, and a = result * e^{cx} exactly.
    Purely a display/normalization convention.
    """
    a = ExpPoly.coerce(a)
    if a.is_zero:
        raise ValueError("cannot gauge-normalize the zero exponential polynomial")
    exps = a.exponents()
    c = (exps[0] + exps[-1]) / Scalar(2)
    return a.scale_exponents(-c), c


# ---------------------------------------------------------------------------
# ExpRat: formal quotients of exponential polynomials
# ---------------------------------------------------------------------------

_XP_ONE = ExpPoly.constant(1)
_XP_X = ExpPoly({ZERO: ZPoly.monomial(1)})


class ExpRat:
    """Quotient num / base**exp of exponential polynomials.

    No gcd exists for general exponential polynomials, so quotients are not
    reduced to lowest terms; instead the denominator is kept as an explicit
    power of a normalized base.  The quotient rule then raises the exponent
    by one instead of squaring the denominator, same-base sums and products
    stay cheap, and whole powers of the base are peeled off the numerator by
    bounded exact division.  Equality is cross-multiplication.
    """

    __slots__ = ("num", "base", "exp", "_den")

    def __init__(self, num, den=None):
        num = ExpPoly.coerce(num)
        if den is None:
            base, exp = _XP_ONE, 0
        else:
            den = ExpPoly.coerce(den)
            if den.is_zero:
                raise ZeroDivisionError("exponential-rational with zero denominator")
            num, base, exp = _xr_normalize(num, den, 1)
        self.num = num
        self.base = base
        self.exp = exp
        self._den = None

    @classmethod
    def _raw(cls, num, base, exp) -> "ExpRat":
        r = object.__new__(cls)
        r.num, r.base, r.exp, r._den = num, base, exp, None
        return r

    @classmethod
    def _fast(cls, num, base, exp) -> "ExpRat":
        """Arithmetic-path construction with no division attempts.

        Peeling whole base powers back out is deferred to the checkpoint
        queries (as_exp_poly, reduced, ...); x-power bases still strip their
        common valuation since that is a plain coefficient shift.
        """
        if num.is_zero:
            return cls._raw(ExpPoly(), _XP_ONE, 0)
        if exp == 0:
            return cls._raw(num, _XP_ONE, 0)
        if base == _XP_X:
            k = min(exp, min(q.valuation for q in num.terms.values()))
            if k:
                xk = ZPoly.monomial(k)
                num = ExpPoly({lam: q.exact_div(xk) for lam, q in num.terms.items()})
                exp -= k
                if exp == 0:
                    return cls._raw(num, _XP_ONE, 0)
        return cls._raw(num, base, exp)

    @property
    def den(self) -> ExpPoly:
        if self._den is None:
            self._den = _XP_ONE if self.exp == 0 else self.base ** self.exp
        return self._den

    # -- constructors -------------------------------------------------------------

    @classmethod
    def constant(cls, value) -> "ExpRat":
        return cls._raw(ExpPoly.constant(value), _XP_ONE, 0)

    @classmethod
    def coerce(cls, value) -> "ExpRat":
        if isinstance(value, ExpRat):
            return value
        if isinstance(value, (ExpPoly, ZPoly, int, Scalar)):
            return cls._raw(ExpPoly.coerce(value), _XP_ONE, 0)
        raise TypeError(f"cannot treat {value!r} as an exponential-rational")

    # -- queries ---------------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_exp_poly(self) -> bool:
        return self.exp == 0 or self.num.exact_div(self.den, step_bound=10_000) is not None

    def as_exp_poly(self) -> ExpPoly:
        """Exact conversion; raises if the denominator does not divide out."""
        if self.exp == 0:
            return self.num
        q = self.num.exact_div(self.den, step_bound=10_000)
        if q is None:
            raise ValueError("exponential-rational is not an exponential polynomial")
        return q

    @property
    def is_constant(self) -> bool:
        if self.num.is_zero:
            return True
        if self.exp == 0:
            return self.num.is_constant
        q = self.num.exact_div(self.den)
        return q is not None and q.is_constant

    def constant_value(self) -> Scalar:
        if self.num.is_zero:
            return ZERO
        if self.exp == 0:
            if self.num.is_constant:
                return self.num.constant_value()
            raise ValueError("not a constant exponential-rational")
        q = self.num.exact_div(self.den)
        if q is None or not q.is_constant:
            raise ValueError("not a constant exponential-rational")
        return q.constant_value()

    # -- arithmetic ----------------------------------------------------------------------

    def __add__(self, other):
        other = ExpRat.coerce(other)
        if self.exp == 0 and other.exp == 0:
            return ExpRat._raw(self.num + other.num, _XP_ONE, 0)
        if self.exp == 0:
            return ExpRat._fast(self.num * other.den + other.num,
                                 other.base, other.exp)
        if other.exp == 0:
            return ExpRat._fast(self.num + other.num * self.den,
                                 self.base, self.exp)
        if self.base == other.base:
            if self.exp == other.exp:
                return ExpRat._fast(self.num + other.num, self.base, self.exp)
            if self.exp < other.exp:
                lift = self.base ** (other.exp - self.exp)
                return ExpRat._fast(self.num * lift + other.num,
                                     self.base, other.exp)
            lift = self.base ** (self.exp - other.exp)
            return ExpRat._fast(self.num + other.num * lift,
                                 self.base, self.exp)
        return ExpRat(self.num * other.den + other.num * self.den,
                      self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-ExpRat.coerce(other))

    def __rsub__(self, other):
        return ExpRat.coerce(other) + (-self)

    def __neg__(self):
        return ExpRat._raw(-self.num, self.base, self.exp)

    def __mul__(self, other):
        if isinstance(other, (int, Scalar)):
            s = Scalar.coerce(other)
            if s.is_zero:
                return ExpRat.constant(0)
            return ExpRat._raw(self.num * s, self.base, self.exp)
        other = ExpRat.coerce(other)
        if self.exp == 0 and other.exp == 0:
            return ExpRat._raw(self.num * other.num, _XP_ONE, 0)
        if self.exp == 0 or other.exp == 0 or self.base == other.base:
            base = self.base if self.exp else other.base
            return ExpRat._fast(self.num * other.num, base,
                                 self.exp + other.exp)
        return ExpRat(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = ExpRat.coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by zero exponential-rational")
        if other.exp == 0 and other.num.is_constant:
            inv = other.num.constant_value().inverse()
            return ExpRat._raw(self.num * inv, self.base, self.exp)
        return ExpRat(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return ExpRat.coerce(other) / self

    def derivative(self) -> "ExpRat":
        if self.exp == 0:
            return ExpRat._raw(self.num.derivative(), _XP_ONE, 0)
        n, b = self.num, self.base
        num = n.derivative() * b - n * b.derivative() * Scalar(self.exp)
        return ExpRat._fast(num, b, self.exp + 1)

    def reduced(self) -> "ExpRat":
        """Fully peel whole base powers (generous bound); value unchanged."""
        num, base, exp = self.num, self.base, self.exp
        while exp > 0:
            q = num.exact_div(base, step_bound=10_000)
            if q is None:
                break
            num = q
            exp -= 1
        if exp == self.exp:
            return self
        return ExpRat._raw(num, base if exp else _XP_ONE, exp)

    def eval_complex(self, x: complex) -> complex:
        val = self.num.eval_complex(x)
        if self.exp:
            val /= self.base.eval_complex(x) ** self.exp
        return val

    # -- comparison / output -------------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Scalar, ZPoly, ExpPoly)):
            other = ExpRat.coerce(other)
        if not isinstance(other, ExpRat):
            return NotImplemented
        if self.base == other.base:
            d = self.exp - other.exp
            if d == 0:
                return self.num == other.num
            if d > 0:
                return self.num == other.num * self.base ** d
            return self.num * other.base ** (-d) == other.num
        return self.num * other.den == other.num * self.den

    def __hash__(self):
        # cross-multiplicative equality admits no cheap consistent hash;
        # collapse to a class-level constant so dict use stays correct
        return hash(ExpRat)

    def text(self, var: str = "x") -> str:
        if self.exp == 0:
            return self.num.text(var)
        r = self.reduced()
        if r.exp == 0:
            return r.num.text(var)
        ntxt = r.num.text(var)
        if " " in ntxt or "*" in ntxt or "/" in ntxt:
            ntxt = f"({ntxt})"
        if r.exp == 1:
            dtxt = r.base.text(var)
            if " " in dtxt or "*" in dtxt or "/" in dtxt or "^" in dtxt:
                dtxt = f"({dtxt})"
        else:
            dtxt = f"({r.base.text(var)})^{r.exp}"
        return f"{ntxt}/{dtxt}"

    def __str__(self):
        return self.text()

    def __repr__(self):
        return f"ExpRat({self.text()!r})"


def _xr_normalize(num: ExpPoly, base: ExpPoly, exp: int):
    """Canonical powered-quotient form; never changes the value."""
    if num.is_zero:
        return ExpPoly(), _XP_ONE, 0
    if exp == 0 or base.is_constant:
        if exp and not base.constant_value().is_one:
            num = num * base.constant_value().inverse() ** exp
        return num, _XP_ONE, 0
    # canonical base: minimal exponent moved to 0, leading monomial coeff 1
    shift = base.exponents()[0]
    if not shift.is_zero:
        base = base.scale_exponents(-shift)
        num = num.scale_exponents(-(shift * Scalar(exp)))
    _, _, lead = base.leading_monomial()
    if not lead.is_one:
        inv = lead.inverse()
        base = base * inv
        num = num * inv ** exp
    # a pure power of x collapses to base x, letting partial powers cancel
    if len(base.terms) == 1:
        (_, p), = base.terms.items()
        if p.valuation == p.degree:
            exp = p.valuation * exp
            base = _XP_X
            k = min(exp, min(q.valuation for q in num.terms.values()))
            if k:
                xk = ZPoly.monomial(k)
                num = ExpPoly({lam: q.exact_div(xk) for lam, q in num.terms.items()})
                exp -= k
            if exp == 0:
                return num, _XP_ONE, 0
    # peel whole powers of the base out of the numerator
    while exp > 0:
        q = num.exact_div(base)
        if q is None:
            break
        num = q
        exp -= 1
    if exp == 0:
        return num, _XP_ONE, 0
    return num, base, exp
