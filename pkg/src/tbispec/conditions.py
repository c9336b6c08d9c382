"""Finitely supported distributions in z and the condition spaces they span.

A Distribution is a finite combination of point evaluations of derivatives:
the atom (point, order) sends f to f^(order)(point).  A ConditionSpace is
the n-dimensional space spanned by the distributions

    c_ij = sum_k alpha_k * Delta(mu_k + lam_i, n_k + j - 1)

where (mu_k, n_k, alpha_k) runs over the seed distribution c, lam_i over the
roots of q, and j over 1..mult(lam_i).  The spectral ring consists of the
polynomials p with c_ij o p in the span for every basis element; its minimal
nonconstant member is found by exact linear algebra.

All linear algebra here is over Scalar coordinates indexed by atoms, so
membership and independence are exact decisions.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .errors import (
    DegenerateSpace,
    InvalidScenario,
    NotFoundWithinBound,
    ParseError,
    RootNotRepresentable,
)
from .exact_algebra import ExpPoly, Scalar, ZPoly, ZERO


class Distribution:
    """Finite combination of derivative evaluations Delta(point, order).

    entries maps (point: Scalar, order: int >= 0) to a nonzero Scalar
    coefficient.  The zero distribution has no entries.
    """

    __slots__ = ("entries",)

    def __init__(self, entries=None):
        clean = {}
        if entries:
            items = entries.items() if isinstance(entries, dict) else entries
            for (point, order), coeff in items:
                point = Scalar.coerce(point)
                order = int(order)
                if order < 0:
                    raise ValueError("distribution order must be a natural number")
                coeff = Scalar.coerce(coeff)
                key = (point, order)
                if key in clean:
                    coeff = clean[key] + coeff
                if coeff.is_zero:
                    clean.pop(key, None)
                else:
                    clean[key] = coeff
        self.entries = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def delta(cls, point, order: int = 0, coeff=1) -> "Distribution":
        return cls({(Scalar.coerce(point), int(order)): Scalar.coerce(coeff)})

    @classmethod
    def parse(cls, value) -> "Distribution":
        """JSON form: list of {"point": Scalar, "order": n, "coeff": Scalar}."""
        if isinstance(value, Distribution):
            return value
        if not isinstance(value, list):
            raise ParseError("distribution must be a list of terms")
        entries = []
        for idx, term in enumerate(value):
            if not isinstance(term, dict):
                raise ParseError("distribution term must be an object", f"term {idx}")
            extra = set(term) - {"point", "order", "coeff"}
            if extra:
                raise ParseError(f"unknown distribution fields {sorted(extra)}", f"term {idx}")
            if "point" not in term:
                raise ParseError("distribution term needs a point", f"term {idx}")
            point = Scalar.parse(term["point"])
            order = term.get("order", 0)
            if not isinstance(order, int) or isinstance(order, bool) or order < 0:
                raise ParseError(f"order must be a natural number, got {order!r}", f"term {idx}")
            coeff = Scalar.parse(term.get("coeff", 1))
            entries.append(((point, order), coeff))
        return cls(entries)

    def to_json(self):
        out = []
        for (point, order) in sorted(self.entries, key=lambda a: (a[0].sort_key(), a[1])):
            out.append({"point": point.to_json(), "order": order,
                        "coeff": self.entries[(point, order)].to_json()})
        return out

    # -- queries -------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.entries

    def support(self):
        """Distinct evaluation points, sorted."""
        return sorted({p for p, _ in self.entries}, key=Scalar.sort_key)

    def max_order(self) -> int:
        return max((o for _, o in self.entries), default=0)

    def atoms(self):
        return sorted(self.entries, key=lambda a: (a[0].sort_key(), a[1]))

    # -- linear structure -------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        merged = dict(self.entries)
        for key, coeff in other.entries.items():
            acc = merged.get(key, ZERO) + coeff
            if acc.is_zero:
                merged.pop(key, None)
            else:
                merged[key] = acc
        return Distribution(merged)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Distribution({key: -c for key, c in self.entries.items()})

    def __mul__(self, other):
        s = Scalar.coerce(other)
        if s.is_zero:
            return Distribution()
        return Distribution({key: c * s for key, c in self.entries.items()})

    __rmul__ = __mul__

    # -- the action -----------------------------------------------------------------

    def apply_poly(self, f: ZPoly) -> Scalar:
        """c[f] = sum coeff * f^(order)(point)."""
        f = ZPoly.parse(f) if not isinstance(f, ZPoly) else f
        derivs = [f]
        total = ZERO
        for (point, order), coeff in self.entries.items():
            while len(derivs) <= order:
                derivs.append(derivs[-1].derivative())
            total = total + coeff * derivs[order](point)
        return total

    def shift_points(self, lam) -> "Distribution":
        """Translate every atom's point by lam."""
        lam = Scalar.coerce(lam)
        return Distribution({(p + lam, o): c for (p, o), c in self.entries.items()})

    def raise_orders(self, j: int) -> "Distribution":
        """Add j to every atom's order."""
        return Distribution({(p, o + j): c for (p, o), c in self.entries.items()})

    def compose(self, f) -> "Distribution":
        """The right action (c o f)[g] = c[f*g], expanded by Leibniz.

        Delta(lam, n) o f = sum_k C(n, k) f^(n-k)(lam) Delta(lam, k), so the
        support never grows and orders never increase.
        """
        f = f if isinstance(f, ZPoly) else ZPoly.parse(f)
        out = {}
        for (point, order), coeff in self.entries.items():
            g = f
            derivs = [g]
            for _ in range(order):
                g = g.derivative()
                derivs.append(g)
            for k in range(order + 1):
                val = derivs[order - k](point)
                if val.is_zero:
                    continue
                key = (point, k)
                acc = out.get(key, ZERO) + coeff * comb(order, k) * val
                if acc.is_zero:
                    out.pop(key, None)
                else:
                    out[key] = acc
        return Distribution(out)

    def apply_to_exp(self) -> ExpPoly:
        """Apply to the exponential kernel: Delta(lam, n)[e^{xz}] = x^n e^{lam x}."""
        terms = {}
        for (point, order), coeff in self.entries.items():
            mono = ZPoly.monomial(order, coeff)
            terms[point] = terms[point] + mono if point in terms else mono
        return ExpPoly(terms)

    # -- comparison / output -------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(frozenset(self.entries.items()))

    def text(self) -> str:
        if not self.entries:
            return "0"
        pieces = []
        for (point, order) in self.atoms():
            coeff = self.entries[(point, order)]
            atom = f"Delta({point},{order})"
            if coeff.is_one:
                pieces.append(atom)
            elif coeff == Scalar(-1):
                pieces.append(f"-{atom}")
            else:
                body = f"({coeff})" if not coeff.is_real else str(coeff)
                pieces.append(f"{body}*{atom}")
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
        return f"Distribution({self.text()!r})"


def apply_to_exp(c: Distribution) -> ExpPoly:
    """phi(x) = c applied to e^{xz}, the seed's exponential image."""
    return c.apply_to_exp()


def compose(c: Distribution, f) -> Distribution:
    """(c o f)[g] = c[f*g]."""
    return c.compose(f)


# ---------------------------------------------------------------------------
# Exact linear algebra over Scalar (tiny, dense, sufficient at desk scale)
# ---------------------------------------------------------------------------


def _solve_particular(rows, rhs):
    """Solve rows*x = rhs exactly; free variables pinned to zero.

    Returns the particular solution as a list of Scalar, or None if the
    system is inconsistent.  Row-echelon choice makes the answer unique and
    reproducible.
    """
    m = len(rows)
    ncols = len(rows[0]) if m else 0
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for col in range(ncols):
        pivot_row = None
        for rr in range(r, m):
            if not aug[rr][col].is_zero:
                pivot_row = rr
                break
        if pivot_row is None:
            continue
        aug[r], aug[pivot_row] = aug[pivot_row], aug[r]
        inv = aug[r][col].inverse()
        aug[r] = [v * inv for v in aug[r]]
        for rr in range(m):
            if rr != r and not aug[rr][col].is_zero:
                factor = aug[rr][col]
                aug[rr] = [a - factor * b for a, b in zip(aug[rr], aug[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    for rr in range(r, m):
        if not aug[rr][ncols].is_zero:
            return None
    x = [ZERO] * ncols
    for row_idx, col in enumerate(pivots):
        x[col] = aug[row_idx][ncols]
    return x


def _vectors_rank(vectors):
    """Rank of a list of atom->Scalar dicts."""
    atoms = sorted({a for v in vectors for a in v}, key=lambda a: (a[0].sort_key(), a[1]))
    index = {a: i for i, a in enumerate(atoms)}
    rows = []
    for v in vectors:
        row = [ZERO] * len(atoms)
        for a, c in v.items():
            row[index[a]] = c
        rows.append(row)
    rank = 0
    ncols = len(atoms)
    r = 0
    for col in range(ncols):
        pivot_row = None
        for rr in range(r, len(rows)):
            if not rows[rr][col].is_zero:
                pivot_row = rr
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        inv = rows[r][col].inverse()
        rows[r] = [v * inv for v in rows[r]]
        for rr in range(len(rows)):
            if rr != r and not rows[rr][col].is_zero:
                f = rows[rr][col]
                rows[rr] = [a - f * b for a, b in zip(rows[rr], rows[r])]
        rank += 1
        r += 1
        if r == len(rows):
            break
    return rank


# ---------------------------------------------------------------------------
# Factoring q over Q(i): exact verification on top of numeric root guesses
# ---------------------------------------------------------------------------

_DENOM_LADDER = (1, 2, 6, 12, 60, 420, 10_000, 10**8)


def factor_rational(q: ZPoly):
    """Roots with multiplicity of a nonconstant q, all in Q(i).

    Numeric Durand-Kerner guesses are rationalized through a denominator
    ladder and verified exactly; verified roots are deflated exactly and the
    search recurses.  Raises RootNotRepresentable when no guess survives
    exact verification (irrational or unluckily deep roots).
    """
    q = q.monic()
    if q.degree < 1:
        raise ValueError("cannot factor a constant polynomial")
    roots = []
    rest = q
    while rest.degree > 0:
        root = _find_one_root(rest)
        if root is None:
            raise RootNotRepresentable(
                f"no Gaussian-rational root found for factor {rest.text()}")
        mult = 0
        linear = ZPoly([-root, Scalar(1)])
        while True:
            quotient, remainder = divmod(rest, linear)
            if not remainder.is_zero:
                break
            rest = quotient
            mult += 1
        roots.append((root, mult))
    roots.sort(key=lambda rm: rm[0].sort_key())
    return roots


def _find_one_root(q: ZPoly):
    guesses = _durand_kerner(q)
    candidates = []
    for w in guesses:
        for bound in _DENOM_LADDER:
            re = Fraction(w.real).limit_denominator(bound)
            im = Fraction(w.imag).limit_denominator(bound)
            candidates.append(Scalar(re, im))
    seen = set()
    for cand in candidates:
        if cand in seen:
            continue
        seen.add(cand)
        if q(cand).is_zero:
            return cand
    return None


def _durand_kerner(q: ZPoly, iterations: int = 200):
    n = q.degree
    ws = [(0.4 + 0.9j) ** k for k in range(n)]
    for _ in range(iterations):
        shifted = False
        new = []
        for i, w in enumerate(ws):
            denom = 1 + 0j
            for j, other in enumerate(ws):
                if j != i:
                    denom *= (w - other)
            if denom == 0:
                denom = 1e-12
            step = q.eval_complex(w) / denom
            new.append(w - step)
            if abs(step) > 1e-14:
                shifted = True
        ws = new
        if not shifted:
            break
    return ws


def parse_q(value):
    """Kernel polynomial from JSON: factored {"roots": [...]} or {"coeffs": [...]}.

    Returns (q monic, roots list).  Coefficient form is factored by exact
    rational-root search; construction needs the roots exactly.
    """
    if isinstance(value, ZPoly):
        return value.monic(), factor_rational(value)
    if isinstance(value, (list, tuple)):
        value = {"coeffs": list(value)}
    if not isinstance(value, dict):
        raise ParseError("q must be a roots or coeffs object")
    extra = set(value) - {"roots", "coeffs"}
    if extra:
        raise ParseError(f"unknown q fields {sorted(extra)}")
    if "roots" in value and "coeffs" in value:
        raise ParseError("give q as roots or coeffs, not both")
    if "roots" in value:
        roots = []
        for idx, item in enumerate(value["roots"]):
            if not isinstance(item, dict) or "root" not in item:
                raise ParseError("each root needs {\"root\", \"mult\"}", f"roots[{idx}]")
            extra = set(item) - {"root", "mult"}
            if extra:
                raise ParseError(f"unknown root fields {sorted(extra)}", f"roots[{idx}]")
            mult = item.get("mult", 1)
            if not isinstance(mult, int) or isinstance(mult, bool) or mult < 1:
                raise ParseError(f"mult must be a positive integer, got {mult!r}", f"roots[{idx}]")
            roots.append((Scalar.parse(item["root"]), mult))
        merged = {}
        for root, mult in roots:
            merged[root] = merged.get(root, 0) + mult
        roots = sorted(merged.items(), key=lambda rm: rm[0].sort_key())
        if not roots:
            raise ParseError("q needs at least one root")
        q = ZPoly.constant(1)
        for root, mult in roots:
            q = q * ZPoly([-root, Scalar(1)]) ** mult
        return q, roots
    if "coeffs" in value:
        q = ZPoly.parse(value["coeffs"])
        if q.degree < 1:
            raise ParseError("q must be nonconstant")
        q = q.monic()
        return q, factor_rational(q)
    raise ParseError("q must have roots or coeffs")


# ---------------------------------------------------------------------------
# ConditionSpace
# ---------------------------------------------------------------------------


class ConditionSpace:
    """The space C spanned by the c_ij built from a seed c and kernel q."""

    __slots__ = ("seed", "q", "roots", "n", "basis")

    def __init__(self, seed, q, roots, basis):
        self.seed = seed
        self.q = q
        self.roots = roots
        self.n = q.degree
        self.basis = basis

    def basis_labels(self):
        labels = []
        for i, (root, mult) in enumerate(self.roots, start=1):
            for j in range(1, mult + 1):
                labels.append(f"c[{i},{j}]")
        return labels

    def __repr__(self):
        return f"ConditionSpace(n={self.n}, basis={[b.text() for b in self.basis]!r})"


def build_space(c: Distribution, q) -> ConditionSpace:
    """Assemble the condition space from the seed distribution and q.

    q may be a ZPoly (factored internally), a roots list [(Scalar, mult)],
    or the JSON forms accepted by parse_q.
    """
    if not isinstance(c, Distribution):
        c = Distribution.parse(c)
    if c.is_zero:
        raise InvalidScenario("c must be nonzero")
    if isinstance(q, list) and q and isinstance(q[0], tuple):
        roots = [(Scalar.coerce(r), int(m)) for r, m in q]
        qpoly = ZPoly.constant(1)
        for root, mult in roots:
            qpoly = qpoly * ZPoly([-root, Scalar(1)]) ** mult
        roots.sort(key=lambda rm: rm[0].sort_key())
    else:
        qpoly, roots = parse_q(q)
    if qpoly.degree < 1:
        raise InvalidScenario("q must be nonconstant")
    basis = []
    for root, mult in roots:
        shifted = c.shift_points(root)
        for j in range(1, mult + 1):
            basis.append(shifted.raise_orders(j - 1))
    vectors = [b.entries for b in basis]
    if any(not v for v in vectors) or _vectors_rank(vectors) < len(basis):
        raise DegenerateSpace("condition basis is linearly dependent")
    return ConditionSpace(c, qpoly, roots, basis)


def membership(space: ConditionSpace, d: Distribution):
    """Coordinates of d in the basis if d lies in span(C), else None."""
    atoms = sorted({a for b in space.basis for a in b.entries} | set(d.entries),
                   key=lambda a: (a[0].sort_key(), a[1]))
    index = {a: i for i, a in enumerate(atoms)}
    rows = [[ZERO] * len(space.basis) for _ in atoms]
    for col, b in enumerate(space.basis):
        for a, coeff in b.entries.items():
            rows[index[a]][col] = coeff
    rhs = [ZERO] * len(atoms)
    for a, coeff in d.entries.items():
        rhs[index[a]] = coeff
    return _solve_particular(rows, rhs)


def find_ring_poly(space: ConditionSpace, max_degree: int = 12) -> ZPoly:
    """Minimal-degree monic nonconstant p with p(0) = 0 and c_i o p in C.

    The composition is linear in p, so each degree d gives one exact linear
    system in the unknown lower coefficients of p together with the span
    coordinates; free parameters are pinned to zero by the row-echelon
    choice, making the answer unique.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    n_basis = len(space.basis)
    images = []  # images[k-1][i] = basis[i] o z^k

    for d in range(1, max_degree + 1):
        while len(images) < d:
            k = len(images) + 1
            images.append([b.compose(ZPoly.monomial(k)) for b in space.basis])
        # atoms outside the basis support still constrain the system: any
        # combination carrying weight there cannot lie in the span, so the
        # solver must force those coordinates to zero
        atom_set = {a for b in space.basis for a in b.entries}
        for k in range(d):
            for img in images[k]:
                atom_set.update(img.entries)
        atoms = sorted(atom_set, key=lambda a: (a[0].sort_key(), a[1]))
        # unknowns: a_1..a_{d-1}, then span coordinates per basis element
        n_unknowns = (d - 1) + n_basis * n_basis
        rows = []
        rhs = []
        for i in range(n_basis):
            for atom in atoms:
                row = [ZERO] * n_unknowns
                for k in range(1, d):
                    row[k - 1] = images[k - 1][i].entries.get(atom, ZERO)
                for j in range(n_basis):
                    row[(d - 1) + i * n_basis + j] = -space.basis[j].entries.get(atom, ZERO)
                rows.append(row)
                rhs.append(-images[d - 1][i].entries.get(atom, ZERO))
        solution = _solve_particular(rows, rhs)
        if solution is None:
            continue
        coeffs = [ZERO] + solution[: d - 1] + [Scalar(1)]
        return ZPoly(coeffs)
    raise NotFoundWithinBound(
        f"no spectral-ring element of degree <= {max_degree}")
