"""End-to-end construction and exact verification of the eigenvalue identities.

From a seed distribution c and kernel polynomial q the pipeline builds, in
order: the condition space, phi = c(e^{xz}), the dressing operator K, the
wave psi = z^{-n} K e^{xz}, the shift-side operators

    Qhat   with  Qhat(e^{xz}) = (phi/q) e^{xz},
    Khat   with  Khat(e^{xz}) = tau_g K e^{xz}   (a lift of the wave data),
    Gamma  = Qhat o Khat      (constant coefficient),
    Lambda = z^{-n} o (Khat o Qhat) o z^{n},

and the spectral-ring side L_p, then verifies symbolically:

    Gamma(e^{xz}) = tau_g phi e^{xz}
    Lambda o Khat = Khat o Gamma        (pre-conjugation, as normal forms)
    Lambda psi    = tau_g phi psi
    L_p psi       = p(z) psi

plus the commutator ladders relating the two sides.  Every verdict lands in
a certificate as a named check; binding checks decide the overall outcome,
diagnostics (verbatim-source operator comparisons, soft ring search) do not.
"""

from __future__ import annotations

import time

from .errors import (
    ConstancyViolation,
    EigenCheckFailed,
    InvalidScenario,
    NotFoundWithinBound,
    NotInRing,
)
from .exact_algebra import ExpPoly, ExpRat, Scalar, ZPoly, ZRat, ZERO, gauge_normalize
from .conditions import ConditionSpace, Distribution, build_space, find_ring_poly
from .operator_calculus import (
    DiffOpX,
    TDO,
    Wave,
    build_K,
    build_psi,
    conjugate_by_zpow,
    diffx_rdiv,
    lift,
    simpK,
    tdo_eigen_witness,
    wronskian,
)


class CheckResult:
    """One named verification outcome inside a certificate."""

    __slots__ = ("check_id", "passed", "binding", "detail")

    def __init__(self, check_id: str, passed: bool, binding: bool = True, detail: str = ""):
        self.check_id = check_id
        self.passed = bool(passed)
        self.binding = binding
        self.detail = detail

    def to_json(self):
        return {"id": self.check_id, "pass": self.passed,
                "binding": self.binding, "detail": self.detail}

    def __repr__(self):
        flag = "pass" if self.passed else "FAIL"
        kind = "" if self.binding else " (diagnostic)"
        return f"<{self.check_id}: {flag}{kind}>"


class PipelineOptions:
    """Knobs for run_pipeline; defaults match the desk-scale guardrails."""

    __slots__ = ("max_ring_degree", "gauge", "ring")

    def __init__(self, max_ring_degree=None, gauge="midpoint", ring=True):
        if gauge not in ("midpoint", "none"):
            raise InvalidScenario(f"gauge must be 'midpoint' or 'none', got {gauge!r}")
        self.max_ring_degree = max_ring_degree
        self.gauge = gauge
        self.ring = ring


class BispectralCertificate:
    """Everything the pipeline built, with the named check verdicts."""

    __slots__ = ("seed", "space", "phi", "tau", "tau_g", "gauge_shift", "K",
                 "psi", "Qhat", "Khat", "Gamma", "Lambda", "lambda_pre", "pi",
                 "ring_poly", "Lp", "checks", "elapsed")

    def __init__(self, seed, space):
        self.seed = seed
        self.space = space
        self.phi = None
        self.tau = None
        self.tau_g = None
        self.gauge_shift = ZERO
        self.K = None
        self.psi = None
        self.Qhat = None
        self.Khat = None
        self.Gamma = None
        self.Lambda = None
        self.lambda_pre = None
        self.pi = None
        self.ring_poly = None
        self.Lp = None
        self.checks = []
        self.elapsed = 0.0

    def add(self, check_id, passed, binding=True, detail=""):
        self.checks.append(CheckResult(check_id, passed, binding, detail))

    def check(self, check_id):
        for c in self.checks:
            if c.check_id == check_id:
                return c
        return None

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks if c.binding)

    def to_json(self):
        out = {
            "c": self.seed.to_json(),
            "q": {"roots": [{"root": r.to_json(), "mult": m} for r, m in self.space.roots]},
            "n": self.space.n,
            "phi": self.phi.text() if self.phi is not None else None,
            "tau": self.tau.text() if self.tau is not None else None,
            "tau_g": self.tau_g.text() if self.tau_g is not None else None,
            "gauge_shift": self.gauge_shift.to_json(),
            "pi": self.pi.text() if self.pi is not None else None,
            "ring_poly": self.ring_poly.to_json() if self.ring_poly is not None else None,
            "operators": {},
            "checks": [c.to_json() for c in self.checks],
            "pass": self.overall_pass,
            "elapsed_seconds": round(self.elapsed, 6),
        }
        ops = out["operators"]
        if self.K is not None:
            ops["K"] = self.K.to_json()
        if self.psi is not None:
            ops["psi"] = self.psi.to_json()
        if self.Qhat is not None:
            ops["Q"] = self.Qhat.to_json()
        if self.Khat is not None:
            ops["Khat"] = self.Khat.to_json()
        if self.Gamma is not None:
            ops["Gamma"] = self.Gamma.to_json()
        if self.Lambda is not None:
            ops["Lambda"] = self.Lambda.to_json()
        if self.Lp is not None:
            ops["Lp"] = self.Lp.to_json()
        return out


# ---------------------------------------------------------------------------
# Individual constructions
# ---------------------------------------------------------------------------


def build_Q(c: Distribution, q: ZPoly) -> TDO:
    """The seed's shift-side image: sum alpha_k (1/q) Dz^{n_k} S_{mu_k}.

    Applying to e^{xz} yields (phi/q) e^{xz}.
    """
    if c.is_zero:
        raise InvalidScenario("c must be nonzero")
    if q.degree < 1:
        raise InvalidScenario("q must be nonconstant")
    parts = {}
    for (point, order), coeff in c.entries.items():
        vec = parts.setdefault(point, [])
        while len(vec) <= order:
            vec.append(ZRat.constant(0))
        vec[order] = vec[order] + ZRat(ZPoly.constant(coeff), q)
    return TDO({lam: tuple(vec) for lam, vec in parts.items()})


def build_Khat(K: DiffOpX, tau_g: ExpPoly) -> TDO:
    """Lift of tau_g * K e^{xz}: the shift-side dressing.

    K e^{xz} has coefficients with denominator tau; multiplying by the
    (gauge-stripped) tau clears them to honest exponential polynomials,
    which is exactly the liftable shape.
    """
    w = K.apply_wave(Wave.unit())
    if not w.den.is_constant:
        raise ValueError("K e^{xz} should have no z-denominator")
    pairs = []
    for k, coeff in enumerate(w.coeffs):
        if coeff.is_zero:
            continue
        pairs.append((coeff * tau_g, ZRat(ZPoly.monomial(k), ZPoly.constant(1))))
    return lift(pairs)


def build_Gamma(Qhat: TDO, Khat: TDO) -> TDO:
    """Gamma = Qhat o Khat, required to be constant-coefficient."""
    gamma = Qhat * Khat
    if not gamma.is_constant_coefficient:
        bad = []
        for lam in gamma.shift_support():
            for k, r in enumerate(gamma.parts[lam]):
                if not r.is_constant:
                    bad.append(f"shift {lam}, order {k}: {r.text()}")
        raise ConstancyViolation("; ".join(bad))
    return gamma


def build_Lambda(Khat: TDO, Qhat: TDO, n: int, check: bool = True) -> TDO:
    """Lambda = z^{-n} o (Khat o Qhat) o z^{n}, conjugation verified.

    The check closes the factorization chain: z^n o Lambda = (Khat o Qhat)
    o z^n as normal forms.  Together with the roundtrip, factorization, and
    constant-operator eigenvalue checks this forces Lambda psi = pi psi,
    since operators in z commute with multiplication by functions of x.
    """
    pre = Khat * Qhat
    lam = conjugate_by_zpow(pre, n)
    if check and n != 0:
        zn = TDO.mult(ZRat(ZPoly.monomial(n), ZPoly.constant(1)))
        if (zn * lam) != (pre * zn):
            raise EigenCheckFailed(
                "conjugation by z^n does not close: z^n o Lambda != Lambda_pre o z^n")
    return lam


def verify_bdt(lambda_pre: TDO, Khat: TDO, Gamma: TDO) -> bool:
    """Lambda o Khat = Khat o Gamma as normal forms (pre-conjugation level)."""
    return (lambda_pre * Khat) == (Khat * Gamma)


def build_Lp(space: ConditionSpace, K: DiffOpX, p: ZPoly) -> DiffOpX:
    """The x-side operator with L_p o K = K o p(d/dx), by exact right division."""
    target = K * DiffOpX.from_poly_in_d(p)
    quotient, remainder = diffx_rdiv(target, K)
    if not remainder.is_zero:
        raise NotInRing(
            f"right-division remainder is nonzero; {p.text()} is outside the spectral ring")
    return quotient


def ad_chain(Lp: DiffOpX, pi: ExpPoly, Lambda: TDO, p: ZPoly, m_max: int,
             psi: Wave, wave_check_max: int = None):
    """Commutator ladders tying the two eigenvalue equations together.

      A_m = ad_{L_p}^m(pi .)        Ahat_m = (-1)^m ad_{p(z).}^m(Lambda)
      B_m = ad_{pi .}^m(L_p)        Bhat_m = (-1)^m ad_{Lambda}^m(p(z).)

    Checks, returned as a list: A_m psi = Ahat_m psi and B_m psi = Bhat_m psi
    for m up to wave_check_max (default: all m <= m_max); B_m = 0 as an
    operator for m > ord L_p; and ord B_m <= ord L_p - m below that.
    """
    if m_max < p.degree + 1:
        raise ValueError("m_max must exceed deg p")
    if wave_check_max is None:
        wave_check_max = m_max
    checks = []
    ord_lp = len(Lp.coeffs) - 1
    mult_pi = DiffOpX.mult(pi)
    mult_p_tdo = TDO.mult(ZRat(p, ZPoly.constant(1)))

    a_op = mult_pi
    ahat_op = Lambda
    b_op = Lp
    bhat_op = mult_p_tdo
    for m in range(0, m_max + 1):
        if m > 0:
            b_op = mult_pi * b_op - b_op * mult_pi
            if m <= wave_check_max:
                # the hatted ladders only feed the wave checks
                a_op = Lp * a_op - a_op * Lp
                ahat_op = ahat_op * mult_p_tdo - mult_p_tdo * ahat_op
                bhat_op = bhat_op * Lambda - Lambda * bhat_op
        if m <= wave_check_max:
            ok = a_op.apply_wave(psi) == ahat_op.apply(psi)
            checks.append(CheckResult(f"ad_A_wave_{m}", ok, True,
                                      "A and Ahat agree on psi" if ok else "wave mismatch"))
            ok = b_op.apply_wave(psi) == bhat_op.apply(psi)
            checks.append(CheckResult(f"ad_B_wave_{m}", ok, True,
                                      "B and Bhat agree on psi" if ok else "wave mismatch"))
        if m > ord_lp:
            checks.append(CheckResult(f"ad_B_zero_{m}", b_op.is_zero, True,
                                      "B vanishes identically" if b_op.is_zero
                                      else f"order {b_op.order}"))
        elif m >= 1:
            ok = b_op.is_zero or b_op.order <= ord_lp - m
            checks.append(CheckResult(f"ad_B_order_{m}", ok, True,
                                      f"ord B_{m} = {b_op.order}"))
    return checks


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def run_pipeline(c, q, options: PipelineOptions = None) -> BispectralCertificate:
    """Build every operator for the scenario and verify the identities.

    Input-level problems (zero c, constant or unfactorable q, dependent
    basis) raise; theorem-level verification failures are recorded as
    failing checks so callers can render them.
    """
    options = options or PipelineOptions()
    start = time.monotonic()
    if not isinstance(c, Distribution):
        c = Distribution.parse(c)
    if c.is_zero:
        raise InvalidScenario("c must be nonzero")
    space = build_space(c, q)
    cert = BispectralCertificate(c, space)
    n = space.n

    cert.phi = c.apply_to_exp()
    kernel = [b.apply_to_exp() for b in space.basis]
    cert.tau = wronskian(kernel)
    cert.add("tau_nonzero", not cert.tau.is_zero, True,
             f"tau = {cert.tau.text()}")
    if options.gauge == "midpoint":
        cert.tau_g, cert.gauge_shift = gauge_normalize(cert.tau)
    else:
        cert.tau_g, cert.gauge_shift = cert.tau, ZERO
    cert.pi = cert.tau_g * cert.phi

    cert.K = build_K(space)
    kernel_ok = all(cert.K.apply(f).is_zero for f in kernel)
    cert.add("kernel_annihilation", kernel_ok, True,
             "K kills every basis image")
    simp = simpK(cert.phi, space.q)
    cert.add("simpk_equality", cert.K == simp, True,
             "Wronskian form matches the conjugated form")

    cert.psi = build_psi(cert.K, n)
    cert.Qhat = build_Q(c, space.q)
    q_target = Wave([ExpRat.coerce(cert.phi)], space.q)
    cert.add("q_exp", cert.Qhat.apply_unit() == q_target, True,
             "Qhat e^{xz} = (phi/q) e^{xz}")

    cert.Khat = build_Khat(cert.K, cert.tau_g)
    khat_target = cert.K.apply_wave(Wave.unit()).scale_x(cert.tau_g)
    cert.add("khat_roundtrip", cert.Khat.apply_unit() == khat_target, True,
             "Khat e^{xz} = tau_g K e^{xz}")

    try:
        cert.Gamma = build_Gamma(cert.Qhat, cert.Khat)
        cert.add("gamma_constant", True, True, "all coefficients constant")
    except ConstancyViolation as exc:
        cert.add("gamma_constant", False, True, str(exc))
        cert.Gamma = cert.Qhat * cert.Khat
    gamma_target = Wave.unit().scale_x(cert.pi)
    cert.add("gamma_value", cert.Gamma.apply_unit() == gamma_target, True,
             f"Gamma e^{{xz}} = ({cert.pi.text()}) e^{{xz}}")

    cert.lambda_pre = cert.Khat * cert.Qhat
    cert.add("bdt_factorization", verify_bdt(cert.lambda_pre, cert.Khat, cert.Gamma),
             True, "Lambda o Khat = Khat o Gamma as normal forms")

    try:
        cert.Lambda = build_Lambda(cert.Khat, cert.Qhat, n)
        cert.add("conjugation_closure", True, True,
                 "z^n o Lambda = Lambda_pre o z^n")
    except EigenCheckFailed as exc:
        cert.Lambda = conjugate_by_zpow(cert.lambda_pre, n)
        cert.add("conjugation_closure", False, True, str(exc))
    witness = tdo_eigen_witness(cert.Lambda, cert.psi, cert.pi)
    cert.add("lambda_eigen", witness is None, True,
             f"eigenvalue {cert.pi.text()}" if witness is None
             else f"Lambda psi != pi psi (sides differ at z = {witness})")

    if c.support() == [ZERO]:
        support = cert.Lambda.shift_support()
        ok = all(s == ZERO for s in support)
        cert.add("wilson_shift_support", ok, True,
                 "point-supported c gives a differential Lambda")
        cert.add("wilson_pi_poly", cert.pi.is_polynomial, True,
                 "pi is a polynomial for point-supported c")

    if options.ring:
        bound = options.max_ring_degree or (2 * n + 6)
        try:
            cert.ring_poly = find_ring_poly(space, bound)
            cert.add("ring_found", True, False,
                     f"minimal element {cert.ring_poly.text()}")
        except NotFoundWithinBound as exc:
            cert.add("ring_found", False, False, str(exc))
        if cert.ring_poly is not None:
            try:
                cert.Lp = build_Lp(space, cert.K, cert.ring_poly)
                cert.add("lp_division", True, True, "remainder zero")
                cert.add("lp_order", cert.Lp.order == cert.ring_poly.degree, True,
                         f"ord L_p = {cert.Lp.order}")
                lp_ok = (cert.Lp.apply_wave(cert.psi)
                         == cert.psi.scale_z(ZRat(cert.ring_poly, ZPoly.constant(1))))
                cert.add("lp_eigen", lp_ok, True,
                         f"L_p psi = ({cert.ring_poly.text()}) psi")
            except NotInRing as exc:
                cert.add("lp_division", False, True, str(exc))

    cert.elapsed = time.monotonic() - start
    return cert
