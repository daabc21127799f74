"""Continued fractions and small-denominator statistics of ||n*alpha||.

Everything here works on the distance-to-nearest-integer function evaluated
through exact fixed-point integers: alpha is rounded once to r/2**scale and
all residues n*alpha mod 1 are integer arithmetic after that, so scans do
not accumulate floating-point drift in n.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .algebraic import (
    DEFAULT_FIXED_SCALE,
    AlgebraicValue,
    default_precision_bits,
)
from .errors import PrecisionExhaustedError, TailNotCertifiableError, ValidationError


# ---------------------------------------------------------------------------
# continued fractions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients a_0..a_L of a real with convergents p/q.

    ``exact`` marks a rational input whose expansion terminated before the
    requested depth.  ``lo``/``hi`` bracket the true value rigorously; every
    reported quotient is provably the quotient of any number in [lo, hi].
    """

    value: AlgebraicValue
    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    exact: bool
    scale_bits: int
    lo: Fraction = field(repr=False, default=Fraction(0))
    hi: Fraction = field(repr=False, default=Fraction(0))

    @property
    def depth(self) -> int:
        return len(self.partial_quotients) - 1

    def q(self, ell: int) -> int:
        return self.convergents[ell][1]

    def p(self, ell: int) -> int:
        return self.convergents[ell][0]

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.convergents)

    @property
    def max_quotient(self) -> int:
        return max(self.partial_quotients[1:]) if len(self.partial_quotients) > 1 else 0

    def convergent_error_bounds(self, ell: int) -> tuple[Fraction, Fraction]:
        """Rigorous lower/upper bounds on |q_ell * alpha - p_ell|."""
        p, q = self.convergents[ell]
        e_lo = q * self.lo - p
        e_hi = q * self.hi - p
        if e_lo <= 0 <= e_hi or e_hi <= 0 <= e_lo:
            if self.exact and e_lo == e_hi:
                return abs(e_lo), abs(e_lo)
            raise PrecisionExhaustedError(
                f"convergent {ell} not separated from alpha at scale {self.scale_bits}"
            )
        bounds = sorted((abs(e_lo), abs(e_hi)))
        return bounds[0], bounds[1]


def continued_fraction(x, depth: int, prec_bits: int | None = None) -> ContinuedFraction:
    """First ``depth`` partial quotients (beyond a_0 = floor(x)) of a real.

    The expansion is run on an exact rational interval bracketing x, so a
    quotient is emitted only once it is forced; if the interval is too wide
    to decide a quotient before reaching ``depth``, PrecisionExhaustedError
    is raised rather than guessing.
    """
    value = AlgebraicValue.coerce(x)
    bits = prec_bits if prec_bits is not None else default_precision_bits()
    scale = max(bits, DEFAULT_FIXED_SCALE)

    frac = value.as_fraction()
    if frac is not None:
        lo = hi = frac
    else:
        fixed = value.fixed(scale)
        lo = Fraction(fixed - 1, 1 << scale)
        hi = Fraction(fixed + 1, 1 << scale)
    a0_lo, a0_hi = math.floor(lo), math.floor(hi)
    if a0_lo != a0_hi:
        if frac is None:
            raise PrecisionExhaustedError(
                f"floor of {value!r} undecided at {scale} bits"
            )
        a0_lo = a0_hi = math.floor(frac)

    quotients = [a0_lo]
    p_prev, q_prev = 1, 0  # (p_{-1}, q_{-1})
    p_cur, q_cur = a0_lo, 1  # (p_0, q_0)
    convergents = [(a0_lo, 1)]
    cur_lo, cur_hi = lo - a0_lo, hi - a0_lo
    exact = False

    for _ in range(depth):
        if cur_lo == 0 and cur_hi == 0:
            # rational input, expansion terminated
            exact = True
            break
        if cur_lo == 0 or cur_hi == 0:
            if frac is not None:
                exact = True
                break
            raise PrecisionExhaustedError(
                f"cannot separate next quotient of {value!r} at {scale} bits"
            )
        inv_lo = 1 / cur_hi
        inv_hi = 1 / cur_lo
        a_lo = inv_lo.numerator // inv_lo.denominator
        a_hi = inv_hi.numerator // inv_hi.denominator
        if a_lo != a_hi:
            if frac is not None and inv_hi.denominator == 1:
                # exact boundary: 1/frac is an integer, expansion ends with a_hi
                a_lo = a_hi = int(inv_hi)
            else:
                raise PrecisionExhaustedError(
                    f"partial quotient {len(quotients)} of {value!r} undecided "
                    f"at {scale} bits"
                )
        a = a_lo
        quotients.append(a)
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        convergents.append((p_cur, q_cur))
        next_lo = inv_lo - a
        next_hi = inv_hi - a
        cur_lo, cur_hi = next_lo, next_hi

    return ContinuedFraction(
        value=value,
        partial_quotients=tuple(quotients),
        convergents=tuple(convergents),
        exact=exact,
        scale_bits=scale,
        lo=lo,
        hi=hi,
    )


def nearest_integer_distance(x, prec_bits: int | None = None) -> float:
    """Distance from x to the nearest integer."""
    value = AlgebraicValue.coerce(x)
    bits = prec_bits if prec_bits is not None else default_precision_bits()
    with mpmath.workprec(bits):
        v = value.eval_mpf(bits)
        return float(abs(v - mpmath.nint(v)))


# ---------------------------------------------------------------------------
# the series  sum_{n>=1} 1 / (n^2 ||n alpha||)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesBound:
    """Partial sum of sum 1/(n^2 ||n alpha||) plus an upper tail bound.

    The tail over a convergent block [q_l, q_{l+1}) is controlled by the
    separation of residues: any q_l consecutive integers below q_{l+1} have
    their n*alpha mod 1 pairwise at least |q_l alpha - p_l| apart and at
    least that far from 0, which caps the block at
    c * (1 + log(q_l/2 + 1)) / (q_l^2 * |q_l alpha - p_l|) summed over
    sub-chunks.  Beyond the computed expansion depth the same estimate is
    applied with partial quotients assumed bounded by ``quotient_cap``
    (recorded here; the assumption is empirical, not proved).
    """

    partial_sum: float
    tail_bound: float
    n_max: int
    depth_used: int
    quotient_cap: int
    scale_bits: int
    partial_sum_digits: str

    @property
    def total_upper(self) -> float:
        return self.partial_sum + self.tail_bound


def _zeta2_from(i0: int) -> float:
    """Upper bound on sum_{i >= i0} 1/i^2."""
    if i0 <= 1:
        return math.pi ** 2 / 6.0
    return min(math.pi ** 2 / 6.0, 1.0 / (i0 - 1))


def _block_bound(q_l: int, delta_lo: float, n_min: int) -> float:
    """Upper bound on sum over n in [max(q_l, n_min), q_{l+1}) of 1/(n^2 ||n a||).

    Valid whenever delta_lo lower-bounds |q_l alpha - p_l|; chunks that
    overshoot q_{l+1} only add nonnegative slack.
    """
    harmonic = 1.0 + math.log(q_l / 2.0 + 1.0)
    i0 = max(1, n_min // q_l)
    return (2.0 * harmonic / delta_lo) * _zeta2_from(i0) / (q_l * q_l)


def diophantine_series(alpha1, n_max: int, prec_bits: int | None = None,
                       quotient_cap: int | None = None,
                       cf: ContinuedFraction | None = None) -> SeriesBound:
    """Partial sum of sum_{n=1}^{n_max} 1/(n^2 ||n alpha1||) with tail bound.

    Rational alpha1 is rejected: some ||n alpha1|| vanishes and the series
    diverges.  The tail bound beyond the computed continued-fraction depth
    assumes partial quotients stay below ``quotient_cap`` (default: the
    largest quotient observed); the assumption is recorded in the result.
    """
    value = AlgebraicValue.coerce(alpha1)
    if value.is_rational:
        raise ValidationError("diophantine_series diverges for rational alpha")
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    bits = prec_bits if prec_bits is not None else default_precision_bits()
    scale = max(bits, DEFAULT_FIXED_SCALE)

    if cf is None:
        # grow the expansion until the last denominator comfortably clears
        # n_max; deeper is better because less weight rests on the assumed cap
        depth = 32
        cf = continued_fraction(value, depth, prec_bits=bits)
        target = max(n_max, 10 ** 6) ** 2
        while cf.q(cf.depth) <= target:
            depth *= 2
            try:
                cf = continued_fraction(value, depth, prec_bits=bits)
            except PrecisionExhaustedError:
                cf = _deepest_expansion(value, bits, depth)
                break
    if cf.q(cf.depth) <= n_max:
        raise TailNotCertifiableError(
            f"continued fraction reaches only q={cf.q(cf.depth)} <= n_max={n_max}"
        )

    alpha_fixed = value.fixed(scale)
    mask = (1 << scale) - 1
    half = 1 << (scale - 1)

    # exact partial sum: term_n = 2**scale / (n^2 * d_n) with d_n integer
    pow_scale = mpmath.mpf(2) ** scale
    with mpmath.workprec(bits + 32):
        def _terms():
            r = 0
            for n in range(1, n_max + 1):
                r = (r + alpha_fixed) & mask
                d = r if r <= half else (1 << scale) - r
                if d <= 2 * n:
                    raise PrecisionExhaustedError(
                        f"||{n}*alpha|| indistinguishable from 0 at scale {scale}"
                    )
                yield pow_scale / (n * n * d)

        partial_hp = mpmath.fsum(_terms())
        digits = mpmath.nstr(partial_hp, 30)

    # blockwise tail over computed convergents
    cap = quotient_cap if quotient_cap is not None else max(2, cf.max_quotient)
    qs = cf.denominators
    ell0 = max(ell for ell in range(len(qs)) if qs[ell] <= n_max)
    tail = 0.0
    for ell in range(ell0, cf.depth):
        delta_lo_frac, _ = cf.convergent_error_bounds(ell)
        delta_lo = float(delta_lo_frac) * (1.0 - 1e-12)
        if delta_lo <= 0:
            raise PrecisionExhaustedError(f"no positive bound on ||q_{ell} alpha||")
        tail += _block_bound(qs[ell], delta_lo, n_max + 1)

    # remainder beyond the expansion: Fibonacci-type lower bounds on q and
    # the assumed quotient cap give a summable overestimate.  Denominators
    # at least double every two steps, so once the explicit terms stop the
    # rest is below 10x the last term.
    const = (math.pi ** 2 / 3.0) * (cap + 2)
    u, v = (qs[-2] if len(qs) >= 2 else 1), qs[-1]
    remainder = 0.0
    last_term = const * (1.0 + math.log(v / 2.0 + 1.0)) / v
    for _ in range(400):
        last_term = const * (1.0 + math.log(v / 2.0 + 1.0)) / v
        remainder += last_term
        u, v = v, u + v
        if last_term < 1e-32:
            break
        if v > 1e120:
            v = 1e120  # keep float conversion finite; only loosens the bound
            u = min(u, v)
    tail += remainder + 10.0 * last_term

    return SeriesBound(
        partial_sum=float(partial_hp),
        tail_bound=tail,
        n_max=n_max,
        depth_used=cf.depth,
        quotient_cap=cap,
        scale_bits=scale,
        partial_sum_digits=digits,
    )


def _deepest_expansion(value: AlgebraicValue, bits: int, depth_hint: int) -> ContinuedFraction:
    """Longest expansion obtainable at this precision (bisect on depth)."""
    lo_ok, hi_bad = 1, depth_hint
    while lo_ok + 1 < hi_bad:
        mid = (lo_ok + hi_bad) // 2
        try:
            continued_fraction(value, mid, prec_bits=bits)
            lo_ok = mid
        except PrecisionExhaustedError:
            hi_bad = mid
    return continued_fraction(value, lo_ok, prec_bits=bits)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ApproximationHit:
    n: int
    distance: float
    threshold: float


@dataclass(frozen=True)
class ExponentScan:
    alpha: str
    eta: float
    n_max: int
    hits: tuple[ApproximationHit, ...]
    worst_exponent: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "distance", "threshold"])
        for h in self.hits:
            w.writerow([h.n, f"{h.distance:.17g}", f"{h.threshold:.17g}"])
        return buf.getvalue()


def approximation_exponent_scan(alpha1, n_max: int, eta: float,
                                scale_bits: int = DEFAULT_FIXED_SCALE) -> ExponentScan:
    """All 1 <= n <= n_max with ||n alpha1|| < n**(-eta), plus the worst
    exponent log(1/||n alpha1||)/log n observed over n >= 2.

    Rational alpha is accepted; exact hits there report distance 0.
    """
    value = AlgebraicValue.coerce(alpha1)
    step = value.fixed(scale_bits)
    mask = (1 << scale_bits) - 1
    half = 1 << (scale_bits - 1)
    inv = 2.0 ** -scale_bits

    hits = []
    worst = float("-inf")
    r = 0
    for n in range(1, n_max + 1):
        r = (r + step) & mask
        d = r if r <= half else (1 << scale_bits) - r
        dist = d * inv
        threshold = n ** (-eta)
        if dist < threshold:
            hits.append(ApproximationHit(n=n, distance=dist, threshold=threshold))
        if n >= 2:
            expo = float("inf") if dist == 0.0 else -math.log(dist) / math.log(n)
            if expo > worst:
                worst = expo
    return ExponentScan(
        alpha=value.literal(),
        eta=eta,
        n_max=n_max,
        hits=tuple(hits),
        worst_exponent=worst if worst != float("-inf") else float("nan"),
    )


@dataclass(frozen=True)
class DiophantineProfile:
    """Observed (not proved) Diophantine quality of a direction."""

    alpha: str
    n_max_scanned: int
    worst_exponent: float
    badly_approximable_bound: int
    quotients_seen: int
    series: SeriesBound | None


def build_profile(alpha1, n_max: int = 10_000, eta: float = 1.5,
                  prec_bits: int | None = None,
                  with_series: bool = True) -> DiophantineProfile:
    value = AlgebraicValue.coerce(alpha1)
    scan = approximation_exponent_scan(value, n_max, eta)
    series = None
    bad_bound = 0
    quotients = 0
    if not value.is_rational:
        if with_series:
            series = diophantine_series(value, n_max, prec_bits=prec_bits)
        cf = continued_fraction(value, 48, prec_bits=prec_bits)
        bad_bound = cf.max_quotient
        quotients = cf.depth
    return DiophantineProfile(
        alpha=value.literal(),
        n_max_scanned=n_max,
        worst_exponent=scan.worst_exponent,
        badly_approximable_bound=bad_bound,
        quotients_seen=quotients,
        series=series,
    )


def grepstad_larcher_sum(cf: ContinuedFraction, depth: int) -> float:
    """sum_{l=0}^{depth} (a_{l+1} / q_l**0.5) * sum_{k=1}^{l+1} a_k."""
    if cf.depth < depth + 1:
        raise ValidationError(
            f"need quotients through a_{depth + 1}, expansion has {cf.depth}"
        )
    a = cf.partial_quotients
    total = 0.0
    prefix = 0
    for ell in range(depth + 1):
        prefix += a[ell + 1]
        total += a[ell + 1] / math.sqrt(cf.q(ell)) * prefix
    return total


# ---------------------------------------------------------------------------
# multi-dimensional small-denominator scan and dyadic spacing audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchmidtHit:
    n: tuple[int, ...]
    lhs: float
    rhs: float


@dataclass(frozen=True)
class SchmidtScan:
    gamma: float
    n_max: int
    hits: tuple[SchmidtHit, ...]
    fitted_c: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        dim = len(self.hits[0].n) if self.hits else 0
        w.writerow([f"n{i + 1}" for i in range(max(dim, 1))] + ["lhs", "rhs"])
        for h in self.hits:
            w.writerow(list(h.n) + [f"{h.lhs:.17g}", f"{h.rhs:.17g}"])
        return buf.getvalue()


def _lattice_residues(alpha_values: list[AlgebraicValue], n_max: int,
                      scale_bits: int):
    """Yield (n_tuple, residue_int) over 0 < |n|_inf <= n_max, fixed order."""
    dim = len(alpha_values)
    steps = [v.fixed(scale_bits) for v in alpha_values]
    mask = (1 << scale_bits) - 1

    def rec(prefix, acc, axis):
        if axis == dim:
            if any(prefix):
                yield tuple(prefix), acc & mask
            return
        base = (acc - (n_max + 1) * steps[axis]) & mask
        for c in range(-n_max, n_max + 1):
            base = (base + steps[axis]) & mask
            yield from rec(prefix + [c], base, axis + 1)

    yield from rec([], 0, 0)


def schmidt_inequality_scan(alpha_values, forms, gamma: float, n_max: int,
                            scale_bits: int = DEFAULT_FIXED_SCALE) -> SchmidtScan:
    """Scan 0 < |n|_inf <= n_max for ||<n, alpha>|| * prod(|L_k(n)|+1) < |n|^-gamma.

    ``forms`` is a sequence of coefficient vectors for the linear forms L_k.
    Also fits the largest constant C with lhs >= C |n|^-gamma over the scan,
    which downstream dyadic audits take as their threshold.
    """
    values = [AlgebraicValue.coerce(a) for a in alpha_values]
    form_rows = [tuple(float(c) for c in f) for f in forms]
    inv = 2.0 ** -scale_bits
    half = 1 << (scale_bits - 1)
    full = 1 << scale_bits

    hits = []
    fitted_c = float("inf")
    for n, r in _lattice_residues(values, n_max, scale_bits):
        d = r if r <= half else full - r
        dist = d * inv
        prod = 1.0
        for row in form_rows:
            prod *= abs(sum(c * ni for c, ni in zip(row, n))) + 1.0
        norm = math.sqrt(sum(ni * ni for ni in n))
        lhs = dist * prod
        rhs = norm ** (-gamma)
        if lhs < rhs:
            hits.append(SchmidtHit(n=n, lhs=lhs, rhs=rhs))
        scaled = lhs * norm ** gamma
        if scaled < fitted_c:
            fitted_c = scaled
    return SchmidtScan(gamma=gamma, n_max=n_max, hits=tuple(hits), fitted_c=fitted_c)


@dataclass(frozen=True)
class DyadicBlock:
    """Lattice vectors with 2^ell <= |n| < 2^(ell+1) and dyadically pinned
    form sizes 2^(ell_k) <= |L_k(n)| + 1 < 2^(ell_k+1)."""

    ell: int
    ell_ks: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]
    capacity: int  # the H of the spacing claims


def block_capacity(c: float, gamma: float, ell: int, ell_ks: tuple[int, ...]) -> int:
    log2_h = sum(lk + 2 for lk in ell_ks) + gamma * (ell + 2) - math.log2(c)
    return math.ceil(2.0 ** log2_h)


def materialize_dyadic_block(forms, gamma: float, c: float, ell: int,
                             ell_ks: tuple[int, ...], dim: int) -> DyadicBlock:
    form_rows = [tuple(float(x) for x in f) for f in forms]
    if len(form_rows) != len(ell_ks):
        raise ValidationError("one dyadic index per linear form is required")
    lo2, hi2 = 4 ** ell, 4 ** (ell + 1)
    members = []

    def rec(prefix, axis):
        if axis == dim:
            norm2 = sum(v * v for v in prefix)
            if not (lo2 <= norm2 < hi2):
                return
            for row, lk in zip(form_rows, ell_ks):
                size = abs(sum(c_ * v for c_, v in zip(row, prefix))) + 1.0
                if not (2.0 ** lk <= size < 2.0 ** (lk + 1)):
                    return
            members.append(tuple(prefix))
            return
        limit = 2 ** (ell + 1)
        for v in range(-limit, limit + 1):
            rec(prefix + [v], axis + 1)

    rec([], 0)
    return DyadicBlock(
        ell=ell,
        ell_ks=tuple(ell_ks),
        members=tuple(members),
        capacity=block_capacity(c, gamma, ell, ell_ks),
    )


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    block: DyadicBlock
    min_abs: float
    min_gap: float
    violations: tuple[str, ...]


def dyadic_spacing_audit(alpha_values, block: DyadicBlock,
                         scale_bits: int = DEFAULT_FIXED_SCALE) -> AuditResult:
    """Check |g(n)| >= 1/H and pairwise |g(n) - g(m)| > 1/H on a block.

    g(n) is <n, alpha> mod 1 mapped to (-1/2, 1/2] (right closed).  The
    comparisons run on exact scaled integers: H * |rho| vs 2**scale.
    """
    values = [AlgebraicValue.coerce(a) for a in alpha_values]
    steps = [v.fixed(scale_bits) for v in values]
    mask = (1 << scale_bits) - 1
    half = 1 << (scale_bits - 1)
    full = 1 << scale_bits
    h = block.capacity

    signed = []
    for n in block.members:
        r = sum(ni * si for ni, si in zip(n, steps)) & mask
        rho = r if r <= half else r - full  # representative in (-1/2, 1/2] * 2**scale
        signed.append((rho, n))

    violations = []
    inv = 2.0 ** -scale_bits
    min_abs = float("inf")
    for rho, n in signed:
        min_abs = min(min_abs, abs(rho) * inv)
        if h * abs(rho) < full:
            violations.append(f"|g({n})| = {abs(rho) * inv:.3e} < 1/{h}")

    signed.sort()
    min_gap = float("inf")
    for (r1, n1), (r2, n2) in zip(signed, signed[1:]):
        gap = r2 - r1
        min_gap = min(min_gap, gap * inv)
        if h * gap <= full:
            violations.append(f"|g({n2}) - g({n1})| = {gap * inv:.3e} <= 1/{h}")

    return AuditResult(
        passed=not violations,
        block=block,
        min_abs=min_abs,
        min_gap=min_gap,
        violations=tuple(violations),
    )
