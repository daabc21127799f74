"""Discrepancy evaluation along linear torus flows.

Exact evaluation decomposes time into an initial partial wrap of the last
coordinate, a run of full unit-time windows handled by the section
function, and a final partial wrap; only segment clipping touches the
partial windows, so there is no +-O(1) slack anywhere.  Orbit points come
from exact fixed-point integers (one rounding of alpha, then integer
arithmetic), never from accumulated float additions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebraic import (
    DEFAULT_FIXED_SCALE,
    AlgebraicValue,
    frac_orbit_floats,
    frac_point,
)
from .errors import TransversalityError, ValidationError
from .geometry import (
    Box,
    Direction,
    Polytope,
    SectionEvaluator,
    SectionFunction2D,
    build_piecewise_linear_section,
    validate_transversality,
)

_INT_SNAP = 1e-12


def _normalize_problem(direction: Direction, s_vals, polytope: Polytope):
    """Permute/reflect coordinates so the dominant component is last and
    positive, then rescale it to 1.  Returns the transformed problem, the
    time scale a (original Delta_T equals transformed Delta_{aT} / a), and
    the permutation applied.
    """
    alpha_f = direction.floats()
    d = len(alpha_f)
    j = int(np.argmax(np.abs(alpha_f)))
    if abs(alpha_f[j]) < 1e-15:
        raise ValidationError("direction is (numerically) zero")

    perm = [k for k in range(d) if k != j] + [j]
    values = [direction.values[k] for k in perm]
    s_list = [s_vals[k] for k in perm]
    verts = polytope.vertices[:, perm]
    normals = polytope.normals[:, perm]
    offsets = polytope.offsets.copy()

    if alpha_f[j] < 0:
        # reflect the last axis: x -> 1 - x keeps the unit cube invariant
        values[-1] = -values[-1]
        s_list[-1] = AlgebraicValue.from_rational(1) - s_list[-1]
        verts = verts.copy()
        verts[:, -1] = 1.0 - verts[:, -1]
        offsets = offsets - normals[:, -1]
        normals = normals.copy()
        normals[:, -1] = -normals[:, -1]

    scale = values[-1]
    new_vals = tuple(v / scale for v in values[:-1]) + (AlgebraicValue.from_rational(1),)
    new_dir = Direction(new_vals)
    new_poly = Polytope(verts, normals, offsets, polytope.volume)
    return new_dir, tuple(s_list), new_poly, float(scale), tuple(perm)


@dataclass
class FlowInstance:
    """A flow problem in normalized coordinates (last direction component 1).

    ``time_scale`` converts caller time to normalized time; it is 1.0 when
    the input direction was already normalized.
    """

    direction: Direction
    s_values: tuple[AlgebraicValue, ...]
    polytope: Polytope
    time_scale: float
    scale_bits: int
    evaluator: SectionEvaluator | None
    section: SectionFunction2D | None
    transversality_ok: bool
    permutation: tuple[int, ...] | None = None
    alpha_fixed: list[int] = field(repr=False, default_factory=list)
    x0_fixed: list[int] = field(repr=False, default_factory=list)

    @classmethod
    def build(cls, direction, s, polytope: Polytope, *,
              scale_bits: int = DEFAULT_FIXED_SCALE,
              want_section: bool | None = None) -> "FlowInstance":
        if not isinstance(direction, Direction):
            direction = Direction.make(direction)
        s_vals = tuple(AlgebraicValue.coerce(v) for v in s)
        if len(s_vals) != direction.d or polytope.d != direction.d:
            raise ValidationError("direction, start point, and polytope dimensions differ")
        polytope.validate()

        time_scale = 1.0
        permutation = None
        if not direction.normalized:
            direction, s_vals, polytope, time_scale, permutation = _normalize_problem(
                direction, s_vals, polytope
            )

        report = validate_transversality(polytope, direction)
        evaluator = SectionEvaluator(polytope, direction) if report.ok else None

        section = None
        if report.ok and polytope.d == 2:
            alpha1 = float(direction.values[0])
            if want_section is None:
                want_section = 0.0 < alpha1 < 1.0
            if want_section:
                section = build_piecewise_linear_section(polytope, direction)

        d = direction.d
        s_d = s_vals[-1]
        mask = (1 << scale_bits) - 1
        alpha_fixed = [direction.values[k].fixed(scale_bits) for k in range(d - 1)]
        x0_fixed = [
            (s_vals[k] - s_d * direction.values[k]).fixed(scale_bits) & mask
            for k in range(d - 1)
        ]
        return cls(
            direction=direction,
            s_values=s_vals,
            polytope=polytope,
            time_scale=time_scale,
            scale_bits=scale_bits,
            evaluator=evaluator,
            section=section,
            transversality_ok=report.ok,
            permutation=permutation,
            alpha_fixed=alpha_fixed,
            x0_fixed=x0_fixed,
        )

    @property
    def d(self) -> int:
        return self.direction.d

    @property
    def s_last(self) -> float:
        return float(self.s_values[-1])

    def polytope_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.round(self.polytope.vertices, 12).tobytes())
        h.update(np.float64(self.polytope.volume).tobytes())
        return h.hexdigest()[:16]

    def flow_point(self, t: float) -> tuple[AlgebraicValue, ...]:
        """The orbit point {s + t*alpha} (normalized coordinates), exactly."""
        t_val = AlgebraicValue.coerce(t * self.time_scale)
        mask = (1 << self.scale_bits) - 1
        out = []
        for k in range(self.d):
            v = self.s_values[k] + t_val * self.direction.values[k]
            r = v.fixed(self.scale_bits) & mask
            out.append(AlgebraicValue.coerce(Fraction(r, 1 << self.scale_bits)))
        return tuple(out)

    def require_exact_capable(self):
        if self.evaluator is None:
            raise TransversalityError(
                "exact engine needs a transversal instance; use the quadrature engine"
            )

    # -- orbit helpers -------------------------------------------------

    def orbit_matrix(self, k0: int, count: int) -> np.ndarray:
        """Projected orbit points x_k for k = k0 .. k0+count-1, shape (count, d-1)."""
        cols = [
            frac_orbit_floats(self.alpha_fixed[i], self.scale_bits, count,
                              start_fixed=self.x0_fixed[i], k0=k0)
            for i in range(self.d - 1)
        ]
        return np.stack(cols, axis=1)

    def orbit_point(self, k: int) -> np.ndarray:
        return np.array([
            frac_point(self.alpha_fixed[i], self.scale_bits, k, self.x0_fixed[i])
            for i in range(self.d - 1)
        ])

    def section_values(self, xs: np.ndarray) -> np.ndarray:
        if self.section is not None:
            return self.section(xs[:, 0] if xs.ndim == 2 else xs)
        return self.evaluator.lengths(xs)


# ---------------------------------------------------------------------------
# exact engine
# ---------------------------------------------------------------------------


def _window_decomposition(t_end: float):
    """Split lifted time [s_d, s_d + T] at integers, snapping fuzz away."""
    k = math.floor(t_end)
    frac = t_end - k
    if frac < _INT_SNAP:
        frac = 0.0
    elif frac > 1.0 - _INT_SNAP:
        k += 1
        frac = 0.0
    return k, frac


def delta_T_exact(inst: FlowInstance, t: float) -> float:
    """Time integral of the indicator along the flow minus t * volume."""
    if t < 0:
        raise ValidationError("negative time")
    inst.require_exact_capable()
    if t == 0:
        return 0.0
    t_norm = t * inst.time_scale
    lam = inst.polytope.volume
    s_d = inst.s_last
    ev = inst.evaluator

    x0 = inst.orbit_point(0)
    k_end, theta = _window_decomposition(t_norm + s_d)
    if k_end == 0:
        value = ev.length(x0, s_d, s_d + t_norm) - t_norm * lam
        return value / inst.time_scale

    parts = [ev.length(x0, s_d, 1.0) - (1.0 - s_d) * lam]
    if k_end >= 2:
        xs = inst.orbit_matrix(1, k_end - 1)
        f = inst.section_values(xs)
        parts.append(float(np.sum(f - lam)))
    if theta > 0.0:
        xk = inst.orbit_point(k_end)
        parts.append(ev.length(xk, 0.0, theta) - theta * lam)
    return math.fsum(parts) / inst.time_scale


# ---------------------------------------------------------------------------
# quadrature engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureEstimate:
    value: float
    error_bound: float
    crossings: int
    step: float


def _indicator_chunk(inst: FlowInstance, t_mids: np.ndarray,
                     complement: bool) -> np.ndarray:
    alpha = inst.direction.floats()
    s = np.array([float(v) for v in inst.s_values])
    pts = np.mod(s[None, :] + t_mids[:, None] * alpha[None, :], 1.0)
    chi = inst.polytope.contains(pts).astype(np.float64)
    return 1.0 - chi if complement else chi


def delta_T_quadrature(inst: FlowInstance, t: float, step: float = 1e-3,
                       complement: bool = False) -> QuadratureEstimate:
    """Midpoint-rule estimate of the discrepancy at time t.

    Works on non-transversal instances too.  The reported error bound is
    step * (crossings/2 + 2), counting observed boundary crossings.
    """
    if t <= 0:
        return QuadratureEstimate(0.0, 0.0, 0, step)
    t_norm = t * inst.time_scale
    lam = inst.polytope.volume if not complement else 1.0 - inst.polytope.volume
    n = max(1, int(math.ceil(t_norm / step)))
    h = t_norm / n
    total = 0.0
    crossings = 0
    last = None
    chunk = 1 << 18
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n), dtype=np.float64)
        chi = _indicator_chunk(inst, (idx + 0.5) * h, complement)
        total += float(chi.sum())
        flips = int(np.sum(chi[1:] != chi[:-1]))
        if last is not None and len(chi) and chi[0] != last:
            flips += 1
        crossings += flips
        if len(chi):
            last = chi[-1]
    value = (h * total - t_norm * lam) / inst.time_scale
    err = h * (0.5 * crossings + 2.0) / inst.time_scale
    return QuadratureEstimate(value=value, error_bound=err, crossings=crossings, step=h)


def quadrature_delta_profile(inst: FlowInstance, t_max: float, step: float,
                             sample_every: int = 250,
                             complement: bool = False) -> "DiscrepancyTrace":
    """Running quadrature discrepancy sampled every ``sample_every`` steps.

    The trace metadata carries a single conservative error bound (full-run
    crossing count); each prefix sample obeys the same bound.
    """
    t_norm = t_max * inst.time_scale
    n = int(round(t_norm / step))
    lam = inst.polytope.volume if not complement else 1.0 - inst.polytope.volume
    ts, deltas = [], []
    running = 0.0
    crossings = 0
    last = None
    chunk = sample_every * max(1, (1 << 18) // sample_every)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        idx = np.arange(start, stop, dtype=np.float64)
        chi = _indicator_chunk(inst, (idx + 0.5) * step, complement)
        flips = int(np.sum(chi[1:] != chi[:-1]))
        if last is not None and len(chi) and chi[0] != last:
            flips += 1
        crossings += flips
        if len(chi):
            last = chi[-1]
        c = np.cumsum(chi)
        marks = np.arange(sample_every - 1 - (start % sample_every), stop - start,
                          sample_every, dtype=np.int64)
        for m in marks:
            t_here = (start + m + 1) * step
            ts.append(t_here / inst.time_scale)
            deltas.append((running + c[m]) * step - t_here * lam)
        running += float(c[-1]) if len(c) else 0.0
    meta = {
        "engine": "quadrature",
        "err_bound": step * (0.5 * crossings + 2.0) / inst.time_scale,
        "step": step,
        "crossings": crossings,
        "t_max": t_max,
        "complement": complement,
        "direction": inst.direction.literals(),
        "start": [v.literal() for v in inst.s_values],
        "volume": inst.polytope.volume,
        "polytope_hash": inst.polytope_hash(),
        "time_scale": inst.time_scale,
        "permutation": list(inst.permutation) if inst.permutation else None,
    }
    return DiscrepancyTrace(times=np.array(ts),
                            deltas=np.array(deltas) / inst.time_scale,
                            meta=meta)


# ---------------------------------------------------------------------------
# discrete orbits
# ---------------------------------------------------------------------------


def _orbit_columns(alpha_vals, s_vals, n: int, scale_bits: int) -> np.ndarray:
    cols = []
    mask = (1 << scale_bits) - 1
    for a, s in zip(alpha_vals, s_vals):
        step = AlgebraicValue.coerce(a).fixed(scale_bits)
        start = AlgebraicValue.coerce(s).fixed(scale_bits) & mask
        cols.append(frac_orbit_floats(step, scale_bits, n, start_fixed=start))
    return np.stack(cols, axis=1)


def discrete_discrepancy(alpha, s, target, n: int,
                         scale_bits: int = DEFAULT_FIXED_SCALE) -> float:
    """Birkhoff-sum discrepancy of the Kronecker sequence s + k*alpha.

    ``target`` may be a Box (half-open membership), a Polytope (closed), or
    a SectionFunction2D over the circle.  Works in any dimension >= 1; no
    normalization convention applies to translations.
    """
    alpha_vals = list(np.atleast_1d(np.asarray(alpha, dtype=object)))
    s_vals = list(np.atleast_1d(np.asarray(s, dtype=object)))
    if len(alpha_vals) != len(s_vals):
        raise ValidationError("alpha and s dimension mismatch")
    if n < 0:
        raise ValidationError("negative orbit length")
    if n == 0:
        return 0.0
    pts = _orbit_columns(alpha_vals, s_vals, n, scale_bits)

    if isinstance(target, Box):
        if target.d != pts.shape[1]:
            raise ValidationError("box dimension mismatch")
        hits = target.contains_fracs(pts)
        return float(hits.sum()) - n * target.volume
    if isinstance(target, Polytope):
        if target.d != pts.shape[1]:
            raise ValidationError("polytope dimension mismatch")
        hits = target.contains(pts)
        return float(hits.sum()) - n * target.volume
    if isinstance(target, SectionFunction2D):
        if pts.shape[1] != 1:
            raise ValidationError("section targets take a 1-dimensional rotation")
        vals = target(pts[:, 0])
        return float(vals.sum()) - n * target.mean()
    raise ValidationError(f"unsupported target {type(target).__name__}")


def discrete_decade_maxima(alpha, s, target: Box, n_max: int,
                           scale_bits: int = DEFAULT_FIXED_SCALE):
    """Per-decade maxima of |D_N| for N <= n_max.

    Returns a list of (decade_upper, max_abs_D) over decades
    (1, 10], (10, 100], ... up to n_max.
    """
    alpha_vals = list(np.atleast_1d(np.asarray(alpha, dtype=object)))
    s_vals = list(np.atleast_1d(np.asarray(s, dtype=object)))
    pts = _orbit_columns(alpha_vals, s_vals, n_max, scale_bits)
    hits = target.contains_fracs(pts).astype(np.float64)
    d_n = np.cumsum(hits) - target.volume * np.arange(1, n_max + 1)
    out = []
    lo = 1
    hi = 10
    while lo <= n_max:
        hi_eff = min(hi, n_max)
        seg = np.abs(d_n[lo - 1:hi_eff])
        out.append((hi_eff, float(seg.max())))
        lo, hi = hi + 1, hi * 10
    return out


# ---------------------------------------------------------------------------
# box-family discrepancy over a grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxSup:
    sup: float
    box_lo: tuple[float, ...]
    box_hi: tuple[float, ...]
    t: float
    grid: int


def _require_nonzero_coords(direction: Direction):
    for v in direction.values:
        fr = v.as_fraction()
        if (fr is not None and fr == 0) or float(v) == 0.0:
            raise ValidationError("box discrepancy needs every direction coordinate nonzero")


class _BoxSweep2D:
    """Shared state for grid box sups in the plane at integer times, s = 0.

    For a box [a1,b1] x [a2,b2] the unit-window section value at x is
    (G(x + b2*q) - G(x + a2*q)) / q with q = alpha_1 and
    G(u) = floor(u)*len + (clamped fractional part), which splits over grid
    values: summing B(u, c) = floor(u)*c + min(u - floor(u), c) over the
    orbit for each (shift c2, cap c1) pair reduces every grid box to a
    4-term combination of one (g+1) x (g+1) running matrix.
    """

    def __init__(self, inst: FlowInstance, grid: int):
        if inst.d != 2:
            raise ValidationError("the fast box sweep is planar")
        if any(abs(float(v)) < 1e-15 for v in inst.direction.values):
            raise ValidationError("zero direction coordinate")
        self.inst = inst
        self.g = grid
        self.alpha1 = float(inst.direction.values[0])
        levels = np.arange(grid + 1) / grid
        self.levels = levels
        self.shifts = levels * self.alpha1
        lo_idx, hi_idx = np.triu_indices(grid + 1, k=1)
        self.lo_idx, self.hi_idx = lo_idx, hi_idx
        width = levels[hi_idx] - levels[lo_idx]
        self.area = np.outer(width, width)  # rows: t-axis pair, cols: x-axis pair

    def sups(self, t_values: np.ndarray, want_argmax: bool = False):
        inst = self.inst
        g = self.g
        t_values = np.asarray(t_values, dtype=np.int64)
        if np.any(t_values <= 0):
            raise ValidationError("box sweep times must be positive integers")
        t_max = int(t_values.max())
        sups = np.zeros(len(t_values))
        best = [None] * len(t_values) if want_argmax else None

        carry = np.zeros((g + 1, g + 1))
        chunk = 4096
        eval_batch = 256
        order = np.argsort(t_values)
        pos = 0  # next t (in sorted order) not yet evaluated
        for start in range(0, t_max, chunk):
            count = min(chunk, t_max - start)
            x = frac_orbit_floats(inst.alpha_fixed[0], inst.scale_bits, count,
                                  start_fixed=inst.x0_fixed[0], k0=start)
            u = x[:, None] + self.shifts[None, :]
            fl = np.floor(u)
            fr = u - fl
            b = (fl[:, :, None] * self.levels[None, None, :]
                 + np.minimum(fr[:, :, None], self.levels[None, None, :]))
            cum = np.cumsum(b, axis=0)
            cum += carry[None, :, :]

            sel = []
            while pos < len(order):
                t_here = int(t_values[order[pos]])
                if t_here > start + count:
                    break
                sel.append((order[pos], t_here - start - 1))
                pos += 1
            for i in range(0, len(sel), eval_batch):
                batch = sel[i:i + eval_batch]
                rows = cum[[r for _, r in batch]]
                p2 = rows[:, self.hi_idx, :] - rows[:, self.lo_idx, :]
                q = p2[:, :, self.hi_idx] - p2[:, :, self.lo_idx]
                ts = t_values[[j for j, _ in batch]].astype(np.float64)
                delta = q / self.alpha1 - ts[:, None, None] * self.area[None, :, :]
                np.abs(delta, out=delta)
                flat = delta.reshape(len(batch), -1)
                local = flat.max(axis=1)
                for bi, (j, _) in enumerate(batch):
                    sups[j] = local[bi]
                    if want_argmax:
                        am = int(flat[bi].argmax())
                        r2, r1 = divmod(am, len(self.lo_idx))
                        best[j] = (
                            (self.levels[self.lo_idx[r1]], self.levels[self.lo_idx[r2]]),
                            (self.levels[self.hi_idx[r1]], self.levels[self.hi_idx[r2]]),
                        )
            carry = cum[-1].copy() if count else carry
        return (sups, best) if want_argmax else (sups, None)


def box_discrepancy_sup(direction, s, t, grid: int,
                        scale_bits: int = DEFAULT_FIXED_SCALE) -> BoxSup:
    """Largest |Delta_t| over all boxes with corners on the (1/grid) grid.

    A grid supremum is a lower bound for the true box-family supremum.  The
    planar zero-start integer-time case runs through a shared cumulative
    sweep; anything else falls back to per-box exact evaluation (fine for
    small grids, expensive otherwise).
    """
    if not isinstance(direction, Direction):
        direction = Direction.make(direction)
    _require_nonzero_coords(direction)
    if grid < 1:
        raise ValidationError("grid must be >= 1")
    s_vals = tuple(AlgebraicValue.coerce(v) for v in s)
    s_zero = all(v.as_fraction() == 0 for v in s_vals)

    if (direction.d == 2 and s_zero and float(t) == int(t) and t >= 1
            and direction.normalized):
        inst = FlowInstance.build(direction, s_vals, Polytope.unit_cube(2),
                                  scale_bits=scale_bits, want_section=False)
        sweep = _BoxSweep2D(inst, grid)
        sups, best = sweep.sups(np.array([int(t)]), want_argmax=True)
        (lo1, lo2), (hi1, hi2) = best[0]
        return BoxSup(sup=float(sups[0]), box_lo=(float(lo1), float(lo2)),
                      box_hi=(float(hi1), float(hi2)), t=float(t), grid=grid)

    # generic fallback: every grid box through the exact engine
    d = direction.d
    levels = [i / grid for i in range(grid + 1)]
    best_sup, best_lo, best_hi = -1.0, None, None
    axes = []
    for _ in range(d):
        axes.append([(levels[i], levels[j])
                     for i in range(grid + 1) for j in range(i + 1, grid + 1)])
    import itertools as _it

    for combo in _it.product(*axes):
        lo = tuple(c[0] for c in combo)
        hi = tuple(c[1] for c in combo)
        inst = FlowInstance.build(direction, s_vals, Polytope.box(lo, hi),
                                  scale_bits=scale_bits)
        val = abs(delta_T_exact(inst, t))
        if val > best_sup:
            best_sup, best_lo, best_hi = val, lo, hi
    return BoxSup(sup=best_sup, box_lo=best_lo, box_hi=best_hi, t=float(t), grid=grid)


def box_discrepancy_profile(direction, t_values, grid: int,
                            scale_bits: int = DEFAULT_FIXED_SCALE):
    """Grid box sup at many integer times (planar, start 0) in one sweep."""
    if not isinstance(direction, Direction):
        direction = Direction.make(direction)
    _require_nonzero_coords(direction)
    direction.require_normalized()
    inst = FlowInstance.build(direction, (0, 0), Polytope.unit_cube(2),
                              scale_bits=scale_bits, want_section=False)
    sweep = _BoxSweep2D(inst, grid)
    sups, _ = sweep.sups(np.asarray(t_values, dtype=np.int64))
    return sups


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscrepancyTrace:
    times: np.ndarray
    deltas: np.ndarray
    meta: dict

    def sup(self) -> float:
        return float(np.max(np.abs(self.deltas)))

    def sup_on(self, t_lo: float, t_hi: float) -> float:
        mask = (self.times >= t_lo) & (self.times <= t_hi)
        if not np.any(mask):
            raise ValidationError(f"no trace samples in [{t_lo}, {t_hi}]")
        return float(np.max(np.abs(self.deltas[mask])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T", "delta", "engine", "err_bound"])
        engine = self.meta.get("engine", "exact")
        err = self.meta.get("err_bound", 0.0)
        errs = err if np.ndim(err) else np.full(len(self.times), float(err))
        for t, v, e in zip(self.times, self.deltas, errs):
            w.writerow([f"{t:.17g}", f"{v:.17g}", engine, f"{e:.6g}"])
        return buf.getvalue()


def _sample_times(t_max: float, n_samples: int, schedule: str) -> np.ndarray:
    if schedule == "linear":
        return np.linspace(t_max / n_samples, t_max, n_samples)
    if schedule == "geometric":
        ts = np.geomspace(max(1.0, t_max / 10 ** 6), t_max, n_samples)
        return np.unique(ts)
    if schedule == "integer":
        step = max(1, int(t_max // n_samples))
        return np.arange(step, int(t_max) + 1, step, dtype=np.float64)
    raise ValidationError(f"unknown schedule {schedule!r}")


def discrepancy_trace(inst: FlowInstance, t_max: float, n_samples: int = 1000,
                      schedule: str = "linear") -> DiscrepancyTrace:
    """Sampled discrepancy curve with O(t_max) total section work.

    Full unit windows are accumulated once into prefix sums; each sample
    only adds its two partial windows.
    """
    inst.require_exact_capable()
    if t_max <= 0:
        raise ValidationError("t_max must be positive")
    times = _sample_times(t_max, n_samples, schedule)
    lam = inst.polytope.volume
    s_d = inst.s_last
    ev = inst.evaluator

    t_norm_max = t_max * inst.time_scale
    k_max, _ = _window_decomposition(t_norm_max + s_d)
    prefix = np.zeros(max(k_max, 1))
    if k_max >= 2:
        xs = inst.orbit_matrix(1, k_max - 1)
        f = inst.section_values(xs)
        prefix[1:k_max] = np.cumsum(f - lam)

    x0 = inst.orbit_point(0)
    first_full = ev.length(x0, s_d, 1.0) - (1.0 - s_d) * lam

    deltas = np.empty(len(times))
    for i, t in enumerate(times):
        t_norm = t * inst.time_scale
        k_end, theta = _window_decomposition(t_norm + s_d)
        if k_end == 0:
            deltas[i] = (ev.length(x0, s_d, s_d + t_norm) - t_norm * lam)
        else:
            val = first_full + prefix[min(k_end - 1, len(prefix) - 1)]
            if theta > 0.0:
                xk = inst.orbit_point(k_end)
                val += ev.length(xk, 0.0, theta) - theta * lam
            deltas[i] = val
        deltas[i] /= inst.time_scale

    meta = {
        "engine": "exact",
        "err_bound": 0.0,
        "t_max": t_max,
        "n_samples": len(times),
        "schedule": schedule,
        "direction": inst.direction.literals(),
        "start": [v.literal() for v in inst.s_values],
        "volume": lam,
        "polytope_hash": inst.polytope_hash(),
        "scale_bits": inst.scale_bits,
        "time_scale": inst.time_scale,
        "permutation": list(inst.permutation) if inst.permutation else None,
    }
    return DiscrepancyTrace(times=times, deltas=deltas, meta=meta)
