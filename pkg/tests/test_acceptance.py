"""Acceptance suite: ten end-to-end checks with explicit tolerances.

Each test prints (and registers for the terminal summary) one PASS/FAIL
line including the measured runtime against its budget.  The checks cover
the full pipeline: exact evaluation, quadrature cross-validation, certified
discrepancy bounds, grid-box suprema, the discrete/continuous contrast,
Fourier exactness and decay envelopes, section integrity, the Diophantine
toolbox, and the transversality failure mode.
"""
from __future__ import annotations

import json
import time

import mpmath
import numpy as np
import pytest

from torusflow.algebraic import AlgebraicValue, parse_literal
from torusflow.cli import EXIT_VALIDATION, main
from torusflow.diophantine import (
    continued_fraction,
    diophantine_series,
    dyadic_spacing_audit,
    materialize_dyadic_block,
    schmidt_inequality_scan,
)
from torusflow.engine import (
    FlowInstance,
    box_discrepancy_profile,
    delta_T_exact,
    delta_T_quadrature,
    discrepancy_trace,
    discrete_decade_maxima,
    quadrature_delta_profile,
)
from torusflow.errors import TransversalityError
from torusflow.fourier import (
    envelope_fit,
    flag_forms_of_arrangement,
    fourier_coeff_exact_2d,
    fourier_coeffs_2d,
    per_coefficient_bound,
    polygon_discrepancy_bound,
)
from torusflow.geometry import (
    Box,
    Direction,
    Polytope,
    arrangement_cells,
    build_piecewise_linear_section,
    random_polygon,
    shared_edge_checks,
)

ZERO = parse_literal("0")
PARALLELOGRAM = [(0.05, 0.05), (0.35, 0.05),
                 (0.7990731195102494, 0.3675426480542942),
                 (0.4990731195102494, 0.3675426480542942)]
# Direct continuation of sum 1/(n^2 ||n alpha||), 10^4 < n <= 10^5, for
# alpha = sqrt(2) - 1 (mpmath, 50 digits); the certified tail must dominate it.
SERIES_CONTINUATION = 0.0020884223948037220538


def _check(acceptance_line, num, name, ok, detail, elapsed, budget):
    verdict = "PASS" if ok else "FAIL"
    acceptance_line(f"[crit {num:02d}] {verdict} {name}: {detail} "
                    f"({elapsed:.2f} s; budget {budget:.0f} s)")
    assert ok, f"{name}: {detail}"
    assert elapsed < budget, f"{name}: runtime {elapsed:.2f} s over budget {budget} s"


def test_criterion_01_null_sets(acceptance_line):
    """The full cube is a null set for the continuous discrepancy."""
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(20):
        d = 2 if i % 2 == 0 else 3
        alpha = [AlgebraicValue.coerce(float(v)) for v in rng.uniform(0.1, 0.9, d)]
        start = [AlgebraicValue.coerce(float(v)) for v in rng.uniform(0, 1, d)]
        inst = FlowInstance.build(alpha, start, Polytope.unit_cube(d))
        t = float(rng.uniform(1, 100))
        worst = max(worst, abs(delta_T_exact(inst, t)))
    elapsed = time.time() - t0
    _check(acceptance_line, 1, "null-set exactness", worst <= 1e-9,
           f"worst |Delta_T| = {worst:.3g} <= 1e-9 over 20 random cube flows",
           elapsed, 1.0)


def test_criterion_02_quadrature_oracle(acceptance_line):
    """Exact engine vs. midpoint quadrature at step 1e-5 on random polygons."""
    t0 = time.time()
    rng = np.random.default_rng(20260817)
    dirs = [Direction.make([parse_literal("sqrt(2) - 1"), parse_literal("1")]),
            Direction.make([parse_literal("sqrt(3) - 1"), parse_literal("1")])]
    worst = 0.0
    for i in range(10):
        poly = random_polygon(rng, int(rng.integers(3, 8)))
        inst = FlowInstance.build(dirs[i % 2], (ZERO, ZERO), poly)
        exact = delta_T_exact(inst, 50.0)
        quad = delta_T_quadrature(inst, 50.0, step=1e-5)
        worst = max(worst, abs(exact - quad.value))
    elapsed = time.time() - t0
    _check(acceptance_line, 2, "quadrature agreement", worst <= 1e-3,
           f"worst |exact - quadrature| = {worst:.3g} <= 1e-3 on 10 polygons",
           elapsed, 60.0)


def test_criterion_03_certified_bound(acceptance_line, triangle, silver,
                                      silver_direction, triangle_instance):
    """Every sampled integer-time discrepancy sits below the certificate."""
    t0 = time.time()
    series = diophantine_series(silver, 100000)
    cert = polygon_discrepancy_bound(triangle, silver_direction, series,
                                     drop_additive=True)
    trace = discrepancy_trace(triangle_instance, 10000.0, n_samples=1000,
                              schedule="integer")
    violations = int(np.sum(np.abs(trace.deltas) > cert.bound_value))
    elapsed = time.time() - t0
    _check(acceptance_line, 3, "certified discrepancy bound", violations == 0,
           f"0 of 1000 integer times exceed bound {cert.bound_value:.4f} "
           f"(observed sup {trace.sup():.4f})" if violations == 0 else
           f"{violations} violations of bound {cert.bound_value:.4f}",
           elapsed, 120.0)


def test_criterion_04_box_sup_plateau(acceptance_line):
    """Grid-box discrepancy sup stays flat over a decade of late times."""
    t0 = time.time()
    direction = [parse_literal("sqrt(2)"), parse_literal("1")]
    ts = np.arange(1, 100001, dtype=np.int64)
    sups = box_discrepancy_profile(direction, ts, 16)
    early = float(sups[:10000].max())
    late = float(sups[9999:].max())
    elapsed = time.time() - t0
    _check(acceptance_line, 4, "late-time plateau", late <= 1.10 * early,
           f"sup[1e4,1e5] = {late:.6f} <= 1.10 x sup(0,1e4] = 1.10 x {early:.6f}",
           elapsed, 300.0)


def test_criterion_05_discrete_growth(acceptance_line):
    """Kronecker-sequence decade maxima keep growing where the flow plateaus."""
    t0 = time.time()
    gold = parse_literal("(sqrt(5) - 1) / 2")
    rows = discrete_decade_maxima([gold], [ZERO], Box.make((0.0,), (0.5,)), 10 ** 6)
    by_decade = dict(rows)
    maxima = [by_decade[10 ** k] for k in range(3, 7)]
    strict = all(b > a for a, b in zip(maxima, maxima[1:]))
    elapsed = time.time() - t0
    _check(acceptance_line, 5, "discrete decade growth", strict,
           f"per-decade maxima over (1e2,1e6] = {maxima} strictly increasing",
           elapsed, 30.0)


def test_criterion_06_fourier_exactness(acceptance_line, triangle,
                                        silver_direction, triangle_section):
    t0 = time.time()
    sec = triangle_section
    mean_err = abs(fourier_coeff_exact_2d(sec, 0).value - triangle.volume)
    k = per_coefficient_bound(triangle, silver_direction)
    ns = np.arange(1, 10001)
    mags = np.abs(fourier_coeffs_2d(sec, 10000))
    bound_ok = bool(np.all(mags <= k / ns ** 2 * (1 + 1e-12)))
    xs = (np.arange(200000) + 0.5) / 200000.0
    fx = sec(xs)
    worst_quad = 0.0
    for n in range(1, 101):
        ref = np.mean(fx * np.exp(-2j * np.pi * n * xs))
        worst_quad = max(worst_quad, abs(mags[n - 1] - abs(ref)))
    ok = mean_err <= 1e-10 and bound_ok and worst_quad <= 1e-8
    elapsed = time.time() - t0
    _check(acceptance_line, 6, "Fourier exactness", ok,
           f"|f(0)-vol| = {mean_err:.2g}, decay bound holds to n=1e4, "
           f"worst quadrature gap (n<=100) = {worst_quad:.2g}",
           elapsed, 60.0)


def test_criterion_07_section_integrity(acceptance_line, box3_direction):
    t0 = time.time()
    rng = np.random.default_rng(77)
    dirs = [Direction.make([parse_literal("sqrt(2) - 1"), parse_literal("1")]),
            Direction.make([parse_literal("sqrt(3) - 1"), parse_literal("1")])]
    worst2 = 0.0
    for i in range(50):
        poly = random_polygon(rng, int(rng.integers(3, 9)))
        sec = build_piecewise_linear_section(poly, dirs[i % 2])
        bp = np.asarray(sec.breakpoints)
        right = sec.intercepts[:-1] + sec.slopes[:-1] * bp[1:-1]
        left = sec.intercepts[1:] + sec.slopes[1:] * bp[1:-1]
        jump = float(np.max(np.abs(right - left))) if len(bp) > 2 else 0.0
        wrap = abs((sec.intercepts[-1] + sec.slopes[-1]) - sec.intercepts[0])
        worst2 = max(worst2, jump, wrap, abs(sec.mean() - poly.volume))
    worst3 = 0.0
    instances = [Polytope.box((0, 0, 0), (b, b, b)) for b in (0.3, 0.4, 0.55)]
    for _ in range(2):
        instances.append(Polytope.from_vertices(rng.uniform(0.05, 0.95, (4, 3))))
    for poly in instances:
        arr = arrangement_cells(poly, box3_direction)
        resid = max(c.fit_residual for c in arr.cells)
        edges = max((abs(a - b) for _, a, b in shared_edge_checks(arr)), default=0.0)
        worst3 = max(worst3, resid, edges, abs(arr.total_area() - 1.0))
    ok = worst2 <= 1e-10 and worst3 <= 1e-9
    elapsed = time.time() - t0
    _check(acceptance_line, 7, "section integrity", ok,
           f"planar worst defect {worst2:.2g} <= 1e-10 (50 polygons); "
           f"3d worst defect {worst3:.2g} <= 1e-9 (5 instances)",
           elapsed, 120.0)


def test_criterion_08_envelope_stability(acceptance_line, box3_arrangement):
    t0 = time.time()
    forms = flag_forms_of_arrangement(box3_arrangement)
    fit = envelope_fit(box3_arrangement, forms, inner=(0, 25), outer=(25, 50))
    elapsed = time.time() - t0
    _check(acceptance_line, 8, "envelope shell stability", fit.stable,
           f"C_fit inner {fit.c_inner:.4f} vs outer {fit.c_outer:.4f} "
           f"(ratio {fit.c_outer / fit.c_inner:.3f}, factor-2 window)",
           elapsed, 300.0)


def test_criterion_09_diophantine_suite(acceptance_line, silver):
    t0 = time.time()
    cf = continued_fraction(silver, 40)
    quotients_ok = set(cf.partial_quotients[1:]) == {2} and cf.depth == 40
    with mpmath.workprec(400):
        x = mpmath.sqrt(2) - 1
        bracket_ok = True
        for ell in range(1, 20):
            p, q = cf.convergents[ell]
            lo, hi = cf.convergent_error_bounds(ell)
            true = abs(q * x - p)
            inside = (mpmath.mpf(lo.numerator) / lo.denominator <= true
                      <= mpmath.mpf(hi.numerator) / hi.denominator)
            bracket_ok = bracket_ok and inside and hi < 1.0 / cf.denominators[ell + 1]
    form = np.array([1.0])
    scan = schmidt_inequality_scan([silver], [form], 0.5, 10000)
    audit_violations = 0
    for ell in range(2, 22):
        block = materialize_dyadic_block([form], 0.5, scan.fitted_c, ell, [ell],
                                         dim=1)
        audit_violations += len(dyadic_spacing_audit([silver], block).violations)
    series = diophantine_series(silver, 10000)
    tail_ok = series.tail_bound >= SERIES_CONTINUATION
    ok = quotients_ok and bracket_ok and audit_violations == 0 and tail_ok
    elapsed = time.time() - t0
    _check(acceptance_line, 9, "Diophantine suite", ok,
           f"40 quotients = 2, error brackets hold, 20 dyadic blocks clean, "
           f"tail {series.tail_bound:.4f} >= direct continuation "
           f"{SERIES_CONTINUATION:.6f}",
           elapsed, 60.0)


def test_criterion_10_tangency_blowup(acceptance_line, tmp_path,
                                      triangle_instance, capsys):
    """Tangent facets: exact engine refuses; quadrature shows unbounded growth."""
    t0 = time.time()
    par = Polytope.from_vertices(PARALLELOGRAM)
    direction = [parse_literal("sqrt(2)"), parse_literal("1")]
    inst = FlowInstance.build(direction, (ZERO, ZERO), par)
    with pytest.raises(TransversalityError):
        delta_T_exact(inst, 100.0)
    cfg = {
        "name": "tangent-parallelogram",
        "direction": ["sqrt(2)", "1"],
        "start": ["0", "0"],
        "polytope": {"vertices": [list(v) for v in PARALLELOGRAM]},
        "schedule": {"t_max": 100.0, "n_samples": 10, "kind": "linear"},
    }
    cfg_path = tmp_path / "tangent.json"
    cfg_path.write_text(json.dumps(cfg))
    exit_code = main(["compute", "--config", str(cfg_path)])
    stderr = capsys.readouterr().err
    quad = quadrature_delta_profile(inst, 100000.0, step=1e-3, sample_every=250)
    tri_trace = discrepancy_trace(triangle_instance, 100000.0, n_samples=20000,
                                  schedule="integer")
    ratio = quad.sup() / tri_trace.sup()
    ok = exit_code == EXIT_VALIDATION and "transversal" in stderr and ratio > 3.0
    elapsed = time.time() - t0
    _check(acceptance_line, 10, "tangency failure mode", ok,
           f"exact engine exits {exit_code} (validation), quadrature sup "
           f"{quad.sup():.3f} = {ratio:.1f} x bounded triangle sup "
           f"{tri_trace.sup():.4f} (> 3 required)",
           elapsed, 600.0)
