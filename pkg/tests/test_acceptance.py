"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and run sizes are fixed here.  Run with ``pytest -v -s`` (or
look at the terminal summary) to see the criterion lines.
"""

import time

import numpy as np
import pytest

from diraclab.boundary import aps_condition, from_elliptic_data, random_elliptic_data
from diraclab.calderon import (block_formula_projection, calderon_subspaces, constant_pair,
                               decay_scan, duality_check, find_lambda0, graph_representation)
from diraclab.evolution import GridSection, fundamental_solution, integrate, trace_inequality_report
from diraclab.examples import (cylinder_family, hyperbolic_even_model, hyperbolic_odd_model,
                               mu_model, shipped_paths)
from diraclab.index_lab import (agranovic_dynin, draw_seeds, ext_index, make_draw, run_batch,
                                search_anticommuting_invertible)
from diraclab.subspace import (duality_report, random_projection, random_subspace,
                               reduce_by_projection, span, stability_shift)

from conftest import normal_form

DRAWS = 200
SEED = 3
DUALITY_TOL = 1e-8
SCAN_SLACK = 0.3

LINES = []


def report(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] C{criterion}: {detail}"
    LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def draws():
    """The shared randomized batch behind criteria 2 to 4."""
    return [make_draw(i, seq) for i, seq in enumerate(draw_seeds(SEED, DRAWS))]


def test_c01_constant_coefficient_sanity():
    t0 = time.perf_counter()
    d = normal_form([1.0, 0.0, -1.0, 0.0])
    rep = ext_index(aps_condition(d, 0.0, True), constant_pair(d), d)
    dt = time.perf_counter() - t0
    ok = rep.index == 2 and dt < 1.0
    assert report(1, ok, f"ext_index(H_<=) = {rep.index} (expected 2), {dt:.3f} s (< 1 s)")


def test_c02_windgen_batch():
    t0 = time.perf_counter()
    out = run_batch("windgen", DRAWS, SEED)
    dt = time.perf_counter() - t0
    dims = sorted({r["params"]["dim"] for r in out["results"]})
    coupled = {r["params"]["coupled"] for r in out["results"]}
    ok = out["ok"] and dt < 60 and dims == [2, 4, 6, 8, 12] and coupled == {True, False}
    assert report(2, ok, f"{DRAWS} draws, dims {dims}, max |residual| = "
                         f"{out['max_abs_residual']}, {dt:.1f} s (< 60 s)")


def test_c03_agranovic_dynin_and_discontinuity(draws):
    ag = run_batch("agranovic-dynin", DRAWS, SEED)
    disc = run_batch("discontinuity", DRAWS, SEED)
    rng = np.random.default_rng(SEED)
    worst = 0
    for draw in draws[:50]:
        d = draw.path.d
        B = from_elliptic_data(d, random_elliptic_data(d, 0.0, rng))
        worst = max(worst, abs(agranovic_dynin(B, draw.pair, d, 0.0)["elliptic_dims"]))
    ok = ag["ok"] and disc["ok"] and worst == 0
    assert report(3, ok, f"agranovic-dynin max {ag['max_abs_residual']}, discontinuity max "
                         f"{disc['max_abs_residual']}, dim F - dim E identity on 50 "
                         f"elliptic constructions max {worst}")


def test_c04_calderon_duality(draws):
    paths = shipped_paths()
    worst_dual, worst_block = 0.0, 0.0
    pairs = [(draw.path, draw.pair) for draw in draws]
    pairs += [(p, calderon_subspaces(p)) for p in paths.values()]
    for path, pair in pairs:
        d = path.d
        worst_dual = max(worst_dual, duality_check(pair, d))
        gd = graph_representation(pair, d, find_lambda0(pair, d))
        worst_block = max(worst_block, float(np.linalg.norm(block_formula_projection(gd)
                                                             - pair.p_ext, 2)))
    ok = worst_dual < DUALITY_TOL and worst_block < DUALITY_TOL
    assert report(4, ok, f"{len(pairs)} integrated paths, duality max {worst_dual:.2e}, "
                         f"block formula max {worst_block:.2e} (< 1e-8)")


def test_c05_bojarski_and_splitting():
    out = run_batch("bojarski", 100, SEED)
    two_term = max(abs(r["two_term"]) for r in out["results"])
    cancel = max(abs(r["cancellation"]) for r in out["results"])
    ok = out["ok"] and two_term == 0 and cancel == 0
    assert report(5, ok, f"100 doubled draws, max |residual| {out['max_abs_residual']}, "
                         f"orthogonal-complement case two-term {two_term}, cancellation {cancel}")


def test_c06_cobordism():
    out = run_batch("cobordism", DRAWS, SEED)
    gamma = 1j * np.diag([1.0, 1.0, 1.0, -1.0, 1.0, -1.0])
    search = search_anticommuting_invertible(gamma, 10, np.random.default_rng(SEED))
    by_defect = search.all_failed and all(k >= search.expected_defect > 0
                                          for k in search.rank_defects)
    ok = out["ok"] and by_defect
    assert report(6, ok, f"chiral index 0 on {DRAWS} Fredholm-type paths: {out['ok']}; "
                         f"unbalanced search {search.successes}/10 successes, "
                         f"rank defects {search.rank_defects}")


def test_c07_supersymmetric_splitting():
    out = run_batch("susy", 100, SEED)
    assert report(7, out["ok"], f"100 alpha-equipped draws, max |residual| "
                                f"{out['max_abs_residual']}")


def test_c08_examples():
    counts = {K: hyperbolic_even_model(K)[1]["count"] for K in range(2, 9)}
    even_ok = all(c == K - 1 for K, c in counts.items())
    odd = hyperbolic_odd_model(2)[1]
    slope_ok = abs(odd["growth_slope"] - 1.0) <= 0.05
    mu = mu_model(1)
    mu_ok = (mu["branch_t_minus_mu"]["in_L2"] and not mu["branch_t_mu"]["in_L2"]
             and mu["dim_c_max"] == mu["dim_c_ext"] == 1)
    ok = even_ok and slope_ok and mu_ok
    assert report(8, ok, f"even counts {counts}; odd growth slope {odd['growth_slope']:.5f} "
                         f"(1 +- 0.05); mu=1 dims {mu['dim_c_max']}/{mu['dim_c_ext']}")


def test_c09_decay_scan():
    t0 = time.perf_counter()
    path = cylinder_family(64, 0.5)
    pair = calderon_subspaces(path)
    s_values = (-0.5, 0.0, 0.5)
    scan = decay_scan(pair, path.d, [4.0, 8.0, 16.0, 32.0], s_values)
    dt = time.perf_counter() - t0
    ok = dt < 300
    parts = []
    for s in s_values:
        mid, far = scan.slope_mid[s], scan.slope_far[s]
        ok &= mid is not None and far is not None
        ok &= mid <= -0.5 - s + SCAN_SLACK and far <= -1.0 + SCAN_SLACK
        parts.append(f"s={s:+.1f} mid {mid:.3f}<={-0.5 - s + SCAN_SLACK:.1f} "
                     f"far {far:.3f}<={-1 + SCAN_SLACK:.1f}")
    assert report(9, ok, "; ".join(parts) + f"; {dt:.1f} s (< 300 s)")


def _pair(rng, n):
    kf, kg = int(rng.integers(0, n + 1)), int(rng.integers(0, n + 1))
    shared = int(rng.integers(0, min(kf, kg) + 1))
    common = rng.standard_normal((n, shared)) + 1j * rng.standard_normal((n, shared))
    F = span(np.hstack([common, rng.standard_normal((n, kf - shared))]), ambient_dim=n)
    G = span(np.hstack([common, rng.standard_normal((n, kg - shared))]), ambient_dim=n)
    return F, G


def test_c10_appendix_checks():
    rng = np.random.default_rng(SEED)
    dual = red = stab = 0
    for _ in range(500):
        n = int(rng.integers(1, 10))
        dual += duality_report(*_pair(rng, n)).holds
        B = random_subspace(n, int(rng.integers(0, n + 1)), rng)
        P = random_projection(n, int(rng.integers(0, n + 1)), rng)
        red += reduce_by_projection(B, P, check=False).holds
        Q = random_projection(n, int(rng.integers(0, n + 1)), rng)
        stab += stability_shift(B, P, Q, check=False).residual == 0
    sections, avals = [], []
    while len(sections) < 1000:
        m = int(rng.integers(2, 16))
        grid = np.unique(np.round(rng.uniform(0, rng.uniform(0.1, 10), m), 6))
        if grid.size < 2:
            continue
        sections.append(GridSection(grid, rng.standard_normal((grid.size, 3))
                                    + 1j * rng.standard_normal((grid.size, 3))))
        avals.append(float(10 ** rng.uniform(-3, 3)))
    trace = trace_inequality_report(sections, avals)
    ok = dual == red == stab == 500 and not trace.violations and trace.count == 1000
    assert report(10, ok, f"duality {dual}/500, reduction {red}/500, stability {stab}/500, "
                          f"trace inequality {len(trace.violations)} violations on "
                          f"{trace.count} sections (worst ratio {trace.worst_ratio:.3f})")


def test_c11_integrator_honesty():
    parts, ok = [], True
    for name, path in shipped_paths().items():
        fs = fundamental_solution(path)
        N = int(fs.integrator_stats["steps"])
        fine, _ = integrate(path, 0.0, path.r, 2 * N, np.eye(path.dim, dtype=complex))
        change = float(np.linalg.norm(fine - fs.Phi_r, 2))
        est = fs.integrator_stats["error_estimate"]
        ok &= change < est
        parts.append(f"{name} {change:.1e}<{est:.1e}")
    assert report(11, ok, "; ".join(parts))
