"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria that cannot be met are left failing; the printed detail says why.
"""

import itertools
import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from ietlab import (RectSet, birkhoff_sum, centered_tail_analysis, closest_visits, coexistence_search,
                    cylinder_measure, detect_rigid_towers, induction_trace, kochergin_sum_bound, lyapunov_estimate,
                    make_roof, random_iet, random_symlog_roof, rauzy_class_enumerate, rescale_to_mean_one,
                    resonant_mixing_scan, resonant_times, rotation, rotation_g_sum, roth_distortion_report,
                    shearing_report, tightness_report, trimmed_birkhoff_sum, trimming_terms, verify_certificate,
                    fit_exponential_tail)
from ietlab.cli import main
from ietlab.diagnostics import build_flow
from ietlab.rauzy import BOTTOM, TOP, path_from_kinds
from ietlab.rigidity import _safe_trace, certificate_from_state

import oracles

SYMMETRIC = {d: tuple(range(d, 0, -1)) for d in (2, 3, 4, 5)}


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance] criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# -- 1. exact cocycle -------------------------------------------------------------------

def test_criterion_01_exact_cocycle(capsys):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    bad = []
    for i in range(50):
        d = 2 + i % 4
        T = random_iet(SYMMETRIC[d], rng, exact=True)
        tr = induction_trace(T, 60, mode="zorich")
        for s in tr.states:
            q = s.cumulative
            lam0 = tuple(sum(q[r][c] * s.lengths[c] for c in range(d)) for r in range(d))
            ok = (tuple(sum(row[c] for row in q) for c in range(d)) == s.heights
                  and sum(l * h for l, h in zip(s.lengths, s.heights)) == 1 and lam0 == T.lengths)
            if not ok:
                bad.append((i, s.index))
        if len(tr) != 60:
            bad.append((i, "short"))
    elapsed = time.perf_counter() - start
    report(capsys, 1, not bad and elapsed < 60, f"50 exact IETs x 60 Zorich steps, {len(bad)} mismatches, "
                                                f"{elapsed:.1f} s")


# -- 2. continued fractions -----------------------------------------------------------------

def test_criterion_02_continued_fraction_heights(capsys):
    gen = random.Random(202)
    bad = 0
    for _ in range(20):
        alpha = Fraction(gen.getrandbits(256) | 1, 2**256)
        tr = induction_trace(rotation(alpha), 30, mode="zorich")
        q = oracles.distinct_denominators(oracles.cf_quotients(alpha, 40))
        bad += [max(s.heights) for s in tr.states] != q[:31]
    tr = induction_trace(rotation(oracles.golden_fraction(80)), 30, mode="zorich")
    golden_ok = [max(s.heights) for s in tr.states] == oracles.fibonacci(32)[1:]
    report(capsys, 2, bad == 0 and golden_ok, f"{20 - bad}/20 random rotations match, golden Fibonacci {golden_ok}")


# -- 3. Rauzy classes -----------------------------------------------------------------------

def test_criterion_03_rauzy_class_counts(capsys):
    start = time.perf_counter()
    counts = [len(rauzy_class_enumerate(SYMMETRIC[d]).vertices) for d in (2, 3, 4, 5)]
    elapsed = time.perf_counter() - start
    ref = [oracles.rauzy_class_size(SYMMETRIC[d]) for d in (2, 3, 4, 5)]
    ok = counts == ref == [2 ** (d - 1) - 1 for d in (2, 3, 4, 5)] == [1, 3, 7, 15] and elapsed < 1
    report(capsys, 3, ok, f"counts {counts}, {elapsed * 1000:.0f} ms")


# -- 4. cylinder measures -------------------------------------------------------------------

def _mc_kinds(perm, lam, steps):
    """Rauzy kinds of each sample by the two-row rule, vectorized over samples grouped by history."""
    lam = lam.copy()
    top, bottom = oracles.two_row(perm)
    groups = {(): (np.arange(len(lam)), top, bottom)}
    for _ in range(steps):
        nxt = {}
        for hist, (idx, t, b) in groups.items():
            win_top = lam[idx, t[-1] - 1] > lam[idx, b[-1] - 1]
            for kind, mask in ((TOP, win_top), (BOTTOM, ~win_top)):
                sub = idx[mask]
                w, l = (t[-1], b[-1]) if kind == TOP else (b[-1], t[-1])
                lam[sub, w - 1] -= lam[sub, l - 1]
                t2, b2 = oracles.rauzy_move_rows(t, b, kind)
                nxt[hist + (kind,)] = (sub, t2, b2)
        groups = nxt
    return {h: len(v[0]) for h, v in groups.items()}


def test_criterion_04_cylinder_measures(capsys):
    verts = rauzy_class_enumerate(SYMMETRIC[3]).vertices
    sums_ok = all(sum(cylinder_measure(path_from_kinds(v, ks)).measure
                      for ks in itertools.product((TOP, BOTTOM), repeat=n)) == 1
                  for v in verts for n in range(1, 5))
    rng = np.random.default_rng(404)
    N = 10**6
    worst = 0.0
    for v in verts:
        counts = _mc_kinds(v.images, rng.dirichlet(np.ones(3), N), 2)
        for ks in itertools.product((TOP, BOTTOM), repeat=2):
            p = float(cylinder_measure(path_from_kinds(v, ks)).measure)
            se = math.sqrt(p * (1 - p) / N)
            worst = max(worst, abs(counts[ks] / N - p) / se)
    report(capsys, 4, sums_ok and worst < 3, f"additivity {sums_ok}, worst Monte Carlo deviation {worst:.2f} SE")


# -- 5. trimming identity -------------------------------------------------------------------

def _trimmed_oracle(T, f, x, r):
    beta = np.array([float(b) for b in T.beta])
    pts = oracles.orbit(T.perm.images, list(T.lengths), x, r)
    terms = []
    for i in range(T.d):
        for c, y in ((f.c_plus[i], pts - beta[i]), (f.c_minus[i], beta[i + 1] - pts)):
            pos = np.flatnonzero(y > 0)
            if c and len(pos):
                keep = np.delete(pos, np.argmin(y[pos]))
                terms.extend(-c * np.log(y[keep]))
    k = np.minimum(np.searchsorted(beta[1:-1], pts, side="right"), T.d - 1)
    terms.extend(f.slopes[k] * pts + f.intercepts[k])
    return math.fsum(terms)


def test_criterion_05_trimming_identity(capsys):
    rng = np.random.default_rng(505)
    worst = 0.0
    for i in range(1000):
        d = 3 + i % 3
        T = random_iet(SYMMETRIC[d], rng)
        f = random_symlog_roof(T, rng)
        x = float(rng.uniform(0, 1))
        r = int(10 ** rng.uniform(0, 4))
        got = birkhoff_sum(T, f, x, r) - trimming_terms(f, closest_visits(T, x, r))
        ref = _trimmed_oracle(T, f, x, r)
        worst = max(worst, abs(got - ref) / abs(ref), abs(trimmed_birkhoff_sum(T, f, x, r) - ref) / abs(ref))
    zero = True
    for _ in range(50):
        T = random_iet(SYMMETRIC[4], rng)
        f = make_roof(T, rng.uniform(0.1, 1, 4), rng.uniform(0.1, 1, 4), None, symmetric=False)
        zero &= trimmed_birkhoff_sum(T, f, float(rng.uniform(0, 1)), 1) == 0.0
    report(capsys, 5, worst <= 1e-9 and zero, f"worst relative error {worst:.2e}, r=1 pure roof exactly 0: {zero}")


# -- 6. Kochergin bound ---------------------------------------------------------------------

def test_criterion_06_kochergin_bound(capsys):
    rng = np.random.default_rng(606)
    fails = 0
    for i in range(1000):
        n = int(rng.integers(1, 2000))
        delta = 10 ** rng.uniform(-6, -1)
        x = rng.uniform(0, 1) * delta + np.concatenate([[0.0], np.cumsum(delta * (1 + rng.exponential(1, n - 1)))])
        power = 1 + i % 2
        total, bound = kochergin_sum_bound(rng.permutation(x), delta, power)
        ref_sum = math.fsum(x ** -power)
        ref_bound = 1 / x[0] + (1 + math.log(n)) / delta if power == 1 else 1 / x[0] ** 2 + 2 / delta**2
        fails += not (total <= bound and ref_sum <= ref_bound and math.isclose(total, ref_sum, rel_tol=1e-12))
    report(capsys, 6, fails == 0, f"{1000 - fails}/1000 separated sets within the bound")


# -- 7. Denjoy-Koksma -----------------------------------------------------------------------

def _exact_pl(T, slopes, intercepts):
    beta = [Fraction(0), T.lengths[0], T.lengths[0] + T.lengths[1]]
    s = [Fraction(float(v)) for v in slopes]
    c = [Fraction(float(v)) for v in intercepts]
    integral = sum(s[i] * (beta[i + 1] ** 2 - beta[i] ** 2) / 2 + c[i] * (beta[i + 1] - beta[i]) for i in range(2))
    ends = [(s[i] * beta[i] + c[i], s[i] * beta[i + 1] + c[i]) for i in range(2)]
    var = (abs(s[0]) * beta[1] + abs(s[1]) * (beta[2] - beta[1]) + abs(ends[1][0] - ends[0][1])
           + abs(ends[0][0] - ends[1][1]))
    return integral, var


def test_criterion_07_denjoy_koksma(capsys):
    rng = np.random.default_rng(707)
    worst = -math.inf
    checks = cross = 0
    cross_ok = True
    for _ in range(20):
        T = random_iet((2, 1), rng, exact=True, denominator_bits=256)
        slopes, intercepts = rng.normal(0, 2, 2), rng.uniform(5, 8, 2)
        f = make_roof(T, [0, 0], [0, 0], {"slopes": list(slopes), "intercepts": list(intercepts)},
                      symmetric=False, allow_zero=True)
        integral, var = _exact_pl(T, slopes, intercepts)
        cross_ok &= abs(f.g_variation(circular=True) - float(var)) <= 1e-12 * float(var)
        tr = induction_trace(T, 26, mode="zorich")
        qs = sorted({max(s.heights) for s in tr.states})[:26]
        cross_ok &= qs == oracles.distinct_denominators(oracles.cf_quotients(T.lengths[0], 40))[:26]
        for x in (Fraction(int(v), 2**40) for v in rng.integers(0, 2**40, 5)):
            for q in qs:
                s = rotation_g_sum(T, f, x, q)
                worst = max(worst, float(abs(s - q * integral) - var))
                checks += 1
                if q <= 20000:
                    cross += 1
                    ref = birkhoff_sum(T.as_float(), f, float(x), q)
                    cross_ok &= abs(float(s) - ref) <= 1e-9 * abs(ref)
    ok = worst <= 1e-9 and cross_ok
    report(capsys, 7, ok, f"{checks} checks up to n=25, max excess over Var(g) {worst:.3g}, "
                          f"{cross} cross-checked against orbit sums: {cross_ok}")


# -- 8. golden certificates -----------------------------------------------------------------

def test_criterion_08_golden_certificates(capsys):
    T = rotation(oracles.golden_fraction(120), exact=True)
    tr = induction_trace(T, 60, mode="rauzy")
    certs = detect_rigid_towers(tr, 0.2)
    detail = f"{len(certs)} certificates at epsilon 0.2"
    ok = False
    if len(certs) >= 10:
        last = certs[-10:]
        ratios = [float(c.displacement / c.tower.width) for c in last]
        monotone = all(b < a for a, b in zip(ratios, ratios[1:]))
        Tf = T.as_float()
        ver = [verify_certificate(Tf, c) for c in last]
        match = all(v is not None and abs(max(map(abs, v)) - float(c.displacement)) <= 1e-12
                    for v, c in zip(ver, last))
        ok = monotone and match
        detail += f", ratios decreasing {monotone}, re-verified {match}"
    else:
        # best column per step: the displacement/base ratio of the golden rotation alternates 1/phi and phi
        best = [min(float(certificate_from_state(tr, n, j, 0.2).displacement
                          / certificate_from_state(tr, n, j, 0.2).tower.width) for j in range(2))
                for n in range(50, 60)]
        detail += f"; best displacement/|base| over the last 10 steps {sorted(set(round(b, 6) for b in best))}"
    report(capsys, 8, ok, detail)


# -- 9. tail fit ----------------------------------------------------------------------------

def test_criterion_09_tail_fit_calibration(capsys):
    rng = np.random.default_rng(909)
    start = time.perf_counter()
    rows = []
    for b in (0.5, 1.0, 2.0, 4.0):
        for name, draw in (("exp", lambda: rng.exponential(1 / b, 10**4)), ("laplace", lambda: rng.laplace(0, 1 / b, 10**4))):
            rep = fit_exponential_tail(draw())
            rows.append(abs(rep.b_hat - b) <= 0.1 * b and rep.r_squared > 0.98)
    elapsed = time.perf_counter() - start
    report(capsys, 9, all(rows) and elapsed < 5, f"{sum(rows)}/8 fits within 10% with r2 > 0.98, {elapsed:.2f} s")


# -- 10 and 11. pipeline on random 4-IETs ----------------------------------------------------

SCHEDULE = [0.45, 0.4, 0.35, 0.3]


@pytest.fixture(scope="module")
def pipeline_instances():
    out = []
    for seed in range(10):
        r = np.random.default_rng(1000 + seed)
        T = random_iet(SYMMETRIC[4], r)
        f = rescale_to_mean_one(random_symlog_roof(T, r))
        out.append((seed, T, f, _safe_trace(T, 20000, max_height=10**7)))
    return out


def test_criterion_10_exponential_tail_pipeline(capsys, pipeline_instances):
    start = time.perf_counter()
    passed = []
    heights = []
    for seed, T, f, tr in pipeline_instances:
        recs = coexistence_search(T, f, SCHEDULE, 60, 20000, max_height=10**7, trace=tr)
        by_height = {}
        for rec in recs:
            by_height.setdefault(rec.certificate.height, rec.certificate)
        certs = [by_height[h] for h in sorted(by_height)][-3:]
        heights.append(len(certs))
        if len(certs) < 3:
            passed.append(False)
            continue
        pairs = centered_tail_analysis(T, f, certs, 2000, seed=seed)
        tight = tightness_report([p[0] for p in pairs], 2.0)
        passed.append(tight.passed and all(rep.b_hat > 0 and rep.r_squared > 0.9 for _, rep in pairs))
    elapsed = time.perf_counter() - start
    report(capsys, 10, sum(passed) >= 7 and elapsed < 1800,
           f"{sum(passed)}/10 instances pass; certified heights below 1e7 per instance {heights} "
           f"(3 needed), {elapsed:.0f} s")


def _pairs(rng, count):
    out = []
    for _ in range(count):
        boxes = []
        for _ in range(2):
            x0, y0 = rng.uniform(0, 0.7), rng.uniform(0, 0.5)
            boxes.append(RectSet([(x0, x0 + 0.3, y0, y0 + 0.4)]))
        out.append(tuple(boxes))
    return out


def resonant_contrast(T, f, tr, epsilon, ks, pairs, samples, seed):
    """``(pair wins, shearing factor)`` comparing the ``k > 1`` resonant times with ``k = 1``, or ``None``."""
    res = resonant_times(T, epsilon, max(ks), 20000, trace=tr)
    by_q = {}
    for c in res:
        by_q.setdefault(c.q, {})[c.k] = c
    full = [q for q, row in by_q.items() if all(k in row for k in ks)]
    if not full:
        return None
    row = by_q[max(full)]
    chosen = [row[k] for k in ks]
    engine = build_flow(T, f, floor_budget=2 * 10**6)
    scan = resonant_mixing_scan(T, f, chosen, pairs, samples, seed, flow=engine.flow, factors=(1.0,))
    gap = {(r.k, r.pair): r.gap for r in scan.rows}
    wins = sum(all(gap[(k, p)] < gap[(1, p)] for k in ks[1:]) for p in range(len(pairs)))
    s1 = [shearing_report(T, f, float(c.r), samples=32, seed=seed, tower=c, engine=engine).s1_median_all
          for c in (chosen[0], chosen[-1])]
    factor = s1[1] / s1[0] if s1[0] > 0 else math.inf
    return wins, factor


def test_criterion_11_resonant_vs_rigid(capsys, pipeline_instances):
    pairs = _pairs(np.random.default_rng(1111), 10)
    found = 0
    wins_ok = shear_ok = 0
    for seed, T, f, tr in pipeline_instances:
        out = resonant_contrast(T, f, tr, 1 / 16, (1, 4, 8, 16), pairs, 10**4, seed)
        if out is None:
            continue
        found += 1
        wins, factor = out
        wins_ok += wins >= 8
        shear_ok += factor >= 5
    ok = wins_ok >= 7 and shear_ok >= 7
    report(capsys, 11, ok, f"{found}/10 instances have resonant times k=1,4,8,16 below height 1e7; "
                           f"correlation contrast on {wins_ok}, shearing factor >= 5 on {shear_ok}")


def test_resonant_contrast_runs_on_a_spiky_rotation():
    # exercises the criterion 11 machinery where resonances exist (larger epsilon, small k)
    T = rotation(oracles.from_quotients([2, 60, 3, 80, 2, 100, 1, 70, 4, 90, 2, 2]), exact=True).as_float()
    f = rescale_to_mean_one(make_roof(T, [0.6, 0.4], [0.3, 0.7], 0.5))
    tr = _safe_trace(T, 400, max_height=10**4)
    out = resonant_contrast(T, f, tr, 0.25, (1, 2), _pairs(np.random.default_rng(3), 2), 10**4, 5)
    assert out is not None
    wins, factor = out
    assert 0 <= wins <= 2 and factor > 0


# -- 12. Lyapunov ---------------------------------------------------------------------------

def test_criterion_12_lyapunov(capsys):
    start = time.perf_counter()
    rows = []
    ok = True
    for d in (4, 5):
        a = lyapunov_estimate(SYMMETRIC[d], 32, 10**4, seed=1)
        b = lyapunov_estimate(SYMMETRIC[d], 32, 10**4, seed=2)
        stable = abs(a.ratio - b.ratio) <= 0.1 * max(a.ratio, b.ratio)
        ok &= 0 < a.ratio < 1 and 0 < b.ratio < 1 and stable
        rows.append(f"d={d}: {a.ratio:.4f}/{b.ratio:.4f}")
    elapsed = time.perf_counter() - start
    report(capsys, 12, ok and elapsed < 600, f"{', '.join(rows)}, {elapsed:.0f} s")


# -- 13. Roth distortion --------------------------------------------------------------------

def _roth_M(seed):
    r = np.random.default_rng(seed)
    T = random_iet(SYMMETRIC[4], r, exact=True)
    return roth_distortion_report(induction_trace(T, 30, mode="roth"), 0.3).M


def test_criterion_13_roth_distortion(capsys):
    # common constant: 95th percentile of a held-out sample of 20 instances
    constant = float(np.quantile([_roth_M(9000 + i) for i in range(20)], 0.95))
    ms = [_roth_M(1300 + i) for i in range(20)]
    below = sum(m <= constant for m in ms)
    quot = [1] * 10 + [50] + [1] * 40
    rep = roth_distortion_report(induction_trace(rotation(oracles.from_quotients(quot), exact=True), 30,
                                                 mode="roth"), 0.3)
    k = int(np.argmax(rep.height_ratios))
    spike = k in (9, 10) and rep.height_ratios[k] > 5 * max(rep.height_ratios[:8])
    report(capsys, 13, below >= 18 and spike, f"{below}/20 below held-out 95th-percentile constant {constant:.3g}; "
                                              f"quotient-50 spike {rep.height_ratios[k]:.3g} at step {k}")


# -- 14. determinism ------------------------------------------------------------------------

RUNS = {
    "induct": ["induct", "--perm", "4,3,2,1", "--lengths", "0.1,0.2,0.3,0.4", "--steps", "60", "--mode", "zorich"],
    "towers": ["towers", "--alpha", "golden", "--steps", "30", "--epsilon", "1.2"],
    "resonance": ["resonance", "--alpha", "383583911482/773525712209", "--epsilon", "0.25", "--k-max", "4",
                  "--max-depth", "300"],
    "tails": ["tails", "--alpha", "golden", "--source", "rigid", "--epsilon", "1.2", "--certs", "3",
              "--max-height", "10000", "--samples", "1000", "--seed", "7"],
    "mixing": ["mixing", "--alpha", "383583911482/773525712209", "--epsilon", "0.25", "--k-max", "2",
               "--max-depth", "200", "--max-height", "400", "--floor-budget", "20000", "--samples", "10000",
               "--seed", "3"],
    "lyapunov": ["lyapunov", "--sample-perm", "4,3,2,1", "--count", "1", "--ensemble", "4", "--steps", "300",
                 "--seed", "5"],
    "rauzy-class": ["rauzy-class", "--perm", "5,4,3,2,1"],
    "roth": ["roth", "--sample-perm", "4,3,2,1", "--count", "3", "--steps", "30", "--epsilon", "0.3", "--seed", "9"],
}


def test_criterion_14_determinism(capsys, tmp_path):
    same = {}
    for name, argv in RUNS.items():
        codes = []
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}.json"
            codes.append(main(argv + ["--out", str(out)]))
            blobs.append(out.read_bytes())
        capsys.readouterr()
        same[name] = codes[0] == codes[1] and codes[0] in (0, 1) and blobs[0] == blobs[1]
        json.loads(blobs[0])
    ok = all(same.values())
    report(capsys, 14, ok, f"byte-identical reports: {sum(same.values())}/{len(same)} experiments "
                           f"{[k for k, v in same.items() if not v]}")
