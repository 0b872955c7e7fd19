import itertools
import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ietlab import (ConeViolation, NonComposablePath, UndefinedStep, ZeroColumn, balance_ratio, cylinder_measure,
                    induction_trace, kerkhoff_extend, lyapunov_estimate, make_iet, markov_cylinder_check,
                    natural_extension_step, random_iet, rauzy_class_enumerate, rotation, rv_step)
from ietlab.rauzy import (BOTTOM, TOP, NaturalExtensionTriple, make_arrow, path_from_kinds, path_matrix,
                          sample_triple)
from ietlab.iet import Permutation

import oracles


def all_paths(start, n):
    return [path_from_kinds(start, kinds) for kinds in itertools.product((TOP, BOTTOM), repeat=n)]


def transpose(m):
    return [list(r) for r in zip(*m)]


# -- single steps ---------------------------------------------------------------------

def test_rv_step_two_intervals():
    T2, arrow = rv_step(make_iet((2, 1), [Fraction(7, 10), Fraction(3, 10)]))
    assert arrow.kind == BOTTOM
    assert T2.lengths == (Fraction(4, 7), Fraction(3, 7))


def test_rv_step_length_relation(rng):
    T = random_iet((4, 3, 2, 1), rng, exact=True)
    T2, arrow = rv_step(T)
    old = [sum(arrow.length_matrix[r][c] * T2.lengths[c] for c in range(4)) for r in range(4)]
    ratio = {old[i] / T.lengths[i] for i in range(4)}
    assert len(ratio) == 1


def test_rv_step_undefined_on_tie():
    with pytest.raises(UndefinedStep):
        rv_step(make_iet((3, 2, 1), [Fraction(1, 3)] * 3))


@pytest.mark.parametrize("perm", [(2, 1), (3, 2, 1), (4, 3, 2, 1), (2, 4, 1, 3), (5, 4, 3, 2, 1)])
def test_arrow_matrices_are_elementary(perm):
    for kind in (TOP, BOTTOM):
        m = np.array(make_arrow(perm, kind).matrix)
        d = len(perm)
        assert set(np.unique(m)) <= {0, 1}
        assert np.count_nonzero(m) == d + 1
        assert round(abs(np.linalg.det(m))) == 1


def test_two_interval_trace_is_subtractive_euclid():
    random.seed(1)
    for _ in range(10):
        alpha = Fraction(random.getrandbits(120) | 1, 2**120)
        tr = induction_trace(rotation(alpha), 60, mode="rauzy")
        a, b = alpha, 1 - alpha
        for s in tr.states[1:]:
            kind = BOTTOM if a > b else TOP
            a, b = (a - b, b) if a > b else (a, b - a)
            assert s.kinds == (kind,)
            assert list(s.lengths) == [a, b]


# -- traces ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["rauzy", "zorich"])
def test_heights_are_column_sums_exactly(mode, rng):
    for perm in [(3, 2, 1), (4, 3, 2, 1), (2, 5, 4, 1, 3)]:
        T = random_iet(perm, rng, exact=True)
        tr = induction_trace(T, 40, mode=mode)
        for s in tr.states:
            q = s.cumulative
            assert tuple(sum(row[c] for row in q) for c in range(T.d)) == s.heights
            assert sum(l * h for l, h in zip(s.lengths, s.heights)) == 1
            lam0 = [sum(q[r][c] * s.lengths[c] for c in range(T.d)) for r in range(T.d)]
            assert tuple(lam0) == T.lengths


def test_cocycle_block_identity(rng):
    T = random_iet((4, 3, 2, 1), rng, exact=True)
    tr = induction_trace(T, 30, mode="zorich")
    for m, n in [(0, 30), (5, 17), (12, 30), (29, 30)]:
        qm, qmn, qn = (np.array(x, dtype=object) for x in (tr.cumulative(m), tr.block(m, n), tr.cumulative(n)))
        assert (qm.dot(qmn) == qn).all()


def test_heights_positive_and_max_nondecreasing(rng):
    T = random_iet((5, 4, 3, 2, 1), rng)
    tr = induction_trace(T, 300, mode="rauzy", store_matrices=False)
    mx = [max(s.heights) for s in tr.states]
    assert all(min(s.heights) >= 1 for s in tr.states)
    assert all(b >= a for a, b in zip(mx, mx[1:]))


def test_zorich_steps_are_maximal_runs(rng):
    T = random_iet((4, 3, 2, 1), rng, exact=True)
    z = induction_trace(T, 25, mode="zorich")
    for s in z.steps:
        assert len(set(s.kinds)) == 1
    for a, b in zip(z.steps, z.steps[1:]):
        assert a.kinds[0] != b.kinds[0]
    r = induction_trace(T, z.steps[-1].rv_index, mode="rauzy")
    assert r.states[-1].heights == z.states[-1].heights


def test_golden_zorich_heights_are_fibonacci():
    tr = induction_trace(rotation(oracles.golden_fraction(80)), 40, mode="zorich")
    fib = oracles.fibonacci(42)[1:]
    assert [max(s.heights) for s in tr.states] == fib
    assert [tuple(sorted(s.heights)) for s in tr.states[1:]] == [(fib[k - 1], fib[k]) for k in range(1, 41)]


def test_continued_fraction_denominators():
    random.seed(7)
    for _ in range(20):
        alpha = Fraction(random.getrandbits(256) | 1, 2**256)
        tr = induction_trace(rotation(alpha), 30, mode="zorich")
        q = oracles.distinct_denominators(oracles.cf_quotients(alpha, 40))
        assert [max(s.heights) for s in tr.states] == q[:31]


def test_undefined_step_carries_partial_trace():
    T = make_iet((3, 2, 1), [Fraction(3, 10), Fraction(3, 10), Fraction(4, 10)])
    with pytest.raises(UndefinedStep) as err:
        induction_trace(T, 10, mode="rauzy")
    assert err.value.partial is not None and err.value.step >= 1


def test_trace_json_uses_decimal_strings(rng):
    T = random_iet((4, 3, 2, 1), rng, exact=True, denominator_bits=1024)
    tr = induction_trace(T, 140, mode="zorich")
    data = json.loads(json.dumps(tr.to_dict()))
    last = data["states"][-1]
    assert [int(h) for h in last["heights"]] == list(tr.states[-1].heights)
    assert max(tr.states[-1].heights) > 2**64
    assert int(data["cumulative"][-1][0][0]) == tr.states[-1].cumulative[0][0]


# -- Rauzy classes ------------------------------------------------------------------

@pytest.mark.parametrize("d,count", [(2, 1), (3, 3), (4, 7), (5, 15)])
def test_symmetric_class_sizes(d, count):
    g = rauzy_class_enumerate(tuple(range(d, 0, -1)))
    assert len(g.vertices) == count == 2 ** (d - 1) - 1 == oracles.rauzy_class_size(tuple(range(d, 0, -1)))
    out = {}
    for a in g.arrows:
        out.setdefault(a.from_perm, []).append(a.kind)
    assert all(sorted(v) == [TOP, BOTTOM] for v in out.values())


def test_two_interval_class_self_loops():
    g = rauzy_class_enumerate((2, 1))
    assert len(g.vertices) == 1 and len(g.arrows) == 2
    assert all(a.to_perm == a.from_perm for a in g.arrows)


def test_non_symmetric_class_matches_oracle():
    for perm in [(2, 4, 1, 3), (3, 1, 4, 2), (2, 5, 3, 1, 4)]:
        assert len(rauzy_class_enumerate(perm).vertices) == oracles.rauzy_class_size(perm)


def test_dot_export():
    dot = rauzy_class_enumerate((3, 2, 1)).to_dot()
    assert dot.startswith("digraph") and dot.count("->") == 6


# -- cylinders and balance ----------------------------------------------------------

def test_empty_path_measure_one():
    assert cylinder_measure([], start=(3, 2, 1)).measure == 1


def test_two_interval_first_step_measures():
    ms = [cylinder_measure(p).measure for p in all_paths((2, 1), 1)]
    assert ms == [Fraction(1, 2), Fraction(1, 2)]
    rng = np.random.default_rng(0)
    lam = rng.dirichlet([1, 1], size=10**5)
    frac = np.mean(lam[:, 1] > lam[:, 0])
    assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / 10**5)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cylinder_additivity_d3(n):
    for v in rauzy_class_enumerate((3, 2, 1)).vertices:
        assert sum(cylinder_measure(p).measure for p in all_paths(v, n)) == 1


def test_cylinder_measures_nest():
    for p in all_paths((4, 3, 2, 1), 3):
        for k in range(1, 3):
            assert cylinder_measure(p).measure <= cylinder_measure(p[:k]).measure


def test_non_composable_path():
    a = make_arrow((3, 2, 1), TOP)
    b = make_arrow((3, 2, 1), BOTTOM)
    with pytest.raises(NonComposablePath):
        cylinder_measure([b, b] if b.to_perm != b.from_perm else [a, make_arrow(a.to_perm, TOP), b])


def test_balance_examples():
    assert balance_ratio([[1, 0], [0, 1]]) == 1.0
    assert balance_ratio(make_arrow((2, 1), TOP).matrix) == 2.0
    with pytest.raises(ZeroColumn):
        balance_ratio([[1, 0], [1, 0]])


@given(st.lists(st.sampled_from([TOP, BOTTOM]), min_size=1, max_size=12), st.sampled_from([TOP, BOTTOM]))
def test_column_max_at_most_doubles(kinds, last):
    path = path_from_kinds((4, 3, 2, 1), kinds)
    m = path_matrix(path)
    m2 = path_matrix(path + [make_arrow(path[-1].to_perm, last)])
    cmax = max(sum(r[c] for r in m) for c in range(4))
    cmax2 = max(sum(r[c] for r in m2) for c in range(4))
    assert cmax2 <= 2 * cmax


def test_balanced_distortion_sandwich():
    res = kerkhoff_extend([], 3.0, start=(3, 2, 1), min_extra=3)
    d = 3
    for g in res.extensions[:10]:
        C = balance_ratio(path_matrix(g))
        end = g[-1].to_perm
        subs = all_paths(end, 2)
        for s1, s2 in itertools.combinations(subs, 2):
            inner = cylinder_measure(s1).measure / cylinder_measure(s2).measure
            outer = cylinder_measure(list(g) + s1).measure / cylinder_measure(list(g) + s2).measure
            r = outer / inner
            assert C ** (-d) <= r <= C ** d


def test_kerkhoff_two_intervals():
    res = kerkhoff_extend([], 3.0, start=(2, 1))
    assert res.extensions and res.conditional_measure > Fraction(1, 3)
    words = [tuple(a.kind for a in e) for e in res.extensions]
    for u, v in itertools.permutations(words, 2):
        assert v[:len(u)] != u


def test_kerkhoff_extensions_keep_prefix():
    base = path_from_kinds((4, 3, 2, 1), [TOP, BOTTOM, BOTTOM])
    res = kerkhoff_extend(base, 4.0, node_budget=10**5)
    assert res.extensions
    for e in res.extensions:
        assert tuple(e[:3]) == tuple(base)
        m = path_matrix(e)
        assert balance_ratio(m) <= 4.0
    assert 0 < res.conditional_measure <= 1


# -- natural extension ----------------------------------------------------------------

@pytest.mark.parametrize("perm", [(2, 1), (3, 2, 1), (4, 3, 2, 1), (2, 4, 1, 3)])
def test_natural_extension_round_trip(perm, rng):
    for _ in range(100):
        t = sample_triple(perm, rng)
        t2 = natural_extension_step(t)
        assert t2.area == pytest.approx(t.area, abs=1e-10)
        t3 = natural_extension_step(t2, "backward")
        assert t3.perm == t.perm
        assert np.allclose(t3.lam, t.lam, atol=1e-10)
        assert np.allclose(t3.tau, t.tau, atol=1e-10)


def test_backward_type_from_tau_sign(rng):
    for _ in range(100):
        t = sample_triple((4, 3, 2, 1), rng)
        d = 4
        jd = t.perm.images.index(d)
        kind = TOP if t.lam[d - 1] > t.lam[jd] else BOTTOM
        t2 = natural_extension_step(t)
        assert (sum(t2.tau) < 0) == (kind == TOP)


def test_cone_violation():
    t = NaturalExtensionTriple(Permutation((3, 2, 1)), (0.2, 0.3, 0.5), (-1.0, 0.5, 0.2))
    with pytest.raises(ConeViolation):
        natural_extension_step(t)


def test_markov_length_one_paths():
    for kind in (TOP, BOTTOM):
        rep = markov_cylinder_check(path_from_kinds((4, 3, 2, 1), [kind]), 1000, seed=3)
        assert rep.failures == 0


def test_markov_length_three_d3():
    rep = markov_cylinder_check(path_from_kinds((3, 2, 1), [TOP, BOTTOM, TOP]), 1000, seed=4)
    assert rep.failures == 0


def test_markov_outside_cylinder_fails_sometimes():
    rep = markov_cylinder_check(path_from_kinds((3, 2, 1), [TOP, BOTTOM, TOP]), 1000, seed=5, outside=True)
    assert rep.failures > 0


# -- Lyapunov exponents -----------------------------------------------------------

def test_lyapunov_two_intervals():
    est = lyapunov_estimate((2, 1), 4, 300, seed=1)
    assert est.lambda1 > 0 and est.lambda2 == 0.0


def test_lyapunov_four_intervals_ratio_and_stability():
    a = lyapunov_estimate((4, 3, 2, 1), 8, 1000, seed=1)
    b = lyapunov_estimate((4, 3, 2, 1), 8, 1000, seed=2)
    assert 0 < a.ratio < 1 and 0 < b.ratio < 1
    assert abs(a.lambda1 - b.lambda1) <= 0.05 * a.lambda1


def test_lyapunov_deterministic():
    a = lyapunov_estimate((3, 2, 1), 3, 200, seed=9)
    b = lyapunov_estimate((3, 2, 1), 3, 200, seed=9)
    assert a.to_dict() == b.to_dict()
