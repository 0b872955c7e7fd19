"""Statistics of centered Birkhoff sums, correlations of the special flow and shearing.

Random streams: a master ``seed`` is split with ``numpy.random.SeedSequence``;
sub-stream ``i`` (``SeedSequence(seed).spawn(n)[i]``) serves the ``i``-th
certificate, pair or interval batch, so results do not depend on the order
in which independent pieces are evaluated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import InsufficientTail, NoDominantTower, ValidationError
from .iet import IET, iterate
from .rauzy import RauzyTrace
from .renorm import FLOOR_BUDGET, RenormalizedFlow
from .rigidity import (VERIFY_BUDGET, RigidityCertificate, _column_data, _safe_trace, almost_cylinder)
from .roof import SymLogRoof, eval_roof
from .towers import TowerSums

MIN_TAIL = 50
QUANTILES = (50, 90, 99)


def substreams(seed: int, n: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def kendall_tau(values) -> float:
    """Kendall rank correlation of ``values`` against their index (0 for fewer than 2 values)."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 2:
        return 0.0
    diff = np.sign(v[None, :] - v[:, None])
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    return float(diff[upper].sum() / upper.sum())


# -- tails -------------------------------------------------------------------

@dataclass
class TailReport:
    """Fit of ``log P(|X| > s) ~ log C - b s`` on ``[q50, q99]`` of ``|X|``."""

    C_hat: float
    b_hat: float
    r_squared: float
    quantiles: tuple
    passed: bool
    r2_min: float
    fit_range: tuple
    sample_count: int

    def to_dict(self):
        return {"C_hat": self.C_hat, "b_hat": self.b_hat, "r_squared": self.r_squared,
                "quantiles": list(self.quantiles), "pass": self.passed, "r2_min": self.r2_min,
                "fit_range": list(self.fit_range), "sample_count": self.sample_count}


def empirical_survival(samples):
    """Sorted ``|X|`` and the fraction of samples strictly above each value."""
    x = np.sort(np.abs(np.asarray(samples, dtype=float)))
    n = len(x)
    above = n - np.searchsorted(x, x, side="right")
    return x, above / n


def fit_exponential_tail(samples, lower: float = 50, upper: float = 99, r2_min: float = 0.9) -> TailReport:
    """Least-squares line through the log-survival of ``|samples|`` between two percentiles."""
    x, surv = empirical_survival(samples)
    qs = tuple(float(v) for v in np.percentile(x, QUANTILES))
    lo, hi = (float(v) for v in np.percentile(x, [lower, upper]))
    if np.count_nonzero(x > lo) < MIN_TAIL:
        raise InsufficientTail(f"fewer than {MIN_TAIL} samples above the {lower}th percentile")
    sel = (x >= lo) & (x <= hi) & (surv > 0)
    xs, ys = x[sel], np.log(surv[sel])
    if len(np.unique(xs)) < 2:
        raise InsufficientTail("tail range collapses to a point")
    slope, icpt = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + icpt)
    tot = np.sum((ys - ys.mean()) ** 2)
    r2 = float(1 - np.sum(resid**2) / tot) if tot > 0 else 0.0
    b = float(-slope)
    return TailReport(float(math.exp(icpt)), b, r2, qs, bool(b > 0 and r2 > r2_min), r2_min, (lo, hi), len(x))


@dataclass
class CenteredSampleSet:
    """``S_h f(x) - centering`` for points ``x`` of an almost cylinder of height ``h``."""

    rigidity_time: int
    centering: float
    samples: np.ndarray
    sample_count: int
    seed: int
    certificate: Optional[RigidityCertificate] = None
    verified: int = 0

    def quantiles(self, qs=QUANTILES):
        return tuple(float(v) for v in np.percentile(np.abs(self.samples), qs))

    def to_dict(self):
        return {"rigidity_time": str(self.rigidity_time), "centering": self.centering,
                "sample_count": self.sample_count, "seed": self.seed, "verified": self.verified,
                "quantiles": list(self.quantiles())}


def centered_samples(T: IET, f: SymLogRoof, cert: RigidityCertificate, count: int, rng,
                     check: int = 20, budget: int = VERIFY_BUDGET, sums: Optional[TowerSums] = None):
    """Uniform points of the almost cylinder of ``cert`` and their centered sums.

    Returns ``(samples, centering, verified)``; ``verified`` counts the points
    whose membership was re-checked by iterating ``T^h`` directly.
    """
    cyl = almost_cylinder(cert, T)
    a, b = (float(v) for v in cert.tower.base)
    c0, c1 = (float(v) for v in cyl.base)
    h = cert.height
    shift = float(cert.shift)
    ts = sums if sums is not None else TowerSums(T, f, a, b - a, h)
    k = rng.integers(0, h, size=count)
    v = (c0 - a) + rng.uniform(0.0, c1 - c0, size=count)
    if np.any(v + shift < 0) or np.any(v + shift > b - a):
        raise ValidationError("sample left the almost cylinder", "certificate")
    vals = ts.cylinder_sums(k, v, shift)
    centering = float(ts.sums_to([(b - a) / 2], [h])[0])
    verified = 0
    if h * check <= budget:
        Tf = T.as_float()
        for q in range(min(check, count)):
            x = ts.p[k[q]] + v[q]
            if abs(iterate(Tf, x, h) - (x + shift)) > 1e-9:
                raise ValidationError("almost cylinder membership failed", "certificate")
            verified += 1
    return vals - centering, centering, verified


def centered_tail_analysis(T: IET, f: SymLogRoof, certs: Sequence[RigidityCertificate], samples_per_cert: int,
                           seed: int, r2_min: float = 0.9, lower: float = 50, upper: float = 99):
    """One :class:`CenteredSampleSet` and :class:`TailReport` per certificate."""
    if samples_per_cert < 1000:
        raise ValidationError("samples_per_cert must be at least 1000", "samples_per_cert")
    out = []
    for cert, rng in zip(certs, substreams(seed, len(certs))):
        vals, centering, verified = centered_samples(T, f, cert, samples_per_cert, rng)
        sset = CenteredSampleSet(cert.height, centering, vals, len(vals), int(seed), cert, verified)
        out.append((sset, fit_exponential_tail(vals, lower, upper, r2_min)))
    return out


@dataclass
class TightnessReport:
    quantiles: dict
    growth: dict
    trend: dict
    growth_factor: float
    passed: bool

    def to_dict(self):
        return {"quantiles": {str(k): v for k, v in self.quantiles.items()},
                "growth": {str(k): v for k, v in self.growth.items()},
                "trend": {str(k): v for k, v in self.trend.items()},
                "growth_factor": self.growth_factor, "pass": self.passed}


def _max_growth(seq) -> float:
    """Largest value in the later half over the largest value in the earlier half."""
    seq = np.asarray(seq, dtype=float)
    half = len(seq) // 2
    early, late = seq[:half].max(), seq[half:].max()
    return float(late / early) if early > 0 else (1.0 if late == 0 else math.inf)


def tightness_report(sets, growth_factor: float = 2.0) -> TightnessReport:
    """Quantiles of ``|X|`` along the sequence; fails if one grows by more than ``growth_factor``.

    Growth compares the envelope of the later half of the sequence with that
    of the earlier half, so bounded oscillation passes and steady growth fails.
    ``sets`` holds :class:`CenteredSampleSet` objects or plain arrays.
    """
    if len(sets) < 3:
        raise ValidationError("tightness needs at least 3 sample sets", "sets")
    arrays = [np.abs(np.asarray(s.samples if hasattr(s, "samples") else s, dtype=float)) for s in sets]
    quants = {q: [float(np.percentile(a, q)) for a in arrays] for q in QUANTILES}
    growth = {q: _max_growth(v) for q, v in quants.items()}
    trend = {q: kendall_tau(v) for q, v in quants.items()}
    ok = all(g <= growth_factor for g in growth.values())
    return TightnessReport(quants, growth, trend, float(growth_factor), ok)


# -- rectangles and correlations ------------------------------------------------

@dataclass
class RectSet:
    """Finite union of rectangles ``[x0, x1) x [s0, s1)`` intersected with the region under the roof."""

    rects: list

    def __post_init__(self):
        self.rects = [tuple(float(v) for v in r) for r in self.rects]
        for i, (x0, x1, s0, s1) in enumerate(self.rects):
            if not (x0 < x1 and s0 < s1 and s0 >= 0):
                raise ValidationError("rectangle must have x0 < x1, 0 <= s0 < s1", f"rects[{i}]")

    @property
    def bounds(self):
        r = np.array(self.rects)
        return float(r[:, 0].min()), float(r[:, 1].max()), float(r[:, 2].min()), float(r[:, 3].max())

    def contains(self, x, s, f: SymLogRoof):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for x0, x1, s0, s1 in self.rects:
            inside |= (x >= x0) & (x < x1) & (s >= s0) & (s < s1)
        return inside & (s < np.asarray(eval_roof(f, x)))

    def to_dict(self):
        return {"rects": [list(r) for r in self.rects]}


def full_space(f: SymLogRoof, height: float = 1e300) -> RectSet:
    return RectSet([(float(f.beta[0]), float(f.beta[-1]), 0.0, height)])


@dataclass
class Correlation:
    value: float
    stderr: float
    t: float
    samples: int
    seed: int

    def to_dict(self):
        return dict(self.__dict__)


def build_flow(T: IET, f: SymLogRoof, trace: Optional[RauzyTrace] = None, max_depth: int = 4000,
               floor_budget: int = FLOOR_BUDGET) -> RenormalizedFlow:
    """Renormalized flow engine at the deepest level within ``floor_budget`` floors."""
    tr = trace if trace is not None else _safe_trace(T.as_float(), max_depth, max_height=floor_budget)
    return RenormalizedFlow(T.as_float(), f, tr, floor_budget=floor_budget)


def _sample_region(A: RectSet, f: SymLogRoof, n: int, rng):
    """Points ``x ~ U[x0, x1)``, ``s ~ U[s0, min(s1, f(x)))`` over the bounding box of ``A``.

    Returns the points, per-point weights ``min(s1, f(x)) - s0`` (zero when the
    roof is below ``s0``) and the box width.  Weighted indicators average to
    ``Leb^f(A) / (x1 - x0)``; for boxes below the roof every weight equals the
    box height and the estimate is a plain hit fraction.
    """
    x0, x1, s0, s1 = A.bounds
    x = rng.uniform(x0, x1, n)
    cap = np.minimum(s1, np.asarray(eval_roof(f, x), dtype=float))
    weight = np.maximum(cap - s0, 0.0)
    s = s0 + rng.uniform(0.0, 1.0, n) * weight
    return x, s, weight, x1 - x0


def _estimate(values, width, f: SymLogRoof):
    scale = width / (f.mean * float(f.beta[-1]))
    n = len(values)
    return float(scale * values.mean()), float(scale * values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def measure(A: RectSet, f: SymLogRoof, samples: int, seed: int):
    """Monte-Carlo ``Leb^f(A) / Leb^f(I^f)`` with its standard error."""
    rng = np.random.default_rng(seed)
    x, s, wt, width = _sample_region(A, f, samples, rng)
    return _estimate(wt * A.contains(x, s, f), width, f)


def correlation_estimate(T: IET, f: SymLogRoof, A: RectSet, B: RectSet, t: float, samples: int, seed: int,
                         flow: Optional[Callable] = None) -> Correlation:
    """Monte-Carlo ``Leb^f(A ∩ T^f_{-t} B) / Leb^f(I^f)`` with a standard error.

    Points are drawn in the bounding box of ``A`` under the roof; those
    outside ``A`` count as misses.  ``flow(x, s, t)`` defaults to a
    :class:`RenormalizedFlow` built for ``T`` and ``f``.
    """
    if samples < 10**4:
        raise ValidationError("samples must be at least 10^4", "samples")
    rng = np.random.default_rng(seed)
    x, s, wt, width = _sample_region(A, f, samples, rng)
    inA = A.contains(x, s, f) & (wt > 0)
    hit = np.zeros(samples, dtype=bool)
    idx = np.flatnonzero(inA)
    if len(idx):
        if t == 0:
            xt, st = x[idx], s[idx]
        else:
            fl = flow if flow is not None else build_flow(T, f).flow
            xt, st, _ = fl(x[idx], s[idx], t)
        hit[idx] = B.contains(xt, st, f)
    val, err = _estimate(wt * hit, width, f)
    return Correlation(val, err, float(t), samples, int(seed))


@dataclass
class MixingRow:
    k: int
    q: int
    t: float
    pair: int
    correlation: float
    stderr: float
    product: float
    gap: float

    def to_dict(self):
        out = dict(self.__dict__)
        out["q"] = str(self.q)
        return out


@dataclass
class MixingScan:
    rows: List[MixingRow]
    trend: float
    samples: int
    seed: int

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "trend": self.trend, "samples": self.samples,
                "seed": self.seed}


def resonant_mixing_scan(T: IET, f: SymLogRoof, resonances, pairs, samples: int, seed: int,
                         flow: Optional[Callable] = None, factors=(1.0, 1.5)) -> MixingScan:
    """Correlations at ``t = kq`` and ``t = 1.5 kq`` for each resonance and pair.

    ``trend`` is the Kendall correlation of the mean gap ``|corr - product|`` against ``k``;
    a negative value means the gap shrinks as ``k`` grows.
    """
    rs = list(resonances)
    if any(rs[i].r > rs[i + 1].r for i in range(len(rs) - 1)):
        raise ValidationError("resonances must be sorted by r", "resonances")
    fl = flow if flow is not None else build_flow(T, f).flow
    streams = np.random.SeedSequence(int(seed)).spawn(len(pairs) * (1 + len(rs) * len(factors)))
    seeds = [int(s.generate_state(1)[0]) for s in streams]
    products = []
    for p, (A, B) in enumerate(pairs):
        ma, _ = measure(A, f, samples, seeds[p])
        mb, _ = measure(B, f, samples, seeds[p] + 1)
        products.append(ma * mb)
    rows = []
    pos = len(pairs)
    for cert in rs:
        for fac in factors:
            t = fac * cert.k * cert.q
            for p, (A, B) in enumerate(pairs):
                c = correlation_estimate(T, f, A, B, t, samples, seeds[pos], flow=fl)
                pos += 1
                rows.append(MixingRow(cert.k, cert.q, t, p, c.value, c.stderr, products[p],
                                      abs(c.value - products[p])))
    ks = sorted({r.k for r in rows})
    gaps = [np.mean([r.gap for r in rows if r.k == k]) for k in ks]
    return MixingScan(rows, kendall_tau(gaps), samples, int(seed))


# -- shearing ---------------------------------------------------------------------

@dataclass
class IntervalRecord:
    floor: int
    index: int
    left: float
    length: float
    good: bool
    N_low: int
    N_high: int
    D: bool
    S1: float
    S2: float
    excised: bool
    second_sum: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ShearingReport:
    t: float
    q: int
    k: int
    delta: float
    gamma: float
    tower_area: float
    mass: float
    s1_fraction: float
    s1_median: float
    s1_median_all: float
    s2_median: float
    c_low: float
    c_high: float
    records: List[IntervalRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "records"}
        out["q"] = str(self.q)
        out["records"] = [r.to_dict() for r in self.records]
        return out


def dominant_tower(trace: RauzyTrace, max_height: float, min_area: float = 0.5):
    """The tallest column tower of area ``> min_area`` with height at most ``max_height``."""
    total = float(trace.states[0].interval_length)
    best = None
    for st in trace.states:
        for j in range(len(st.lengths)):
            a, w, h, shift = _column_data(st, j)
            area = float(w) * h / total
            if area > min_area and h <= max_height and (best is None or h > best[2]):
                best = (float(a), float(w), h, float(shift), area)
    if best is None:
        raise NoDominantTower(f"no tower of area > {min_area} with height <= {max_height}")
    return best


def shearing_report(T: IET, f: SymLogRoof, t: float, delta: Optional[float] = None, samples: int = 64,
                    seed: int = 0, tower=None, trace: Optional[RauzyTrace] = None, gamma: float = 0.5,
                    excision_factor: float = 0.25, x_points: int = 33, r_points: int = 33,
                    engine: Optional[RenormalizedFlow] = None, max_depth: int = 4000) -> ShearingReport:
    """Quantities (M), (D), (S1), (S2) on a sampled floor partition of the dominant tower.

    Each sampled interval is a piece of length in ``[delta^4 w, 2 delta^4 w]``
    of a floor of the tower over the shrunk base.  ``mass`` is the area of the
    shrunk tower times the fraction of sampled pieces that are good (crossing
    count at the floor centre within ``t^gamma`` of ``t``), satisfy (D) and
    avoid the excision around a zero of ``S_t f'`` on their floor.
    ``s1_fraction`` and ``s1_median`` refer to the kept pieces and
    ``s1_median_all`` to every good piece satisfying (D).

    Times are measured in roof units and converted to orbit lengths through
    ``mean(f)``; with ``f`` of mean one the two coincide.  ``tower`` is a
    certificate (anything with ``.tower`` and ``.shift``) or ``None`` to take
    the tallest tower of area ``> 1/2`` with ``q * mean(f) <= t``.
    """
    if not t > 0:
        raise ValidationError("t must be positive", "t")
    Tf = T.as_float()
    mu = float(f.mean)
    tn = float(t) / mu
    if tower is None:
        tr = trace if trace is not None else _safe_trace(Tf, max_depth, max_height=int(tn) + 1)
        a, w, q, _, area = dominant_tower(tr, tn)
    else:
        a, b = (float(v) for v in tower.tower.base)
        w, q, area = b - a, int(tower.tower.height), float(tower.tower.area)
        if not area > 0.5:
            raise NoDominantTower("certified tower has area <= 1/2")
    k = max(1, int(tn // q))
    if delta is None:
        delta = 1.0 / math.log(max(k, 3))
    # the margin is delta/q in the limit of area one; w stands for 1/q and is capped to keep floors non-empty
    delta = float(delta)
    margin = min(delta, 0.25) * w
    inner = w - 2 * margin
    step = delta**4 * w
    nsub = max(1, int(inner // step))
    L = inner / nsub
    eng = engine if engine is not None else build_flow(Tf, f, trace=None, max_depth=max_depth)
    ts = TowerSums(Tf, f, a, w, q)
    rng = np.random.default_rng(seed)
    floors = rng.integers(0, q, size=samples)
    subs = rng.integers(0, nsub, size=samples)
    lefts = ts.p[floors] + margin + subs * L
    spread = tn**gamma
    N_mid = eng.crossings(ts.p[floors] + w / 2, t)
    good = np.abs(N_mid - tn) <= spread
    frac = np.linspace(0.0, 1.0, x_points + 2)
    X = lefts[:, None] + L * frac[None, :]
    X[:, -1] = np.nextafter(X[:, -1], -np.inf)
    N = eng.crossings(X.ravel(), t).reshape(X.shape)
    n_low = np.maximum(1, np.minimum(N.min(axis=1), math.floor(tn - 2 * spread)))
    n_high = np.maximum(N.max(axis=1), math.ceil(tn + 2 * spread))
    D = eng.continuity_horizon(lefts, L, n_high + 1) > n_high
    s1 = np.empty(samples)
    den = np.empty(samples)
    for i in range(samples):
        rs = np.unique(np.round(np.linspace(n_low[i], n_high[i], r_points)).astype(np.int64))
        xs = np.repeat(X[i], len(rs))
        rr = np.tile(rs, X.shape[1])
        vals = np.abs(eng.birkhoff(xs, rr, order=1))
        den[i] = vals.min()
        s1[i] = den[i] * L
    # f'' >= 0, so the maximum over r <= 2t sits at the largest r
    r2 = int(math.floor(2 * tn))
    second = eng.birkhoff(X.ravel(), r2, order=2).reshape(X.shape)
    s2 = second.max(axis=1) * L / den
    ell = int(round(tn))
    mid_second = eng.birkhoff(lefts + L / 2, ell, order=2)
    # Case II: the first-derivative sum changes sign across the floor; excise around the zero
    fl_grid = np.linspace(margin, w - margin, 65)
    excised = np.zeros(samples, dtype=bool)
    for fl in np.unique(floors):
        pts = ts.p[fl] + fl_grid
        der = eng.birkhoff(pts, ell, order=1)
        sgn = np.flatnonzero(np.sign(der[:-1]) != np.sign(der[1:]))
        if not len(sgn):
            continue
        zs = []
        for z in sgn:
            y0, y1 = der[z], der[z + 1]
            zs.append(pts[z] + (pts[z + 1] - pts[z]) * y0 / (y0 - y1))
        rad = excision_factor * delta * w
        for i in np.flatnonzero(floors == fl):
            excised[i] = any(lefts[i] < zz + rad and lefts[i] + L > zz - rad for zz in zs)
    keep = good & D & ~excised
    t_area = q * inner / float(Tf.total)
    mass = float(t_area * keep.mean())
    s1k = s1[keep]
    records = [IntervalRecord(int(floors[i]), int(subs[i]), float(lefts[i]), float(L), bool(good[i]),
                              int(n_low[i]), int(n_high[i]), bool(D[i]), float(s1[i]), float(s2[i]),
                              bool(excised[i]), float(mid_second[i])) for i in range(samples)]
    scale = k * float(q) ** 2
    cfg = {"t": float(t), "delta": delta, "samples": samples, "seed": seed, "gamma": gamma,
           "excision_factor": excision_factor, "x_points": x_points, "r_points": r_points,
           "engine_level": eng.level, "mean_f": mu}
    return ShearingReport(float(t), int(q), k, delta, gamma, float(area), mass,
                          float(np.mean(s1k > 1)) if len(s1k) else 0.0,
                          float(np.median(s1k)) if len(s1k) else 0.0, float(np.median(s1[good & D])) if (good & D).any() else 0.0,
                          float(np.median(s2[keep])) if keep.any() else 0.0,
                          float(mid_second.min() / scale), float(mid_second.max() * delta**2 / scale),
                          records, cfg)


# -- output ---------------------------------------------------------------------------

def write_samples_csv(sset: CenteredSampleSet, path) -> None:
    """Columns: ``index``, ``rigidity_time``, ``centered_sum``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "rigidity_time", "centered_sum"])
        for i, v in enumerate(sset.samples):
            w.writerow([i, sset.rigidity_time, repr(float(v))])


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + body + "</svg>\n")


def svg_histogram(samples, path, bins: int = 50, width: int = 480, height: int = 320) -> None:
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    top = max(int(counts.max()), 1)
    bw = (width - 40) / bins
    parts = []
    for i, c in enumerate(counts):
        hgt = (height - 40) * c / top
        parts.append(f'<rect x="{20 + i * bw:.2f}" y="{height - 20 - hgt:.2f}" width="{bw:.2f}" '
                     f'height="{hgt:.2f}" fill="steelblue"/>\n')
    parts.append(f'<text x="20" y="14" font-size="11">[{edges[0]:.3g}, {edges[-1]:.3g}]</text>\n')
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "".join(parts)))


def svg_log_survival(samples, path, report: Optional[TailReport] = None, width: int = 480,
                     height: int = 320) -> None:
    x, surv = empirical_survival(samples)
    keep = surv > 0
    x, ly = x[keep], np.log(surv[keep])
    if not len(x):
        x, ly = np.zeros(1), np.zeros(1)
    xmax = max(float(x.max()), 1e-12)
    ymin = min(float(ly.min()), -1e-12)

    def pt(a, b):
        return 20 + (width - 40) * a / xmax, 20 + (height - 40) * b / ymin

    pts = " ".join("%.2f,%.2f" % pt(a, b) for a, b in zip(x[:: max(1, len(x) // 500)], ly[:: max(1, len(x) // 500)]))
    body = f'<polyline points="{pts}" fill="none" stroke="black"/>\n'
    if report is not None:
        lo, hi = report.fit_range
        y0 = math.log(report.C_hat) - report.b_hat * lo
        y1 = math.log(report.C_hat) - report.b_hat * hi
        (a0, b0), (a1, b1) = pt(lo, y0), pt(hi, y1)
        body += f'<line x1="{a0:.2f}" y1="{b0:.2f}" x2="{a1:.2f}" y2="{b1:.2f}" stroke="red"/>\n'
    with open(path, "w") as fh:
        fh.write(_svg(width, height, body))


__all__ = [
    "CenteredSampleSet", "TailReport", "TightnessReport", "RectSet", "Correlation", "MixingRow", "MixingScan",
    "IntervalRecord", "ShearingReport", "fit_exponential_tail", "empirical_survival", "centered_samples",
    "centered_tail_analysis", "tightness_report", "full_space", "measure", "correlation_estimate",
    "resonant_mixing_scan", "dominant_tower", "shearing_report", "build_flow", "kendall_tau", "substreams",
    "write_samples_csv", "svg_histogram", "svg_log_survival",
]
