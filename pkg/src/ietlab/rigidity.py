"""Rigidity towers, almost cylinders, resonant times and coexistence times.

Every tower here is a Rauzy-Veech tower: the base is a continuity interval
``I_j^(n)`` of the induced map on ``I^(n) = [0, |I^(n)|)`` and the height is
the return time ``h_j^(n)``.  ``T^h`` restricted to the base is the translation
by ``delta_j^(n) = (Omega_{pi^(n)} lam^(n))_j``, so displacements are known
exactly from the trace and can be re-verified by iterating ``T``.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .errors import DegenerateShrink, DepthExceeded, UndefinedStep, ValidationError
from .iet import IET, TowerDescriptor, iterate
from .rauzy import RauzyTrace, TraceState, balance_ratio, column_sums, induction_trace
from .roof import SymLogRoof
from .towers import TowerSums, log_grid, stratified

VERIFY_BUDGET = 2 * 10**6
BALANCE_THRESHOLD = 20.0


# -- column towers -----------------------------------------------------------

def _column_data(state: TraceState, j: int):
    """``(a, width, height, shift)`` of the tower over ``I_j^(n)`` (``j`` 0-based)."""
    lam = state.lengths
    pi = state.perm.images
    d = len(lam)
    zero = lam[0] * 0
    a = zero
    for i in range(j):
        a += lam[i]
    shift = zero
    for k in range(d):
        if j < k and pi[j] > pi[k]:
            shift += lam[k]
        elif j > k and pi[j] < pi[k]:
            shift -= lam[k]
    return a, lam[j], int(state.heights[j]), shift


@dataclass
class RigidityCertificate:
    """An ``epsilon``-rigid tower: ``|T^h x - x| < epsilon * |base|`` on the base."""

    tower: TowerDescriptor
    epsilon: float
    displacement: float
    shift: object
    area: float
    source_step: int
    column: int = 1

    @property
    def height(self):
        return self.tower.height

    @property
    def ratio(self):
        return self.displacement / float(self.tower.width)

    @property
    def is_rigidity_time(self):
        return self.area > 1 - self.epsilon

    def to_dict(self):
        return {
            "tower": self.tower.to_dict(),
            "epsilon": float(self.epsilon),
            "displacement": float(self.displacement),
            "shift": float(self.shift),
            "ratio": self.ratio,
            "area": float(self.area),
            "source_step": self.source_step,
            "column": self.column,
        }


def certificate_from_state(trace: RauzyTrace, n: int, j: int, epsilon: float) -> RigidityCertificate:
    """Certificate for the tower over ``I_{j+1}^(n)`` with its exact shift."""
    state = trace.states[n]
    a, w, h, shift = _column_data(state, j)
    total = trace.states[0].interval_length
    area = float(w * h / total) if isinstance(w, Fraction) else float(w) * h / float(total)
    tower = TowerDescriptor(base=(a, a + w), height=h, area=area, epsilon=epsilon)
    return RigidityCertificate(tower, epsilon, abs(float(shift)), shift, area, state.rv_index, j + 1)


def _check_epsilon(epsilon, upper, name="epsilon"):
    if not (0 < epsilon < upper):
        raise ValidationError(f"epsilon must lie in (0, {upper})", name)


def detect_rigid_towers(trace: RauzyTrace, epsilon: float) -> List[RigidityCertificate]:
    """Certificates for every step with ``lam_1^(n) / |I^(n)| > 1 - epsilon/2``.

    The certified tower is the one over the leftmost interval ``I_1^(n)``.
    Later steps that only shrink the base at the same height give nested
    sub-towers; only the first (largest) one is reported.
    """
    _check_epsilon(epsilon, 0.5)
    out, seen = [], set()
    for n, st in enumerate(trace.states):
        lam0 = st.lengths[0]
        cut = 1 - Fraction(epsilon) / 2 if isinstance(lam0, Fraction) else 1 - epsilon / 2
        if not lam0 > cut * st.interval_length:
            continue
        cert = certificate_from_state(trace, n, 0, epsilon)
        if cert.height in seen:
            continue
        if cert.displacement < epsilon * float(cert.tower.width):
            seen.add(cert.height)
            out.append(cert)
    return out


def _iterate_left(T: IET, x, n: int):
    """``T^n`` applied to the left limit at ``x`` (intervals taken as ``(b_{i-1}, b_i]``)."""
    inner = T._inner
    disp = T.displacements
    for _ in range(n):
        x = x + disp[bisect_left(inner, x)]
    return x


def verify_certificate(T: IET, cert: RigidityCertificate, budget: int = VERIFY_BUDGET):
    """Recompute ``T^h`` at both base endpoints from scratch.

    ``T^h`` is a translation on the base, so the two endpoint shifts bound the
    displacement everywhere.  Returns ``(shift_left, shift_right)`` or ``None``
    when the height exceeds ``budget``.
    """
    h = cert.height
    if h > budget:
        return None
    a, b = cert.tower.base
    left = iterate(T, a, h) - a
    right = _iterate_left(T, b, h) - b
    return left, right


# -- almost cylinders ----------------------------------------------------------

def almost_cylinder(cert: RigidityCertificate, T: Optional[IET] = None) -> TowerDescriptor:
    """Shrink the base so that ``T^h`` maps it into the original base.

    The cut is taken on the left when ``T^h a <= a`` and on the right otherwise.
    """
    a, b = cert.tower.base
    delta = abs(cert.shift)
    if delta >= b - a:
        raise DegenerateShrink(f"displacement {float(delta)} is not below the base width {float(b - a)}")
    base = (a + delta, b) if cert.shift <= 0 else (a, b - delta)
    h = cert.height
    return TowerDescriptor(base=base, height=h, area=float(base[1] - base[0]) * h / float(_total(T, cert)),
                           epsilon=cert.epsilon)


def _total(T, cert):
    if T is not None:
        return T.total
    return float(cert.tower.width) * cert.height / cert.area


# -- windows and resonances ------------------------------------------------------

@dataclass
class WindowHit:
    window: tuple
    times: list
    certificates: list = field(default_factory=list)

    def to_dict(self):
        return {"window": [str(int(self.window[0])), str(int(self.window[1]))],
                "times": [str(q) for q in self.times],
                "certificates": [c.to_dict() for c in self.certificates]}


def rigid_columns(trace: RauzyTrace, epsilon: float, area_floor: Optional[float] = None):
    """Certificates of columns that are ``epsilon``-rigid by direct check.

    A column qualifies when ``lam_1 / |I| > 1 - epsilon/2`` (if ``epsilon < 1/2``)
    or ``lam_k / |I| > 1 - epsilon/3`` for some ``k``; it is kept only if
    ``|delta_k| < epsilon * lam_k`` and, with ``area_floor``, its area exceeds it.
    """
    out, seen = [], set()
    for n, st in enumerate(trace.states):
        lam = [float(v) for v in st.lengths]
        size = float(st.interval_length)
        cols = [k for k in range(len(lam)) if lam[k] > (1 - epsilon / 3) * size]
        if epsilon < 0.5 and lam[0] > (1 - epsilon / 2) * size and 0 not in cols:
            cols.insert(0, 0)
        for k in cols:
            cert = certificate_from_state(trace, n, k, epsilon)
            if cert.height in seen:
                continue
            if cert.displacement >= epsilon * float(cert.tower.width):
                continue
            if area_floor is not None and not cert.area > area_floor:
                continue
            seen.add(cert.height)
            out.append(cert)
    return out


def _safe_trace(T, max_depth, max_height=None):
    try:
        return induction_trace(T, max_depth, mode="rauzy", max_height=max_height, store_matrices=False)
    except UndefinedStep as err:
        return err.partial


def rigidity_times_in_window(T: IET, epsilon: float, windows, max_depth: int, trace=None) -> List[WindowHit]:
    """All certified ``epsilon``-rigidity times ``q`` with ``s <= q < e`` per window ``[s, e)``.

    A rigidity time needs an ``epsilon``-rigid tower of area ``> 1 - epsilon``.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive", "epsilon")
    wins = [(int(s), int(e)) for s, e in windows]
    for i, (s, e) in enumerate(wins):
        if not s < e:
            raise ValidationError(f"window {i} is empty", f"windows[{i}]")
        if i and s < wins[i - 1][1]:
            raise ValidationError("windows must be sorted and disjoint", f"windows[{i}]")
    tr = trace if trace is not None else _safe_trace(T, max_depth)
    certs = rigid_columns(tr, epsilon, area_floor=1 - epsilon)
    hits = []
    for s, e in wins:
        chosen = sorted((c for c in certs if s <= c.height < e), key=lambda c: (c.height, c.source_step))
        times = sorted({c.height for c in chosen})
        hits.append(WindowHit((s, e), times, chosen))
    hmax = max(max(st.heights) for st in tr.states)
    if wins and hmax < wins[-1][0]:
        raise DepthExceeded(hmax, wins[-1][0], partial=hits)
    return hits


@dataclass
class ResonanceCertificate:
    """``r = k q`` with ``q`` the height of an ``epsilon^2``-rigid tower of area ``> 1 - epsilon``."""

    q: int
    k: int
    epsilon: float
    r: int
    tower: TowerDescriptor
    shift: float
    verified_by: str
    source: RigidityCertificate = None

    def to_dict(self):
        return {"q": str(self.q), "k": self.k, "r": str(self.r), "epsilon": float(self.epsilon),
                "tower": self.tower.to_dict(), "shift": float(self.shift), "verified_by": self.verified_by}


def resonant_times(T: IET, epsilon: float, k_max: int, max_depth: int, trace=None,
                   verify_budget: int = VERIFY_BUDGET, max_height: Optional[int] = None) -> List[ResonanceCertificate]:
    """All ``(epsilon, k)``-resonant times ``k q`` with ``1 <= k <= k_max``.

    The block displacement is checked at the base midpoint: by orbit iteration
    when ``k q`` fits in ``verify_budget``, otherwise by chaining the exact
    translation ``T^q x = x + shift`` while the iterates stay in the base.
    """
    _check_epsilon(epsilon, 1.0)
    if not 1 <= k_max <= math.floor(1 / epsilon + 1e-12):
        raise ValidationError("k_max must lie in [1, floor(1/epsilon)]", "k_max")
    tr = trace if trace is not None else _safe_trace(T, max_depth, max_height)
    eps2 = epsilon * epsilon
    seen = set()
    out = []
    Tf = T.as_float()
    for n in range(len(tr.states)):
        for j in range(T.d):
            cert = certificate_from_state(tr, n, j, eps2)
            if not (cert.displacement < eps2 * float(cert.tower.width) and cert.area > 1 - epsilon):
                continue
            if cert.height in seen:
                continue
            seen.add(cert.height)
            q = cert.height
            a, b = (float(v) for v in cert.tower.base)
            mid = (a + b) / 2
            shift = float(cert.shift)
            x = mid
            how = "orbit" if k_max * q <= verify_budget else "affine"
            for k in range(1, k_max + 1):
                x = iterate(Tf, x, q) if how == "orbit" else x + shift
                moved = abs(x - mid)
                if not (a <= x < b) or moved > k * eps2 * (b - a) * (1 + 1e-9) or moved >= epsilon * (b - a):
                    break
                out.append(ResonanceCertificate(q, k, epsilon, k * q, cert.tower, float(shift), how, cert))
    out.sort(key=lambda c: (c.r, c.q))
    return out


# -- coexistence -----------------------------------------------------------------

@dataclass
class CoexistenceRecord:
    epsilon: float
    balanced_step: int
    rigid_step: int
    trimmed_bound_M: float
    tower: TowerDescriptor
    certificate: RigidityCertificate
    balance: float
    nu_B: float
    area_lower_bound: float
    K: int
    balanced_M: Optional[float] = None
    persistence_bound: Optional[float] = None

    def to_dict(self):
        return {
            "epsilon": float(self.epsilon),
            "balanced_step": self.balanced_step,
            "rigid_step": self.rigid_step,
            "trimmed_bound_M": float(self.trimmed_bound_M),
            "tower": self.tower.to_dict(),
            "certificate": self.certificate.to_dict(),
            "balance": float(self.balance),
            "nu_B": float(self.nu_B),
            "area_lower_bound": float(self.area_lower_bound),
            "K": self.K,
            "balanced_M": None if self.balanced_M is None else float(self.balanced_M),
            "persistence_bound": None if self.persistence_bound is None else float(self.persistence_bound),
        }


def nu(B) -> float:
    """``max_{i,k,l} B_il / B_kl`` for a positive matrix."""
    arr = np.array([[float(v) for v in row] for row in B])
    return float(np.max(arr.max(axis=0) / arr.min(axis=0)))


def fit_trimmed_bound(T: IET, f: SymLogRoof, a, width, height, base_points: int = 64, r_count: int = 32,
                      sums: Optional[TowerSums] = None) -> float:
    """``max |S~_r f'(x)| / h`` over stratified base points and a log grid of ``r``."""
    ts = sums if sums is not None else TowerSums(T, f, a, width, height)
    vals = ts.trimmed_derivative(stratified(float(width), base_points), log_grid(int(height), r_count))
    return float(np.max(np.abs(vals)) / height)


def _rigid_steps(tr: RauzyTrace, epsilon: float):
    steps = []
    for n, st in enumerate(tr.states):
        if float(st.lengths[0]) > (1 - epsilon / 2) * float(st.interval_length):
            steps.append(n)
    return steps


def coexistence_search(T: IET, f: SymLogRoof, epsilon_schedule, positivity_window: int, max_depth: int,
                       balance_threshold: float = BALANCE_THRESHOLD, base_points: int = 64, r_count: int = 32,
                       max_height: Optional[int] = None, check_persistence: bool = False,
                       trace: Optional[RauzyTrace] = None) -> List[CoexistenceRecord]:
    """Rigid steps preceded, within ``positivity_window`` steps, by a balanced step.

    A step ``n`` is balanced for the rigid step ``m`` when the block ``Q^(n,m)``
    is positive with ``balance_ratio <= balance_threshold``.  The latest such
    ``n`` is used.  Each record carries the fitted trimmed-derivative constant
    of the rigid tower over ``I_1^(m)``.  Per schedule level, a height is
    recorded once, at its first (largest-base) rigid step.
    """
    eps = [float(e) for e in epsilon_schedule]
    if not eps:
        raise ValidationError("epsilon_schedule is empty", "epsilon_schedule")
    for i, e in enumerate(eps):
        if not 0 < e < 0.5:
            raise ValidationError("schedule values must lie in (0, 1/2)", f"epsilon_schedule[{i}]")
        if i and e >= eps[i - 1]:
            raise ValidationError("schedule must be strictly decreasing", f"epsilon_schedule[{i}]")
    if positivity_window < 1:
        raise ValidationError("positivity_window must be >= 1", "positivity_window")
    tr = trace if trace is not None else _safe_trace(T, max_depth, max_height)
    fits = {}
    records = []
    c_sum = float(f.c_plus.sum() + f.c_minus.sum())
    for e in eps:
        heights = set()
        for m in _rigid_steps(tr, e):
            if tr.states[m].heights[0] in heights:
                continue
            found = None
            for n in range(m - 1, max(-1, m - positivity_window - 1), -1):
                B = tr.block(n, m)
                if min(v for row in B for v in row) <= 0:
                    continue
                ratio = balance_ratio(B)
                if ratio <= balance_threshold:
                    found = (n, B, ratio)
                    break
            if found is None:
                continue
            n, B, ratio = found
            cert = certificate_from_state(tr, m, 0, e)
            if not cert.displacement < e * float(cert.tower.width):
                continue
            heights.add(cert.height)
            if m not in fits:
                a, b = cert.tower.base
                fits[m] = fit_trimmed_bound(T, f, a, b - a, cert.height, base_points, r_count)
            Bh = [[B[c][r] for c in range(len(B))] for r in range(len(B))]
            nu_b = nu(Bh)
            K = max(column_sums(B))
            rec = CoexistenceRecord(
                epsilon=e, balanced_step=tr.states[n].rv_index, rigid_step=tr.states[m].rv_index,
                trimmed_bound_M=fits[m], tower=cert.tower, certificate=cert, balance=ratio, nu_B=nu_b,
                area_lower_bound=1 - e * nu_b / 2, K=K)
            if check_persistence:
                st = tr.states[n]
                bal = 0.0
                for j in range(T.d):
                    a0, w0, h0, _ = _column_data(st, j)
                    bal = max(bal, fit_trimmed_bound(T, f, a0, w0, h0, base_points, r_count))
                rec.balanced_M = bal
                rec.persistence_bound = bal + K * c_sum / cert.area
            records.append(rec)
    return records


# -- Roth-type distortion ----------------------------------------------------------

@dataclass
class RothReport:
    epsilon: float
    height_ratios: list
    length_ratios: list
    running_height: list
    running_length: list

    @property
    def M(self):
        return max(self.running_height[-1], self.running_length[-1]) if self.height_ratios else 0.0

    def to_dict(self):
        return {"epsilon": self.epsilon, "height_ratios": self.height_ratios, "length_ratios": self.length_ratios,
                "running_height": self.running_height, "running_length": self.running_length, "M": self.M}


def roth_distortion_report(trace: RauzyTrace, epsilon: float) -> RothReport:
    """Per-step ratios ``max h^(k+1) / (min h^(k))^(1+eps)`` and
    ``max lam^(k) / (min lam^(k+1))^(1-eps)`` with their running maxima."""
    if trace.mode != "roth":
        raise ValidationError("trace must use the roth acceleration", "mode")
    _check_epsilon(epsilon, 1.0)
    hr, lr = [], []
    for k in range(len(trace)):
        s0, s1 = trace.states[k], trace.states[k + 1]
        hr.append(float(max(s1.heights)) / float(min(s0.heights)) ** (1 + epsilon))
        lr.append(float(max(s0.lengths)) / float(min(s1.lengths)) ** (1 - epsilon))
    return RothReport(epsilon, hr, lr, list(np.maximum.accumulate(hr)) if hr else [],
                      list(np.maximum.accumulate(lr)) if lr else [])
