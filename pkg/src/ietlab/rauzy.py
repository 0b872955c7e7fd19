"""Rauzy-Veech renormalization and the objects built from it.

Conventions
-----------
Permutations are *reduced*: interval ``j`` (counted in the domain from the
left) lands at position ``pi(j)`` in the image.  One Rauzy-Veech step compares
the rightmost domain interval ``d`` with ``j_d = pi^{-1}(d)``, whose image is
rightmost.

* top (kind 0): ``lam_d > lam_{j_d}``; ``lam_d`` shrinks by ``lam_{j_d}``.
* bottom (kind 1): ``lam_{j_d} > lam_d``; interval ``j_d`` is split, the right
  piece of length ``lam_d`` becomes the new interval ``j_d + 1`` and the later
  intervals shift one slot to the right.

Each arrow carries an integer matrix ``B`` with ``lam = B^T lam'`` (old lengths
from new ones) and ``h' = B h`` (new heights from old).  The length cocycle of
a path is ``Q = B_1^T B_2^T ... B_n^T``; heights are its column sums.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .errors import (
    ConeViolation,
    DegenerateProduct,
    NonComposablePath,
    SearchBudgetExceeded,
    UndefinedStep,
    ValidationError,
    ZeroColumn,
)
from .iet import IET, TOL_EQ, Permutation, as_permutation, make_iet

TOP, BOTTOM = 0, 1
KIND_NAMES = {TOP: "top", BOTTOM: "bottom"}


# -- combinatorics of one move ----------------------------------------------

def move_perm(pi: tuple, kind: int) -> tuple:
    """Image of the (reduced) permutation ``pi`` under a top or bottom move."""
    d = len(pi)
    jd = pi.index(d) + 1
    if kind == TOP:
        pd = pi[d - 1]
        out = []
        for j, v in enumerate(pi, start=1):
            if j == jd:
                out.append(pd + 1)
            elif v <= pd:
                out.append(v)
            else:
                out.append(v + 1)
        return tuple(out)
    out = list(pi[:jd])
    out.append(pi[d - 1])
    out.extend(pi[jd:d - 1])
    return tuple(out)


def unmove_perm(pi: tuple, kind: int) -> tuple:
    """Predecessor of ``pi`` along the unique incoming arrow of ``kind``."""
    d = len(pi)
    if kind == TOP:
        pd = pi[d - 1]
        if pd == d:
            raise ValidationError(f"{pi} has no incoming top arrow", "perm")
        jd = pi.index(pd + 1) + 1
        out = []
        for j, v in enumerate(pi, start=1):
            if j == jd:
                out.append(d)
            elif v <= pd:
                out.append(v)
            else:
                out.append(v - 1)
        return tuple(out)
    jd = pi.index(d) + 1
    if jd == d:
        raise ValidationError(f"{pi} has no incoming bottom arrow", "perm")
    out = list(pi[:jd])
    out.extend(pi[jd + 1:])
    out.append(pi[jd])
    return tuple(out)


def arrow_matrix(d: int, jd: int, kind: int):
    """The matrix ``B`` of an arrow (``lam_old = B^T lam_new``), as nested tuples."""
    m = [[0] * d for _ in range(d)]
    if kind == TOP:
        for i in range(d):
            m[i][i] = 1
        m[jd - 1][d - 1] = 1
    else:
        # B^T rows: lam_old[r] = sum_c B^T[r][c] lam_new[c]
        bt = [[0] * d for _ in range(d)]
        for r in range(1, d + 1):
            if r < jd:
                bt[r - 1][r - 1] = 1
            elif r == jd:
                bt[r - 1][jd - 1] = 1
                bt[r - 1][jd] = 1
            elif r == d:
                bt[r - 1][jd] = 1
            else:
                bt[r - 1][r] = 1
        m = [[bt[c][r] for c in range(d)] for r in range(d)]
    return tuple(tuple(row) for row in m)


@dataclass(frozen=True)
class RauzyArrow:
    from_perm: Permutation
    to_perm: Permutation
    kind: int
    matrix: tuple

    @property
    def d(self):
        return self.from_perm.d

    @property
    def length_matrix(self):
        """``B^T``: maps new lengths to old lengths."""
        return tuple(zip(*self.matrix))

    def to_dict(self):
        return {
            "from": list(self.from_perm.images),
            "to": list(self.to_perm.images),
            "kind": KIND_NAMES[self.kind],
            "matrix": [[str(v) for v in row] for row in self.matrix],
        }


def make_arrow(perm, kind: int) -> RauzyArrow:
    pi = as_permutation(perm)
    d = pi.d
    jd = pi.images.index(d) + 1
    return RauzyArrow(pi, Permutation(move_perm(pi.images, kind)), kind, arrow_matrix(d, jd, kind))


# -- lengths and heights update --------------------------------------------

def _rv_move(pi, lam, tol):
    """One step on raw data.  Returns ``(pi', lam', kind, jd)``."""
    d = len(pi)
    jd = pi.index(d) + 1
    a, b = lam[d - 1], lam[jd - 1]
    if abs(a - b) <= tol:
        raise UndefinedStep()
    if a > b:
        new = list(lam)
        new[d - 1] = a - b
        return move_perm(pi, TOP), new, TOP, jd
    new = list(lam[:jd - 1])
    new.append(b - a)
    new.append(a)
    new.extend(lam[jd:d - 1])
    return move_perm(pi, BOTTOM), new, BOTTOM, jd


def _apply_columns(cols, d, jd, kind):
    """Update a list of ``d`` column-like objects the way heights change."""
    if kind == TOP:
        cols = list(cols)
        cols[jd - 1] = _add(cols[jd - 1], cols[d - 1])
        return cols
    out = list(cols[:jd])
    out.append(_add(cols[jd - 1], cols[d - 1]))
    out.extend(cols[jd:d - 1])
    return out


def _add(u, v):
    if isinstance(u, tuple):
        return tuple(x + y for x, y in zip(u, v))
    return u + v


def _names_after(names, d, jd, kind):
    if kind == TOP:
        return list(names)
    out = list(names[:jd])
    out.append(names[d - 1])
    out.extend(names[jd:d - 1])
    return out


def rv_step(T: IET):
    """One Rauzy-Veech step: the renormalized induced IET and the arrow taken."""
    tol = 0 if T.exact else TOL_EQ * float(T.total)
    pi2, lam2, kind, _ = _rv_move(T.perm.images, list(T.lengths), tol)
    return make_iet(pi2, lam2, normalize=True, exact=T.exact), make_arrow(T.perm, kind)


# -- traces -----------------------------------------------------------------

@dataclass
class TraceState:
    """State after ``index`` steps of the chosen acceleration."""

    index: int
    rv_index: int
    perm: Permutation
    lengths: tuple
    heights: tuple
    interval_length: object
    cumulative: tuple
    kinds: tuple = ()
    winners: tuple = ()

    @property
    def kind(self):
        return self.kinds[0] if self.kinds else None

    def iet(self, normalize=False, exact=None):
        ex = isinstance(self.lengths[0], Fraction) if exact is None else exact
        return make_iet(self.perm, self.lengths, normalize=normalize, exact=ex)

    def to_dict(self):
        out = {
            "index": self.index,
            "rv_index": self.rv_index,
            "perm": list(self.perm.images),
            "lengths": [float(v) for v in self.lengths],
            "heights": [str(h) for h in self.heights],
            "interval_length": float(self.interval_length),
            "kinds": [KIND_NAMES[k] for k in self.kinds],
        }
        if isinstance(self.lengths[0], Fraction):
            out["lengths_rational"] = [[str(v.numerator), str(v.denominator)] for v in self.lengths]
        return out


@dataclass
class RauzyTrace:
    """Sequence of induction states; ``states[0]`` is the starting IET."""

    mode: str
    states: List[TraceState] = field(default_factory=list)
    stopped: Optional[str] = None

    def __len__(self):
        return len(self.states) - 1

    @property
    def steps(self):
        return self.states[1:]

    def heights(self, n):
        return self.states[n].heights

    def lengths(self, n):
        return self.states[n].lengths

    def perm(self, n):
        return self.states[n].perm

    def cumulative(self, n):
        """Length cocycle ``Q^(n)``: ``lam^(0) = Q^(n) lam^(n)`` (actual lengths)."""
        return self.states[n].cumulative

    def block(self, m, n):
        """``Q^(m,n)`` with ``Q^(n) = Q^(m) Q^(m,n)``, built from the stored steps."""
        d = len(self.states[0].lengths)
        q = identity(d)
        pi = self.states[m].perm.images
        for st in self.states[m + 1:n + 1]:
            for kind in st.kinds:
                jd = pi.index(d) + 1
                q = _q_times_step(q, d, jd, kind)
                pi = move_perm(pi, kind)
        return q

    def to_dict(self):
        return {
            "mode": self.mode,
            "stopped": self.stopped,
            "states": [s.to_dict() for s in self.states],
            "cumulative": [None if s.cumulative is None else [[str(v) for v in row] for row in s.cumulative]
                           for s in self.states],
        }


def identity(d):
    return tuple(tuple(1 if i == j else 0 for j in range(d)) for i in range(d))


def _q_times_step(q, d, jd, kind):
    cols = [tuple(q[r][c] for r in range(d)) for c in range(d)]
    cols = _apply_columns(cols, d, jd, kind)
    return tuple(tuple(cols[c][r] for c in range(d)) for r in range(d))


def induction_trace(T: IET, steps: int, mode="rauzy", max_height=None, store_matrices=True) -> RauzyTrace:
    """Run ``steps`` steps of Rauzy-Veech (``rauzy``), Zorich (``zorich``) or the
    ``roth`` acceleration (maximal blocks in which at most ``d - 1`` names win).

    Heights are exact Python integers.  Lengths are kept unnormalized, so
    ``sum(lam^(n) * h^(n))`` equals the total length of ``T``.  With
    ``max_height`` the trace stops before any height exceeds the budget.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1", "steps")
    if mode not in ("rauzy", "zorich", "roth"):
        raise ValidationError(f"unknown mode {mode!r}", "mode")
    d = T.d
    pi = T.perm.images
    lam = list(T.lengths)
    h = [1] * d
    q_cols = [tuple(1 if r == c else 0 for r in range(d)) for c in range(d)]
    names = list(range(d))
    trace = RauzyTrace(mode=mode)

    def snapshot(index, rv_index, kinds, winners):
        cum = tuple(tuple(q_cols[c][r] for c in range(d)) for r in range(d)) if store_matrices else None
        trace.states.append(TraceState(
            index=index, rv_index=rv_index, perm=Permutation(pi), lengths=tuple(lam),
            heights=tuple(h), interval_length=sum(lam), cumulative=cum,
            kinds=tuple(kinds), winners=tuple(winners)))

    snapshot(0, 0, (), ())
    rv = 0
    kinds, winners = [], []
    while len(trace.states) <= steps:
        try:
            pi2, lam2, kind, jd = _rv_move(pi, lam, 0 if T.exact else TOL_EQ * float(sum(lam)))
        except UndefinedStep as err:
            err.step = rv
            err.partial = trace
            raise
        winner = names[d - 1] if kind == TOP else names[jd - 1]
        boundary = False
        if mode == "zorich" and kinds and kind != kinds[-1]:
            boundary = True
        if mode == "roth" and kinds and winner not in winners and len(set(winners)) == d - 1:
            boundary = True
        if boundary:
            if max_height is not None and max(h) > max_height:
                trace.stopped = "max_height"
                return trace
            snapshot(len(trace.states), rv, kinds, winners)
            kinds, winners = [], []
            if len(trace.states) > steps:
                break
        h2 = _apply_columns(h, d, jd, kind)
        if mode == "rauzy" and max_height is not None and max(h2) > max_height:
            trace.stopped = "max_height"
            return trace
        q_cols = _apply_columns(q_cols, d, jd, kind) if store_matrices else q_cols
        names = _names_after(names, d, jd, kind)
        pi, lam, h = pi2, lam2, h2
        rv += 1
        kinds.append(kind)
        winners.append(winner)
        if mode == "rauzy":
            snapshot(len(trace.states), rv, kinds, winners)
            kinds, winners = [], []
    return trace


# -- Rauzy classes -----------------------------------------------------------

@dataclass
class RauzyGraph:
    vertices: list
    arrows: list

    def to_dot(self):
        lines = ["digraph rauzy {"]
        for v in self.vertices:
            lines.append(f'  "{v}";')
        for a in self.arrows:
            style = "solid" if a.kind == TOP else "dashed"
            lines.append(f'  "{a.from_perm}" -> "{a.to_perm}" [label="{KIND_NAMES[a.kind]}", style={style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "vertices": [list(v.images) for v in self.vertices],
            "arrows": [a.to_dict() for a in self.arrows],
        }


def rauzy_class_enumerate(seed_perm) -> RauzyGraph:
    """Breadth-first closure of ``seed_perm`` under top and bottom moves."""
    seed = as_permutation(seed_perm)
    if not seed.is_irreducible:
        raise ValidationError(f"{seed} is reducible", "perm")
    seen = {seed.images: 0}
    order = [seed]
    arrows = []
    queue = deque([seed])
    while queue:
        p = queue.popleft()
        for kind in (TOP, BOTTOM):
            a = make_arrow(p, kind)
            arrows.append(a)
            if a.to_perm.images not in seen:
                seen[a.to_perm.images] = len(order)
                order.append(a.to_perm)
                queue.append(a.to_perm)
    return RauzyGraph(order, arrows)


# -- cylinders, balance, Kerkhoff search ------------------------------------

def path_from_kinds(start, kinds) -> list:
    pi = as_permutation(start)
    path = []
    for k in kinds:
        a = make_arrow(pi, k)
        path.append(a)
        pi = a.to_perm
    return path


def _check_path(path, start=None):
    prev = as_permutation(start) if start is not None else None
    for i, a in enumerate(path):
        if prev is not None and a.from_perm != prev:
            raise NonComposablePath(i)
        prev = a.to_perm
    return prev


def path_matrix(path, d=None):
    """``B_gamma^*`` of a path: ``B_1^T B_2^T ... B_n^T`` as nested tuples of ints."""
    if d is None:
        d = path[0].d
    q = identity(d)
    for a in path:
        jd = a.from_perm.images.index(d) + 1
        q = _q_times_step(q, d, jd, a.kind)
    return q


def column_sums(m):
    d = len(m)
    return [sum(m[r][c] for r in range(d)) for c in range(len(m[0]))]


@dataclass(frozen=True)
class CylinderSimplex:
    start_perm: Permutation
    path: tuple
    matrix: tuple
    measure: Fraction

    @property
    def measure_float(self):
        return float(self.measure)

    @property
    def end_perm(self):
        return self.path[-1].to_perm if self.path else self.start_perm


def cylinder_measure(path, start=None) -> CylinderSimplex:
    """Lebesgue measure (normalized) of the set of lengths following ``path``."""
    path = list(path)
    _check_path(path, start)
    if not path:
        if start is None:
            raise ValidationError("empty path needs a start permutation", "path")
        st = as_permutation(start)
        return CylinderSimplex(st, (), identity(st.d), Fraction(1))
    q = path_matrix(path)
    den = 1
    for s in column_sums(q):
        den *= s
    return CylinderSimplex(path[0].from_perm, tuple(path), q, Fraction(1, den))


def balance_ratio(M) -> float:
    """``|C_max(M)| / |C_min(M)|`` for a non-negative matrix without zero columns."""
    arr = [[int(v) for v in row] for row in M]
    if any(v < 0 for row in arr for v in row):
        raise ValidationError("matrix has negative entries", "matrix")
    sums = column_sums(arr)
    for c, s in enumerate(sums):
        if s == 0:
            raise ZeroColumn(c)
    return max(sums) / min(sums)


@dataclass
class KerkhoffResult:
    base_path: tuple
    extensions: list
    conditional_measure: Fraction
    nodes: int
    C: float
    exhausted: bool

    @property
    def coverage(self):
        return float(self.conditional_measure)


def kerkhoff_extend(path, C: float, start=None, node_budget: int = 10**6, min_extra: int = 1) -> KerkhoffResult:
    """Breadth-first search for a prefix-free set of balanced extensions.

    Accepted extensions ``g`` of ``path`` satisfy ``balance_ratio(B_g^*) <= C``
    and ``C_max(B_g^*) <= C * C_max(B_path^*)``.  Branches whose largest column
    sum already exceeds that bound are pruned (column sums never decrease), so
    the search is finite.  ``conditional_measure`` is
    ``sum m(Delta_g) / m(Delta_path)``.
    """
    if C <= 1:
        raise ValidationError("C must exceed 1", "C")
    path = tuple(path)
    end = _check_path(path, start)
    if end is None:
        end = as_permutation(start)
    d = end.d
    q0 = path_matrix(path, d) if path else identity(d)
    cmax0 = max(column_sums(q0))
    base = cylinder_measure(path, start=end if not path else None)
    limit = C * cmax0
    found, total = [], Fraction(0)
    queue = deque([(end.images, q0, ())])
    nodes = 0
    while queue:
        pi, q, ext = queue.popleft()
        for kind in (TOP, BOTTOM):
            nodes += 1
            if nodes > node_budget:
                res = KerkhoffResult(path, found, total, nodes, C, True)
                raise SearchBudgetExceeded(node_budget, partial=res)
            jd = pi.index(d) + 1
            q2 = _q_times_step(q, d, jd, kind)
            sums = column_sums(q2)
            if max(sums) > limit:
                continue
            ext2 = ext + (kind,)
            if len(ext2) >= min_extra and max(sums) <= C * min(sums):
                full = path + tuple(path_from_kinds(end, ext2))
                den = 1
                for s in sums:
                    den *= s
                found.append(full)
                total += Fraction(1, den)
                continue
            queue.append((move_perm(pi, kind), q2, ext2))
    return KerkhoffResult(path, found, total / base.measure, nodes, C, False)


# -- natural extension -------------------------------------------------------

def in_cone(perm, tau, strict=True) -> Optional[int]:
    """``None`` if ``tau`` lies in ``Theta_pi``, else the first failing ``k``."""
    pi = as_permutation(perm)
    inv = pi.inverse
    d = pi.d
    s_top, s_bot = 0.0, 0.0
    for k in range(1, d):
        s_top += tau[k - 1]
        s_bot += tau[inv[k - 1] - 1]
        if not (s_top > 0 and s_bot < 0):
            return k
    return None


def area(perm, lam, tau) -> float:
    pi = as_permutation(perm)
    inv = pi.inverse
    d = pi.d
    pre = np.concatenate([[0.0], np.cumsum(tau)])
    pre_img = np.concatenate([[0.0], np.cumsum([tau[inv[i] - 1] for i in range(d)])])
    return float(sum(lam[k] * (pre[k] - pre_img[pi.images[k] - 1]) for k in range(d)))


@dataclass(frozen=True)
class NaturalExtensionTriple:
    perm: Permutation
    lam: tuple
    tau: tuple

    @property
    def area(self):
        return area(self.perm, self.lam, self.tau)


def _as_matrix(q):
    return np.array(q, dtype=float)


def natural_extension_step(t: NaturalExtensionTriple, direction="forward") -> NaturalExtensionTriple:
    """One step of the invertible Rauzy-Veech map on ``(pi, lam, tau)``.

    Forward: the type is read from ``lam``.  Backward: the previous move was
    top when ``sum(tau) < 0`` and bottom when ``sum(tau) > 0``.  Lengths are
    renormalized to sum 1 and ``tau`` is rescaled inversely, so the area is
    preserved.
    """
    k = in_cone(t.perm, t.tau)
    if k is not None:
        raise ConeViolation(k)
    d = t.perm.d
    lam = np.array(t.lam, dtype=float)
    tau = np.array(t.tau, dtype=float)
    if direction == "forward":
        pi2, lam2, kind, jd = _rv_move(t.perm.images, list(lam), TOL_EQ * float(lam.sum()))
        bt = _as_matrix(arrow_matrix(d, jd, kind)).T
        new_lam = np.linalg.solve(bt, lam)
        s = new_lam.sum()
        new_tau = np.linalg.solve(bt, tau) * s
        return NaturalExtensionTriple(Permutation(pi2), tuple(new_lam / s), tuple(new_tau))
    if direction != "backward":
        raise ValidationError(f"unknown direction {direction!r}", "direction")
    s = tau.sum()
    if abs(s) <= TOL_EQ * float(np.abs(tau).sum()):
        raise UndefinedStep()
    kind = TOP if s < 0 else BOTTOM
    prev = unmove_perm(t.perm.images, kind)
    jd = prev.index(d) + 1
    bt = _as_matrix(arrow_matrix(d, jd, kind)).T
    old_lam = bt @ lam
    n = old_lam.sum()
    return NaturalExtensionTriple(Permutation(prev), tuple(old_lam / n), tuple(bt @ tau * n))


def sample_tau(perm, rng, max_tries=100000) -> np.ndarray:
    """Rejection sample from ``[-1, 1]^d`` restricted to ``Theta_pi``."""
    pi = as_permutation(perm)
    for _ in range(max_tries):
        tau = rng.uniform(-1.0, 1.0, size=pi.d)
        if in_cone(pi, tau) is None:
            return tau
    raise ValidationError(f"could not sample the cone of {pi}", "perm")


def sample_triple(perm, rng, lam=None) -> NaturalExtensionTriple:
    pi = as_permutation(perm)
    if lam is None:
        lam = rng.dirichlet(np.ones(pi.d))
    tau = sample_tau(pi, rng)
    a = area(pi, lam, tau)
    return NaturalExtensionTriple(pi, tuple(lam), tuple(tau / a))


@dataclass
class MarkovReport:
    path_kinds: tuple
    samples: int
    failures: int
    path_mismatches: int
    cone_failures: int

    def to_dict(self):
        return dict(self.__dict__, path_kinds=list(self.path_kinds))


def markov_cylinder_check(path, samples: int, seed: int, outside=False) -> MarkovReport:
    """Sample triples in ``{pi} x Delta_gamma x Theta_pi`` and push them ``n`` steps.

    A sample fails when it does not end at the path's final permutation with
    ``tau`` in ``Theta_{pi'}`` and in ``(B_gamma^*)^{-1} Theta_pi``.  With
    ``outside=True`` lengths are drawn from the whole simplex instead.
    """
    path = list(path)
    end = _check_path(path)
    start = path[0].from_perm
    d = start.d
    q = _as_matrix(path_matrix(path))
    rng = np.random.default_rng(seed)
    fails = mism = cone = 0
    for _ in range(samples):
        mu = rng.dirichlet(np.ones(d))
        lam = mu if outside else q @ mu / (q @ mu).sum()
        t = sample_triple(start, rng, lam=lam)
        kinds = []
        try:
            for _ in path:
                pi = t.perm.images
                nxt = natural_extension_step(t)
                jd = pi.index(d) + 1
                kinds.append(TOP if t.lam[d - 1] > t.lam[jd - 1] else BOTTOM)
                t = nxt
        except ConeViolation:
            fails += 1
            cone += 1
            continue
        ok_path = t.perm == end and tuple(kinds) == tuple(a.kind for a in path)
        back = q @ np.array(t.tau)
        ok_cone = in_cone(t.perm, t.tau) is None and in_cone(start, back) is None
        if not ok_path:
            mism += 1
        if not ok_cone:
            cone += 1
        if not (ok_path and ok_cone):
            fails += 1
    return MarkovReport(tuple(a.kind for a in path), samples, fails, mism, cone)


# -- Lyapunov exponents ------------------------------------------------------

@dataclass
class LyapunovEstimate:
    lambda1: float
    lambda2: float
    ratio: float
    sample_steps: int
    ensemble_size: int
    per_orbit: list = field(default_factory=list)

    def to_dict(self):
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "ratio": self.ratio,
            "sample_steps": self.sample_steps,
            "ensemble_size": self.ensemble_size,
        }


def _zorich_orbit_exponents(pi, lam, steps, rng, reortho=10, positivity_steps=None):
    d = len(pi)
    v1 = list(rng.standard_normal(d))
    v2 = list(rng.standard_normal(d))
    logs = [0.0, 0.0]
    pattern = [tuple(r == c for r in range(d)) for c in range(d)]
    positive = False
    last = None
    zsteps = 0
    while zsteps < steps:
        dd = d
        jd = pi.index(dd) + 1
        a, b = lam[dd - 1], lam[jd - 1]
        kind = TOP if a > b else BOTTOM
        if a == b:
            raise UndefinedStep()
        if last is not None and kind != last:
            zsteps += 1
            if zsteps % reortho == 0:
                logs, v1, v2 = _gram_schmidt(logs, v1, v2)
        last = kind
        pi2, lam2, _, _ = _rv_move(pi, lam, 0.0)
        s = sum(lam2)
        lam = [x / s for x in lam2]
        v1 = _apply_columns(v1, d, jd, kind)
        v2 = _apply_columns(v2, d, jd, kind)
        if not positive:
            pattern = _apply_columns(pattern, d, jd, kind)
            positive = all(all(col) for col in pattern)
        pi = pi2
    logs, v1, v2 = _gram_schmidt(logs, v1, v2)
    return logs[0] / steps, logs[1] / steps, positive


def _gram_schmidt(logs, v1, v2):
    n1 = math.sqrt(sum(x * x for x in v1))
    e1 = [x / n1 for x in v1]
    p = sum(x * y for x, y in zip(e1, v2))
    w = [y - p * x for x, y in zip(e1, v2)]
    n2 = math.sqrt(sum(x * x for x in w))
    return [logs[0] + math.log(n1), logs[1] + math.log(n2)], e1, [x / n2 for x in w]


def lyapunov_estimate(seed_perm, ensemble: int, steps: int, seed: int, reortho: int = 10) -> LyapunovEstimate:
    """Top two Lyapunov exponents of the Zorich heights cocycle.

    Each orbit starts from Lebesgue-random lengths; a 2-frame is pushed by the
    cocycle and re-orthogonalized every ``reortho`` Zorich steps.  For ``d = 2``
    the second exponent is reported as 0 since the cocycle has no nontrivial
    second exponent there.
    """
    pi = as_permutation(seed_perm)
    rng = np.random.default_rng(seed)
    l1s, l2s = [], []
    for _ in range(ensemble):
        lam = list(rng.dirichlet(np.ones(pi.d)))
        sub = np.random.default_rng(rng.integers(2**63))
        a, b, positive = _zorich_orbit_exponents(pi.images, lam, steps, sub, reortho)
        if not positive:
            raise DegenerateProduct(f"cocycle product not positive after {steps} Zorich steps")
        l1s.append(a)
        l2s.append(b)
    l1 = float(np.mean(l1s))
    l2 = float(np.mean(l2s)) if pi.d > 2 else 0.0
    return LyapunovEstimate(l1, l2, l2 / l1, steps, ensemble, per_orbit=list(zip(l1s, l2s)))
