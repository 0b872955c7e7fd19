"""Interval exchange transformations.

An IET is given by a permutation ``pi`` and a length vector ``lam``.  Interval
``I_j = [beta_{j-1}, beta_j)`` is translated so that it becomes the
``pi(j)``-th interval from the left in the image, i.e. ``T(x) = x + delta_j``
with ``delta = Omega_pi @ lam``.

Two arithmetic modes are supported.  In float mode lengths are Python floats
and points closer than ``TOL_EQ * total`` to an endpoint are treated as hits.
In exact mode lengths are :class:`fractions.Fraction` and comparisons are
exact.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    EndpointHit,
    NonPositiveLength,
    ReduciblePermutation,
    ReturnTimeExceeded,
    ValidationError,
)

TOL_EQ = 1e-12


@dataclass(frozen=True)
class Permutation:
    """A permutation of ``{1, ..., d}`` stored as the tuple of images."""

    images: tuple

    def __post_init__(self):
        imgs = tuple(int(v) for v in self.images)
        object.__setattr__(self, "images", imgs)
        if sorted(imgs) != list(range(1, len(imgs) + 1)):
            raise ValidationError(f"{imgs} is not a permutation of 1..{len(imgs)}", "perm")

    @property
    def d(self):
        return len(self.images)

    def __call__(self, j):
        return self.images[j - 1]

    @property
    def inverse(self):
        inv = [0] * self.d
        for j, v in enumerate(self.images, start=1):
            inv[v - 1] = j
        return tuple(inv)

    def reducible_at(self):
        """Smallest ``k < d`` with ``pi({1..k}) = {1..k}``, or ``None``."""
        top = 0
        for k in range(1, self.d):
            top = max(top, self.images[k - 1])
            if top == k:
                return k
        return None

    @property
    def is_irreducible(self):
        return self.reducible_at() is None

    def __str__(self):
        return "(" + ",".join(str(v) for v in self.images) + ")"


def as_permutation(p) -> Permutation:
    if isinstance(p, Permutation):
        return p
    if isinstance(p, str):
        p = [int(s) for s in p.replace("(", "").replace(")", "").split(",") if s.strip()]
    return Permutation(tuple(p))


def displacement_matrix(perm) -> np.ndarray:
    """The antisymmetric matrix ``Omega_pi`` with ``delta = Omega_pi @ lam``."""
    pi = as_permutation(perm).images
    d = len(pi)
    om = np.zeros((d, d), dtype=np.int64)
    for i in range(d):
        for j in range(d):
            if i < j and pi[i] > pi[j]:
                om[i, j] = 1
            elif i > j and pi[i] < pi[j]:
                om[i, j] = -1
    return om


def _to_number(v, exact):
    if exact:
        if isinstance(v, str):
            return Fraction(v)
        return Fraction(v)
    return float(v)


class IET:
    """An interval exchange on ``[0, total)``.  Build with :func:`make_iet`."""

    def __init__(self, perm, lengths, exact=False):
        self.perm = as_permutation(perm)
        self.exact = bool(exact)
        self.lengths = tuple(_to_number(v, self.exact) for v in lengths)
        self.d = len(self.lengths)
        zero = Fraction(0) if self.exact else 0.0
        beta = [zero]
        for lam in self.lengths:
            beta.append(beta[-1] + lam)
        self.endpoints = tuple(beta)
        self.total = beta[-1]
        pi = self.perm.images
        disp = []
        for i in range(self.d):
            s = zero
            for j in range(self.d):
                if i < j and pi[i] > pi[j]:
                    s += self.lengths[j]
                elif i > j and pi[i] < pi[j]:
                    s -= self.lengths[j]
            disp.append(s)
        self.displacements = tuple(disp)
        # image-side partition: position k of the image holds interval inv[k]
        inv = self.perm.inverse
        img = [zero]
        for k in range(self.d):
            img.append(img[-1] + self.lengths[inv[k] - 1])
        self.image_endpoints = tuple(img)
        self._inner = list(self.endpoints[1:-1])
        self._inner_img = list(self.image_endpoints[1:-1])
        self._inv0 = [j - 1 for j in inv]
        self.tol = zero if self.exact else TOL_EQ * float(self.total)
        self.beta = np.array([float(b) for b in self.endpoints])
        self.delta = np.array([float(v) for v in self.displacements])

    # -- basic maps -------------------------------------------------------
    def index(self, x):
        """0-based index of the interval containing ``x``."""
        return bisect_right(self._inner, x)

    def __call__(self, x):
        return x + self.displacements[bisect_right(self._inner, x)]

    def inverse(self, y):
        k = bisect_right(self._inner_img, y)
        return y - self.displacements[self._inv0[k]]

    def near_endpoint(self, x):
        """Index of an endpoint beta_0..beta_{d-1} within tolerance of x, else None."""
        i = bisect_right(self._inner, x)
        if abs(x - self.endpoints[i]) <= self.tol:
            return i
        if i + 1 < self.d and abs(self.endpoints[i + 1] - x) <= self.tol:
            return i + 1
        return None

    # -- conversions ------------------------------------------------------
    def to_dict(self):
        out = {
            "perm": list(self.perm.images),
            "lengths": [float(v) for v in self.lengths],
            "exact": self.exact,
        }
        if self.exact:
            out["lengths_rational"] = [[str(v.numerator), str(v.denominator)] for v in self.lengths]
        return out

    @classmethod
    def from_dict(cls, data, normalize=True):
        exact = bool(data.get("exact", False))
        if exact and data.get("lengths_rational"):
            lengths = [Fraction(int(p), int(q)) for p, q in data["lengths_rational"]]
        else:
            lengths = data["lengths"]
        return make_iet(data["perm"], lengths, normalize=normalize, exact=exact)

    def as_float(self):
        return IET(self.perm, [float(v) for v in self.lengths], exact=False)

    def __repr__(self):
        lens = ", ".join(f"{float(v):.6g}" for v in self.lengths)
        return f"IET(perm={self.perm}, lengths=[{lens}], exact={self.exact})"


def make_iet(perm, lengths, normalize=True, exact=None, check_irreducible=True) -> IET:
    """Validate and construct an IET.

    ``exact`` defaults to True when every length is a Fraction or a rational
    string such as ``"3/7"``.
    """
    perm = as_permutation(perm)
    lengths = list(lengths)
    if perm.d < 2:
        raise ValidationError("need at least two intervals", "perm")
    if len(lengths) != perm.d:
        raise ValidationError(f"expected {perm.d} lengths, got {len(lengths)}", "lengths")
    if exact is None:
        exact = all(isinstance(v, (Fraction, str)) for v in lengths)
    vals = [_to_number(v, exact) for v in lengths]
    for i, v in enumerate(vals):
        if not v > 0 or (not exact and not np.isfinite(v)):
            raise NonPositiveLength(i)
    if check_irreducible:
        k = perm.reducible_at()
        if k is not None:
            raise ReduciblePermutation(k)
    if normalize:
        tot = sum(vals)
        vals = [v / tot for v in vals]
    return IET(perm, vals, exact=exact)


def rotation(alpha, exact=None) -> IET:
    """Two-interval exchange ``(2,1)`` with lengths ``(alpha, 1 - alpha)``.

    This is the circle rotation ``x -> x + 1 - alpha`` (mod 1).
    """
    if exact is None:
        exact = isinstance(alpha, Fraction)
    one = Fraction(1) if exact else 1.0
    a = Fraction(alpha) if exact else float(alpha)
    return make_iet((2, 1), [a, one - a], normalize=False, exact=exact)


def random_iet(perm, rng, exact=False, denominator_bits=512) -> IET:
    """IET with lengths drawn from Lebesgue measure on the simplex.

    In exact mode the lengths are the spacings of ``d - 1`` uniform random
    integers below ``2**denominator_bits``, i.e. a uniform point of the
    simplex discretized at that resolution.  All bits are random, so
    Rauzy-Veech induction runs until heights near ``2**(denominator_bits / d)``.
    """
    perm = as_permutation(perm)
    if not exact:
        lam = rng.dirichlet(np.ones(perm.d))
        return make_iet(perm, lam, normalize=True, exact=False)
    den = 1 << denominator_bits
    nbytes = (denominator_bits + 7) // 8
    while True:
        cuts = sorted(int.from_bytes(rng.bytes(nbytes), "little") % den for _ in range(perm.d - 1))
        gaps = [b - a for a, b in zip([0] + cuts, cuts + [den])]
        if min(gaps) > 0:
            return make_iet(perm, [Fraction(g, den) for g in gaps], normalize=False, exact=True)


# -- orbits ---------------------------------------------------------------

def apply_orbit(T: IET, x, r: int, direction="forward", check=True):
    """The orbit segment ``(x, Tx, ..., T^{r-1} x)`` (or its backward analogue).

    Raises :class:`EndpointHit` when some iterate after the first coincides
    with an endpoint ``beta_0, ..., beta_{d-1}``.
    """
    if direction not in ("forward", "backward"):
        raise ValidationError(f"unknown direction {direction!r}", "direction")
    x = _to_number(x, T.exact)
    step = T if direction == "forward" else T.inverse
    out = [x]
    for m in range(1, abs(int(r))):
        x = step(x)
        if check:
            k = T.near_endpoint(x)
            if k is not None:
                raise EndpointHit(m, k, x)
        out.append(x)
    return out


def iterate(T: IET, x, n: int, check=False):
    """``T^n x`` for a signed integer ``n``."""
    x = _to_number(x, T.exact)
    step = T if n >= 0 else T.inverse
    for m in range(1, abs(int(n)) + 1):
        x = step(x)
        if check:
            k = T.near_endpoint(x)
            if k is not None:
                raise EndpointHit(m, k, x)
    return x


def iterate_array(T: IET, xs: np.ndarray, n: int) -> np.ndarray:
    """Vectorized ``T^n`` on an array of float points (no endpoint checks)."""
    xs = np.array(xs, dtype=float)
    inner = T.beta[1:-1]
    if n >= 0:
        delta = T.delta
        for _ in range(n):
            xs += delta[np.searchsorted(inner, xs, side="right")]
    else:
        inner_img = np.array([float(v) for v in T.image_endpoints[1:-1]])
        back = -T.delta[np.array(T._inv0)]
        for _ in range(-n):
            xs += back[np.searchsorted(inner_img, xs, side="right")]
    return xs


class KeaneViolation(NamedTuple):
    m: int
    i: int
    j: int


def keane_depth_check(T: IET, depth: int) -> Optional[KeaneViolation]:
    """Search for a connection ``T^m beta_i = beta_j`` with ``m <= depth``.

    Only the inner endpoints ``beta_1, ..., beta_{d-1}`` are used.  Returns
    ``None`` when no connection is found, otherwise the first one ordered by
    ``(m, i, j)``.
    """
    if depth < 1:
        raise ValidationError("depth must be >= 1", "depth")
    inner = T.endpoints[1:-1]
    pts = list(inner)
    for m in range(1, depth + 1):
        pts = [T(p) for p in pts]
        for i, p in enumerate(pts, start=1):
            for j, b in enumerate(inner, start=1):
                if abs(p - b) <= T.tol:
                    return KeaneViolation(m, i, j)
    return None


# -- towers and induced maps ----------------------------------------------

@dataclass(frozen=True)
class TowerDescriptor:
    """Floors ``T^i(base)``, ``0 <= i < height``; ``epsilon`` is the rigidity quality."""

    base: tuple
    height: int
    area: float = field(default=None)
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.area is None:
            a, b = self.base
            object.__setattr__(self, "area", float(self.height) * float(b - a))

    @property
    def width(self):
        return self.base[1] - self.base[0]

    def to_dict(self):
        return {
            "base": [float(self.base[0]), float(self.base[1])],
            "height": str(int(self.height)),
            "area": float(self.area),
            "epsilon": None if self.epsilon is None else float(self.epsilon),
        }


@dataclass
class InducedMap:
    host: IET
    window: tuple
    sub_iet: IET
    return_times: list
    shifts: list
    towers: list

    def covered_measure(self):
        return sum(t.area for t in self.towers)


def _first_backward_entry(T, y, a, b, kmin, max_steps):
    for k in range(max_steps + 1):
        if k >= kmin and a <= y < b:
            return y
        if k == max_steps:
            break
        y = T.inverse(y)
    raise ReturnTimeExceeded(max_steps)


def induce_first_return(T: IET, J, max_steps: int = 10**6) -> InducedMap:
    """First-return map of ``T`` to ``J = [a, b)`` together with its towers."""
    a, b = (_to_number(v, T.exact) for v in J)
    if not (0 <= a < b <= T.total):
        raise ValidationError(f"window {J} is not a subinterval of [0, {T.total})", "window")
    cuts = [a, b]
    for beta in T.endpoints[1:-1]:
        cuts.append(_first_backward_entry(T, beta, a, b, 0, max_steps))
    for y in (a, b):
        if y < T.total:
            cuts.append(_first_backward_entry(T, y, a, b, 1, max_steps))
    cuts = sorted(set(cuts))
    pts = [cuts[0]]
    for c in cuts[1:]:
        if c - pts[-1] > T.tol:
            pts.append(c)
    if b - pts[-1] <= T.tol:
        pts[-1] = b
    else:
        pts.append(b)
    pieces = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = (lo + hi) / 2
        y = T(mid)
        h = 1
        while not (a <= y < b):
            y = T(y)
            h += 1
            if h > max_steps:
                raise ReturnTimeExceeded(max_steps)
        pieces.append([lo, hi, h, y - mid])
    merged = [pieces[0]]
    for p in pieces[1:]:
        q = merged[-1]
        if p[2] == q[2] and abs(p[3] - q[3]) <= T.tol:
            q[1] = p[1]
        else:
            merged.append(p)
    widths = [p[1] - p[0] for p in merged]
    order = sorted(range(len(merged)), key=lambda i: merged[i][0] + merged[i][3])
    images = [0] * len(merged)
    for pos, i in enumerate(order, start=1):
        images[i] = pos
    if len(merged) == 1:
        sub = None
    else:
        sub = make_iet(images, widths, normalize=False, exact=T.exact, check_irreducible=False)
    towers = [TowerDescriptor(base=(p[0], p[1]), height=p[2]) for p in merged]
    return InducedMap(
        host=T,
        window=(a, b),
        sub_iet=sub,
        return_times=[p[2] for p in merged],
        shifts=[p[3] for p in merged],
        towers=towers,
    )


def tower_floor_starts(T: IET, tower: TowerDescriptor):
    """Left endpoints of the floors of ``tower`` (direct iteration)."""
    return apply_orbit(T, tower.base[0], tower.height, check=False)


def towers_disjoint(T: IET, towers: Sequence[TowerDescriptor]) -> bool:
    """Check floors of all towers are pairwise disjoint and endpoint-free."""
    intervals = []
    for tw in towers:
        w = tw.base[1] - tw.base[0]
        for s in tower_floor_starts(T, tw):
            intervals.append((s, s + w))
    intervals.sort()
    for (a0, b0), (a1, _) in zip(intervals, intervals[1:]):
        if a1 < b0 - T.tol:
            return False
    for lo, hi in intervals:
        for beta in T.endpoints[1:-1]:
            if lo + T.tol < beta < hi - T.tol:
                return False
    return True
