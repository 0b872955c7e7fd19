"""Roof functions with symmetric logarithmic singularities and special flows.

A roof over an IET with endpoints ``beta_0 < ... < beta_d`` has the form

    f(x) = sum_{i<d} C+_i Log(x - beta_i) + sum_{i>=1} C-_i Log(beta_i - x) + g(x)

with ``Log(y) = -log(y)`` for ``y > 0`` and ``0`` otherwise, so ``C+_i`` acts on
every point to the right of ``beta_i`` and ``C-_i`` on every point to its left.
``g`` is piecewise linear, ``g(x) = slopes[i] * x + intercepts[i]`` on ``I_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (
    AsymmetricCoefficients,
    AtSingularity,
    EndpointHit,
    NonPositiveRoof,
    StepBudgetExceeded,
    ValidationError,
)
from .iet import IET, TOL_EQ, apply_orbit

STEP_BUDGET = 10**7


@dataclass(frozen=True)
class PiecewiseLinear:
    slopes: tuple
    intercepts: tuple

    def to_dict(self):
        return {"type": "piecewise_linear", "slopes": list(self.slopes), "intercepts": list(self.intercepts)}


class SymLogRoof:
    """Roof ``f`` over the endpoints of an IET.  Build with :func:`make_roof`."""

    def __init__(self, endpoints, c_plus, c_minus, g: PiecewiseLinear):
        self.beta = np.array([float(b) for b in endpoints])
        self.d = len(self.beta) - 1
        self.c_plus = np.array(c_plus, dtype=float)
        self.c_minus = np.array(c_minus, dtype=float)
        self.g = g
        self.slopes = np.array(g.slopes, dtype=float)
        self.intercepts = np.array(g.intercepts, dtype=float)
        self.tol = TOL_EQ * float(self.beta[-1])
        self.mean = self._integral() / float(self.beta[-1])
        coef = np.zeros(self.d + 1)
        coef[:-1] += self.c_plus
        coef[1:] += self.c_minus
        self.singular_points = np.flatnonzero(coef > 0)

    # -- integrals and variation ------------------------------------------
    def _integral(self):
        tot = 0.0
        end = self.beta[-1]
        for i in range(self.d):
            L = end - self.beta[i]
            tot += self.c_plus[i] * (L - L * math.log(L))
            L = self.beta[i + 1]
            tot += self.c_minus[i] * (L - L * math.log(L))
        return tot + self.g_integral()

    def g_integral(self):
        b0, b1 = self.beta[:-1], self.beta[1:]
        return float(np.sum(self.slopes * (b1**2 - b0**2) / 2 + self.intercepts * (b1 - b0)))

    def g_mean(self):
        return self.g_integral() / float(self.beta[-1])

    def g_variation(self, circular=False):
        """Total variation of ``g`` over ``[0, total)`` (jumps included).

        With ``circular=True`` the jump between ``g(total-)`` and ``g(0)`` is
        counted too, which is the variation of ``g`` seen as a circle function.
        """
        b0, b1 = self.beta[:-1], self.beta[1:]
        var = float(np.sum(np.abs(self.slopes) * (b1 - b0)))
        left = self.slopes * b0 + self.intercepts
        right = self.slopes * b1 + self.intercepts
        var += float(np.sum(np.abs(left[1:] - right[:-1])))
        if circular:
            var += float(abs(left[0] - right[-1]))
        return var

    @property
    def is_symmetric(self):
        return abs(self.c_plus.sum() - self.c_minus.sum()) <= 1e-12 * max(1.0, self.c_plus.sum())

    # -- evaluation ---------------------------------------------------------
    def g_eval(self, x, order=0):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.beta[1:-1], x, side="right"), 0, self.d - 1)
        if order == 0:
            return self.slopes[idx] * x + self.intercepts[idx]
        if order == 1:
            return self.slopes[idx] + 0.0 * x
        return 0.0 * x

    def singular_eval(self, x, order=0):
        x = np.asarray(x, dtype=float)
        yp = x[..., None] - self.beta[None, :-1]
        ym = self.beta[None, 1:] - x[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            if order == 0:
                tp = np.where(yp > 0, -np.log(np.where(yp > 0, yp, 1.0)), 0.0)
                tm = np.where(ym > 0, -np.log(np.where(ym > 0, ym, 1.0)), 0.0)
            else:
                fac = math.factorial(order - 1)
                sp = np.where(yp > 0, yp, np.inf)
                sm = np.where(ym > 0, ym, np.inf)
                tp = (-1) ** order * fac / sp**order
                tm = fac / sm**order
        return tp @ self.c_plus + tm @ self.c_minus

    def __call__(self, x, order=0):
        return eval_roof(self, x, order)

    def scaled(self, factor):
        g = PiecewiseLinear(tuple(self.slopes * factor), tuple(self.intercepts * factor))
        return SymLogRoof(self.beta, self.c_plus * factor, self.c_minus * factor, g)

    def to_dict(self):
        return {"c_plus": self.c_plus.tolist(), "c_minus": self.c_minus.tolist(), "g": self.g.to_dict()}

    def __repr__(self):
        return f"SymLogRoof(c_plus={self.c_plus.tolist()}, c_minus={self.c_minus.tolist()}, mean={self.mean:.6g})"


def make_roof(endpoints, c_plus, c_minus, g_spec=None, symmetric=True, allow_zero=False,
              grid_per_interval=10**4) -> SymLogRoof:
    """Validate coefficients, compute the mean and certify positivity on a grid.

    ``endpoints`` may be an :class:`IET` or the list ``beta_0..beta_d``.
    ``g_spec`` is a number (constant), a dict ``{"slopes", "intercepts"}`` or
    a :class:`PiecewiseLinear`; default ``0``.  ``allow_zero`` admits the
    all-zero singular part (used for constant and BV test roofs).
    """
    beta = list(endpoints.endpoints) if isinstance(endpoints, IET) else list(endpoints)
    d = len(beta) - 1
    cp = [float(v) for v in c_plus]
    cm = [float(v) for v in c_minus]
    if len(cp) != d:
        raise ValidationError(f"expected {d} C+ coefficients", "c_plus")
    if len(cm) != d:
        raise ValidationError(f"expected {d} C- coefficients", "c_minus")
    if any(v < 0 for v in cp):
        raise ValidationError("C+ coefficients must be non-negative", "c_plus")
    if any(v < 0 for v in cm):
        raise ValidationError("C- coefficients must be non-negative", "c_minus")
    if not allow_zero and sum(cp) + sum(cm) == 0:
        raise ValidationError("at least one singular coefficient must be positive", "c_plus")
    if symmetric and abs(sum(cp) - sum(cm)) > 1e-12 * max(1.0, sum(cp)):
        raise AsymmetricCoefficients(sum(cp), sum(cm))
    g = _as_piecewise(g_spec, d)
    roof = SymLogRoof(beta, cp, cm, g)
    if grid_per_interval:
        for i in range(d):
            a, b = roof.beta[i], roof.beta[i + 1]
            xs = a + (b - a) * (np.arange(grid_per_interval) + 0.5) / grid_per_interval
            vals = roof.singular_eval(xs) + roof.g_eval(xs)
            k = int(np.argmin(vals))
            if not vals[k] > 0:
                raise NonPositiveRoof(float(vals[k]), float(xs[k]))
    return roof


def _as_piecewise(spec, d):
    if spec is None:
        spec = 0.0
    if isinstance(spec, PiecewiseLinear):
        return spec
    if isinstance(spec, (int, float)):
        return PiecewiseLinear((0.0,) * d, (float(spec),) * d)
    if isinstance(spec, dict):
        if spec.get("type", "piecewise_linear") != "piecewise_linear":
            raise ValidationError(f"unsupported g type {spec.get('type')!r}", "g.type")
        slopes = [float(v) for v in spec.get("slopes", [0.0] * d)]
        inter = [float(v) for v in spec.get("intercepts", [0.0] * d)]
        if len(slopes) != d:
            raise ValidationError(f"expected {d} slopes", "g.slopes")
        if len(inter) != d:
            raise ValidationError(f"expected {d} intercepts", "g.intercepts")
        return PiecewiseLinear(tuple(slopes), tuple(inter))
    raise ValidationError("g must be a number or a piecewise-linear spec", "g")


def roof_from_dict(endpoints, data, symmetric=True):
    return make_roof(endpoints, data["c_plus"], data["c_minus"], data.get("g"), symmetric=symmetric)


def constant_roof(T: IET, c: float) -> SymLogRoof:
    """Test-mode roof ``f = c`` (no singular part)."""
    return make_roof(T, [0.0] * T.d, [0.0] * T.d, float(c), symmetric=False, allow_zero=True,
                     grid_per_interval=0)


def rescale_to_mean_one(f: SymLogRoof) -> SymLogRoof:
    return f.scaled(1.0 / f.mean)


def random_symlog_roof(T: IET, rng, g_level=0.5, total_mass=1.0) -> SymLogRoof:
    """Random symmetric roof: Dirichlet weights on both sides, constant positive ``g``."""
    d = T.d
    cp = rng.dirichlet(np.ones(d)) * total_mass
    cm = rng.dirichlet(np.ones(d)) * total_mass
    cm *= cp.sum() / cm.sum()
    return make_roof(T, cp, cm, float(g_level), symmetric=True)


def eval_roof(f: SymLogRoof, x, order: int = 0):
    """``f``, ``f'`` or ``f''`` at ``x`` (scalar or array)."""
    if order not in (0, 1, 2):
        raise ValidationError("order must be 0, 1 or 2", "order")
    arr = np.asarray(x, dtype=float)
    sing = f.singular_points
    hit = np.abs(arr[..., None] - f.beta[None, sing]) <= f.tol
    if hit.any():
        pos = np.argwhere(hit)[0]
        bad = arr.reshape(-1)[np.ravel_multi_index(tuple(pos[:-1]), arr.shape)] if arr.ndim else arr
        raise AtSingularity(float(bad), int(sing[pos[-1]]))
    out = f.singular_eval(arr, order) + f.g_eval(arr, order)
    return float(np.reshape(out, -1)[0]) if arr.ndim == 0 else out


# -- Birkhoff sums -----------------------------------------------------------

def _orbit_points(T, x, n, check=True):
    if n >= 0:
        pts = apply_orbit(T, x, n, "forward", check=check) if n > 0 else []
    else:
        back = apply_orbit(T, x, -n + 1, "backward", check=check)
        pts = back[1:]
    return np.array([float(p) for p in pts])


def birkhoff_sum(T: IET, f: SymLogRoof, x, n: int, order: int = 0) -> float:
    """``S_n f^(order)(x)``; for ``n < 0`` it is ``-sum_{n<=i<0} f(T^i x)``."""
    if n == 0:
        return 0.0
    pts = _orbit_points(T, x, n)
    vals = eval_roof(f, pts, order)
    s = math.fsum(np.atleast_1d(vals))
    return s if n > 0 else -s


def floor_sum(n: int, m: int, a: int, b: int) -> int:
    """``sum_{0<=j<n} floor((a*j + b) / m)`` for integers ``n, a, b >= 0``, ``m > 0``."""
    total = 0
    while True:
        if a >= m:
            total += (n - 1) * n // 2 * (a // m)
            a %= m
        if b >= m:
            total += n * (b // m)
            b %= m
        y_max = a * n + b
        if y_max < m:
            return total
        n, b, m, a = y_max // m, y_max % m, a, m


def rotation_g_sum(T: IET, f: SymLogRoof, x, n: int) -> Fraction:
    """Exact ``S_n g(x)`` for the piecewise-linear part of ``f`` over a rotation.

    ``T`` must be an exact ``(2,1)`` IET.  The orbit ``y_j = T^j x`` is the
    sequence ``L {(x + j theta) / L}``, so the interval counts telescope and
    ``sum y_j`` reduces to a floor sum; ``sum_{y_j >= alpha} y_j`` follows from
    squaring ``y_{j+1} = y_j + theta - L c_j``.  Cost is ``O(log n)``.
    """
    if T.perm.images != (2, 1) or not T.exact:
        raise ValidationError("T", "rotation_g_sum needs an exact (2,1) IET")
    if n < 0:
        raise ValidationError("n", "must be >= 0")
    lam0, theta = (Fraction(v) for v in T.lengths)
    L = lam0 + theta
    x = Fraction(x)
    if not 0 <= x < L:
        raise ValidationError("x", "outside the interval")
    u, t = x / L, theta / L
    m = u.denominator * t.denominator // math.gcd(u.denominator, t.denominator)
    F = floor_sum(n, m, int(t * m), int(u * m))
    C = math.floor(u + n * t)
    Y = L * (n * u + t * n * (n - 1) / 2 - F)
    y_n = L * (u + n * t - C)
    Z = (x * x - y_n * y_n + 2 * theta * Y + n * theta * theta - 2 * theta * L * C + L * L * C) / (2 * L)
    s0, s1 = (Fraction(float(v)) for v in f.slopes)
    i0, i1 = (Fraction(float(v)) for v in f.intercepts)
    return s0 * Y + i0 * (n - C) + (s1 - s0) * Z + i1 * C


@dataclass
class ClosestVisitRecord:
    m_plus: np.ndarray
    m_minus: np.ndarray
    arg_plus: np.ndarray
    arg_minus: np.ndarray
    m_global: float

    def x_plus(self, beta):
        return beta[:-1] + self.m_plus

    def x_minus(self, beta):
        return beta[1:] - self.m_minus


def closest_visits_from_points(beta, pts, tol=0.0) -> ClosestVisitRecord:
    pts = np.asarray(pts, dtype=float)
    d = len(beta) - 1
    yp = pts[:, None] - beta[None, :-1]
    ym = beta[None, 1:] - pts[:, None]
    bad_p = np.abs(yp) <= tol
    if bad_p.any():
        j, i = np.argwhere(bad_p)[0]
        raise EndpointHit(int(j), int(i))
    bad_m = np.abs(ym) <= tol
    if bad_m.any():
        j, i = np.argwhere(bad_m)[0]
        raise EndpointHit(int(j), int(i) + 1)
    sp = np.where(yp > 0, yp, np.inf)
    sm = np.where(ym > 0, ym, np.inf)
    ap = np.argmin(sp, axis=0)
    am = np.argmin(sm, axis=0)
    mp = sp[ap, np.arange(d)]
    mm = sm[am, np.arange(d)]
    ap = np.where(np.isfinite(mp), ap, -1)
    am = np.where(np.isfinite(mm), am, -1)
    mg = float(min(mp.min(), mm.min()))
    return ClosestVisitRecord(mp, mm, ap, am, mg)


def closest_visits(T: IET, x, r: int) -> ClosestVisitRecord:
    """One-sided closest approaches of ``x, ..., T^{r-1} x`` to every endpoint.

    ``m_plus[i]`` refers to ``beta_i`` (``i = 0..d-1``) approached from the
    right, ``m_minus[i]`` to ``beta_{i+1}`` approached from the left.  Sides
    never approached hold ``inf``.
    """
    if r < 1:
        raise ValidationError("r must be >= 1", "r")
    pts = _orbit_points(T, x, r)
    return closest_visits_from_points(T.beta, pts, tol=0.0 if T.exact else T.tol)


def trimming_terms(f: SymLogRoof, cv: ClosestVisitRecord, order: int = 0) -> float:
    """Sum of the closest-visit singular contributions removed by trimming."""
    mp, mm = cv.m_plus, cv.m_minus
    fp, fm = np.isfinite(mp), np.isfinite(mm)
    if order == 0:
        tp = -np.log(mp[fp])
        tm = -np.log(mm[fm])
    elif order == 1:
        tp = -1.0 / mp[fp]
        tm = 1.0 / mm[fm]
    else:
        raise ValidationError("trimming supports order 0 or 1", "order")
    return float(np.dot(f.c_plus[fp], tp) + np.dot(f.c_minus[fm], tm))


def trimmed_birkhoff_sum(T: IET, f: SymLogRoof, x, r: int, order: int = 0, return_record=False):
    """``S~_r f^(order)(x)``: the Birkhoff sum minus, for each singular side, the
    contribution of the closest visit.  The piecewise-linear part is not trimmed."""
    if r < 1:
        raise ValidationError("r must be >= 1", "r")
    pts = _orbit_points(T, x, r)
    cv = closest_visits_from_points(T.beta, pts, tol=0.0 if T.exact else T.tol)
    full = math.fsum(np.atleast_1d(eval_roof(f, pts, order)))
    val = full - trimming_terms(f, cv, order)
    return (val, cv) if return_record else val


def kochergin_sum_bound(points, delta, power=1):
    """``(sum 1/x^p, bound)`` for positive ``delta``-separated points.

    ``p = 1``: bound ``1/min + (1 + log N)/delta``; ``p = 2``: ``1/min^2 + 2/delta^2``.
    """
    x = np.sort(np.asarray(points, dtype=float))
    if (x <= 0).any():
        raise ValidationError("points must be positive", "points")
    if len(x) > 1 and np.min(np.diff(x)) < delta * (1 - 1e-12):
        raise ValidationError("points are not delta-separated", "points")
    n = len(x)
    if power == 1:
        return float(np.sum(1.0 / x)), float(1.0 / x[0] + (1.0 + math.log(n)) / delta)
    if power == 2:
        return float(np.sum(1.0 / x**2)), float(1.0 / x[0] ** 2 + 2.0 / delta**2)
    raise ValidationError("power must be 1 or 2", "power")


# -- special flow ------------------------------------------------------------

@dataclass(frozen=True)
class FlowPoint:
    x: float
    s: float


def flow_evaluate(T: IET, f: SymLogRoof, p: FlowPoint, t: float, step_budget: int = STEP_BUDGET,
                  chunk: int = 4096):
    """Flow ``p`` for time ``t``; returns the new point and the crossing count ``N``.

    ``N`` satisfies ``S_N f(x) <= s + t < S_{N+1} f(x)``.
    """
    x = float(p.x)
    r = float(p.s) + float(t)
    n = 0
    if r >= 0:
        while True:
            pts = np.empty(chunk)
            y = x
            for k in range(chunk):
                pts[k] = y
                y = T(y)
            vals = np.atleast_1d(eval_roof(f, pts))
            cs = np.cumsum(vals)
            k = int(np.searchsorted(cs, r, side="right"))
            if k < chunk:
                r -= cs[k - 1] if k > 0 else 0.0
                return FlowPoint(float(pts[k]), float(r)), n + k
            r -= cs[-1]
            n += chunk
            x = y
            if n > step_budget:
                raise StepBudgetExceeded(step_budget, partial=(x, r, n))
    while r < 0:
        x = T.inverse(x)
        r += float(eval_roof(f, x))
        n -= 1
        if -n > step_budget:
            raise StepBudgetExceeded(step_budget, partial=(x, r, n))
    return FlowPoint(float(x), float(r)), n


def flow_many(T: IET, f: SymLogRoof, xs, ss, t: float, step_budget: int = STEP_BUDGET):
    """Vectorized forward flow for ``t >= 0``: arrays of new ``x``, ``s`` and ``N``."""
    x = np.array(xs, dtype=float)
    r = np.array(ss, dtype=float) + float(t)
    n = np.zeros(len(x), dtype=np.int64)
    inner = T.beta[1:-1]
    fx = f.singular_eval(x) + f.g_eval(x)
    active = np.flatnonzero(r >= fx)
    steps = 0
    while active.size:
        xa = x[active]
        ra = r[active] - fx[active]
        xa = xa + T.delta[np.searchsorted(inner, xa, side="right")]
        x[active] = xa
        r[active] = ra
        n[active] += 1
        fa = f.singular_eval(xa) + f.g_eval(xa)
        fx[active] = fa
        active = active[ra >= fa]
        steps += 1
        if steps > step_budget:
            raise StepBudgetExceeded(step_budget)
    return x, r, n


def crossing_counts(T: IET, f: SymLogRoof, xs, t: float):
    """``N(x, t)`` for points on the base (``s = 0``)."""
    _, _, n = flow_many(T, f, xs, np.zeros(len(xs)), t)
    return n


@dataclass
class CrossingReport:
    t_grid: list
    gamma: float
    fractions: list
    mean_abs_dev: list
    exponent: float
    samples: int
    seed: int

    def to_dict(self):
        return dict(self.__dict__)


def crossing_deviation(T: IET, f: SymLogRoof, t_grid, samples: int, seed: int, gamma: float = 0.95,
                       mean_tol: float = 1e-6) -> CrossingReport:
    """Fraction of base points with ``|N(x,t) - t| <= t^gamma`` for each ``t``.

    ``exponent`` is the slope of ``log mean|N - t|`` against ``log t``.
    """
    if abs(f.mean - 1.0) > mean_tol:
        raise ValidationError(f"roof mean is {f.mean}, rescale to 1 first", "roof")
    if not 0 < gamma < 1:
        raise ValidationError("gamma must lie in (0, 1)", "gamma")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, float(T.total), size=samples)
    fracs, devs = [], []
    for t in t_grid:
        n = crossing_counts(T, f, xs, t)
        dev = np.abs(n - t)
        fracs.append(float(np.mean(dev <= t**gamma)))
        devs.append(float(np.mean(dev)))
    lt = np.log(np.asarray(t_grid, dtype=float))
    ld = np.log(np.maximum(np.asarray(devs), 1e-300))
    slope = float(np.polyfit(lt, ld, 1)[0]) if len(t_grid) > 1 else float("nan")
    return CrossingReport([float(t) for t in t_grid], gamma, fracs, devs, slope, samples, seed)
