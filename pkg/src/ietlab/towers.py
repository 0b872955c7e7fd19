"""Birkhoff sums along the floors of a tower by intervals.

The floors of a tower of height ``h`` over ``J = [a, a + w)`` are
``T^j J = [p_j, p_j + w)``.  For ``x = a + u`` the orbit is ``p_j + u``, so

    S_r f(a + u) = sum_{j < r} f(p_j + u).

Floors whose centre lies farther than ``near_factor * w`` from every singular
endpoint are summed through a Taylor expansion in ``u`` around the floor
centre.  Prefix sums of those coefficients make any block sum cost
``O(degree)``.  The few floors near a singularity are evaluated directly.
"""

from __future__ import annotations

from array import array
from bisect import bisect_right

import numpy as np

from .errors import ValidationError
from .iet import IET
from .roof import SymLogRoof

CHUNK = 1 << 16
STRIDE = 64


def floor_starts(T: IET, a, height: int) -> np.ndarray:
    """Left endpoints ``T^j a`` for ``0 <= j < height`` (float iteration)."""
    inner = [float(b) for b in T.endpoints[1:-1]]
    disp = [float(v) for v in T.displacements]
    out = array("d")
    push = out.append
    x = float(a)
    for _ in range(int(height)):
        push(x)
        x += disp[bisect_right(inner, x)]
    return np.frombuffer(out, dtype=float).copy()


def _inverse_powers(y: np.ndarray, n: int) -> np.ndarray:
    """Columns ``y^-1, ..., y^-n``."""
    inv = 1.0 / y
    return np.cumprod(np.broadcast_to(inv[:, None], (len(y), n)), axis=1)


def _taylor_block(f: SymLogRoof, centers: np.ndarray, nterms: int) -> np.ndarray:
    """Coefficients ``a_m`` with ``f(c + w) = sum_m a_m w^m`` for each centre ``c``."""
    out = np.zeros((len(centers), nterms))
    m = np.arange(1, nterms)
    for i, cp in enumerate(f.c_plus):
        if cp == 0.0:
            continue
        y = centers - f.beta[i]
        act = y > 0
        if not act.any():
            continue
        ya = y[act]
        out[act, 0] += -cp * np.log(ya)
        out[act, 1:] += _inverse_powers(-ya, nterms - 1) * (cp / m)[None, :]
    for i, cm in enumerate(f.c_minus):
        if cm == 0.0:
            continue
        z = f.beta[i + 1] - centers
        act = z > 0
        if not act.any():
            continue
        za = z[act]
        out[act, 0] += -cm * np.log(za)
        out[act, 1:] += _inverse_powers(za, nterms - 1) * (cm / m)[None, :]
    idx = np.clip(np.searchsorted(f.beta[1:-1], centers, side="right"), 0, f.d - 1)
    out[:, 0] += f.slopes[idx] * centers + f.intercepts[idx]
    if nterms > 1:
        out[:, 1] += f.slopes[idx]
    return out


def _derive(coef: np.ndarray, order: int) -> np.ndarray:
    """Taylor coefficients of the ``order``-th derivative."""
    for _ in range(order):
        n = coef.shape[1]
        coef = coef[:, 1:] * np.arange(1, n)[None, :]
    return coef


class TowerSums:
    """Block Birkhoff sums of ``f``, ``f'`` and ``f''`` along one tower.

    ``a`` and ``width`` describe the base; ``starts`` (optional) are the
    precomputed floor positions.
    """

    def __init__(self, T: IET, f: SymLogRoof, a, width, height, starts=None, degree: int = 12,
                 near_factor: float = 4.0, stride: int = STRIDE):
        if height < 1:
            raise ValidationError("height must be >= 1", "height")
        self.T = T
        self.f = f
        self.a = float(a)
        self.width = float(width)
        self.height = int(height)
        self.c = self.width / 2.0
        if starts is None:
            # base endpoints are preimages of discontinuities; the midpoint orbit is well conditioned
            starts = floor_starts(T, self.a + self.c, height) - self.c
        self.p = np.asarray(starts, dtype=float)
        self.degree = int(degree)
        sing = np.sort(f.beta[f.singular_points])
        centers = self.p + self.c
        if len(sing):
            k = np.searchsorted(sing, centers)
            left = np.where(k > 0, centers - sing[np.maximum(k - 1, 0)], np.inf)
            right = np.where(k < len(sing), sing[np.minimum(k, len(sing) - 1)] - centers, np.inf)
            dist = np.minimum(left, right)
        else:
            dist = np.full(self.height, np.inf)
        self.near = np.flatnonzero(dist <= near_factor * self.width)
        self.stride = max(1, int(stride))
        self._tables = {}

    # -- internals ----------------------------------------------------------
    def _prefix(self, order: int, indices: np.ndarray) -> np.ndarray:
        """Cumulative far-floor coefficients ``P[k] = sum_{j<k, far} a_j``."""
        nterms = self.degree + 1
        idx = np.asarray(indices, dtype=np.int64)
        order_idx = np.argsort(idx, kind="stable")
        sidx = idx[order_idx]
        out = np.zeros((len(idx), nterms))
        running = np.zeros(nterms)
        near_mask = np.zeros(self.height, dtype=bool)
        near_mask[self.near] = True
        q = 0
        for lo in range(0, self.height, CHUNK):
            hi = min(lo + CHUNK, self.height)
            while q < len(sidx) and sidx[q] <= lo:
                out[order_idx[q]] = running
                q += 1
            if q >= len(sidx):
                break
            coef = _derive(_taylor_block(self.f, self.p[lo:hi] + self.c, nterms + order), order)
            coef[near_mask[lo:hi]] = 0.0
            csum = np.cumsum(coef, axis=0)
            while q < len(sidx) and sidx[q] <= hi:
                out[order_idx[q]] = running + csum[sidx[q] - lo - 1]
                q += 1
            running = running + csum[-1]
        while q < len(sidx):
            out[order_idx[q]] = running
            q += 1
        return out

    def _near_values(self, v: np.ndarray, order: int) -> np.ndarray:
        pts = self.p[self.near][None, :] + v[:, None]
        return self.f.singular_eval(pts, order) + self.f.g_eval(pts, order)

    def _table(self, order: int):
        """Far-floor prefix coefficients at the marks ``0, stride, 2 stride, ..., h``."""
        tab = self._tables.get(order)
        if tab is None:
            marks = np.arange(0, self.height + 1, self.stride, dtype=np.int64)
            if marks[-1] != self.height:
                marks = np.append(marks, self.height)
            tab = (marks, self._prefix(order, marks))
            self._tables[order] = tab
        return tab

    def _powers(self, v: np.ndarray) -> np.ndarray:
        return (v - self.c)[:, None] ** np.arange(self.degree + 1)[None, :]

    def _near_cumulative(self, v: np.ndarray, order: int) -> np.ndarray:
        """Row ``i``: running sums over near floors, with a leading zero column."""
        out = np.zeros((len(v), len(self.near) + 1))
        if len(self.near):
            out[:, 1:] = np.cumsum(self._near_values(v, order), axis=1)
        return out

    def _direct(self, lo: np.ndarray, cnt: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
        """``sum_{lo <= j < lo + cnt} f^(order)(p_j + v)`` by direct evaluation."""
        out = np.zeros(len(v))
        width = int(cnt.max()) if len(cnt) else 0
        if width == 0:
            return out
        step = max(1, (1 << 18) // width)
        ar = np.arange(width)
        for s in range(0, len(v), step):
            e = min(s + step, len(v))
            idx = np.minimum(lo[s:e, None] + ar[None, :], self.height - 1)
            pts = self.p[idx] + v[s:e, None]
            vals = self.f.singular_eval(pts, order) + self.f.g_eval(pts, order)
            out[s:e] = np.sum(np.where(ar[None, :] < cnt[s:e, None], vals, 0.0), axis=1)
        return out

    def _at_marks(self, m: np.ndarray, v: np.ndarray, wp: np.ndarray, ncum: np.ndarray, order: int):
        marks, tab = self._table(order)
        far = np.einsum("ij,ij->i", tab[m], wp)
        k = np.searchsorted(self.near, marks[m])
        return far + ncum[np.arange(len(v)), k]

    # -- public -------------------------------------------------------------
    def sums_to(self, v, r, order: int = 0) -> np.ndarray:
        """``S_r f^(order)(a + v)`` elementwise for arbitrary ``0 <= r <= h``."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=np.int64))
        v, r = np.broadcast_arrays(v, r)
        shape = v.shape
        v, r = v.ravel(), r.ravel()
        if np.any(r < 0) or np.any(r > self.height):
            raise ValidationError("sum length outside the tower", "r")
        marks, _ = self._table(order)
        m = np.searchsorted(marks, r, side="right") - 1
        total = self._at_marks(m, v, self._powers(v), self._near_cumulative(v, order), order)
        total += self._direct(marks[m], r - marks[m], v, order)
        return total.reshape(shape)

    def locate_time(self, v, tau):
        """Largest ``r <= h`` with ``S_r f(a + v) <= tau`` and the value ``S_r f(a + v)``.

        ``tau`` must be non-negative; ``f > 0`` makes ``S_r`` increasing in ``r``.
        """
        v = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
        tau = np.broadcast_to(np.asarray(tau, dtype=float), v.shape).ravel()
        marks, _ = self._table(0)
        wp = self._powers(v)
        ncum = self._near_cumulative(v, 0)
        lo = np.zeros(len(v), dtype=np.int64)
        hi = np.full(len(v), len(marks), dtype=np.int64)
        while True:
            open_ = hi - lo > 1
            if not open_.any():
                break
            mid = (lo + hi) // 2
            val = self._at_marks(np.minimum(mid, len(marks) - 1), v, wp, ncum, 0)
            ok = open_ & (val <= tau)
            lo = np.where(ok, mid, lo)
            hi = np.where(open_ & ~ok, mid, hi)
        base = self._at_marks(lo, v, wp, ncum, 0)
        r = marks[lo].copy()
        value = base.copy()
        inner = np.flatnonzero(lo < len(marks) - 1)
        if len(inner):
            start = marks[lo[inner]]
            cnt = marks[lo[inner] + 1] - start
            width = int(cnt.max())
            ar = np.arange(width)
            step = max(1, (1 << 18) // width)
            for s in range(0, len(inner), step):
                sel = inner[s:s + step]
                idx = np.minimum(start[s:s + step, None] + ar[None, :], self.height - 1)
                pts = self.p[idx] + v[sel, None]
                vals = self.f.singular_eval(pts) + self.f.g_eval(pts)
                vals = np.where(ar[None, :] < cnt[s:s + step, None], vals, np.inf)
                cs = base[sel, None] + np.cumsum(vals, axis=1)
                k = np.sum(cs <= tau[sel, None], axis=1)
                r[sel] += k
                got = np.take_along_axis(cs, np.maximum(k - 1, 0)[:, None], axis=1)[:, 0]
                value[sel] = np.where(k > 0, got, base[sel])
        return r, value

    def block_sums(self, lo, hi, v, order: int = 0) -> np.ndarray:
        """``sum_{lo <= j < hi} f^(order)(p_j + v)`` elementwise over arrays.

        ``v`` must lie in ``[0, width]``; every argument stays on a floor.
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=np.int64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.int64))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        lo, hi, v = np.broadcast_arrays(lo, hi, v)
        if np.any(lo < 0) or np.any(hi > self.height) or np.any(lo > hi):
            raise ValidationError("block bounds outside the tower", "r")
        keys = np.concatenate([lo.ravel(), hi.ravel()])
        uniq, inv = np.unique(keys, return_inverse=True)
        pref = self._prefix(order, uniq)
        n = lo.size
        diff = pref[inv[n:]] - pref[inv[:n]]
        w = (v.ravel() - self.c)[:, None] ** np.arange(self.degree + 1)[None, :]
        total = np.sum(diff * w, axis=1)
        if len(self.near):
            nidx = self.near
            for s in range(0, n, 2048):
                e = min(s + 2048, n)
                vals = self._near_values(v.ravel()[s:e], order)
                mask = (nidx[None, :] >= lo.ravel()[s:e, None]) & (nidx[None, :] < hi.ravel()[s:e, None])
                total[s:e] += np.sum(np.where(mask, vals, 0.0), axis=1)
        return total.reshape(lo.shape)

    def partial_sums(self, u, r, order: int = 0) -> np.ndarray:
        """``S_r f^(order)(a + u)`` for every pair of ``u`` (rows) and ``r`` (columns)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=np.int64))
        U, R = np.meshgrid(u, r, indexing="ij")
        return self.block_sums(np.zeros_like(R), R, U, order)

    def cylinder_sums(self, k, u, shift, order: int = 0) -> np.ndarray:
        """``S_h f^(order)(p_k + u)`` for points of the almost cylinder.

        ``shift`` is ``T^h a - a``; ``u + shift`` must stay in ``[0, width]``.
        """
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        k, u = np.broadcast_arrays(k, u)
        shape = k.shape
        k, u = k.ravel(), u.ravel()
        top = self.sums_to(u, np.full(len(u), self.height), order) - self.sums_to(u, k, order)
        return (top + self.sums_to(u + float(shift), k, order)).reshape(shape)

    def closest_keys(self):
        """Per singular side, u-independent keys whose running argmin gives the closest visit.

        Returns ``(plus, minus)`` lists of key arrays; the distance at ``u`` is
        ``key + u`` on the plus side and ``key - u`` on the minus side.
        """
        plus, minus = [], []
        mid = self.p + self.c
        for i in range(self.f.d):
            key = self.p - self.f.beta[i]
            plus.append(np.where(mid > self.f.beta[i], key, np.inf))
            key = self.f.beta[i + 1] - self.p
            minus.append(np.where(mid < self.f.beta[i + 1], key, np.inf))
        return plus, minus

    def trimmed_derivative(self, u, r) -> np.ndarray:
        """``S~_r f'(a + u)`` on a grid of ``u`` (rows) and ``r`` (columns)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=np.int64))
        U, R = np.meshgrid(u, r, indexing="ij")
        raw = self.sums_to(U, R, order=1)
        plus, minus = self.closest_keys()
        corr = np.zeros_like(raw)
        for i in range(self.f.d):
            for key, coef, sign in ((plus[i], self.f.c_plus[i], +1), (minus[i], self.f.c_minus[i], -1)):
                if coef == 0.0:
                    continue
                run = np.minimum.accumulate(key)
                best = run[r - 1]
                finite = np.isfinite(best)
                if sign > 0:
                    m = best[None, :] + u[:, None]
                    term = -coef / m
                else:
                    m = best[None, :] - u[:, None]
                    term = coef / m
                corr += np.where(finite[None, :], term, 0.0)
        return raw - corr


def log_grid(h: int, count: int = 32) -> np.ndarray:
    """``count`` distinct integers in ``[1, h]``, log-spaced, always including ``h``."""
    g = np.unique(np.round(np.geomspace(1, max(h, 1), count)).astype(np.int64))
    g = g[(g >= 1) & (g <= h)]
    if g[-1] != h:
        g = np.append(g, h)
    return g


def stratified(width: float, count: int, rng=None) -> np.ndarray:
    """``count`` points in ``(0, width)``, one per equal stratum (centred when ``rng`` is None)."""
    base = np.arange(count, dtype=float)
    off = 0.5 if rng is None else rng.uniform(0.05, 0.95, size=count)
    return (base + off) * (width / count)


__all__ = ["TowerSums", "floor_starts", "log_grid", "stratified"]
