"""Special flow and long Birkhoff sums through the Rauzy-Veech towers of one level.

At level ``n`` the space splits into ``d`` towers over the intervals
``I_i^(n)``.  A point is ``(i, j, u)``: tower ``i``, floor ``j``, offset ``u``
from the floor start.  One full pass through tower ``i`` adds the roof sum
``F_i(u) = S_{h_i} f(a_i + u)`` and then the induced map sends ``a_i + u`` to
``a_i + u + shift_i``.  Within a pass the partial sums come from
:class:`TowerSums`, so the cost of an orbit segment of length ``r`` is about
``r / h`` passes instead of ``r`` steps.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import StepBudgetExceeded, ValidationError
from .iet import IET
from .rauzy import RauzyTrace
from .rigidity import _column_data
from .roof import SymLogRoof, eval_roof
from .towers import TowerSums

FLOOR_BUDGET = 4 * 10**6
PASS_BUDGET = 10**6


def deepest_level(trace: RauzyTrace, floor_budget: int = FLOOR_BUDGET) -> int:
    """Largest level whose towers have at most ``floor_budget`` floors in total."""
    best = 0
    for n, st in enumerate(trace.states):
        if sum(int(h) for h in st.heights) <= floor_budget:
            best = n
    return best


class RenormalizedFlow:
    """Flow, crossing counts and Birkhoff sums of ``f`` over ``T`` using level ``n``."""

    def __init__(self, T: IET, f: SymLogRoof, trace: RauzyTrace, level: Optional[int] = None,
                 floor_budget: int = FLOOR_BUDGET):
        self.T = T
        self.f = f
        self.level = deepest_level(trace, floor_budget) if level is None else int(level)
        st = trace.states[self.level]
        self.d = len(st.lengths)
        data = [_column_data(st, j) for j in range(self.d)]
        self.a = np.array([float(x[0]) for x in data])
        self.w = np.array([float(x[1]) for x in data])
        self.h = np.array([x[2] for x in data], dtype=np.int64)
        self.shift = np.array([float(x[3]) for x in data])
        self.size = float(st.interval_length)
        self.towers = [TowerSums(T, f, self.a[i], self.w[i], int(self.h[i])) for i in range(self.d)]
        img = self.a + self.shift
        self._img_order = np.argsort(img)
        self._img_start = img[self._img_order]
        starts = np.concatenate([t.p for t in self.towers])
        tid = np.concatenate([np.full(int(self.h[i]), i) for i in range(self.d)])
        fid = np.concatenate([np.arange(int(self.h[i])) for i in range(self.d)])
        order = np.argsort(starts, kind="stable")
        self._all_p, self._all_t, self._all_f = starts[order], tid[order], fid[order]

    # -- coordinates ----------------------------------------------------------
    def locate(self, x):
        """Tower coordinates ``(i, j, u)`` of points ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.clip(np.searchsorted(self._all_p, x, side="right") - 1, 0, len(self._all_p) - 1)
        i = self._all_t[k]
        j = self._all_f[k]
        u = np.clip(x - self._all_p[k], 0.0, self.w[i])
        return i, j, u

    def point(self, i, j, u):
        i, j = np.asarray(i), np.asarray(j)
        starts = np.empty(len(i))
        for t in range(self.d):
            sel = i == t
            starts[sel] = self.towers[t].p[j[sel]]
        return starts + u

    def _base_tower(self, y):
        edges = self.a[1:]
        return np.searchsorted(edges, y, side="right")

    def induced(self, i, u):
        """Induced map on ``I^(n)`` in tower coordinates."""
        y = self.a[i] + u + self.shift[i]
        k = np.clip(self._base_tower(y), 0, self.d - 1)
        return k, np.clip(y - self.a[k], 0.0, self.w[k])

    def induced_inverse(self, i, u):
        y = self.a[i] + u
        pos = np.clip(np.searchsorted(self._img_start, y, side="right") - 1, 0, self.d - 1)
        k = self._img_order[pos]
        return k, np.clip(y - self.a[k] - self.shift[k], 0.0, self.w[k])

    def _windows(self, length: float):
        """Segments ``(tower, floor, u_lo, u_hi)`` covering ``(b - length, b)`` for every discontinuity ``b``."""
        segs = []
        wmax = float(self.w.max())
        for b in np.asarray(self.T.endpoints[1:-1], dtype=float):
            lo = np.searchsorted(self._all_p, b - length - wmax, side="left")
            hi = np.searchsorted(self._all_p, b, side="left")
            for k in range(max(lo, 0), hi):
                i, j, p = int(self._all_t[k]), int(self._all_f[k]), float(self._all_p[k])
                ulo, uhi = max(0.0, b - length - p), min(float(self.w[i]), b - p)
                if ulo < uhi:
                    segs.append((i, j, ulo, uhi))
        return segs

    # -- sums along towers ----------------------------------------------------
    def _per_tower(self, i, fn, *arrays):
        out = np.zeros(len(i))
        for t in range(self.d):
            sel = np.flatnonzero(i == t)
            if len(sel):
                out[sel] = fn(self.towers[t], *[a[sel] for a in arrays])
        return out

    def _partial(self, i, u, r, order=0):
        return self._per_tower(i, lambda ts, uu, rr: ts.sums_to(uu, rr, order), u, r)

    def _full(self, i, u, order=0):
        return self._partial(i, u, self.h[i], order)

    def birkhoff(self, x, r, order: int = 0, pass_budget: int = PASS_BUDGET) -> np.ndarray:
        """``S_r f^(order)(x)`` elementwise for ``r >= 0``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        r = np.broadcast_to(np.asarray(r, dtype=np.int64), x.shape).ravel()
        x = x.ravel()
        if np.any(r < 0):
            raise ValidationError("r must be non-negative", "r")
        i, j, u = self.locate(x)
        total = -self._partial(i, u, j, order)
        left = r + j
        passes = 0
        while True:
            go = np.flatnonzero(left >= self.h[i])
            if not len(go):
                break
            total[go] += self._full(i[go], u[go], order)
            left[go] -= self.h[i[go]]
            i[go], u[go] = self.induced(i[go], u[go])
            passes += 1
            if passes > pass_budget:
                raise StepBudgetExceeded(pass_budget)
        return total + self._partial(i, u, left, order)

    # -- flow -----------------------------------------------------------------
    def flow(self, x, s, t: float, pass_budget: int = PASS_BUDGET):
        """Flow points ``(x, s)`` for time ``t``; returns ``(x', s', N)``.

        ``N`` is the signed number of roof crossings, as in ``flow_many``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        s = np.broadcast_to(np.asarray(s, dtype=float), x.shape).ravel()
        i, j, u = self.locate(x)
        tau = self._partial(i, u, j) + s + float(t)
        count = -j.astype(np.int64)
        full = self._full(i, u)
        passes = 0
        while True:
            back = np.flatnonzero(tau < 0)
            if len(back):
                i[back], u[back] = self.induced_inverse(i[back], u[back])
                full[back] = self._full(i[back], u[back])
                tau[back] += full[back]
                count[back] -= self.h[i[back]]
            fwd = np.flatnonzero(tau >= full)
            if not len(back) and not len(fwd):
                break
            if len(fwd):
                tau[fwd] -= full[fwd]
                count[fwd] += self.h[i[fwd]]
                i[fwd], u[fwd] = self.induced(i[fwd], u[fwd])
                full[fwd] = self._full(i[fwd], u[fwd])
            passes += 1
            if passes > pass_budget:
                raise StepBudgetExceeded(pass_budget)
        r = np.zeros(len(x), dtype=np.int64)
        val = np.zeros(len(x))
        for t_ in range(self.d):
            sel = np.flatnonzero(i == t_)
            if len(sel):
                r[sel], val[sel] = self.towers[t_].locate_time(u[sel], tau[sel])
        top = r >= self.h[i]
        if top.any():
            i2, u2 = self.induced(i[top], u[top])
            r[top] -= self.h[i[top]]
            count[top] += self.h[i[top]]
            i[top], u[top] = i2, u2
            val[top] = 0.0
        xs = self.point(i, r, u)
        return xs, tau - val, count + r

    def crossings(self, x, t: float) -> np.ndarray:
        """``N(x, t)`` for base points ``(x, 0)``."""
        return self.flow(x, 0.0, t)[2]

    def roof(self, x):
        return np.atleast_1d(eval_roof(self.f, np.asarray(x, dtype=float)))

    # -- continuity -----------------------------------------------------------
    def continuity_horizon(self, x0, length, limit, pass_budget: int = PASS_BUDGET) -> np.ndarray:
        """First ``m`` with a discontinuity of ``T`` inside ``T^m (x0, x0 + length)``, capped at ``limit``.

        While ``T^m`` is continuous on the interval its image is
        ``(T^m x0, T^m x0 + length)``, so the first hit is the first time the
        orbit of ``x0`` enters a window ``(b - length, b)``.
        """
        x0 = np.atleast_1d(np.asarray(x0, dtype=float)).ravel()
        length = np.broadcast_to(np.asarray(length, dtype=float), x0.shape)
        limit = np.broadcast_to(np.asarray(limit, dtype=np.int64), x0.shape)
        out = np.array(limit, dtype=np.int64)
        for L in np.unique(length):
            idx = np.flatnonzero(length == L)
            segs = self._windows(float(L))
            if not segs:
                continue
            si = np.array([q[0] for q in segs])
            sj = np.array([q[1] for q in segs], dtype=np.int64)
            slo = np.array([q[2] for q in segs])
            shi = np.array([q[3] for q in segs])
            i, js, u = self.locate(x0[idx])
            count = np.zeros(len(idx), dtype=np.int64)
            live = np.arange(len(idx))
            passes = 0
            while len(live):
                ii, jj, uu = i[live], js[live], u[live]
                hit = ((si[None, :] == ii[:, None]) & (sj[None, :] >= jj[:, None])
                       & (slo[None, :] < uu[:, None]) & (uu[:, None] < shi[None, :]))
                when = np.where(hit, count[live, None] + sj[None, :] - jj[:, None], np.iinfo(np.int64).max)
                first = when.min(axis=1)
                tgt = idx[live]
                out[tgt] = np.minimum(out[tgt], first)
                count[live] += self.h[ii] - jj
                i[live], u[live] = self.induced(ii, uu)
                js[live] = 0
                live = live[(count[live] < out[idx[live]])]
                passes += 1
                if passes > pass_budget:
                    raise StepBudgetExceeded(pass_budget)
        return out


__all__ = ["RenormalizedFlow", "deepest_level", "FLOOR_BUDGET"]
