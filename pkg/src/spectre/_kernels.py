"""Hot inner loops, in a numba flavour and a pure-numpy flavour.

The numba versions are used when numba imports cleanly and the environment
variable ``SPECTRE_DISABLE_NUMBA`` is unset or ``0``.  Both flavours are
importable directly (``numpy_kernels`` / ``numba_kernels``) so tests and
the benchmark can compare them.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _np_row_quadforms(X, A):
    return np.einsum("ij,ij->i", X @ A, X)


def _np_kr_apply(Yr, V):
    # (1/m) sum_i (y_i' V y_i) y_i y_i'
    m = Yr.shape[0]
    w = np.einsum("ij,ij->i", Yr @ V, Yr)
    return (Yr.T * w) @ Yr / m


def _np_descending_candidates(a):
    """Distinct values ``t`` in descending order and the fraction ``Pr[a >= t]``."""
    s = np.sort(a)[::-1]
    n = s.shape[0]
    last = np.ones(n, dtype=bool)
    last[:-1] = s[:-1] != s[1:]
    return s[last], (np.flatnonzero(last) + 1) / n


def _np_cov_tail_pick(a, eps, c_prime):
    t, frac = _np_descending_candidates(a)
    ok = t > c_prime
    t, frac = t[ok], frac[ok]
    if t.size == 0:
        return math.nan
    lg = np.log(t)
    bound = 3.0 * eps / (t * t * lg * lg)
    ratio = frac / bound
    viol = frac > bound
    if not viol.any():
        return math.nan
    ratio = np.where(viol, ratio, -np.inf)
    # argmax returns the first (largest t) among equal ratios
    return float(t[int(np.argmax(ratio))])


def _np_mean_tail_pick(a, delta, eps, log_term, nu):
    t, frac = _np_descending_candidates(a)
    T = t - delta
    ok = T > 0
    T, frac, t = T[ok], frac[ok], t[ok]
    if T.size == 0:
        return math.nan
    bound = 8.0 * np.exp(-T * T / (2.0 * nu)) + 8.0 * eps / (T * T * log_term)
    viol = frac > bound
    if not viol.any():
        return math.nan
    ratio = np.where(viol, frac / bound, -np.inf)
    return float(t[int(np.argmax(ratio))])


def _np_lloyd_2means(P, c0, c1, max_iter):
    cent = np.stack([c0, c1]).astype(np.float64)
    n = P.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    objective = []
    for _ in range(max_iter):
        d0 = np.sum((P - cent[0]) ** 2, axis=1)
        d1 = np.sum((P - cent[1]) ** 2, axis=1)
        new = (d1 < d0).astype(np.int64)
        objective.append(float(np.sum(np.minimum(d0, d1))))
        if np.array_equal(new, assign):
            break
        assign = new
        for c in (0, 1):
            members = assign == c
            if members.any():
                cent[c] = P[members].mean(axis=0)
            else:
                # reseed an empty cluster with the point farthest from the other
                far = int(np.argmax(d0 if c == 1 else d1))
                cent[c] = P[far]
    return assign, cent, np.asarray(objective)


numpy_kernels = SimpleNamespace(
    name="numpy",
    row_quadforms=_np_row_quadforms,
    kr_apply=_np_kr_apply,
    cov_tail_pick=_np_cov_tail_pick,
    mean_tail_pick=_np_mean_tail_pick,
    lloyd_2means=_np_lloyd_2means,
)

# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def row_quadforms(X, A):
        n, k = X.shape
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for a in range(k):
                s = 0.0
                for b in range(k):
                    s += A[a, b] * X[i, b]
                acc += X[i, a] * s
            out[i] = acc
        return out

    @njit(cache=True)
    def kr_apply(Yr, V):
        m, k = Yr.shape
        Vs = 0.5 * (V + V.T)
        out = np.zeros((k, k))
        t = np.empty(k)
        for i in range(m):
            w = 0.0
            for a in range(k):
                s = 0.0
                for b in range(k):
                    s += Vs[a, b] * Yr[i, b]
                t[a] = s
                w += Yr[i, a] * s
            for a in range(k):
                wa = w * Yr[i, a]
                for b in range(a, k):
                    out[a, b] += wa * Yr[i, b]
        for a in range(k):
            for b in range(a, k):
                out[a, b] /= m
                out[b, a] = out[a, b]
        return out

    @njit(cache=True)
    def cov_tail_pick(a, eps, c_prime):
        s = np.sort(a)[::-1]
        n = s.shape[0]
        best_ratio = -1.0
        best_t = np.nan
        for j in range(n):
            if j < n - 1 and s[j] == s[j + 1]:
                continue
            t = s[j]
            if t <= c_prime:
                break
            frac = (j + 1) / n
            lg = math.log(t)
            bound = 3.0 * eps / (t * t * lg * lg)
            if frac > bound:
                r = frac / bound
                if r > best_ratio:
                    best_ratio = r
                    best_t = t
        return best_t

    @njit(cache=True)
    def mean_tail_pick(a, delta, eps, log_term, nu):
        s = np.sort(a)[::-1]
        n = s.shape[0]
        best_ratio = -1.0
        best_t = np.nan
        for j in range(n):
            if j < n - 1 and s[j] == s[j + 1]:
                continue
            T = s[j] - delta
            if T <= 0.0:
                break
            frac = (j + 1) / n
            bound = 8.0 * math.exp(-T * T / (2.0 * nu)) + 8.0 * eps / (T * T * log_term)
            if frac > bound:
                r = frac / bound
                if r > best_ratio:
                    best_ratio = r
                    best_t = s[j]
        return best_t

    @njit(cache=True)
    def _lloyd(P, c0, c1, max_iter):
        n, k = P.shape
        cent = np.empty((2, k))
        cent[0] = c0
        cent[1] = c1
        assign = np.full(n, -1, dtype=np.int64)
        objective = np.empty(max_iter)
        d0 = np.empty(n)
        d1 = np.empty(n)
        used = 0
        for _ in range(max_iter):
            changed = False
            obj = 0.0
            for i in range(n):
                s0 = 0.0
                s1 = 0.0
                for j in range(k):
                    u = P[i, j] - cent[0, j]
                    v = P[i, j] - cent[1, j]
                    s0 += u * u
                    s1 += v * v
                d0[i] = s0
                d1[i] = s1
                c = 1 if s1 < s0 else 0
                obj += s1 if c == 1 else s0
                if c != assign[i]:
                    changed = True
                    assign[i] = c
            objective[used] = obj
            used += 1
            if not changed:
                break
            sums = np.zeros((2, k))
            counts = np.zeros(2, dtype=np.int64)
            for i in range(n):
                c = assign[i]
                counts[c] += 1
                for j in range(k):
                    sums[c, j] += P[i, j]
            for c in range(2):
                if counts[c] > 0:
                    for j in range(k):
                        cent[c, j] = sums[c, j] / counts[c]
                else:
                    dist = d0 if c == 1 else d1
                    far = np.argmax(dist)
                    for j in range(k):
                        cent[c, j] = P[far, j]
        return assign, cent, objective[:used]

    def lloyd_2means(P, c0, c1, max_iter):
        return _lloyd(
            np.ascontiguousarray(P, dtype=np.float64),
            np.asarray(c0, dtype=np.float64),
            np.asarray(c1, dtype=np.float64),
            int(max_iter),
        )

    def _contig(f):
        def wrapper(X, A):
            return f(np.ascontiguousarray(X, dtype=np.float64), np.ascontiguousarray(A, dtype=np.float64))

        wrapper.__name__ = f.__name__
        return wrapper

    def _pick(f):
        def wrapper(a, *args):
            return float(f(np.ascontiguousarray(a, dtype=np.float64), *map(float, args)))

        return wrapper

    return SimpleNamespace(
        name="numba",
        row_quadforms=_contig(row_quadforms),
        kr_apply=_contig(kr_apply),
        cov_tail_pick=_pick(cov_tail_pick),
        mean_tail_pick=_pick(mean_tail_pick),
        lloyd_2means=lloyd_2means,
    )


def _numba_requested() -> bool:
    return os.environ.get("SPECTRE_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


numba_kernels = None
if _numba_requested():
    try:
        numba_kernels = _build_numba_kernels()
    except ImportError:  # pragma: no cover - numba is an optional accelerator
        numba_kernels = None

kernels = numba_kernels if numba_kernels is not None else numpy_kernels
BACKEND = kernels.name
