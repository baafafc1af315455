"""Pure-Python session kernels.

Line-for-line twin of ``_core.pyx``: same draw order, same floating-point
expressions, so both backends produce bit-identical sessions.  Used when the
compiled extension is unavailable or ``QCOLLUSION_PURE=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np

_SCALE = 1.0 / 9007199254740992.0
_NEG_INF = float("-inf")

GREEDY, EPS_GREEDY, BOLTZMANN = 0, 1, 2
EPS_CONSTANT, EPS_DECAY = 0, 1
ASYNC, SYNC, SYNC_DOWN = 0, 1, 2


class RawStream:
    """Doubles from a PCG64 bit generator via ``(x >> 11) * 2**-53``."""

    def __init__(self, bitgen, chunk: int = 4096):
        self.bitgen = bitgen
        self.chunk = chunk
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            raw = self.bitgen.random_raw(self.chunk)
            self._buf = ((raw >> np.uint64(11)).astype(np.float64) * _SCALE).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x


def _mask(row, K):
    m = row[0]
    for a in range(1, K):
        if row[a] > m:
            m = row[a]
    mask = 0
    for a in range(K):
        if row[a] == m:
            mask |= 1 << a
    return mask


def _low(mask):
    return (mask & -mask).bit_length() - 1


def _second(row, K):
    m1 = _NEG_INF
    m2 = _NEG_INF
    for a in range(K):
        x = row[a]
        if x > m1:
            m2 = m1
            m1 = x
        elif x > m2:
            m2 = x
    return m2


def _rowmax(row, K):
    m = row[0]
    for a in range(1, K):
        if row[a] > m:
            m = row[a]
    return m


def _greedy_pick(mask, K, rnd):
    n = bin(mask).count("1")
    if n == 1:
        return _low(mask)
    r = int(rnd() * n)
    for a in range(K):
        if mask >> a & 1:
            if r == 0:
                return a
            r -= 1
    return K - 1


def _boltzmann_pick(row, K, tau, rnd):
    m = _rowmax(row, K)
    w = [math.exp((row[a] - m) / tau) for a in range(K)]
    total = 0.0
    for a in range(K):
        total += w[a]
    u = rnd() * total
    acc = 0.0
    for a in range(K):
        acc += w[a]
        if u < acc:
            return a
    return K - 1


def binomial_inversion(n, p, u):
    """Smallest k with P(X <= k) > u for X ~ B(n, p)."""
    f = math.exp(n * math.log1p(-p))
    r = p / (1.0 - p)
    cdf = f
    k = 0
    while cdf <= u and k < n:
        k += 1
        f = f * (r * (n - k + 1) / k)
        cdf += f
    return k


def draw_block_events(L, p, rnd):
    """Sorted distinct exploration offsets within a block of L periods."""
    cnt = binomial_inversion(L, p, rnd())
    out = []
    while len(out) < cnt:
        pos = int(rnd() * L)
        if pos not in out:
            out.append(pos)
    out.sort()
    return out


def _update(row_self, nrow_self, a_self, a_opp, K, pay, dem, vals, cost,
            kind, alpha, w, delta):
    cont = delta * _rowmax(nrow_self, K)
    if kind == ASYNC:
        row_self[a_self] = w * row_self[a_self] + alpha * (pay[a_self][a_opp] + cont)
    elif kind == SYNC:
        for a in range(K):
            row_self[a] = w * row_self[a] + alpha * (pay[a][a_opp] + cont)
    else:
        d = dem[a_self][a_opp]
        new = list(row_self)
        for a in range(K):
            old = row_self[a]
            if a == a_self:
                new[a] = w * old + alpha * (pay[a_self][a_opp] + cont)
            else:
                cand = w * old + alpha * ((vals[a] - cost) * d + cont)
                if a > a_self:
                    new[a] = cand if cand < old else old
                else:
                    new[a] = cand if cand > old else old
        row_self[:] = new


def _on_orbit(start, target, m0, m1, K):
    seen = set()
    s = start
    while s not in seen:
        if s == target:
            return True
        seen.add(s)
        s = _low(m0[s]) * K + _low(m1[s])
    return False


def decay_kernel(payoff, demand, values, cost, q0, q1, memory, obs,
                 update_kind, alpha, delta, policy_kind, eps_kind, eps_param,
                 tau0, tau_decay, tau_min, window, horizon, bitgen, trace, stride):
    """Run until both greedy policies are stable for ``window`` periods or
    ``horizon`` periods elapse.  Q arrays are updated in place.

    Returns (periods_elapsed, converged, final_obs, n_trace_rows).
    """
    K = payoff.shape[1]
    pay = payoff.tolist()
    dem = demand.tolist()
    vals = values.tolist()
    Q = [q0.tolist(), q1.tolist()]
    masks = [[_mask(r, K) for r in Q[0]], [_mask(r, K) for r in Q[1]]]
    rnd = RawStream(bitgen).random
    w = 1.0 - alpha
    stable = 0
    converged = False
    n_trace = 0
    t = 0
    acts = [0, 0]
    while t < horizon:
        # select
        for i in (0, 1):
            row = Q[i][obs]
            if policy_kind == BOLTZMANN:
                tau = max(tau0 * math.exp(-tau_decay * t), tau_min)
                acts[i] = _boltzmann_pick(row, K, tau, rnd)
                continue
            if policy_kind == EPS_GREEDY:
                eps = eps_param if eps_kind == EPS_CONSTANT else math.exp(-eps_param * t)
                if eps > 0.0 and rnd() < eps:
                    acts[i] = int(rnd() * K)
                    continue
            acts[i] = _greedy_pick(masks[i][obs], K, rnd)
        a0, a1 = acts
        nobs = a0 * K + a1 if memory else 0
        _update(Q[0][obs], Q[0][nobs], a0, a1, K, pay, dem, vals, cost, update_kind, alpha, w, delta)
        _update(Q[1][obs], Q[1][nobs], a1, a0, K, pay, dem, vals, cost, update_kind, alpha, w, delta)
        nm0 = _mask(Q[0][obs], K)
        nm1 = _mask(Q[1][obs], K)
        changed = nm0 != masks[0][obs] or nm1 != masks[1][obs]
        masks[0][obs] = nm0
        masks[1][obs] = nm1
        if changed and memory:
            changed = _on_orbit(nobs, obs, masks[0], masks[1], K)
        if changed:
            stable = 0
        else:
            stable += 1
        obs = nobs
        if stride > 0 and t % stride == 0:
            trace[n_trace] = (t, a0, a1, _low(masks[0][obs]), _low(masks[1][obs]),
                              _second(Q[0][obs], K), _second(Q[1][obs], K))
            n_trace += 1
        t += 1
        if stable >= window:
            converged = True
            break
    q0[:] = Q[0]
    q1[:] = Q[1]
    return t, converged, obs, n_trace


def constant_kernel(payoff, demand, values, cost, q0, q1, memory, obs,
                    update_kind, alpha, delta, eps, block, total, window_start,
                    bitgen, occupancy, trace, stride):
    """Constant-epsilon run over ``total`` periods with scheduled explorations
    and closed-form skips across exploration-free greedy stretches.

    Returns (final_obs, n_trace_rows, skipped_periods, stepped_periods).
    """
    K = payoff.shape[1]
    pay = payoff.tolist()
    dem = demand.tolist()
    vals = values.tolist()
    Q = [q0.tolist(), q1.tolist()]
    masks = [[_mask(r, K) for r in Q[0]], [_mask(r, K) for r in Q[1]]]
    occ = [[0] * K for _ in range(K)]
    rnd = RawStream(bitgen).random
    w = 1.0 - alpha
    rho = 1.0 - alpha * (1.0 - delta)
    n_trace = 0
    skipped = 0
    stepped = 0
    t = 0
    block_end = 0
    ev = [[], []]
    ptr = [0, 0]
    acts = [0, 0]
    while t < total:
        if t == block_end:
            L = min(block, total - t)
            ev[0] = [t + x for x in draw_block_events(L, eps, rnd)]
            ev[1] = [t + x for x in draw_block_events(L, eps, rnd)]
            ptr = [0, 0]
            block_end = t + L
        nxt0 = ev[0][ptr[0]] if ptr[0] < len(ev[0]) else block_end
        nxt1 = ev[1][ptr[1]] if ptr[1] < len(ev[1]) else block_end
        if t != nxt0 and t != nxt1 and update_kind == ASYNC:
            m0 = masks[0][obs]
            m1 = masks[1][obs]
            if m0 == m1 and m0 & (m0 - 1) == 0:
                a = _low(m0)
                if not memory or obs == a * K + a:
                    target = pay[a][a] / (1.0 - delta)
                    if target > _second(Q[0][obs], K) and target > _second(Q[1][obs], K):
                        tau = (nxt0 if nxt0 < nxt1 else nxt1) - t
                        f = rho ** tau
                        Q[0][obs][a] = f * Q[0][obs][a] + (1.0 - f) * target
                        Q[1][obs][a] = f * Q[1][obs][a] + (1.0 - f) * target
                        end = t + tau
                        lo = t if t > window_start else window_start
                        if end > lo:
                            occ[a][a] += end - lo
                        if stride > 0:
                            s0 = _second(Q[0][obs], K)
                            s1 = _second(Q[1][obs], K)
                            tk = ((t + stride - 1) // stride) * stride
                            while tk < end:
                                trace[n_trace] = (tk, a, a, a, a, s0, s1)
                                n_trace += 1
                                tk += stride
                        skipped += tau
                        t = end
                        continue
        for i in (0, 1):
            nxt = nxt0 if i == 0 else nxt1
            if t == nxt:
                acts[i] = int(rnd() * K)
                ptr[i] += 1
            else:
                acts[i] = _greedy_pick(masks[i][obs], K, rnd)
        a0, a1 = acts
        nobs = a0 * K + a1 if memory else 0
        _update(Q[0][obs], Q[0][nobs], a0, a1, K, pay, dem, vals, cost, update_kind, alpha, w, delta)
        _update(Q[1][obs], Q[1][nobs], a1, a0, K, pay, dem, vals, cost, update_kind, alpha, w, delta)
        masks[0][obs] = _mask(Q[0][obs], K)
        masks[1][obs] = _mask(Q[1][obs], K)
        if t >= window_start:
            occ[a0][a1] += 1
        obs = nobs
        if stride > 0 and t % stride == 0:
            trace[n_trace] = (t, a0, a1, _low(masks[0][obs]), _low(masks[1][obs]),
                              _second(Q[0][obs], K), _second(Q[1][obs], K))
            n_trace += 1
        stepped += 1
        t += 1
    q0[:] = Q[0]
    q1[:] = Q[1]
    occupancy += np.asarray(occ, dtype=np.int64)
    return obs, n_trace, skipped, stepped
