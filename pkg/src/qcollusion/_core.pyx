# cython: language_level=3
"""Compiled session kernels (twin of ``_pycore``)."""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log1p, pow, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

import numpy as np

cdef double SCALE = 1.0 / 9007199254740992.0

cdef enum:
    ASYNC = 0
    SYNC = 1
    GREEDY = 0
    EPS_GREEDY = 1
    BOLTZMANN = 2
    EPS_CONSTANT = 0


cdef inline double rnd(bitgen_t *bg) noexcept nogil:
    return <double>(bg.next_uint64(bg.state) >> 11) * SCALE


cdef inline double rowmax(double *row, int K) noexcept nogil:
    cdef double m = row[0]
    cdef int a
    for a in range(1, K):
        if row[a] > m:
            m = row[a]
    return m


cdef inline uint64_t mask_of(double *row, int K) noexcept nogil:
    cdef double m = rowmax(row, K)
    cdef uint64_t mask = 0
    cdef int a
    for a in range(K):
        if row[a] == m:
            mask |= (<uint64_t>1) << a
    return mask


cdef inline int low_bit(uint64_t mask) noexcept nogil:
    cdef int a = 0
    while not (mask >> a) & 1:
        a += 1
    return a


cdef inline double second(double *row, int K) noexcept nogil:
    cdef double m1 = -INFINITY, m2 = -INFINITY, x
    cdef int a
    for a in range(K):
        x = row[a]
        if x > m1:
            m2 = m1
            m1 = x
        elif x > m2:
            m2 = x
    return m2


cdef inline int greedy_pick(uint64_t mask, int K, bitgen_t *bg) noexcept nogil:
    cdef int n = 0, a, r
    for a in range(K):
        if (mask >> a) & 1:
            n += 1
    if n == 1:
        return low_bit(mask)
    r = <int>(rnd(bg) * n)
    for a in range(K):
        if (mask >> a) & 1:
            if r == 0:
                return a
            r -= 1
    return K - 1


cdef inline int boltzmann_pick(double *row, int K, double tau, double *w, bitgen_t *bg) noexcept nogil:
    cdef double m = rowmax(row, K), total = 0.0, u, acc = 0.0
    cdef int a
    for a in range(K):
        w[a] = exp((row[a] - m) / tau)
    for a in range(K):
        total += w[a]
    u = rnd(bg) * total
    for a in range(K):
        acc += w[a]
        if u < acc:
            return a
    return K - 1


cdef inline int64_t binomial_inv(int64_t n, double p, double u) noexcept nogil:
    cdef double f = exp(n * log1p(-p))
    cdef double r = p / (1.0 - p)
    cdef double cdf = f
    cdef int64_t k = 0
    while cdf <= u and k < n:
        k += 1
        f = f * (r * <double>(n - k + 1) / <double>k)
        cdf += f
    return k


cdef int64_t draw_events(int64_t L, double p, int64_t offset, int64_t *out, bitgen_t *bg) noexcept nogil:
    cdef int64_t cnt = binomial_inv(L, p, rnd(bg))
    cdef int64_t m = 0, pos, j, x
    cdef bint dup
    while m < cnt:
        pos = <int64_t>(rnd(bg) * L)
        dup = False
        for j in range(m):
            if out[j] == pos:
                dup = True
                break
        if not dup:
            out[m] = pos
            m += 1
    # insertion sort, then shift to absolute periods
    for j in range(1, m):
        x = out[j]
        pos = j - 1
        while pos >= 0 and out[pos] > x:
            out[pos + 1] = out[pos]
            pos -= 1
        out[pos + 1] = x
    for j in range(m):
        out[j] += offset
    return m


cdef void update(double *row, double *nrow, int a_self, int a_opp, int K,
                 const double *pay, const double *dem, const double *vals, double cost,
                 int kind, double alpha, double w, double delta, double *tmp) noexcept nogil:
    cdef double cont = delta * rowmax(nrow, K)
    cdef double d, old, cand
    cdef int a
    if kind == ASYNC:
        row[a_self] = w * row[a_self] + alpha * (pay[a_self * K + a_opp] + cont)
    elif kind == SYNC:
        for a in range(K):
            row[a] = w * row[a] + alpha * (pay[a * K + a_opp] + cont)
    else:
        d = dem[a_self * K + a_opp]
        for a in range(K):
            old = row[a]
            if a == a_self:
                tmp[a] = w * old + alpha * (pay[a_self * K + a_opp] + cont)
            else:
                cand = w * old + alpha * ((vals[a] - cost) * d + cont)
                if a > a_self:
                    tmp[a] = cand if cand < old else old
                else:
                    tmp[a] = cand if cand > old else old
        for a in range(K):
            row[a] = tmp[a]


cdef bint on_orbit(int start, int target, uint64_t *m0, uint64_t *m1, int K,
                   int *seen, int stamp) noexcept nogil:
    cdef int s = start
    while seen[s] != stamp:
        if s == target:
            return True
        seen[s] = stamp
        s = low_bit(m0[s]) * K + low_bit(m1[s])
    return False


cdef bitgen_t *get_bitgen(object bitgen) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")


def decay_kernel(const double[:, ::1] payoff, const double[:, ::1] demand, const double[::1] values, double cost,
                 double[:, ::1] q0, double[:, ::1] q1, bint memory, int obs,
                 int update_kind, double alpha, double delta, int policy_kind, int eps_kind,
                 double eps_param, double tau0, double tau_decay, double tau_min,
                 long long window, long long horizon, object bitgen,
                 double[:, ::1] trace, long long stride):
    cdef int K = payoff.shape[1]
    cdef int n_obs = q0.shape[0]
    cdef bitgen_t *bg = get_bitgen(bitgen)
    cdef const double *pay = &payoff[0, 0]
    cdef const double *dem = &demand[0, 0]
    cdef const double *vals = &values[0]
    cdef double *Q0 = &q0[0, 0]
    cdef double *Q1 = &q1[0, 0]
    cdef uint64_t *m0 = <uint64_t *> malloc(n_obs * sizeof(uint64_t))
    cdef uint64_t *m1 = <uint64_t *> malloc(n_obs * sizeof(uint64_t))
    cdef int *seen = <int *> malloc(n_obs * sizeof(int))
    cdef double *tmp = <double *> malloc(K * sizeof(double))
    cdef double w = 1.0 - alpha, eps, tau
    cdef long long t = 0, stable = 0, n_trace = 0
    cdef int i, o, a0 = 0, a1 = 0, nobs, stamp = 0
    cdef int acts[2]
    cdef double *row
    cdef uint64_t nm0, nm1
    cdef bint changed, converged = False
    if m0 == NULL or m1 == NULL or seen == NULL or tmp == NULL:
        free(m0); free(m1); free(seen); free(tmp)
        raise MemoryError()
    with nogil:
        for o in range(n_obs):
            m0[o] = mask_of(Q0 + o * K, K)
            m1[o] = mask_of(Q1 + o * K, K)
            seen[o] = 0
        while t < horizon:
            for i in range(2):
                row = (Q0 if i == 0 else Q1) + obs * K
                if policy_kind == BOLTZMANN:
                    tau = tau0 * exp(-tau_decay * t)
                    if tau < tau_min:
                        tau = tau_min
                    acts[i] = boltzmann_pick(row, K, tau, tmp, bg)
                    continue
                if policy_kind == EPS_GREEDY:
                    if eps_kind == EPS_CONSTANT:
                        eps = eps_param
                    else:
                        eps = exp(-eps_param * t)
                    if eps > 0.0 and rnd(bg) < eps:
                        acts[i] = <int>(rnd(bg) * K)
                        continue
                acts[i] = greedy_pick(m0[obs] if i == 0 else m1[obs], K, bg)
            a0 = acts[0]
            a1 = acts[1]
            nobs = a0 * K + a1 if memory else 0
            update(Q0 + obs * K, Q0 + nobs * K, a0, a1, K, pay, dem, vals, cost,
                   update_kind, alpha, w, delta, tmp)
            update(Q1 + obs * K, Q1 + nobs * K, a1, a0, K, pay, dem, vals, cost,
                   update_kind, alpha, w, delta, tmp)
            nm0 = mask_of(Q0 + obs * K, K)
            nm1 = mask_of(Q1 + obs * K, K)
            changed = nm0 != m0[obs] or nm1 != m1[obs]
            m0[obs] = nm0
            m1[obs] = nm1
            if changed and memory:
                stamp += 1
                changed = on_orbit(nobs, obs, m0, m1, K, seen, stamp)
            if changed:
                stable = 0
            else:
                stable += 1
            obs = nobs
            if stride > 0 and t % stride == 0:
                trace[n_trace, 0] = t
                trace[n_trace, 1] = a0
                trace[n_trace, 2] = a1
                trace[n_trace, 3] = low_bit(m0[obs])
                trace[n_trace, 4] = low_bit(m1[obs])
                trace[n_trace, 5] = second(Q0 + obs * K, K)
                trace[n_trace, 6] = second(Q1 + obs * K, K)
                n_trace += 1
            t += 1
            if stable >= window:
                converged = True
                break
    free(m0); free(m1); free(seen); free(tmp)
    return t, bool(converged), obs, n_trace


def constant_kernel(const double[:, ::1] payoff, const double[:, ::1] demand, const double[::1] values, double cost,
                    double[:, ::1] q0, double[:, ::1] q1, bint memory, int obs,
                    int update_kind, double alpha, double delta, double eps,
                    long long block, long long total, long long window_start, object bitgen,
                    long long[:, ::1] occupancy, double[:, ::1] trace, long long stride):
    cdef int K = payoff.shape[1]
    cdef int n_obs = q0.shape[0]
    cdef bitgen_t *bg = get_bitgen(bitgen)
    cdef const double *pay = &payoff[0, 0]
    cdef const double *dem = &demand[0, 0]
    cdef const double *vals = &values[0]
    cdef double *Q0 = &q0[0, 0]
    cdef double *Q1 = &q1[0, 0]
    cdef uint64_t *m0 = <uint64_t *> malloc(n_obs * sizeof(uint64_t))
    cdef uint64_t *m1 = <uint64_t *> malloc(n_obs * sizeof(uint64_t))
    cdef double *tmp = <double *> malloc(K * sizeof(double))
    cdef int64_t *ev0 = <int64_t *> malloc((block + 1) * sizeof(int64_t))
    cdef int64_t *ev1 = <int64_t *> malloc((block + 1) * sizeof(int64_t))
    cdef double w = 1.0 - alpha
    cdef double rho = 1.0 - alpha * (1.0 - delta)
    cdef double target, f, s0, s1
    cdef long long t = 0, n_trace = 0, skipped = 0, stepped = 0
    cdef long long block_end = 0, L, nxt0, nxt1, tau, end, lo, tk
    cdef int64_t n0 = 0, n1 = 0, p0 = 0, p1 = 0
    cdef int o, a, a0, a1, nobs
    cdef uint64_t mk0, mk1
    if m0 == NULL or m1 == NULL or tmp == NULL or ev0 == NULL or ev1 == NULL:
        free(m0); free(m1); free(tmp); free(ev0); free(ev1)
        raise MemoryError()
    with nogil:
        for o in range(n_obs):
            m0[o] = mask_of(Q0 + o * K, K)
            m1[o] = mask_of(Q1 + o * K, K)
        while t < total:
            if t == block_end:
                L = block if block < total - t else total - t
                n0 = draw_events(L, eps, t, ev0, bg)
                n1 = draw_events(L, eps, t, ev1, bg)
                p0 = 0
                p1 = 0
                block_end = t + L
            nxt0 = ev0[p0] if p0 < n0 else block_end
            nxt1 = ev1[p1] if p1 < n1 else block_end
            if t != nxt0 and t != nxt1 and update_kind == ASYNC:
                mk0 = m0[obs]
                mk1 = m1[obs]
                if mk0 == mk1 and (mk0 & (mk0 - 1)) == 0:
                    a = low_bit(mk0)
                    if not memory or obs == a * K + a:
                        target = pay[a * K + a] / (1.0 - delta)
                        if target > second(Q0 + obs * K, K) and target > second(Q1 + obs * K, K):
                            tau = (nxt0 if nxt0 < nxt1 else nxt1) - t
                            f = pow(rho, <double>tau)
                            Q0[obs * K + a] = f * Q0[obs * K + a] + (1.0 - f) * target
                            Q1[obs * K + a] = f * Q1[obs * K + a] + (1.0 - f) * target
                            end = t + tau
                            lo = t if t > window_start else window_start
                            if end > lo:
                                occupancy[a, a] += end - lo
                            if stride > 0:
                                s0 = second(Q0 + obs * K, K)
                                s1 = second(Q1 + obs * K, K)
                                tk = ((t + stride - 1) // stride) * stride
                                while tk < end:
                                    trace[n_trace, 0] = tk
                                    trace[n_trace, 1] = a
                                    trace[n_trace, 2] = a
                                    trace[n_trace, 3] = a
                                    trace[n_trace, 4] = a
                                    trace[n_trace, 5] = s0
                                    trace[n_trace, 6] = s1
                                    n_trace += 1
                                    tk += stride
                            skipped += tau
                            t = end
                            continue
            if t == nxt0:
                a0 = <int>(rnd(bg) * K)
                p0 += 1
            else:
                a0 = greedy_pick(m0[obs], K, bg)
            if t == nxt1:
                a1 = <int>(rnd(bg) * K)
                p1 += 1
            else:
                a1 = greedy_pick(m1[obs], K, bg)
            nobs = a0 * K + a1 if memory else 0
            update(Q0 + obs * K, Q0 + nobs * K, a0, a1, K, pay, dem, vals, cost,
                   update_kind, alpha, w, delta, tmp)
            update(Q1 + obs * K, Q1 + nobs * K, a1, a0, K, pay, dem, vals, cost,
                   update_kind, alpha, w, delta, tmp)
            m0[obs] = mask_of(Q0 + obs * K, K)
            m1[obs] = mask_of(Q1 + obs * K, K)
            if t >= window_start:
                occupancy[a0, a1] += 1
            obs = nobs
            if stride > 0 and t % stride == 0:
                trace[n_trace, 0] = t
                trace[n_trace, 1] = a0
                trace[n_trace, 2] = a1
                trace[n_trace, 3] = low_bit(m0[obs])
                trace[n_trace, 4] = low_bit(m1[obs])
                trace[n_trace, 5] = second(Q0 + obs * K, K)
                trace[n_trace, 6] = second(Q1 + obs * K, K)
                n_trace += 1
            stepped += 1
            t += 1
    free(m0); free(m1); free(tmp); free(ev0); free(ev1)
    return obs, n_trace, skipped, stepped
