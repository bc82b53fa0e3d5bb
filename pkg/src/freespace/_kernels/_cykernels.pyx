# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: per-column stixel DP and the SAD disparity scan.

Mirrors `_pykernels` operation for operation; tie resolution in the DP is
identical so both backends return the same segmentations.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double INF = float("inf")
cdef long long INT64_MAX = np.iinfo(np.int64).max

cdef int GROUND_STATE = 0
cdef int OBST_OK = 1
cdef int OBST_BAD = 2


cdef inline double _obstacle_cost(
    const double[::1] d, const unsigned char[::1] valid,
    const long long[::1] cnt, const double[::1] sd, const double[::1] sd2,
    Py_ssize_t a, Py_ssize_t e,
    double sigma, double kappa, double c_invalid, double* mu_out,
) noexcept nogil:
    cdef long long n = cnt[e + 1] - cnt[a]
    cdef Py_ssize_t length = e - a + 1
    cdef double s1, s2, mu, cost, r, r2
    cdef Py_ssize_t i
    if n == 0:
        mu_out[0] = 0.0
        return length * c_invalid
    s1 = sd[e + 1] - sd[a]
    s2 = sd2[e + 1] - sd2[a]
    mu = s1 / n
    cost = (s2 - s1 * s1 / n) / (sigma * sigma)
    for i in range(a, e + 1):
        if valid[i]:
            r = (d[i] - mu) / sigma
            r2 = r * r
            if r2 > kappa:
                cost += kappa - r2
    cost += (length - n) * c_invalid
    mu_out[0] = mu
    return cost


cdef int _chain_cmp(
    Py_ssize_t ra, int sa, Py_ssize_t rb, int sb,
    const long long[:, ::1] par_a, const long long[:, ::1] par_s,
) noexcept nogil:
    cdef long long aa, ab, qa, qb
    cdef int ca, cb
    while True:
        if ra == rb and sa == sb:
            return 0
        aa = par_a[ra, sa]
        ab = par_a[rb, sb]
        if aa != ab:
            return -1 if aa > ab else 1
        qa = par_s[ra, sa]
        qb = par_s[rb, sb]
        if qa == -1 and qb == -1:
            return 0
        ca = 0 if qa == GROUND_STATE else 1
        cb = 0 if qb == GROUND_STATE else 1
        if ca != cb:
            return -1 if ca < cb else 1
        ra = <Py_ssize_t> (aa - 1)
        sa = <int> qa
        rb = <Py_ssize_t> (ab - 1)
        sb = <int> qb


def stixel_dp_column(
    const double[::1] d,
    const unsigned char[::1] valid,
    const double[::1] dhat,
    double sigma,
    double kappa,
    double c_invalid,
    double beta_seg,
    double beta_base,
    double delta_grav,
):
    """See `_pykernels.stixel_dp_column`; identical contract and tie rules."""
    cdef Py_ssize_t H = d.shape[0]
    cdef Py_ssize_t e, a, i
    cdef int s, q, o_state

    gpre_np = np.zeros(H + 1)
    cnt_np = np.zeros(H + 1, np.int64)
    sd_np = np.zeros(H + 1)
    sd2_np = np.zeros(H + 1)
    cdef double[::1] gpre = gpre_np
    cdef long long[::1] cnt = cnt_np
    cdef double[::1] sd = sd_np
    cdef double[::1] sd2 = sd2_np

    cdef double err, rho, dv
    for i in range(H):
        if valid[i]:
            err = (d[i] - dhat[i]) / sigma
            rho = err * err
            if rho > kappa:
                rho = kappa
            dv = d[i]
            cnt[i + 1] = cnt[i] + 1
        else:
            rho = c_invalid
            dv = 0.0
            cnt[i + 1] = cnt[i]
        gpre[i + 1] = gpre[i] + rho
        sd[i + 1] = sd[i] + dv
        sd2[i + 1] = sd2[i] + dv * dv

    cost_np = np.full((H, 3), INF)
    nseg_np = np.zeros((H, 3), np.int64)
    par_a_np = np.full((H, 3), -2, np.int64)
    par_s_np = np.full((H, 3), -2, np.int64)
    cdef double[:, ::1] cost = cost_np
    cdef long long[:, ::1] nseg = nseg_np
    cdef long long[:, ::1] par_a = par_a_np
    cdef long long[:, ::1] par_s = par_s_np

    # per-row incumbents
    cdef double best_c[3]
    cdef long long best_n[3]
    cdef long long best_a[3]
    cdef long long best_q[3]

    cdef double gc, oc, mu, cand_c
    cdef long long cand_n

    with nogil:
        for e in range(H):
            for s in range(3):
                best_c[s] = INF
                best_n[s] = 0
                best_a[s] = -2
                best_q[s] = -2
            for a in range(e + 1):
                gc = gpre[e + 1] - gpre[a]
                oc = _obstacle_cost(d, valid, cnt, sd, sd2, a, e, sigma, kappa, c_invalid, &mu)
                o_state = OBST_OK if mu >= dhat[e] - delta_grav else OBST_BAD
                if a == 0:
                    _offer(best_c, best_n, best_a, best_q, GROUND_STATE, gc, 1, 0, -1, par_a, par_s)
                    _offer(best_c, best_n, best_a, best_q, o_state, oc, 1, 0, -1, par_a, par_s)
                else:
                    if cost[a - 1, OBST_OK] < INF:
                        _offer(
                            best_c, best_n, best_a, best_q, GROUND_STATE,
                            cost[a - 1, OBST_OK] + beta_seg + gc,
                            nseg[a - 1, OBST_OK] + 1, a, OBST_OK, par_a, par_s,
                        )
                    for q in range(3):
                        if cost[a - 1, q] < INF:
                            _offer(
                                best_c, best_n, best_a, best_q, o_state,
                                cost[a - 1, q] + beta_seg + oc,
                                nseg[a - 1, q] + 1, a, q, par_a, par_s,
                            )
            for s in range(3):
                cost[e, s] = best_c[s]
                nseg[e, s] = best_n[s]
                par_a[e, s] = best_a[s]
                par_s[e, s] = best_q[s]

    # final selection: ground bottom, or gravity-satisfying obstacle bottom
    cdef double total = cost[H - 1, GROUND_STATE]
    cdef int s_win = GROUND_STATE
    cdef double c_obs
    cdef long long n_a, n_b
    if cost[H - 1, OBST_OK] < INF:
        c_obs = cost[H - 1, OBST_OK] + beta_base
        if total == INF or c_obs < total:
            total = c_obs
            s_win = OBST_OK
        elif c_obs == total:
            n_a = nseg[H - 1, OBST_OK]
            n_b = nseg[H - 1, GROUND_STATE]
            if n_a < n_b:
                total = c_obs
                s_win = OBST_OK
            elif n_a == n_b:
                if _chain_cmp(H - 1, OBST_OK, H - 1, GROUND_STATE, par_a, par_s) < 0:
                    total = c_obs
                    s_win = OBST_OK
                # equal chains: ground bottom preferred, keep GROUND_STATE

    v_top_l, v_bottom_l, cls_l, mu_l = [], [], [], []
    e = H - 1
    s = s_win
    cdef double mu2
    while True:
        a = <Py_ssize_t> par_a[e, s]
        if s == GROUND_STATE:
            cls_l.append(0)
            mu_l.append(0.0)
        else:
            cls_l.append(1)
            _obstacle_cost(d, valid, cnt, sd, sd2, a, e, sigma, kappa, c_invalid, &mu2)
            mu_l.append(mu2)
        v_top_l.append(a)
        v_bottom_l.append(e)
        q = <int> par_s[e, s]
        if q == -1:
            break
        e = a - 1
        s = q

    return (
        float(total),
        np.asarray(v_top_l, np.int64),
        np.asarray(v_bottom_l, np.int64),
        np.asarray(cls_l, np.int64),
        np.asarray(mu_l, np.float64),
    )


cdef void _offer(
    double* best_c, long long* best_n, long long* best_a, long long* best_q,
    int s, double c, long long n, long long a, long long q,
    const long long[:, ::1] par_a, const long long[:, ::1] par_s,
) noexcept nogil:
    cdef int cq, cbq
    if c != best_c[s]:
        if c < best_c[s]:
            best_c[s] = c; best_n[s] = n; best_a[s] = a; best_q[s] = q
        return
    if n != best_n[s]:
        if n < best_n[s]:
            best_c[s] = c; best_n[s] = n; best_a[s] = a; best_q[s] = q
        return
    if a != best_a[s]:
        if a > best_a[s]:
            best_c[s] = c; best_n[s] = n; best_a[s] = a; best_q[s] = q
        return
    if a <= 0:
        return
    cq = 0 if q == GROUND_STATE else 1
    cbq = 0 if best_q[s] == GROUND_STATE else 1
    if cq != cbq:
        if cq < cbq:
            best_c[s] = c; best_n[s] = n; best_a[s] = a; best_q[s] = q
        return
    if q != best_q[s] and _chain_cmp(<Py_ssize_t> (a - 1), <int> q, <Py_ssize_t> (a - 1), <int> best_q[s], par_a, par_s) < 0:
        best_c[s] = c; best_n[s] = n; best_a[s] = a; best_q[s] = q


def sad_scan(
    const long long[:, ::1] ref,
    const long long[:, ::1] other,
    int window,
    int max_disp,
    int sign,
    bint tie_largest,
):
    """See `_pykernels.sad_scan`; integer costs, bitwise-equal results."""
    cdef Py_ssize_t H = ref.shape[0]
    cdef Py_ssize_t W = ref.shape[1]
    cdef int w2 = window // 2
    cdef Py_ssize_t y0 = w2, y1 = H - w2
    cdef Py_ssize_t x0, x1
    if sign < 0:
        x0 = max_disp + w2
        x1 = W - w2
    else:
        x0 = w2
        x1 = W - w2 - max_disp

    best_d_np = np.full((H, W), -1, np.int32)
    best_c_np = np.full((H, W), INT64_MAX, np.int64)
    c_m1_np = np.full((H, W), -1, np.int64)
    c_p1_np = np.full((H, W), -1, np.int64)
    if y1 <= y0 or x1 <= x0:
        return best_d_np, best_c_np, c_m1_np, c_p1_np

    cdef int[:, ::1] best_d = best_d_np
    cdef long long[:, ::1] best_c = best_c_np
    cdef long long[:, ::1] c_m1 = c_m1_np
    cdef long long[:, ::1] c_p1 = c_p1_np

    bufs = [np.zeros((H, W), np.int64), np.zeros((H, W), np.int64)]
    colsum_np = np.zeros(W, np.int64)
    cdef long long[:, ::1] cur
    cdef long long[:, ::1] prev
    cdef long long[::1] colsum = colsum_np
    cdef Py_ssize_t dd

    for dd in range(max_disp + 1):
        cur = bufs[dd % 2]
        prev = bufs[1 - dd % 2]
        with nogil:
            _sad_pass(
                ref, other, cur, prev, colsum, best_d, best_c, c_m1, c_p1,
                dd, w2, sign, tie_largest, y0, y1, x0, x1,
            )

    return best_d_np, best_c_np, c_m1_np, c_p1_np


cdef void _sad_pass(
    const long long[:, ::1] ref, const long long[:, ::1] other,
    long long[:, ::1] cur, long long[:, ::1] prev, long long[::1] colsum,
    int[:, ::1] best_d, long long[:, ::1] best_c,
    long long[:, ::1] c_m1, long long[:, ::1] c_p1,
    Py_ssize_t dd, int w2, int sign, bint tie_largest,
    Py_ssize_t y0, Py_ssize_t y1, Py_ssize_t x0, Py_ssize_t x1,
) noexcept nogil:
    cdef Py_ssize_t y, x, xo
    cdef long long v, rowacc
    cdef bint take
    for x in range(x0 - w2, x1 + w2):
        colsum[x] = 0
    for y in range(0, 2 * w2 + 1):
        for x in range(x0 - w2, x1 + w2):
            xo = x - dd if sign < 0 else x + dd
            v = ref[y, x] - other[y, xo]
            colsum[x] += v if v >= 0 else -v
    for y in range(y0, y1):
        if y > y0:
            # slide the row window down by one
            for x in range(x0 - w2, x1 + w2):
                xo = x - dd if sign < 0 else x + dd
                v = ref[y + w2, x] - other[y + w2, xo]
                colsum[x] += v if v >= 0 else -v
                v = ref[y - w2 - 1, x] - other[y - w2 - 1, xo]
                colsum[x] -= v if v >= 0 else -v
        rowacc = 0
        for x in range(x0 - w2, x0 + w2 + 1):
            rowacc += colsum[x]
        cur[y, x0] = rowacc
        for x in range(x0 + 1, x1):
            rowacc += colsum[x + w2] - colsum[x - w2 - 1]
            cur[y, x] = rowacc
    for y in range(y0, y1):
        for x in range(x0, x1):
            if tie_largest:
                take = cur[y, x] <= best_c[y, x]
            else:
                take = cur[y, x] < best_c[y, x]
            if take:
                if dd >= 1:
                    c_m1[y, x] = prev[y, x]
                best_d[y, x] = <int> dd
                best_c[y, x] = cur[y, x]
                c_p1[y, x] = -1
            elif dd >= 1 and best_d[y, x] == dd - 1:
                c_p1[y, x] = cur[y, x]
