"""Pure NumPy fallback for the hot kernels.

Same contracts as the Cython module `_cykernels`; kept deliberately close
to the compiled code so both backends resolve cost ties identically.
"""

import numpy as np

# DP states for the per-column segmentation: a segment either models the
# ground plane, or is fronto-parallel and does / does not satisfy the
# gravity bound at its own base row.
GROUND_STATE = 0
OBST_OK = 1
OBST_BAD = 2

_INF = float("inf")
_INT64_MAX = np.iinfo(np.int64).max


def column_prefixes(d, valid, dhat, sigma, kappa, c_invalid):
    """Prefix arrays enabling O(1) segment costs over row ranges.

    Returns (gpre, cnt, sd, sd2), each of length H+1: cumulative ground
    cost, count of valid rows, sum and sum-of-squares of valid disparities.
    """
    e = (d - dhat) / sigma
    rho = np.minimum(e * e, kappa)
    ground_row = np.where(valid, rho, c_invalid)
    dv = np.where(valid, d, 0.0)
    gpre = np.zeros(d.shape[0] + 1)
    cnt = np.zeros(d.shape[0] + 1, np.int64)
    sd = np.zeros(d.shape[0] + 1)
    sd2 = np.zeros(d.shape[0] + 1)
    np.cumsum(ground_row, out=gpre[1:])
    np.cumsum(valid.astype(np.int64), out=cnt[1:])
    np.cumsum(dv, out=sd[1:])
    np.cumsum(dv * dv, out=sd2[1:])
    return gpre, cnt, sd, sd2


def obstacle_segment(d, valid, cnt, sd, sd2, a, e, sigma, kappa, c_invalid):
    """(mu, cost) of one fronto-parallel segment over rows [a, e].

    mu is the mean of the valid disparities (0 if none). The untruncated
    quadratic part comes from the prefix sums; rows whose residual exceeds
    the truncation ceiling are corrected in a second pass.
    """
    n = int(cnt[e + 1] - cnt[a])
    length = e - a + 1
    if n == 0:
        return 0.0, length * c_invalid
    s1 = sd[e + 1] - sd[a]
    s2 = sd2[e + 1] - sd2[a]
    mu = s1 / n
    cost = (s2 - s1 * s1 / n) / (sigma * sigma)
    r = (d[a : e + 1] - mu) / sigma
    r2 = r * r
    over = valid[a : e + 1] & (r2 > kappa)
    if over.any():
        cost += float(np.sum(kappa - r2[over]))
    cost += (length - n) * c_invalid
    return float(mu), float(cost)


def stixel_dp_column(d, valid, dhat, sigma, kappa, c_invalid, beta_seg, beta_base, delta_grav):
    """MAP ground/obstacle segmentation of one disparity column.

    Minimizes the sum of segment data costs plus `beta_seg` per extra
    segment and `beta_base` if the bottom segment is an obstacle, subject
    to: no two adjacent ground segments, and every obstacle segment that
    sits directly above a ground segment or touches the image bottom must
    have mu >= dhat(base row) - delta_grav.

    Ties are broken by: fewer segments; then boundaries as low in the
    image as possible, compared bottom-up, with the class above each tied
    boundary preferring ground; finally a ground bottom segment. The
    exhaustive oracle implements the identical ordering.

    Returns (total_cost, v_top, v_bottom, cls, mu) with segments ordered
    bottom-to-top and cls 0=ground, 1=obstacle. The caller must handle
    all-invalid columns (degenerate by definition) before calling.
    """
    H = d.shape[0]
    valid = valid.astype(bool)
    gpre, cnt, sd, sd2 = column_prefixes(d, valid, dhat, sigma, kappa, c_invalid)

    cost = np.full((H, 3), _INF)
    nseg = np.zeros((H, 3), np.int64)
    par_a = np.full((H, 3), -2, np.int64)
    par_s = np.full((H, 3), -2, np.int64)

    def chain_cmp(ra, sa, rb, sb):
        # Compare two equal-cost, equal-count partial labelings of rows
        # [0..ra] by their boundary/class chains, bottom-up. -1: first is
        # better, 1: second, 0: identical segmentation.
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
            ra, sa, rb, sb = aa - 1, qa, ab - 1, qb

    # best[s] = (cost, nseg, a, prev_state) incumbent for the state (e, s)
    for e in range(H):
        best = [(_INF, 0, -2, -2), (_INF, 0, -2, -2), (_INF, 0, -2, -2)]

        def offer(s, c, n, a, q):
            bc, bn, ba, bq = best[s]
            if c != bc:
                if c < bc:
                    best[s] = (c, n, a, q)
                return
            if n != bn:
                if n < bn:
                    best[s] = (c, n, a, q)
                return
            if a != ba:
                if a > ba:
                    best[s] = (c, n, a, q)
                return
            if a <= 0:
                return  # both start segments: identical
            cq = 0 if q == GROUND_STATE else 1
            cbq = 0 if bq == GROUND_STATE else 1
            if cq != cbq:
                if cq < cbq:
                    best[s] = (c, n, a, q)
                return
            if q != bq and chain_cmp(a - 1, q, a - 1, bq) < 0:
                best[s] = (c, n, a, q)

        for a in range(e + 1):
            gc = gpre[e + 1] - gpre[a]
            mu, oc = obstacle_segment(d, valid, cnt, sd, sd2, a, e, sigma, kappa, c_invalid)
            o_state = OBST_OK if mu >= dhat[e] - delta_grav else OBST_BAD
            if a == 0:
                offer(GROUND_STATE, gc, 1, 0, -1)
                offer(o_state, oc, 1, 0, -1)
            else:
                pc = cost[a - 1]
                pn = nseg[a - 1]
                if pc[OBST_OK] < _INF:
                    offer(GROUND_STATE, pc[OBST_OK] + beta_seg + gc, pn[OBST_OK] + 1, a, OBST_OK)
                for q in (GROUND_STATE, OBST_OK, OBST_BAD):
                    if pc[q] < _INF:
                        offer(o_state, pc[q] + beta_seg + oc, pn[q] + 1, a, q)

        for s in range(3):
            c, n, a, q = best[s]
            cost[e, s] = c
            nseg[e, s] = n
            par_a[e, s] = a
            par_s[e, s] = q

    # Bottom segment: ground, or an obstacle satisfying the gravity bound
    # at the image bottom (the assumed ground region below the view).
    cand = []
    if cost[H - 1, GROUND_STATE] < _INF:
        cand.append((cost[H - 1, GROUND_STATE], GROUND_STATE))
    if cost[H - 1, OBST_OK] < _INF:
        cand.append((cost[H - 1, OBST_OK] + beta_base, OBST_OK))
    total, s_win = cand[0]
    for c, s in cand[1:]:
        if c < total:
            total, s_win = c, s
        elif c == total:
            n_a, n_b = nseg[H - 1, s], nseg[H - 1, s_win]
            if n_a != n_b:
                if n_a < n_b:
                    total, s_win = c, s
                continue
            r = chain_cmp(H - 1, s, H - 1, s_win)
            if r < 0 or (r == 0 and s == GROUND_STATE and s_win != GROUND_STATE):
                total, s_win = c, s

    # Reconstruct bottom-to-top.
    v_top, v_bottom, cls, mus = [], [], [], []
    e, s = H - 1, s_win
    while True:
        a = int(par_a[e, s])
        if s == GROUND_STATE:
            cls.append(0)
            mus.append(0.0)
        else:
            cls.append(1)
            mus.append(obstacle_segment(d, valid, cnt, sd, sd2, a, e, sigma, kappa, c_invalid)[0])
        v_top.append(a)
        v_bottom.append(e)
        q = int(par_s[e, s])
        if q == -1:
            break
        e, s = a - 1, q

    return (
        float(total),
        np.asarray(v_top, np.int64),
        np.asarray(v_bottom, np.int64),
        np.asarray(cls, np.int64),
        np.asarray(mus, np.float64),
    )


def sad_scan(ref, other, window, max_disp, sign, tie_largest):
    """Integer SAD scan of `ref` against `other` over disparities 0..max_disp.

    sign=-1 matches ref pixel x to other pixel x-d (left reference),
    sign=+1 to x+d (right reference). Costs are exact integer window sums,
    so both backends agree bitwise. tie_largest picks the largest disparity
    on equal cost instead of the smallest.

    Returns (best_d, best_c, c_m1, c_p1): integer argmin disparity (-1
    where the full search range does not fit), its cost, and the costs at
    best_d -/+ 1 (-1 where unavailable), for subpixel interpolation.
    """
    H, W = ref.shape
    w2 = window // 2
    y0, y1 = w2, H - w2
    if sign < 0:
        x0, x1 = max_disp + w2, W - w2
    else:
        x0, x1 = w2, W - w2 - max_disp
    best_d = np.full((H, W), -1, np.int32)
    best_c = np.full((H, W), _INT64_MAX, np.int64)
    c_m1 = np.full((H, W), -1, np.int64)
    c_p1 = np.full((H, W), -1, np.int64)
    if y1 <= y0 or x1 <= x0:
        return best_d, best_c, c_m1, c_p1
    region = (slice(y0, y1), slice(x0, x1))
    bd = best_d[region]
    bc = best_c[region]
    pm1 = c_m1[region]
    pp1 = c_p1[region]
    ii = np.zeros((H + 1, W + 1), np.int64)
    prev = None
    for dd in range(max_disp + 1):
        shifted = np.zeros_like(other)
        if dd == 0:
            shifted[:] = other
        elif sign < 0:
            shifted[:, dd:] = other[:, : W - dd]
        else:
            shifted[:, : W - dd] = other[:, dd:]
        diff = np.abs(ref - shifted)
        np.cumsum(diff, axis=0, out=ii[1:, 1:])
        np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
        cur = (
            ii[y0 + w2 + 1 : y1 + w2 + 1, x0 + w2 + 1 : x1 + w2 + 1]
            - ii[y0 - w2 : y1 - w2, x0 + w2 + 1 : x1 + w2 + 1]
            - ii[y0 + w2 + 1 : y1 + w2 + 1, x0 - w2 : x1 - w2]
            + ii[y0 - w2 : y1 - w2, x0 - w2 : x1 - w2]
        )
        upd = (cur <= bc) if tie_largest else (cur < bc)
        if dd >= 1:
            stay = (bd == dd - 1) & ~upd
            pp1[stay] = cur[stay]
            pm1[upd] = prev[upd]
        bd[upd] = dd
        bc[upd] = cur[upd]
        pp1[upd] = -1
        prev = cur
    return best_d, best_c, c_m1, c_p1
