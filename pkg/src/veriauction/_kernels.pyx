# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled verification kernel for the exhaustive family.

Same semantics as veriauction.kernels (the pure-Python fallback); the
checksum ties the two together in tests.
"""

from libc.stdlib cimport free, malloc

from .family import declaration_table, table_size

cdef long CHECKSUM_MOD = (<long>1 << 61) - 1


cdef inline int popcount(long x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef inline long lowest_bit(long x) nogil:
    return x & (-x)


cdef inline long _gcd(long a, long b) nogil:
    while b:
        a, b = b, a % b
    return a


cdef struct Counters:
    long instances
    long greedy_bound
    long cert_infeasible
    long cert_fallback
    long randexp_bad
    long randpoly_bad
    long feas_bad
    long checksum
    long first_i0
    long first_i1
    long first_i2
    int have_violation


cdef int check_one(
    int m,
    int n,
    long* idxs,
    long* tk,
    long* tm0,
    long* tm1,
    long* tv0,
    long* tv1,
    long* tr0,
    long* tr1,
    long scale,
    long* greedy_out,
    long* opt_out,
) nogil:
    """Returns a status bitmask: 1 greedy bound, 2 cert infeasible,
    4 cert fallback, 8 rank bound, 16 cardinality bound, 32 feasibility."""
    cdef long bval[6]
    cdef long bbid[6]
    cdef long bdid[6]
    cdef long bmask[6]
    cdef int nb = 0
    cdef int i, j, t, g
    cdef long idx

    for i in range(n):
        idx = idxs[i]
        bval[nb] = tv0[idx]; bbid[nb] = i; bdid[nb] = 0; bmask[nb] = tm0[idx]
        nb += 1
        if tk[idx] == 2:
            bval[nb] = tv1[idx]; bbid[nb] = i; bdid[nb] = 1; bmask[nb] = tm1[idx]
            nb += 1

    cdef int d = 0
    for i in range(nb):
        t = popcount(bmask[i])
        if t > d:
            d = t

    # stable insertion sort by value descending (ties keep bidder/demand order)
    cdef long kv, kb, kd, km
    for i in range(1, nb):
        kv = bval[i]; kb = bbid[i]; kd = bdid[i]; km = bmask[i]
        j = i - 1
        while j >= 0 and bval[j] < kv:
            bval[j + 1] = bval[j]; bbid[j + 1] = bbid[j]
            bdid[j + 1] = bdid[j]; bmask[j + 1] = bmask[j]
            j -= 1
        bval[j + 1] = kv; bbid[j + 1] = kb; bdid[j + 1] = kd; bmask[j + 1] = km

    # greedy with witness collection for the certificate
    cdef long taken = 0, served = 0, greedy_welfare = 0, sat = 0
    cdef long amask[3]
    cdef long aval[3]
    cdef long abid[3]
    cdef int na = 0
    cdef long inter
    cdef int status = 0
    for i in range(nb):
        if not (served >> bbid[i]) & 1 and not (bmask[i] & taken):
            taken |= bmask[i]
            served |= <long>1 << bbid[i]
            greedy_welfare += bval[i]
            amask[na] = bmask[i]; aval[na] = bval[i]; abid[na] = bbid[i]
            na += 1
        elif bmask[i] & taken:
            for j in range(na):
                inter = amask[j] & bmask[i]
                if inter:
                    sat |= lowest_bit(inter)
                    break
    greedy_out[0] = greedy_welfare

    # exhaustive optimum over exact assignments (skip option last)
    cdef long omask[3][3]
    cdef long oval[3][3]
    cdef int ocount[3]
    for i in range(3):
        ocount[i] = 1
        omask[i][0] = 0; oval[i][0] = 0
    for i in range(n):
        ocount[i] = 0
    for i in range(nb):
        t = <int>bbid[i]
        omask[t][ocount[t]] = bmask[i]
        oval[t][ocount[t]] = bval[i]
        ocount[t] += 1
    for i in range(n):
        omask[i][ocount[i]] = 0; oval[i][ocount[i]] = 0
        ocount[i] += 1

    cdef long opt = 0, total
    cdef long u0, u1
    cdef int c0, c1, c2
    for c0 in range(ocount[0]):
        u0 = omask[0][c0]
        for c1 in range(ocount[1]):
            if omask[1][c1] & u0:
                continue
            u1 = u0 | omask[1][c1]
            for c2 in range(ocount[2]):
                if omask[2][c2] & u1:
                    continue
                total = oval[0][c0] + oval[1][c1] + oval[2][c2]
                if total > opt:
                    opt = total
    opt_out[0] = opt

    cdef int d_prime = d if d < m - 1 else m - 1
    if (d_prime + 1) * greedy_welfare < opt:
        status |= 1

    # scaled dual certificate
    cdef long y[6]
    cdef long z[3]
    cdef long spread, den, share, cover, mm, full, top
    cdef int feasible = 1
    if m > 1:
        for g in range(m):
            y[g] = 0
        for i in range(n):
            z[i] = 0
        for j in range(na):
            z[abid[j]] = aval[j]
            spread = amask[j] & sat
            if spread == 0:
                spread = amask[j]
            den = popcount(spread)
            share = aval[j] * (scale / den)
            mm = spread
            while mm:
                g = popcount(lowest_bit(mm) - 1)
                y[g] = share
                mm &= mm - 1
        for i in range(nb):
            cover = 0
            mm = bmask[i]
            while mm:
                g = popcount(lowest_bit(mm) - 1)
                cover += y[g]
                mm &= mm - 1
            if z[bbid[i]] * scale + d_prime * cover < bval[i] * scale:
                feasible = 0
                break
        if not feasible:
            full = (<long>1 << m) - 1
            top = -1
            for j in range(na):
                if amask[j] == full:
                    top = aval[j]
                    break
            if top >= 0:
                status |= 4
                for i in range(nb):
                    if bval[i] > top:
                        status = (status & ~4) | 2
                        break
            else:
                status |= 2

    # rank-restricted optima: sum of per-rank optima covers the optimum
    cdef int kmax = 1
    for i in range(n):
        if tk[idxs[i]] == 2:
            kmax = 2
    cdef long rank_sum = 0
    cdef int ell, ri
    for ell in range(kmax):
        for i in range(3):
            ocount[i] = 1
            omask[i][0] = 0; oval[i][0] = 0
        for i in range(n):
            idx = idxs[i]
            ri = <int>(tr0[idx] if ell == 0 else tr1[idx])
            if ri < 0 or (ri == 1 and tk[idx] == 1):
                continue
            ocount[i] = 2
            omask[i][0] = tm0[idx] if ri == 0 else tm1[idx]
            oval[i][0] = tv0[idx] if ri == 0 else tv1[idx]
            omask[i][1] = 0; oval[i][1] = 0
        total = 0
        for c0 in range(ocount[0]):
            u0 = omask[0][c0]
            for c1 in range(ocount[1]):
                if omask[1][c1] & u0:
                    continue
                u1 = u0 | omask[1][c1]
                for c2 in range(ocount[2]):
                    if omask[2][c2] & u1:
                        continue
                    if oval[0][c0] + oval[1][c1] + oval[2][c2] > total:
                        total = oval[0][c0] + oval[1][c1] + oval[2][c2]
        rank_sum += total
    if rank_sum < opt:
        status |= 8

    # cardinality-capped branch: (top bid + small greedy) * (sqrt(m)+1) >= opt
    cdef int s = 1
    while (s + 1) * (s + 1) <= m:
        s += 1
    cdef long taken2 = 0, served2 = 0, g_small = 0
    for i in range(nb):
        if popcount(bmask[i]) <= s:
            if not (served2 >> bbid[i]) & 1 and not (bmask[i] & taken2):
                taken2 |= bmask[i]
                served2 |= <long>1 << bbid[i]
                g_small += bval[i]
    cdef long v_top = 0
    for i in range(nb):
        if bval[i] > v_top:
            v_top = bval[i]
    cdef long tval = v_top + g_small
    cdef long gap = opt - tval
    if gap > 0 and tval * tval * m < gap * gap:
        status |= 16

    return status


def run_cell(int m, int n, int vmax=3, long start=0, stop=None):
    """Compiled scan of the (m, n, vmax) cell over first indices
    [start, stop); returns the same counter dict as the fallback."""
    if n < 1 or n > 3:
        raise ValueError("compiled kernel supports 1 <= n <= 3")
    if m < 1 or m > 6:
        raise ValueError("compiled kernel supports 1 <= m <= 6")
    table = declaration_table(m, vmax)
    cdef long nd = table_size(m, vmax)
    cdef long cstop = nd if stop is None else <long>stop

    cdef long* tk = <long*>malloc(nd * sizeof(long))
    cdef long* tm0 = <long*>malloc(nd * sizeof(long))
    cdef long* tm1 = <long*>malloc(nd * sizeof(long))
    cdef long* tv0 = <long*>malloc(nd * sizeof(long))
    cdef long* tv1 = <long*>malloc(nd * sizeof(long))
    cdef long* tr0 = <long*>malloc(nd * sizeof(long))
    cdef long* tr1 = <long*>malloc(nd * sizeof(long))
    if not (tk and tm0 and tm1 and tv0 and tv1 and tr0 and tr1):
        raise MemoryError
    cdef long i
    for i in range(nd):
        tk[i] = table["k"][i]
        tm0[i] = table["mask0"][i]
        tm1[i] = table["mask1"][i]
        tv0[i] = table["val0"][i]
        tv1[i] = table["val1"][i]
        tr0[i] = table["rank0"][i]
        tr1[i] = table["rank1"][i]

    cdef long scale = 1
    for i in range(2, m + 1):
        scale = scale * i / _gcd(scale, i)

    cdef Counters c
    c.instances = 0; c.greedy_bound = 0; c.cert_infeasible = 0
    c.cert_fallback = 0; c.randexp_bad = 0; c.randpoly_bad = 0
    c.feas_bad = 0; c.checksum = 0; c.have_violation = 0
    c.first_i0 = -1; c.first_i1 = -1; c.first_i2 = -1

    cdef long idxs[3]
    cdef long i0, i1, i2
    cdef long greedy_val = 0, opt_val = 0
    cdef int status

    with nogil:
        for i0 in range(start, cstop):
            idxs[0] = i0
            if n == 1:
                status = check_one(m, n, idxs, tk, tm0, tm1, tv0, tv1, tr0, tr1,
                                   scale, &greedy_val, &opt_val)
                _tally(&c, status, i0, -1, -1, greedy_val, opt_val)
            elif n == 2:
                for i1 in range(nd):
                    idxs[1] = i1
                    status = check_one(m, n, idxs, tk, tm0, tm1, tv0, tv1, tr0, tr1,
                                       scale, &greedy_val, &opt_val)
                    _tally(&c, status, i0, i1, -1, greedy_val, opt_val)
            else:
                for i1 in range(nd):
                    idxs[1] = i1
                    for i2 in range(nd):
                        idxs[2] = i2
                        status = check_one(m, n, idxs, tk, tm0, tm1, tv0, tv1, tr0, tr1,
                                           scale, &greedy_val, &opt_val)
                        _tally(&c, status, i0, i1, i2, greedy_val, opt_val)

    free(tk); free(tm0); free(tm1); free(tv0); free(tv1); free(tr0); free(tr1)

    first = None
    if c.have_violation:
        first = tuple(x for x in (c.first_i0, c.first_i1, c.first_i2) if x >= 0)
    return {
        "instances": c.instances,
        "greedy_bound_violations": c.greedy_bound,
        "cert_infeasible": c.cert_infeasible,
        "cert_fallback": c.cert_fallback,
        "randexp_violations": c.randexp_bad,
        "randpoly_violations": c.randpoly_bad,
        "feasibility_violations": c.feas_bad,
        "checksum": c.checksum,
        "first_violation": first,
    }


cdef inline void _tally(
    Counters* c, int status, long i0, long i1, long i2, long greedy_val, long opt_val
) nogil:
    c.instances += 1
    cdef long fallback = 1 if status & 4 else 0
    if status & 1:
        c.greedy_bound += 1
    if status & 2:
        c.cert_infeasible += 1
    c.cert_fallback += fallback
    if status & 8:
        c.randexp_bad += 1
    if status & 16:
        c.randpoly_bad += 1
    if status & 32:
        c.feas_bad += 1
    if (status & ~4) and not c.have_violation:
        c.have_violation = 1
        c.first_i0 = i0; c.first_i1 = i1; c.first_i2 = i2
    c.checksum = (c.checksum + greedy_val + 1000003 * opt_val + 7777 * fallback) % CHECKSUM_MOD
