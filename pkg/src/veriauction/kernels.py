"""Pure-Python verification kernel for the exhaustive family.

Per instance it recomputes, in plain integer arithmetic: the greedy run,
the exhaustive optimum, the scaled dual certificate (raising a counter
instead of an exception on the closed-form universe fallback), the
rank-restricted optima bound and the cardinality-capped coin bound.  The
compiled backend in _kernels.pyx implements the identical semantics; the
checksum field lets tests prove the two agree cell by cell.
"""

from __future__ import annotations

import math

from .family import declaration_table, table_size

CHECKSUM_MOD = (1 << 61) - 1

COUNTER_KEYS = (
    "instances",
    "greedy_bound_violations",
    "cert_infeasible",
    "cert_fallback",
    "randexp_violations",
    "randpoly_violations",
    "feasibility_violations",
)


def _lcm_upto(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out = out * i // math.gcd(out, i)
    return out


def _opt_value(sets_by_bidder) -> int:
    """Max total value of pairwise-disjoint picks, one per bidder at most."""
    best = 0
    n = len(sets_by_bidder)

    def rec(i: int, used: int, total: int) -> None:
        nonlocal best
        if i == n:
            if total > best:
                best = total
            return
        for mask, val in sets_by_bidder[i]:
            if not mask & used:
                rec(i + 1, used | mask, total + val)
        rec(i + 1, used, total)

    rec(0, 0, 0)
    return best


def _greedy(bids):
    """bids: list of (val, bidder, didx, mask) in bidder/demand order.
    Returns (welfare, accepted list, records) with records carrying the
    conflict flag needed by the certificate."""
    order = sorted(bids, key=lambda t: (-t[0], t[1], t[2]))
    taken = 0
    served = 0
    welfare = 0
    accepted = []  # (bidder, mask, val) in acceptance order
    rejected_conflicts = []  # (mask, val, bidder)
    for val, bidder, didx, mask in order:
        if not (served >> bidder) & 1 and not mask & taken:
            taken |= mask
            served |= 1 << bidder
            welfare += val
            accepted.append((bidder, mask, val))
        elif mask & taken:
            rejected_conflicts.append((mask, val, bidder))
    return welfare, accepted, rejected_conflicts


def _certificate_status(m, n, d, bids, greedy_welfare, accepted, rejected_conflicts):
    """0 = witness dual feasible, 1 = universe fallback used,
    2 = infeasible (a bug)."""
    d_prime = min(d, m - 1)
    if m == 1:
        return 0

    # kept witnesses: earliest accepted conflicting set, lowest good inside
    sat = 0
    for mask, val, bidder in rejected_conflicts:
        for abidder, amask, aval in accepted:
            inter = amask & mask
            if inter:
                sat |= inter & -inter
                break

    scale = _lcm_upto(m)  # all witness-share denominators divide lcm(1..m)
    y = [0] * m  # scaled by `scale`
    z = [0] * n
    for bidder, amask, aval in accepted:
        z[bidder] = aval
        spread = amask & sat
        if spread == 0:
            spread = amask
        den = bin(spread).count("1")
        share = aval * (scale // den)
        mm = spread
        while mm:
            g = (mm & -mm).bit_length() - 1
            y[g] = share
            mm &= mm - 1

    feasible = True
    for val, bidder, didx, mask in bids:
        cover = 0
        mm = mask
        while mm:
            g = (mm & -mm).bit_length() - 1
            cover += y[g]
            mm &= mm - 1
        if z[bidder] * scale + d_prime * cover < val * scale:
            feasible = False
            break
    if feasible:
        return 0

    full = (1 << m) - 1
    for bidder, amask, aval in accepted:
        if amask == full:
            top = aval
            # uniform dual y_e = top/(m-1), z = 0 covers every bid <= top
            if all(val <= top for val, _, _, _ in bids):
                return 1
            return 2
    return 2


def check_instance(m: int, bids, ks) -> dict:
    """All family checks for one instance.

    bids: list of (val, bidder, didx, mask); ks: demands per bidder.
    Returns counters for this instance plus greedy/opt for checksums.
    """
    n = len(ks)
    d = max(bin(mask).count("1") for _, _, _, mask in bids)

    greedy_welfare, accepted, rejected = _greedy(bids)

    # feasibility of the greedy output (defensive; holds by construction)
    union = 0
    feas_bad = 0
    for _, mask, _ in accepted:
        if union & mask:
            feas_bad = 1
        union |= mask

    sets_by_bidder = [[] for _ in range(n)]
    for val, bidder, didx, mask in bids:
        sets_by_bidder[bidder].append((mask, val))
    opt = _opt_value(sets_by_bidder)

    d_prime = min(d, m - 1)
    greedy_bad = 1 if (d_prime + 1) * greedy_welfare < opt else 0

    cert = _certificate_status(m, n, d, bids, greedy_welfare, accepted, rejected)

    # rank-restricted optima: sum over ranks >= opt
    kmax = max(ks)
    rank_sum = 0
    for ell in range(kmax):
        per = []
        for i in range(n):
            entries = [(val, j, mask) for j, (mask, val) in enumerate(sets_by_bidder[i])]
            entries.sort(key=lambda t: (-t[0], t[1]))
            if ell < len(entries):
                per.append([(entries[ell][2], entries[ell][0])])
            else:
                per.append([])
        rank_sum += _opt_value(per)
    randexp_bad = 1 if rank_sum < opt else 0

    # cardinality-capped coin bound: (vmax_bid + greedy_small) * (sqrt(m)+1) >= opt
    s = math.isqrt(m)
    small_bids = [t for t in bids if bin(t[3]).count("1") <= s]
    g_small, _, _ = _greedy(small_bids)
    v_top = max(val for val, _, _, _ in bids)
    t_val = v_top + g_small
    gap = opt - t_val
    randpoly_bad = 0 if (gap <= 0 or t_val * t_val * m >= gap * gap) else 1

    return {
        "greedy": greedy_welfare,
        "opt": opt,
        "greedy_bound_violations": greedy_bad,
        "cert_infeasible": 1 if cert == 2 else 0,
        "cert_fallback": 1 if cert == 1 else 0,
        "randexp_violations": randexp_bad,
        "randpoly_violations": randpoly_bad,
        "feasibility_violations": feas_bad,
    }


def run_cell(m: int, n: int, vmax: int = 3, start: int = 0, stop: int | None = None) -> dict:
    """Scan instances of the (m, n, vmax) cell whose first-bidder
    declaration index lies in [start, stop)."""
    table = declaration_table(m, vmax)
    nd = table_size(m, vmax)
    stop = nd if stop is None else stop
    k_arr = table["k"]
    m0, m1 = table["mask0"], table["mask1"]
    v0, v1 = table["val0"], table["val1"]

    counters = {key: 0 for key in COUNTER_KEYS}
    checksum = 0
    first_violation = None

    def decl_bids(idx, bidder):
        if k_arr[idx] == 1:
            return [(v0[idx], bidder, 0, m0[idx])]
        return [(v0[idx], bidder, 0, m0[idx]), (v1[idx], bidder, 1, m1[idx])]

    indices = [0] * n

    def scan(level: int):
        nonlocal checksum, first_violation
        if level == n:
            bids = []
            ks = []
            for bidder in range(n):
                idx = indices[bidder]
                bids.extend(decl_bids(idx, bidder))
                ks.append(k_arr[idx])
            res = check_instance(m, bids, ks)
            counters["instances"] += 1
            bad = 0
            for key in COUNTER_KEYS[1:]:
                counters[key] += res[key]
                if key != "cert_fallback":
                    bad |= res[key]
            if bad and first_violation is None:
                first_violation = tuple(indices)
            checksum = (
                checksum + res["greedy"] + 1000003 * res["opt"] + 7777 * res["cert_fallback"]
            ) % CHECKSUM_MOD
            return
        lo, hi = (start, stop) if level == 0 else (0, nd)
        for idx in range(lo, hi):
            indices[level] = idx
            scan(level + 1)

    scan(0)
    counters["checksum"] = checksum
    counters["first_violation"] = first_violation
    return counters
