"""Compiled event loop for the count-level simulation.

The kernel consumes pre-drawn uniforms in blocks so that all randomness
still flows from one seeded PCG64 stream; the pure-Python simulator in
``sirsq.population`` consumes the identical stream and produces the exact
same event sequence for a given seed.  The block wrapper must carry any
unconsumed tail of a block into the next one to keep that correspondence.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_NEED_RANDOMS = 0
STATUS_DONE = 1
STATUS_MIGRATION_FULL = 2

ARRIVAL = 0
EXIT = 1


@njit(cache=True, nogil=True)
def run_gillespie_block(
    u,
    idx,
    t,
    s,
    i,
    r,
    lam,
    bk,
    gamma,
    alpha,
    p,
    i_floor,
    t_end,
    win_lo,
    win_hi,
    occ,
    overflow,
    rec_sum,
    rec_sum2,
    rec_n,
    grid_dt,
    grid_counts,
    grid_pos,
    mig_times,
    mig_kinds,
    mig_pos,
    record_migration,
):
    """Advance the chain until the uniform block runs out, the horizon is
    reached, or the migration buffer fills.  Dwell times inside
    [win_lo, win_hi) accumulate into ``occ`` (per count value) and
    ``overflow`` (counts beyond the occupancy table).  States at multiples
    of ``grid_dt`` are recorded into ``grid_counts`` when grid_dt > 0.
    """
    occ_size = occ.shape[1]
    n_u = u.shape[0]
    n_grid = grid_counts.shape[0]
    mig_cap = mig_times.shape[0]
    while True:
        if idx + 2 > n_u:
            return idx, t, s, i, r, grid_pos, mig_pos, STATUS_NEED_RANDOMS
        if record_migration and mig_pos >= mig_cap:
            return idx, t, s, i, r, grid_pos, mig_pos, STATUS_MIGRATION_FULL
        inf = s * i * bk
        rec = i * gamma if i > i_floor else 0.0
        ralpha = r * alpha
        total = lam + inf + rec + ralpha
        if total <= 0.0:
            t_stop = t_end
            done = True
        else:
            u1 = u[idx]
            idx += 1
            wait = -np.log1p(-u1) / total
            t_stop = t + wait
            done = t_stop > t_end
        seg_hi = min(t_end if done else t_stop, win_hi)
        seg_lo = max(t, win_lo)
        if seg_hi > seg_lo:
            dt = seg_hi - seg_lo
            if s < occ_size:
                occ[0, s] += dt
            else:
                overflow[0] += dt
            if i < occ_size:
                occ[1, i] += dt
            else:
                overflow[1] += dt
            if r < occ_size:
                occ[2, r] += dt
            else:
                overflow[2] += dt
            rec_sum[0] += s
            rec_sum[1] += i
            rec_sum[2] += r
            rec_sum2[0] += s * s
            rec_sum2[1] += i * i
            rec_sum2[2] += r * r
            rec_n[0] += 1
            rec_n[1] += 1
            rec_n[2] += 1
        if grid_dt > 0.0:
            limit = t_end if done else t_stop
            while grid_pos < n_grid and grid_pos * grid_dt < limit:
                grid_counts[grid_pos, 0] = s
                grid_counts[grid_pos, 1] = i
                grid_counts[grid_pos, 2] = r
                grid_pos += 1
        if done:
            if grid_dt > 0.0:
                while grid_pos < n_grid and grid_pos * grid_dt <= t_end:
                    grid_counts[grid_pos, 0] = s
                    grid_counts[grid_pos, 1] = i
                    grid_counts[grid_pos, 2] = r
                    grid_pos += 1
            return idx, t, s, i, r, grid_pos, mig_pos, STATUS_DONE
        t = t_stop
        x = u[idx] * total
        idx += 1
        c = lam
        if x < c:
            s += 1
            if record_migration:
                mig_times[mig_pos] = t
                mig_kinds[mig_pos] = ARRIVAL
                mig_pos += 1
        else:
            c += inf
            if x < c:
                s -= 1
                i += 1
            else:
                c += rec
                if x < c:
                    i -= 1
                    r += 1
                else:
                    c += ralpha * p
                    if x < c:
                        r -= 1
                        s += 1
                    else:
                        r -= 1
                        if record_migration:
                            mig_times[mig_pos] = t
                            mig_kinds[mig_pos] = EXIT
                            mig_pos += 1
