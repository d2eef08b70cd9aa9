"""Pure-Python simulation kernel.

Mirrors the compiled kernel stage for stage: identical packed inputs,
identical per-run random streams (three uniform draws per stage: own action,
opponent action, absorption), identical outputs bit for bit.  Random numbers
are drawn in fixed-size chunks; a run consumes a prefix of its own stream,
so chunking never changes the values consumed.
"""

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

CHUNK = 384  # multiple of the three draws consumed per stage


def run_batch(
    seed, n_runs, t_max, first,
    p, z1, z2, mask1, mask2,
    cdf1, dur1, exp1, oos_t1, oos_m1, fq_t1, fq_b1, fq_k1, fq_th1, fq_ref1, init1,
    cdf2, dur2, exp2, oos_t2, oos_m2, fq_t2, fq_b2, fq_k2, fq_th2, fq_ref2, init2,
):
    n1, n2 = p.shape
    p_l = p.tolist()
    z1_l, z2_l = z1.tolist(), z2.tolist()
    m1_l, m2_l = mask1.tolist(), mask2.tolist()
    cdf1_l, cdf2_l = cdf1.tolist(), cdf2.tolist()
    dur1_l, dur2_l = dur1.tolist(), dur2.tolist()
    exp1_l, exp2_l = exp1.tolist(), exp2.tolist()
    ot1, ot2 = oos_t1.tolist(), oos_t2.tolist()
    om1, om2 = oos_m1.tolist(), oos_m2.tolist()
    ft1, ft2 = fq_t1.tolist(), fq_t2.tolist()
    fb1, fb2 = fq_b1.tolist(), fq_b2.tolist()
    fk1, fk2 = fq_k1.tolist(), fq_k2.tolist()
    fth1, fth2 = fq_th1.tolist(), fq_th2.tolist()
    fr1, fr2 = fq_ref1.tolist(), fq_ref2.tolist()

    out_stage = np.zeros(n_runs, dtype=np.int64)
    out_a1 = np.full(n_runs, -1, dtype=np.int64)
    out_a2 = np.full(n_runs, -1, dtype=np.int64)
    out_wsum1 = np.zeros(n_runs, dtype=np.float64)
    out_wsum2 = np.zeros(n_runs, dtype=np.float64)
    out_esum1 = np.zeros(n_runs, dtype=np.float64)
    out_esum2 = np.zeros(n_runs, dtype=np.float64)
    out_wmax1 = np.full(n_runs, -np.inf, dtype=np.float64)
    out_wmax2 = np.full(n_runs, -np.inf, dtype=np.float64)
    out_hit1 = np.zeros(n_runs, dtype=np.uint8)
    out_hit2 = np.zeros(n_runs, dtype=np.uint8)
    out_fire1 = np.zeros((n_runs, 3), dtype=np.int64)
    out_fire2 = np.zeros((n_runs, 3), dtype=np.int64)

    neg_inf = float("-inf")
    for run in range(n_runs):
        gen = Generator(PCG64(SeedSequence((seed, run))))
        buf = gen.random(CHUNK).tolist()
        pos = 0

        ph1, st1, bp1, bd1 = init1, 0, 0, 0
        c1 = [0] * n2
        ph2, st2, bp2, bd2 = init2, 0, 0, 0
        c2 = [0] * n1
        f1o = f1f = f1e = 0
        f2o = f2f = f2e = 0
        wsum1 = wsum2 = esum1 = esum2 = 0.0
        wmax1 = wmax2 = neg_inf
        hit1 = hit2 = 0

        for t in range(1, t_max + 1):
            if pos == CHUNK:
                buf = gen.random(CHUNK).tolist()
                pos = 0
            u1 = buf[pos]
            u2 = buf[pos + 1]
            u3 = buf[pos + 2]
            pos += 3

            row = cdf1_l[ph1]
            a1 = 0
            while a1 < n1 - 1 and u1 >= row[a1]:
                a1 += 1
            row = cdf2_l[ph2]
            a2 = 0
            while a2 < n2 - 1 and u2 >= row[a2]:
                a2 += 1

            if u3 < p_l[a1][a2]:
                out_stage[run] = t
                out_a1[run] = a1
                out_a2[run] = a2
                break

            if t >= first:
                v = z1_l[a1][a2]
                wsum1 += v
                if v > wmax1:
                    wmax1 = v
                w = z2_l[a1][a2]
                wsum2 += w
                if w > wmax2:
                    wmax2 = w
                if t % 2 == 0:
                    esum1 += v
                    esum2 += w
                if m1_l[a1][a2]:
                    hit1 = 1
                if m2_l[a1][a2]:
                    hit2 = 1

            # machine 1 observes a2; out-of-support, then frequency test,
            # then stage expiry, first hit moves the phase and ends the stage
            moved = False
            if ot1[ph1] >= 0 and om1[ph1][a2] == 0:
                ph1, st1, bp1, bd1 = ot1[ph1], 0, 0, 0
                c1 = [0] * n2
                f1o += 1
                moved = True
            if not moved and ft1[ph1] >= 0 and bd1 < fk1[ph1]:
                c1[a2] += 1
                bp1 += 1
                b = fb1[ph1]
                if bp1 == b:
                    ref = fr1[ph1]
                    mx = 0.0
                    for a in range(n2):
                        d = c1[a] / b - ref[a]
                        if d < 0.0:
                            d = -d
                        if d > mx:
                            mx = d
                    if mx > fth1[ph1]:
                        ph1, st1, bp1, bd1 = ft1[ph1], 0, 0, 0
                        c1 = [0] * n2
                        f1f += 1
                        moved = True
                    else:
                        bd1 += 1
                        bp1 = 0
                        c1 = [0] * n2
            if not moved:
                st1 += 1
                if dur1_l[ph1] >= 0 and st1 >= dur1_l[ph1]:
                    ph1, st1, bp1, bd1 = exp1_l[ph1], 0, 0, 0
                    c1 = [0] * n2
                    f1e += 1
                elif dur1_l[ph1] < 0:
                    st1 = 0

            # machine 2 observes a1
            moved = False
            if ot2[ph2] >= 0 and om2[ph2][a1] == 0:
                ph2, st2, bp2, bd2 = ot2[ph2], 0, 0, 0
                c2 = [0] * n1
                f2o += 1
                moved = True
            if not moved and ft2[ph2] >= 0 and bd2 < fk2[ph2]:
                c2[a1] += 1
                bp2 += 1
                b = fb2[ph2]
                if bp2 == b:
                    ref = fr2[ph2]
                    mx = 0.0
                    for a in range(n1):
                        d = c2[a] / b - ref[a]
                        if d < 0.0:
                            d = -d
                        if d > mx:
                            mx = d
                    if mx > fth2[ph2]:
                        ph2, st2, bp2, bd2 = ft2[ph2], 0, 0, 0
                        c2 = [0] * n1
                        f2f += 1
                        moved = True
                    else:
                        bd2 += 1
                        bp2 = 0
                        c2 = [0] * n1
            if not moved:
                st2 += 1
                if dur2_l[ph2] >= 0 and st2 >= dur2_l[ph2]:
                    ph2, st2, bp2, bd2 = exp2_l[ph2], 0, 0, 0
                    c2 = [0] * n1
                    f2e += 1
                elif dur2_l[ph2] < 0:
                    st2 = 0

        out_wsum1[run] = wsum1
        out_wsum2[run] = wsum2
        out_esum1[run] = esum1
        out_esum2[run] = esum2
        out_wmax1[run] = wmax1
        out_wmax2[run] = wmax2
        out_hit1[run] = hit1
        out_hit2[run] = hit2
        out_fire1[run, 0] = f1o
        out_fire1[run, 1] = f1f
        out_fire1[run, 2] = f1e
        out_fire2[run, 0] = f2o
        out_fire2[run, 1] = f2f
        out_fire2[run, 2] = f2e

    return {
        "stage": out_stage, "a1": out_a1, "a2": out_a2,
        "wsum1": out_wsum1, "wsum2": out_wsum2,
        "esum1": out_esum1, "esum2": out_esum2,
        "wmax1": out_wmax1, "wmax2": out_wmax2,
        "hit1": out_hit1, "hit2": out_hit2,
        "fires1": out_fire1, "fires2": out_fire2,
    }
