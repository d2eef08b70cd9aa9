# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled simulation kernel.

Twin of the pure-Python kernel: same packed inputs, same per-run random
streams (three uniform draws per stage), same outputs bit for bit.  Draws
come straight from the bit generator's next_double, which is also what
Generator.random consumes, so both kernels read the same values.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY
from libc.stdint cimport uint32_t, uint64_t

from numpy.random import PCG64, SeedSequence

cdef extern from "numpy/random/bitgen.h":
    ctypedef struct bitgen_t:
        void *state
        uint64_t (*next_uint64)(void *st) nogil
        uint32_t (*next_uint32)(void *st) nogil
        double (*next_double)(void *st) nogil
        uint64_t (*next_raw)(void *st) nogil


cdef inline void enter_phase(long* ph, long* st, long* bp, long* bd,
                             long[::1] counts, long target):
    cdef Py_ssize_t a
    ph[0] = target
    st[0] = 0
    bp[0] = 0
    bd[0] = 0
    for a in range(counts.shape[0]):
        counts[a] = 0


cdef inline int step_machine(long* ph, long* st, long* bp, long* bd,
                             long[::1] counts,
                             const long[::1] dur, const long[::1] exp_t,
                             const long[::1] oos_t, const unsigned char[:, ::1] oos_m,
                             const long[::1] fq_t, const long[::1] fq_b, const long[::1] fq_k,
                             const double[::1] fq_th, const double[:, ::1] fq_ref,
                             long observed):
    # out-of-support, then frequency test, then stage expiry; the first
    # trigger that fires moves the phase and ends the stage
    cdef long p = ph[0]
    cdef long b
    cdef Py_ssize_t a, n
    cdef double mx, d
    if oos_t[p] >= 0 and oos_m[p, observed] == 0:
        enter_phase(ph, st, bp, bd, counts, oos_t[p])
        return 1
    if fq_t[p] >= 0 and bd[0] < fq_k[p]:
        counts[observed] += 1
        bp[0] += 1
        b = fq_b[p]
        if bp[0] == b:
            n = counts.shape[0]
            mx = 0.0
            for a in range(n):
                d = (<double> counts[a]) / (<double> b) - fq_ref[p, a]
                if d < 0.0:
                    d = -d
                if d > mx:
                    mx = d
            if mx > fq_th[p]:
                enter_phase(ph, st, bp, bd, counts, fq_t[p])
                return 2
            bd[0] += 1
            bp[0] = 0
            for a in range(n):
                counts[a] = 0
    st[0] += 1
    if dur[p] >= 0 and st[0] >= dur[p]:
        enter_phase(ph, st, bp, bd, counts, exp_t[p])
        return 3
    if dur[p] < 0:
        st[0] = 0
    return 0


def run_batch(
    long seed, long n_runs, long t_max, long first,
    const double[:, ::1] p, const double[:, ::1] z1, const double[:, ::1] z2,
    const unsigned char[:, ::1] mask1, const unsigned char[:, ::1] mask2,
    const double[:, ::1] cdf1, const long[::1] dur1, const long[::1] exp1,
    const long[::1] oos_t1, const unsigned char[:, ::1] oos_m1,
    const long[::1] fq_t1, const long[::1] fq_b1, const long[::1] fq_k1,
    const double[::1] fq_th1, const double[:, ::1] fq_ref1, long init1,
    const double[:, ::1] cdf2, const long[::1] dur2, const long[::1] exp2,
    const long[::1] oos_t2, const unsigned char[:, ::1] oos_m2,
    const long[::1] fq_t2, const long[::1] fq_b2, const long[::1] fq_k2,
    const double[::1] fq_th2, const double[:, ::1] fq_ref2, long init2,
):
    cdef Py_ssize_t n1 = p.shape[0]
    cdef Py_ssize_t n2 = p.shape[1]

    out_stage_arr = np.zeros(n_runs, dtype=np.int64)
    out_a1_arr = np.full(n_runs, -1, dtype=np.int64)
    out_a2_arr = np.full(n_runs, -1, dtype=np.int64)
    out_wsum1_arr = np.zeros(n_runs, dtype=np.float64)
    out_wsum2_arr = np.zeros(n_runs, dtype=np.float64)
    out_esum1_arr = np.zeros(n_runs, dtype=np.float64)
    out_esum2_arr = np.zeros(n_runs, dtype=np.float64)
    out_wmax1_arr = np.full(n_runs, -np.inf, dtype=np.float64)
    out_wmax2_arr = np.full(n_runs, -np.inf, dtype=np.float64)
    out_hit1_arr = np.zeros(n_runs, dtype=np.uint8)
    out_hit2_arr = np.zeros(n_runs, dtype=np.uint8)
    out_fire1_arr = np.zeros((n_runs, 3), dtype=np.int64)
    out_fire2_arr = np.zeros((n_runs, 3), dtype=np.int64)

    cdef long[::1] out_stage = out_stage_arr
    cdef long[::1] out_a1 = out_a1_arr
    cdef long[::1] out_a2 = out_a2_arr
    cdef double[::1] out_wsum1 = out_wsum1_arr
    cdef double[::1] out_wsum2 = out_wsum2_arr
    cdef double[::1] out_esum1 = out_esum1_arr
    cdef double[::1] out_esum2 = out_esum2_arr
    cdef double[::1] out_wmax1 = out_wmax1_arr
    cdef double[::1] out_wmax2 = out_wmax2_arr
    cdef unsigned char[::1] out_hit1 = out_hit1_arr
    cdef unsigned char[::1] out_hit2 = out_hit2_arr
    cdef long[:, ::1] out_fire1 = out_fire1_arr
    cdef long[:, ::1] out_fire2 = out_fire2_arr

    counts1_arr = np.zeros(n2, dtype=np.int64)
    counts2_arr = np.zeros(n1, dtype=np.int64)
    cdef long[::1] c1 = counts1_arr
    cdef long[::1] c2 = counts2_arr

    cdef bitgen_t *brng
    cdef long run, t, a1, a2, fired
    cdef long ph1, st1, bp1, bd1, ph2, st2, bp2, bd2
    cdef double u1, u2, u3, v, w
    cdef double wsum1, wsum2, esum1, esum2, wmax1, wmax2
    cdef unsigned char hit1, hit2
    cdef Py_ssize_t a

    for run in range(n_runs):
        bg = PCG64(SeedSequence((seed, run)))
        capsule = bg.capsule
        brng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

        ph1 = init1; st1 = 0; bp1 = 0; bd1 = 0
        ph2 = init2; st2 = 0; bp2 = 0; bd2 = 0
        for a in range(n2):
            c1[a] = 0
        for a in range(n1):
            c2[a] = 0
        wsum1 = 0.0; wsum2 = 0.0; esum1 = 0.0; esum2 = 0.0
        wmax1 = -INFINITY; wmax2 = -INFINITY
        hit1 = 0; hit2 = 0

        for t in range(1, t_max + 1):
            u1 = brng.next_double(brng.state)
            u2 = brng.next_double(brng.state)
            u3 = brng.next_double(brng.state)

            a1 = 0
            while a1 < n1 - 1 and u1 >= cdf1[ph1, a1]:
                a1 += 1
            a2 = 0
            while a2 < n2 - 1 and u2 >= cdf2[ph2, a2]:
                a2 += 1

            if u3 < p[a1, a2]:
                out_stage[run] = t
                out_a1[run] = a1
                out_a2[run] = a2
                break

            if t >= first:
                v = z1[a1, a2]
                wsum1 += v
                if v > wmax1:
                    wmax1 = v
                w = z2[a1, a2]
                wsum2 += w
                if w > wmax2:
                    wmax2 = w
                if t % 2 == 0:
                    esum1 += v
                    esum2 += w
                if mask1[a1, a2]:
                    hit1 = 1
                if mask2[a1, a2]:
                    hit2 = 1

            fired = step_machine(&ph1, &st1, &bp1, &bd1, c1,
                                 dur1, exp1, oos_t1, oos_m1,
                                 fq_t1, fq_b1, fq_k1, fq_th1, fq_ref1, a2)
            if fired:
                out_fire1[run, fired - 1] += 1
            fired = step_machine(&ph2, &st2, &bp2, &bd2, c2,
                                 dur2, exp2, oos_t2, oos_m2,
                                 fq_t2, fq_b2, fq_k2, fq_th2, fq_ref2, a1)
            if fired:
                out_fire2[run, fired - 1] += 1

        out_wsum1[run] = wsum1
        out_wsum2[run] = wsum2
        out_esum1[run] = esum1
        out_esum2[run] = esum2
        out_wmax1[run] = wmax1
        out_wmax2[run] = wmax2
        out_hit1[run] = hit1
        out_hit2[run] = hit2

    return {
        "stage": out_stage_arr, "a1": out_a1_arr, "a2": out_a2_arr,
        "wsum1": out_wsum1_arr, "wsum2": out_wsum2_arr,
        "esum1": out_esum1_arr, "esum2": out_esum2_arr,
        "wmax1": out_wmax1_arr, "wmax2": out_wmax2_arr,
        "hit1": out_hit1_arr, "hit2": out_hit2_arr,
        "fires1": out_fire1_arr, "fires2": out_fire2_arr,
    }
