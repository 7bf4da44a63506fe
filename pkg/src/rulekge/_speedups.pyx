# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernel.

Implements the same epoch contract as ``_engine_py`` on the flat encoded
arrays: shuffle, one uniform corruption per sample with membership
rejection, hinge-gated SGD updates in place.  The integer RNG (splitmix64)
matches the Python implementation bit for bit, so both backends draw the
same shuffles, sides, and candidate entities for a given seed.

``threads > 1`` runs lock-free shards over shared parameter tables; lost
updates are tolerated and results are only statistically reproducible.
"""

from libc.stdlib cimport free, malloc
from libc.math cimport fabs, sqrt

from cython.parallel cimport prange

import numpy as np


cdef unsigned long long _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef int MAX_REDRAWS = 100

KERNEL_NAME = "compiled"


cdef inline unsigned long long _next_u64(unsigned long long* state) noexcept nogil:
    cdef unsigned long long z
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline long long _rand_below(unsigned long long* state, long long n) noexcept nogil:
    return <long long>(_next_u64(state) % <unsigned long long>n)


cdef inline bint _key_present(const long long* keys, long long n, long long key) noexcept nogil:
    cdef long long lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo < n and keys[lo] == key


# ---------------------------------------------------------------------------
# parameter tables and per-thread scratch

cdef struct Tables:
    int d
    int mk          # 0 transe, 1 transh, 2 transr
    int norm        # 0 l1, 1 l2
    double* ent
    double* rel
    double* normals
    double* mats
    double* cmats
    const long long* triple_keys
    long long n_triple_keys
    const long long* inst1
    long long n_inst1
    const long long* inst2
    long long n_inst2
    const long long* inst3
    long long n_inst3
    long long n_ent
    long long n_rel


cdef struct Scratch:
    double* rA
    double* rB
    double* rC
    double* tmp
    double* g
    double* g2
    double* g3
    # accumulator slots
    int n_e
    long long eids[8]
    double* eacc
    int n_r
    long long rids[4]
    double* racc
    int n_w
    long long wids[4]
    double* wacc
    int n_m
    long long mids[4]
    double* macc
    int c_on
    long long cid
    double* cacc
    long long row[9]
    double* block


cdef bint _scratch_init(Scratch* s, int d) noexcept nogil:
    cdef long long need = (7 + 8 + 4 + 4) * d + (4 + 1) * d * d
    s.block = <double*> malloc(need * sizeof(double))
    if s.block == NULL:
        return 0
    cdef double* p = s.block
    s.rA = p; p += d
    s.rB = p; p += d
    s.rC = p; p += d
    s.tmp = p; p += d
    s.g = p; p += d
    s.g2 = p; p += d
    s.g3 = p; p += d
    s.eacc = p; p += 8 * d
    s.racc = p; p += 4 * d
    s.wacc = p; p += 4 * d
    s.macc = p; p += 4 * d * d
    s.cacc = p
    return 1


cdef void _scratch_reset(Scratch* s) noexcept nogil:
    s.n_e = 0
    s.n_r = 0
    s.n_w = 0
    s.n_m = 0
    s.c_on = 0


cdef double* _slot(long long* ids, int* count, double* storage, long long stride,
                   long long idx) noexcept nogil:
    cdef int k
    cdef long long i
    cdef double* p
    for k in range(count[0]):
        if ids[k] == idx:
            return storage + k * stride
    k = count[0]
    ids[k] = idx
    count[0] = k + 1
    p = storage + k * stride
    for i in range(stride):
        p[i] = 0.0
    return p


# ---------------------------------------------------------------------------
# scores

cdef void _residual(Tables* tb, long long h, long long r, long long t,
                    double* out) noexcept nogil:
    cdef int d = tb.d
    cdef double* ev = tb.ent + h * d
    cdef double* tv = tb.ent + t * d
    cdef double* rv = tb.rel + r * d
    cdef double* w
    cdef double* M
    cdef double wh = 0.0, wt = 0.0, eh, et
    cdef int i, j
    if tb.mk == 0:
        for i in range(d):
            out[i] = (ev[i] + rv[i]) - tv[i]
    elif tb.mk == 1:
        w = tb.normals + r * d
        for i in range(d):
            wh += w[i] * ev[i]
            wt += w[i] * tv[i]
        for i in range(d):
            out[i] = ((ev[i] - wh * w[i]) + rv[i]) - (tv[i] - wt * w[i])
    else:
        M = tb.mats + r * d * d
        for j in range(d):
            out[j] = rv[j]
        for i in range(d):
            eh = ev[i] - tv[i]
            for j in range(d):
                out[j] += eh * M[i * d + j]


cdef void _gate(Tables* tb, long long h, long long cid, double* out) noexcept nogil:
    # out = entity_vec(h) @ concept_matrix(cid)
    cdef int d = tb.d
    cdef double* hv = tb.ent + h * d
    cdef double* C = tb.cmats + cid * d * d
    cdef double c
    cdef int i, j
    for j in range(d):
        out[j] = 0.0
    for i in range(d):
        c = hv[i]
        for j in range(d):
            out[j] += c * C[i * d + j]


cdef double _norm_value(const double* v, int d, int norm) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    if norm == 0:
        for i in range(d):
            s += fabs(v[i])
        return s
    for i in range(d):
        s += v[i] * v[i]
    return sqrt(s)


cdef void _norm_grad(const double* v, int d, int norm, double sign,
                     double* out) noexcept nogil:
    cdef double n = 0.0
    cdef int i
    if norm == 0:
        for i in range(d):
            out[i] = sign if v[i] > 0 else (-sign if v[i] < 0 else 0.0)
        return
    for i in range(d):
        n += v[i] * v[i]
    n = sqrt(n)
    if n == 0.0:
        for i in range(d):
            out[i] = 0.0
        return
    for i in range(d):
        out[i] = sign * v[i] / n


cdef double _score(Tables* tb, const long long* row, Scratch* s) noexcept nogil:
    cdef int d = tb.d
    cdef int kind = <int> row[0]
    cdef int i
    if kind == 0:
        _residual(tb, row[2], row[3], row[4], s.rA)
        return _norm_value(s.rA, d, tb.norm)
    if kind == 1:
        _residual(tb, row[2], row[3], row[4], s.rA)  # body
        _residual(tb, row[2], row[5], row[4], s.rB)  # head
        _gate(tb, row[2], row[8], s.tmp)
        for i in range(d):
            s.rC[i] = s.tmp[i] * s.rA[i] - s.rB[i]
        return _norm_value(s.rC, d, tb.norm)
    if kind == 2:
        _residual(tb, row[2], row[3], row[4], s.rA)
        _residual(tb, row[4], row[5], row[6], s.rB)
        _residual(tb, row[2], row[7], row[6], s.rC)
        for i in range(d):
            s.tmp[i] = s.rA[i] * s.rB[i] - s.rC[i]
        return _norm_value(s.tmp, d, tb.norm)
    _residual(tb, row[2], row[3], row[4], s.rA)  # forward
    _residual(tb, row[4], row[5], row[2], s.rB)  # backward
    for i in range(d):
        s.rC[i] = s.rA[i] - s.rB[i]
        s.tmp[i] = s.rC[i] * s.rC[i]
    return _norm_value(s.tmp, d, tb.norm)


# ---------------------------------------------------------------------------
# gradients

cdef void _bp_proj(Tables* tb, Scratch* s, long long e_id, long long r_id,
                   const double* g, double mult) noexcept nogil:
    # push mult * g (gradient w.r.t. the projected entity) onto raw params
    cdef int d = tb.d
    cdef double* acc = _slot(s.eids, &s.n_e, s.eacc, d, e_id)
    cdef double* ev
    cdef double* w
    cdef double* M
    cdef double* wa
    cdef double* ma
    cdef double wg = 0.0, we = 0.0, c
    cdef int i, j
    if tb.mk == 0:
        for i in range(d):
            acc[i] += mult * g[i]
    elif tb.mk == 1:
        w = tb.normals + r_id * d
        ev = tb.ent + e_id * d
        for i in range(d):
            wg += w[i] * g[i]
            we += w[i] * ev[i]
        for i in range(d):
            acc[i] += mult * (g[i] - wg * w[i])
        wa = _slot(s.wids, &s.n_w, s.wacc, d, r_id)
        for i in range(d):
            wa[i] += mult * (-wg * ev[i] - we * g[i])
    else:
        M = tb.mats + r_id * d * d
        ev = tb.ent + e_id * d
        for i in range(d):
            c = 0.0
            for j in range(d):
                c += M[i * d + j] * g[j]
            acc[i] += mult * c
        ma = _slot(s.mids, &s.n_m, s.macc, <long long> d * d, r_id)
        for i in range(d):
            c = mult * ev[i]
            for j in range(d):
                ma[i * d + j] += c * g[j]


cdef void _acc_rel(Tables* tb, Scratch* s, long long r_id, const double* g,
                   double mult) noexcept nogil:
    cdef double* acc = _slot(s.rids, &s.n_r, s.racc, tb.d, r_id)
    cdef int i
    for i in range(tb.d):
        acc[i] += mult * g[i]


cdef void _accum_sample(Tables* tb, Scratch* s, const long long* row,
                        double sign) noexcept nogil:
    cdef int d = tb.d
    cdef int kind = <int> row[0]
    cdef double* hv
    cdef double* C
    cdef double c
    cdef double* acc
    cdef int i, j

    if kind == 0:
        _residual(tb, row[2], row[3], row[4], s.rA)
        _norm_grad(s.rA, d, tb.norm, sign, s.g)
        _bp_proj(tb, s, row[2], row[3], s.g, 1.0)
        _bp_proj(tb, s, row[4], row[3], s.g, -1.0)
        _acc_rel(tb, s, row[3], s.g, 1.0)
        return

    if kind == 1:
        _residual(tb, row[2], row[3], row[4], s.rA)  # body
        _residual(tb, row[2], row[5], row[4], s.rB)  # head
        _gate(tb, row[2], row[8], s.tmp)             # p
        for i in range(d):
            s.rC[i] = s.tmp[i] * s.rA[i] - s.rB[i]
        _norm_grad(s.rC, d, tb.norm, sign, s.g)
        for i in range(d):
            s.g2[i] = s.g[i] * s.tmp[i]              # body gradient
        _bp_proj(tb, s, row[2], row[3], s.g2, 1.0)
        _bp_proj(tb, s, row[4], row[3], s.g2, -1.0)
        _bp_proj(tb, s, row[2], row[5], s.g, -1.0)
        _bp_proj(tb, s, row[4], row[5], s.g, 1.0)
        _acc_rel(tb, s, row[3], s.g2, 1.0)
        _acc_rel(tb, s, row[5], s.g, -1.0)
        for i in range(d):
            s.g3[i] = s.g[i] * s.rA[i]               # gate gradient
        C = tb.cmats + row[8] * d * d
        acc = _slot(s.eids, &s.n_e, s.eacc, d, row[2])
        for i in range(d):
            c = 0.0
            for j in range(d):
                c += C[i * d + j] * s.g3[j]
            acc[i] += c
        hv = tb.ent + row[2] * d
        if not s.c_on:
            s.c_on = 1
            s.cid = row[8]
            for i in range(d * d):
                s.cacc[i] = 0.0
        for i in range(d):
            c = hv[i]
            for j in range(d):
                s.cacc[i * d + j] += c * s.g3[j]
        return

    if kind == 2:
        _residual(tb, row[2], row[3], row[4], s.rA)
        _residual(tb, row[4], row[5], row[6], s.rB)
        _residual(tb, row[2], row[7], row[6], s.rC)
        for i in range(d):
            s.tmp[i] = s.rA[i] * s.rB[i] - s.rC[i]
        _norm_grad(s.tmp, d, tb.norm, sign, s.g)
        for i in range(d):
            s.g2[i] = s.g[i] * s.rB[i]
            s.g3[i] = s.g[i] * s.rA[i]
        _bp_proj(tb, s, row[2], row[3], s.g2, 1.0)
        _bp_proj(tb, s, row[4], row[3], s.g2, -1.0)
        _bp_proj(tb, s, row[4], row[5], s.g3, 1.0)
        _bp_proj(tb, s, row[6], row[5], s.g3, -1.0)
        _bp_proj(tb, s, row[2], row[7], s.g, -1.0)
        _bp_proj(tb, s, row[6], row[7], s.g, 1.0)
        _acc_rel(tb, s, row[3], s.g2, 1.0)
        _acc_rel(tb, s, row[5], s.g3, 1.0)
        _acc_rel(tb, s, row[7], s.g, -1.0)
        return

    _residual(tb, row[2], row[3], row[4], s.rA)  # forward
    _residual(tb, row[4], row[5], row[2], s.rB)  # backward
    for i in range(d):
        s.rC[i] = s.rA[i] - s.rB[i]
        s.tmp[i] = s.rC[i] * s.rC[i]
    _norm_grad(s.tmp, d, tb.norm, sign, s.g)
    for i in range(d):
        s.g2[i] = 2.0 * s.g[i] * s.rC[i]
    _bp_proj(tb, s, row[2], row[3], s.g2, 1.0)
    _bp_proj(tb, s, row[4], row[3], s.g2, -1.0)
    _bp_proj(tb, s, row[4], row[5], s.g2, -1.0)
    _bp_proj(tb, s, row[2], row[5], s.g2, 1.0)
    _acc_rel(tb, s, row[3], s.g2, 1.0)
    _acc_rel(tb, s, row[5], s.g2, -1.0)


cdef void _apply_updates(Tables* tb, Scratch* s, double lr) noexcept nogil:
    cdef int d = tb.d
    cdef int k
    cdef long long i
    cdef double* dst
    cdef double n
    for k in range(s.n_e):
        dst = tb.ent + s.eids[k] * d
        for i in range(d):
            dst[i] -= lr * s.eacc[k * d + i]
    for k in range(s.n_r):
        dst = tb.rel + s.rids[k] * d
        for i in range(d):
            dst[i] -= lr * s.racc[k * d + i]
    for k in range(s.n_m):
        dst = tb.mats + s.mids[k] * d * d
        for i in range(d * d):
            dst[i] -= lr * s.macc[k * d * d + i]
    if s.c_on:
        dst = tb.cmats + s.cid * d * d
        for i in range(d * d):
            dst[i] -= lr * s.cacc[i]
    for k in range(s.n_w):
        dst = tb.normals + s.wids[k] * d
        for i in range(d):
            dst[i] -= lr * s.wacc[k * d + i]
    if s.n_w:
        # hyperplane normals stay unit-length after every update
        for k in range(s.n_w):
            dst = tb.normals + s.wids[k] * d
            n = 0.0
            for i in range(d):
                n += dst[i] * dst[i]
            n = sqrt(n)
            for i in range(d):
                dst[i] /= n


# ---------------------------------------------------------------------------
# negative sampling

cdef bint _corruption_valid(Tables* tb, const long long* row, int side,
                            long long cand) noexcept nogil:
    cdef int kind = <int> row[0]
    cdef long long n_ent = tb.n_ent
    cdef long long n_rel = tb.n_rel
    cdef long long a, b, e1, e2, e3, key
    cdef const long long* inst
    cdef long long n_inst

    if kind == 0:
        if side == 0:
            return not _tri(tb, cand, row[3], row[4])
        return not _tri(tb, row[2], row[3], cand)

    if kind == 1:
        if side == 0:
            if _tri(tb, cand, row[3], row[4]) or _tri(tb, cand, row[5], row[4]):
                return 0
            a = cand; b = row[4]
        else:
            if _tri(tb, row[2], row[3], cand) or _tri(tb, row[2], row[5], cand):
                return 0
            a = row[2]; b = cand
        key = (row[1] * n_ent + a) * n_ent + b
        return not _key_present(tb.inst1, tb.n_inst1, key)

    if kind == 2:
        if side == 0:
            if _tri(tb, cand, row[3], row[4]) or _tri(tb, cand, row[7], row[6]):
                return 0
            e1 = cand; e2 = row[4]; e3 = row[6]
        else:
            if _tri(tb, row[4], row[5], cand) or _tri(tb, row[2], row[7], cand):
                return 0
            e1 = row[2]; e2 = row[4]; e3 = cand
        key = ((row[1] * n_ent + e1) * n_ent + e2) * n_ent + e3
        return not _key_present(tb.inst2, tb.n_inst2, key)

    if side == 0:
        if _tri(tb, cand, row[3], row[4]) or _tri(tb, row[4], row[5], cand):
            return 0
        a = cand; b = row[4]
    else:
        if _tri(tb, row[2], row[3], cand) or _tri(tb, cand, row[5], row[2]):
            return 0
        a = row[2]; b = cand
    if row[3] == row[5] and a > b:
        a, b = b, a
    key = (row[1] * n_ent + a) * n_ent + b
    return not _key_present(tb.inst3, tb.n_inst3, key)


cdef inline bint _tri(Tables* tb, long long h, long long r, long long t) noexcept nogil:
    cdef long long key = (h * tb.n_rel + r) * tb.n_ent + t
    return _key_present(tb.triple_keys, tb.n_triple_keys, key)


cdef void _draw_negative(Tables* tb, const long long* row,
                         unsigned long long* state, long long* out) noexcept nogil:
    cdef int side = <int> (_next_u64(state) & 1)
    cdef long long cand = 0
    cdef int attempt
    cdef int i
    for attempt in range(MAX_REDRAWS + 1):
        cand = _rand_below(state, tb.n_ent)
        if _corruption_valid(tb, row, side, cand):
            break
    for i in range(9):
        out[i] = row[i]
    if row[0] == 2:
        out[2 if side == 0 else 6] = cand
    else:
        out[2 if side == 0 else 4] = cand


# ---------------------------------------------------------------------------
# epoch drivers

cdef double _run_span(Tables* tb, const long long* samples, const long long* order,
                      long long start, long long stop, double margin, double lr,
                      unsigned long long* state) noexcept nogil:
    cdef Scratch s
    cdef double total = 0.0
    cdef double s_pos, s_neg, hinge
    cdef long long k
    cdef const long long* row
    if not _scratch_init(&s, tb.d):
        return -1.0
    for k in range(start, stop):
        row = samples + order[k] * 9
        s_pos = _score(tb, row, &s)
        _draw_negative(tb, row, state, s.row)
        s_neg = _score(tb, s.row, &s)
        hinge = margin + s_pos - s_neg
        if hinge > 0.0:
            total += hinge
            _scratch_reset(&s)
            _accum_sample(tb, &s, row, 1.0)
            _accum_sample(tb, &s, s.row, -1.0)
            _apply_updates(tb, &s, lr)
    free(s.block)
    return total


cdef void _fill_tables(Tables* tb,
                       double[:, ::1] ent, double[:, ::1] rel,
                       double[:, ::1] normals, double[:, :, ::1] rel_mats,
                       double[:, :, ::1] concept_mats,
                       long long[::1] triple_keys, long long[::1] inst1,
                       long long[::1] inst2, long long[::1] inst3,
                       int model_kind, int norm_kind,
                       long long n_ent, long long n_rel):
    tb.d = <int> ent.shape[1]
    tb.mk = model_kind
    tb.norm = norm_kind
    tb.ent = &ent[0, 0]
    tb.rel = &rel[0, 0] if rel.shape[0] > 0 else NULL
    tb.normals = &normals[0, 0] if normals.shape[0] > 0 else NULL
    tb.mats = &rel_mats[0, 0, 0] if rel_mats.shape[0] > 0 else NULL
    tb.cmats = &concept_mats[0, 0, 0] if concept_mats.shape[0] > 0 else NULL
    tb.triple_keys = &triple_keys[0] if triple_keys.shape[0] > 0 else NULL
    tb.n_triple_keys = triple_keys.shape[0]
    tb.inst1 = &inst1[0] if inst1.shape[0] > 0 else NULL
    tb.n_inst1 = inst1.shape[0]
    tb.inst2 = &inst2[0] if inst2.shape[0] > 0 else NULL
    tb.n_inst2 = inst2.shape[0]
    tb.inst3 = &inst3[0] if inst3.shape[0] > 0 else NULL
    tb.n_inst3 = inst3.shape[0]
    tb.n_ent = n_ent
    tb.n_rel = n_rel


def run_epoch(long long[:, ::1] samples,
              double[:, ::1] ent, double[:, ::1] rel,
              double[:, ::1] normals, double[:, :, ::1] rel_mats,
              double[:, :, ::1] concept_mats,
              long long[::1] triple_keys, long long[::1] inst1,
              long long[::1] inst2, long long[::1] inst3,
              int model_kind, int norm_kind, double margin, double lr,
              unsigned long long[::1] rng_state,
              long long n_ent, long long n_rel, int threads=1):
    """One epoch over ``samples``; mutates parameter tables and the RNG
    state in place, returns the mean hinge."""
    cdef long long n = samples.shape[0]
    if n == 0:
        return 0.0
    cdef Tables tb
    _fill_tables(&tb, ent, rel, normals, rel_mats, concept_mats,
                 triple_keys, inst1, inst2, inst3,
                 model_kind, norm_kind, n_ent, n_rel)

    cdef long long* order = <long long*> malloc(n * sizeof(long long))
    if order == NULL:
        raise MemoryError()
    cdef unsigned long long state = rng_state[0]
    cdef long long i, j, t
    cdef double total = 0.0
    cdef const long long* sp = &samples[0, 0]

    cdef int nt = threads if threads > 1 else 1
    cdef long long shard, lo, hi
    cdef unsigned long long* shard_states = NULL
    cdef double* shard_totals = NULL

    with nogil:
        for i in range(n):
            order[i] = i
        for i in range(n - 1, 0, -1):
            j = _rand_below(&state, i + 1)
            t = order[i]; order[i] = order[j]; order[j] = t

    try:
        if nt == 1:
            with nogil:
                total = _run_span(&tb, sp, order, 0, n, margin, lr, &state)
            if total < 0.0:
                raise MemoryError()
        else:
            shard_states = <unsigned long long*> malloc(nt * sizeof(unsigned long long))
            shard_totals = <double*> malloc(nt * sizeof(double))
            if shard_states == NULL or shard_totals == NULL:
                raise MemoryError()
            for shard in range(nt):
                shard_states[shard] = _next_u64(&state)
            with nogil:
                for shard in prange(nt, num_threads=nt, schedule='static'):
                    lo = shard * n // nt
                    hi = (shard + 1) * n // nt
                    shard_totals[shard] = _run_span(
                        &tb, sp, order, lo, hi, margin, lr, &shard_states[shard])
            for shard in range(nt):
                if shard_totals[shard] < 0.0:
                    raise MemoryError()
                total += shard_totals[shard]
    finally:
        free(order)
        free(shard_states)
        free(shard_totals)

    rng_state[0] = state
    return total / n


def score_row(long long[::1] row,
              double[:, ::1] ent, double[:, ::1] rel,
              double[:, ::1] normals, double[:, :, ::1] rel_mats,
              double[:, :, ::1] concept_mats,
              int model_kind, int norm_kind):
    """Score one encoded sample row (test hook)."""
    cdef Tables tb
    cdef long long empty_arr[1]
    tb.d = <int> ent.shape[1]
    tb.mk = model_kind
    tb.norm = norm_kind
    tb.ent = &ent[0, 0]
    tb.rel = &rel[0, 0] if rel.shape[0] > 0 else NULL
    tb.normals = &normals[0, 0] if normals.shape[0] > 0 else NULL
    tb.mats = &rel_mats[0, 0, 0] if rel_mats.shape[0] > 0 else NULL
    tb.cmats = &concept_mats[0, 0, 0] if concept_mats.shape[0] > 0 else NULL
    cdef Scratch s
    if not _scratch_init(&s, tb.d):
        raise MemoryError()
    cdef double value
    try:
        value = _score(&tb, &row[0], &s)
    finally:
        free(s.block)
    return value


def draw_negative(long long[::1] row,
                  long long[::1] triple_keys, long long[::1] inst1,
                  long long[::1] inst2, long long[::1] inst3,
                  long long n_ent, long long n_rel,
                  unsigned long long[::1] rng_state):
    """Corrupt one sample row with the kernel's sampler (test hook)."""
    cdef Tables tb
    tb.n_ent = n_ent
    tb.n_rel = n_rel
    tb.triple_keys = &triple_keys[0] if triple_keys.shape[0] > 0 else NULL
    tb.n_triple_keys = triple_keys.shape[0]
    tb.inst1 = &inst1[0] if inst1.shape[0] > 0 else NULL
    tb.n_inst1 = inst1.shape[0]
    tb.inst2 = &inst2[0] if inst2.shape[0] > 0 else NULL
    tb.n_inst2 = inst2.shape[0]
    tb.inst3 = &inst3[0] if inst3.shape[0] > 0 else NULL
    tb.n_inst3 = inst3.shape[0]
    out = np.empty(9, dtype=np.int64)
    cdef long long[::1] out_view = out
    cdef unsigned long long state = rng_state[0]
    _draw_negative(&tb, &row[0], &state, &out_view[0])
    rng_state[0] = state
    return out
