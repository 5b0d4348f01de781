# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the witness searches.

Every public function here has a numpy twin in ``_pykernels`` with the same
signature and output; ``rdb_regions.kernels`` picks one at import time.
Internals work on C-contiguous buffers through raw pointers so whole grids
run without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log2
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double ZERO_PROB = 1e-15


cdef inline double _ent(const double* p, Py_ssize_t n) noexcept nogil:
    cdef double h = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        if p[i] > ZERO_PROB:
            h -= p[i] * log2(p[i])
    return h


cdef inline double _clip(double x) noexcept nogil:
    return x if x > 0.0 else 0.0


cdef inline void _zero(double* p, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        p[i] = 0.0


cdef double _mindist(const double* m, Py_ssize_t ncell, Py_ssize_t ns,
                     const double* d, Py_ssize_t nh) noexcept nogil:
    # m laid out [s, cell]; sum over cells of min over reconstructions
    cdef Py_ssize_t c, s, k
    cdef double total = 0.0, best, acc
    for c in range(ncell):
        best = 1e300
        for k in range(nh):
            acc = 0.0
            for s in range(ns):
                acc = acc + m[s * ncell + c] * d[s * nh + k]
            if acc < best:
                best = acc
        total += best
    return total


cdef struct InnerDims:
    Py_ssize_t ns, nt, nu1, nu2, nv1, nv2, nh1, nh2


cdef Py_ssize_t _inner_bufsize(InnerDims z) noexcept nogil:
    cdef Py_ssize_t nu = z.nu1 * z.nu2
    return (z.ns * z.nv1 + z.nu1 * z.nv1 + z.ns * z.nu1 * z.nv1 + z.nv1 + nu * z.nv2
            + z.ns * z.nu1 * z.nv2 + z.ns * nu * z.nv2 + z.nu1 * z.nv2 + z.nt
            + z.nt * z.nv1 + z.nt * z.nu1 * z.nv1 + z.nv2 * z.nu1 * z.nv1
            + z.nt * z.nv2 * z.nu1 * z.nv1)


cdef void _inner_source(InnerDims z, const double* pst, const double* ku,
                        const double* kv2, const double* kv1, const double* d1,
                        const double* d2, double* buf, double* out) noexcept nogil:
    # out: I(U1;S|V1), I(U2;S|U1,V2), I(V1;T), I(V2;T|U1,V1), min E d1, min E d2
    cdef Py_ssize_t NS = z.ns, NT = z.nt, nu1 = z.nu1, nu2 = z.nu2
    cdef Py_ssize_t NU = nu1 * nu2, NV1 = z.nv1, NV2 = z.nv2
    cdef Py_ssize_t s, t, u, u1, v1, v2
    cdef double p, pb, pt
    cdef double* sv1 = buf
    cdef double* u1v1 = sv1 + NS * NV1
    cdef double* su1v1 = u1v1 + nu1 * NV1
    cdef double* v1m = su1v1 + NS * nu1 * NV1
    cdef double* uv2 = v1m + NV1
    cdef double* su1v2 = uv2 + NU * NV2
    cdef double* suv2 = su1v2 + NS * nu1 * NV2
    cdef double* u1v2 = suv2 + NS * NU * NV2
    cdef double* tm = u1v2 + nu1 * NV2
    cdef double* tv1 = tm + NT
    cdef double* tu1v1 = tv1 + NT * NV1
    cdef double* v2u1v1 = tu1v1 + NT * nu1 * NV1
    cdef double* tv2u1v1 = v2u1v1 + NV2 * nu1 * NV1
    _zero(buf, _inner_bufsize(z))
    for s in range(NS):
        for t in range(NT):
            pt = pst[s * NT + t]
            if pt <= 0.0:
                continue
            for v2 in range(NV2):
                if kv2[t * NV2 + v2] <= 0.0:
                    continue
                for v1 in range(NV1):
                    pb = pt * kv2[t * NV2 + v2] * kv1[v2 * NV1 + v1]
                    if pb <= 0.0:
                        continue
                    for u in range(NU):
                        p = pb * ku[s * NU + u]
                        if p <= 0.0:
                            continue
                        u1 = u // nu2
                        sv1[s * NV1 + v1] += p
                        u1v1[u1 * NV1 + v1] += p
                        su1v1[(s * nu1 + u1) * NV1 + v1] += p
                        v1m[v1] += p
                        uv2[u * NV2 + v2] += p
                        su1v2[(s * nu1 + u1) * NV2 + v2] += p
                        suv2[(s * NU + u) * NV2 + v2] += p
                        u1v2[u1 * NV2 + v2] += p
                        tm[t] += p
                        tv1[t * NV1 + v1] += p
                        tu1v1[(t * nu1 + u1) * NV1 + v1] += p
                        v2u1v1[(v2 * nu1 + u1) * NV1 + v1] += p
                        tv2u1v1[((t * NV2 + v2) * nu1 + u1) * NV1 + v1] += p
    cdef double h_u1v1 = _ent(u1v1, nu1 * NV1)
    cdef double h_v1 = _ent(v1m, NV1)
    out[0] = _clip(_ent(sv1, NS * NV1) + h_u1v1 - _ent(su1v1, NS * nu1 * NV1) - h_v1)
    out[1] = _clip(_ent(uv2, NU * NV2) + _ent(su1v2, NS * nu1 * NV2)
                   - _ent(suv2, NS * NU * NV2) - _ent(u1v2, nu1 * NV2))
    out[2] = _clip(h_v1 + _ent(tm, NT) - _ent(tv1, NT * NV1))
    out[3] = _clip(_ent(tu1v1, NT * nu1 * NV1) + _ent(v2u1v1, NV2 * nu1 * NV1)
                   - _ent(tv2u1v1, NT * NV2 * nu1 * NV1) - h_u1v1)
    out[4] = _mindist(su1v1, nu1 * NV1, NS, d1, z.nh1)
    out[5] = _mindist(suv2, NU * NV2, NS, d2, z.nh2)


cdef struct BcDims:
    Py_ssize_t nw, nx, ny, nz


cdef Py_ssize_t _bc_bufsize(BcDims z) noexcept nogil:
    return (z.nw * z.nz + z.nz + z.nw * z.nx + z.nw * z.ny
            + z.nw * z.nx * z.ny + z.ny)


cdef void _bc(BcDims z, const double* pw, const double* kx, const double* py,
              const double* pz, double* buf, double* out) noexcept nogil:
    # out: I(W;Z), I(X;Y|W), I(W;Y)
    cdef Py_ssize_t NW = z.nw, NX = z.nx, NY = z.ny, NZ = z.nz
    cdef Py_ssize_t w, x, y, k
    cdef double p
    cdef double* wz = buf
    cdef double* zm = wz + NW * NZ
    cdef double* wx = zm + NZ
    cdef double* wy = wx + NW * NX
    cdef double* wxy = wy + NW * NY
    cdef double* ym = wxy + NW * NX * NY
    _zero(buf, _bc_bufsize(z))
    for w in range(NW):
        for x in range(NX):
            wx[w * NX + x] = pw[w] * kx[w * NX + x]
            for y in range(NY):
                p = pw[w] * kx[w * NX + x] * py[x * NY + y]
                wxy[(w * NX + x) * NY + y] = p
                wy[w * NY + y] += p
                ym[y] += p
    for w in range(NW):
        for y in range(NY):
            p = wy[w * NY + y]
            if p <= 0.0:
                continue
            for k in range(NZ):
                wz[w * NZ + k] += p * pz[y * NZ + k]
    for w in range(NW):
        for k in range(NZ):
            zm[k] += wz[w * NZ + k]
    cdef double hw = _ent(pw, NW)
    out[0] = _clip(hw + _ent(zm, NZ) - _ent(wz, NW * NZ))
    out[1] = _clip(_ent(wx, NW * NX) + _ent(wy, NW * NY) - _ent(wxy, NW * NX * NY) - hw)
    out[2] = _clip(hw + _ent(ym, NY) - _ent(wy, NW * NY))


cdef struct OuterDims:
    Py_ssize_t ns, nt, nu, nv1, nv2, na, nb


cdef Py_ssize_t _outer_bufsize(OuterDims z) noexcept nogil:
    return (z.nu + z.na * z.nu + z.na + z.na * z.nb * z.nu + z.ns * z.nu
            + z.na * z.nb * z.ns * z.nu + z.nu * z.nv1 + z.nv1 + z.nv2 * z.nu
            + z.nv2 * z.ns * z.nu + z.nt * z.nu + z.nv2 * z.nt * z.nu
            + z.ns * z.na + z.ns * z.nb)


cdef void _outer(OuterDims z, const double* pst, const double* ku, const double* kv2,
                 const double* kv1, const double* ks,
                 const double* d1, const double* d2, double* buf,
                 double* out) noexcept nogil:
    # out: I(S1;U), I(S1,S2;S|U), I(U;V1), I(V2;S|U), I(V2;T|U), E d1, E d2
    cdef Py_ssize_t NS = z.ns, NT = z.nt, NU = z.nu, NV1 = z.nv1, NV2 = z.nv2
    cdef Py_ssize_t NA = z.na, NB = z.nb
    cdef Py_ssize_t s, t, u, v1, v2, a, b
    cdef double p0, p1, p2, p
    cdef const double* row
    cdef double* um = buf
    cdef double* au = um + NU
    cdef double* am = au + NA * NU
    cdef double* abu = am + NA
    cdef double* su = abu + NA * NB * NU
    cdef double* absu = su + NS * NU
    cdef double* uv1 = absu + NA * NB * NS * NU
    cdef double* v1m = uv1 + NU * NV1
    cdef double* v2u = v1m + NV1
    cdef double* v2su = v2u + NV2 * NU
    cdef double* tu = v2su + NV2 * NS * NU
    cdef double* v2tu = tu + NT * NU
    cdef double* sa = v2tu + NV2 * NT * NU
    cdef double* sb = sa + NS * NA
    _zero(buf, _outer_bufsize(z))
    for s in range(NS):
        for t in range(NT):
            if pst[s * NT + t] <= 0.0:
                continue
            for u in range(NU):
                p0 = pst[s * NT + t] * ku[t * NU + u]
                if p0 <= 0.0:
                    continue
                for v2 in range(NV2):
                    p1 = p0 * kv2[t * NV2 + v2]
                    if p1 <= 0.0:
                        continue
                    for v1 in range(NV1):
                        p2 = p1 * kv1[v2 * NV1 + v1]
                        if p2 <= 0.0:
                            continue
                        um[u] += p2
                        su[s * NU + u] += p2
                        uv1[u * NV1 + v1] += p2
                        v1m[v1] += p2
                        v2u[v2 * NU + u] += p2
                        v2su[(v2 * NS + s) * NU + u] += p2
                        tu[t * NU + u] += p2
                        v2tu[(v2 * NT + t) * NU + u] += p2
                        row = ks + ((s * NV1 + v1) * NV2 + v2) * NA * NB
                        for a in range(NA):
                            for b in range(NB):
                                p = p2 * row[a * NB + b]
                                if p <= 0.0:
                                    continue
                                au[a * NU + u] += p
                                am[a] += p
                                abu[(a * NB + b) * NU + u] += p
                                absu[((a * NB + b) * NS + s) * NU + u] += p
                                sa[s * NA + a] += p
                                sb[s * NB + b] += p
    cdef double hu = _ent(um, NU)
    cdef double hsu = _ent(su, NS * NU)
    cdef double hv2u = _ent(v2u, NV2 * NU)
    out[0] = _clip(_ent(am, NA) + hu - _ent(au, NA * NU))
    out[1] = _clip(_ent(abu, NA * NB * NU) + hsu - _ent(absu, NA * NB * NS * NU) - hu)
    out[2] = _clip(hu + _ent(v1m, NV1) - _ent(uv1, NU * NV1))
    out[3] = _clip(hv2u + hsu - _ent(v2su, NV2 * NS * NU) - hu)
    out[4] = _clip(hv2u + _ent(tu, NT * NU) - _ent(v2tu, NV2 * NT * NU) - hu)
    out[5] = 0.0
    out[6] = 0.0
    for s in range(NS):
        for a in range(NA):
            out[5] += sa[s * NA + a] * d1[s * NA + a]
        for b in range(NB):
            out[6] += sb[s * NB + b] * d2[s * NB + b]


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def inner_source_stats(pst, ku, kv2, kv1, d1, d2, Py_ssize_t nu1, Py_ssize_t nu2):
    """Source-side quantities of one inner-bound witness (see module docs)."""
    cdef const double[:, ::1] a_pst = _c(pst)
    cdef const double[:, ::1] a_ku = _c(ku)
    cdef const double[:, ::1] a_v2 = _c(kv2)
    cdef const double[:, ::1] a_v1 = _c(kv1)
    cdef const double[:, ::1] a_d1 = _c(d1)
    cdef const double[:, ::1] a_d2 = _c(d2)
    cdef InnerDims z = InnerDims(a_pst.shape[0], a_pst.shape[1], nu1, nu2,
                                 a_v1.shape[1], a_v2.shape[1], a_d1.shape[1], a_d2.shape[1])
    out = np.empty(6)
    cdef double[::1] o = out
    cdef double* buf = <double*> malloc(_inner_bufsize(z) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    _inner_source(z, &a_pst[0, 0], &a_ku[0, 0], &a_v2[0, 0], &a_v1[0, 0],
                  &a_d1[0, 0], &a_d2[0, 0], buf, &o[0])
    free(buf)
    return out


def inner_source_scan(pst, gu, gv2, gv1, d1, d2, Py_ssize_t nu1, Py_ssize_t nu2):
    """Source stats over the product grid ``gu x gv2 x gv1`` (``gu`` outermost)."""
    cdef const double[:, ::1] a_pst = _c(pst)
    cdef const double[:, :, ::1] a_gu = _c(gu)
    cdef const double[:, :, ::1] a_g2 = _c(gv2)
    cdef const double[:, :, ::1] a_g1 = _c(gv1)
    cdef const double[:, ::1] a_d1 = _c(d1)
    cdef const double[:, ::1] a_d2 = _c(d2)
    cdef InnerDims z = InnerDims(a_pst.shape[0], a_pst.shape[1], nu1, nu2,
                                 a_g1.shape[2], a_g2.shape[2], a_d1.shape[1], a_d2.shape[1])
    cdef Py_ssize_t n1 = a_gu.shape[0], n2 = a_g2.shape[0], n3 = a_g1.shape[0]
    out = np.empty((n1 * n2 * n3, 6))
    if out.shape[0] == 0:
        return out
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double* buf = <double*> malloc(_inner_bufsize(z) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    _inner_source(z, &a_pst[0, 0], &a_gu[i, 0, 0], &a_g2[j, 0, 0],
                                  &a_g1[k, 0, 0], &a_d1[0, 0], &a_d2[0, 0], buf,
                                  &o[(i * n2 + j) * n3 + k, 0])
    free(buf)
    return out


def bc_scan(gw, gx, py, pz):
    """(I(W;Z), I(X;Y|W), I(W;Y)) over the product ``gw x gx`` (``gw`` outermost)."""
    cdef const double[:, ::1] a_gw = _c(gw)
    cdef const double[:, :, ::1] a_gx = _c(gx)
    cdef const double[:, ::1] a_py = _c(py)
    cdef const double[:, ::1] a_pz = _c(pz)
    cdef BcDims z = BcDims(a_gx.shape[1], a_gx.shape[2], a_py.shape[1], a_pz.shape[1])
    cdef Py_ssize_t n1 = a_gw.shape[0], n2 = a_gx.shape[0], i, j
    out = np.empty((n1 * n2, 3))
    if out.shape[0] == 0:
        return out
    cdef double[:, ::1] o = out
    cdef double* buf = <double*> malloc(_bc_bufsize(z) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n1):
            for j in range(n2):
                _bc(z, &a_gw[i, 0], &a_gx[j, 0, 0], &a_py[0, 0], &a_pz[0, 0], buf,
                    &o[i * n2 + j, 0])
    free(buf)
    return out


def outer_stats(pst, ku, kv2, kv1, ks, d1, d2):
    """Outer-bound quantities for one candidate.

    ``ks`` is P(s1, s2 | s, v1, v2) with rows (s, v1, v2) and columns (s1, s2),
    the last index fastest in both.
    """
    cdef const double[:, ::1] a_pst = _c(pst)
    cdef const double[:, ::1] a_ku = _c(ku)
    cdef const double[:, ::1] a_v2 = _c(kv2)
    cdef const double[:, ::1] a_v1 = _c(kv1)
    cdef const double[:, ::1] a_ks = _c(ks)
    cdef const double[:, ::1] a_d1 = _c(d1)
    cdef const double[:, ::1] a_d2 = _c(d2)
    cdef OuterDims z = OuterDims(a_pst.shape[0], a_pst.shape[1], a_ku.shape[1],
                                 a_v1.shape[1], a_v2.shape[1], a_d1.shape[1], a_d2.shape[1])
    if a_ks.shape[0] != z.ns * z.nv1 * z.nv2 or a_ks.shape[1] != z.na * z.nb:
        raise ValueError("reconstruction kernel has the wrong shape")
    out = np.empty(7)
    cdef double[::1] o = out
    cdef double* buf = <double*> malloc(_outer_bufsize(z) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    with nogil:
        _outer(z, &a_pst[0, 0], &a_ku[0, 0], &a_v2[0, 0], &a_v1[0, 0], &a_ks[0, 0],
               &a_d1[0, 0], &a_d2[0, 0], buf, &o[0])
    free(buf)
    return out


def inner_full_slacks(pst, py, pz, d1, d2, Py_ssize_t nu1, Py_ssize_t nu2,
                      Py_ssize_t nv1, Py_ssize_t nv2, Py_ssize_t nw, params,
                      double rate, double dist1, double dist2, double rho):
    """Raw inner-bound slacks for each flattened parameter row.

    Row layout: P(u1u2|s) rows, P(v2|t) rows, P(v1|v2) rows, P(w), P(x|w)
    rows.  Columns: rate, weak-hop, sum-channel, distortion 1, distortion 2.
    """
    cdef const double[:, ::1] a_pst = _c(pst)
    cdef const double[:, ::1] a_py = _c(py)
    cdef const double[:, ::1] a_pz = _c(pz)
    cdef const double[:, ::1] a_d1 = _c(d1)
    cdef const double[:, ::1] a_d2 = _c(d2)
    cdef const double[:, ::1] prm = _c(np.atleast_2d(params))
    cdef InnerDims zi = InnerDims(a_pst.shape[0], a_pst.shape[1], nu1, nu2, nv1, nv2,
                                  a_d1.shape[1], a_d2.shape[1])
    cdef BcDims zb = BcDims(nw, a_py.shape[0], a_py.shape[1], a_pz.shape[1])
    cdef Py_ssize_t o_v2 = zi.ns * nu1 * nu2
    cdef Py_ssize_t o_v1 = o_v2 + zi.nt * nv2
    cdef Py_ssize_t o_w = o_v1 + nv2 * nv1
    cdef Py_ssize_t o_x = o_w + nw
    cdef Py_ssize_t width = o_x + nw * zb.nx
    if prm.shape[1] != width:
        raise ValueError(f"parameter rows need {width} entries, got {prm.shape[1]}")
    cdef Py_ssize_t n = prm.shape[0], i
    out = np.empty((n, 5))
    if n == 0:
        return out
    cdef double[:, ::1] o = out
    cdef Py_ssize_t nsb = _inner_bufsize(zi)
    cdef double* buf = <double*> malloc((nsb + _bc_bufsize(zb)) * sizeof(double))
    cdef double st[6]
    cdef double ch[3]
    cdef const double* row
    if buf == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n):
            row = &prm[i, 0]
            _inner_source(zi, &a_pst[0, 0], row, row + o_v2, row + o_v1,
                          &a_d1[0, 0], &a_d2[0, 0], buf, st)
            _bc(zb, row + o_w, row + o_x, &a_py[0, 0], &a_pz[0, 0], buf + nsb, ch)
            o[i, 0] = rate - st[0] - st[1]
            o[i, 1] = rho * ch[0] - st[2]
            o[i, 2] = rho * (ch[0] + ch[1]) - st[2] - st[3]
            o[i, 3] = dist1 - st[4]
            o[i, 4] = dist2 - st[5]
    free(buf)
    return out
