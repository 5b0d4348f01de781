"""Pure numpy twins of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np

ZERO_PROB = 1e-15


def _ent(p) -> float:
    q = np.ravel(p)
    q = q[q > ZERO_PROB]
    return float(-(q * np.log2(q)).sum())


def _h(joint, keep):
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    return _ent(joint.sum(axis=drop) if drop else joint)


def _cmi(joint, a, b, c=()):
    a, b, c = set(a), set(b), set(c)
    return max(0.0, _h(joint, a | c) + _h(joint, b | c) - _h(joint, a | b | c) - _h(joint, c))


def _mindist(m, d):
    # m has shape (ns, cells); d has shape (ns, nh)
    return float(np.min(d.T @ m, axis=0).sum())


def inner_source_stats(pst, ku, kv2, kv1, d1, d2, nu1, nu2):
    pst, ku, kv2, kv1 = (np.asarray(a, dtype=float) for a in (pst, ku, kv2, kv1))
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    ns, nt = pst.shape
    # axes: s, t, u1, u2, v1, v2
    j = np.einsum("st,sab,tv,vw->stabwv", pst, ku.reshape(ns, nu1, nu2), kv2, kv1)
    S, T, U1, U2, V1, V2 = range(6)
    out = np.empty(6)
    out[0] = _cmi(j, [U1], [S], [V1])
    out[1] = _cmi(j, [U2], [S], [U1, V2])
    out[2] = _cmi(j, [V1], [T])
    out[3] = _cmi(j, [V2], [T], [U1, V1])
    m1 = j.sum(axis=(T, U2, V2)).reshape(ns, -1)
    m2 = j.sum(axis=(T, V1)).reshape(ns, -1)
    out[4] = _mindist(m1, d1)
    out[5] = _mindist(m2, d2)
    return out


def inner_source_scan(pst, gu, gv2, gv1, d1, d2, nu1, nu2):
    gu, gv2, gv1 = np.asarray(gu), np.asarray(gv2), np.asarray(gv1)
    out = np.empty((len(gu) * len(gv2) * len(gv1), 6))
    row = 0
    for ku in gu:
        for kv2 in gv2:
            for kv1 in gv1:
                out[row] = inner_source_stats(pst, ku, kv2, kv1, d1, d2, nu1, nu2)
                row += 1
    return out


def _bc(pw, kx, py, pz):
    j = np.einsum("w,wx,xy,yz->wxyz", pw, kx, py, pz)
    W, X, Y, Z = range(4)
    return np.array([_cmi(j, [W], [Z]), _cmi(j, [X], [Y], [W]), _cmi(j, [W], [Y])])


def bc_scan(gw, gx, py, pz):
    gw, gx = np.asarray(gw, dtype=float), np.asarray(gx, dtype=float)
    py, pz = np.asarray(py, dtype=float), np.asarray(pz, dtype=float)
    out = np.empty((len(gw) * len(gx), 3))
    for i, pw in enumerate(gw):
        for k, kx in enumerate(gx):
            out[i * len(gx) + k] = _bc(pw, kx, py, pz)
    return out


def outer_stats(pst, ku, kv2, kv1, ks, d1, d2):
    pst, ku, kv2, kv1, ks = (np.asarray(a, dtype=float) for a in (pst, ku, kv2, kv1, ks))
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    ns, nt = pst.shape
    nv1, nv2 = kv1.shape[1], kv2.shape[1]
    na, nb = d1.shape[1], d2.shape[1]
    if ks.shape != (ns * nv1 * nv2, na * nb):
        raise ValueError("reconstruction kernel has the wrong shape")
    k = ks.reshape(ns, nv1, nv2, na, nb)
    # axes: s, t, u, v1, v2, a, b
    j = np.einsum("st,tu,tw,wv,svwab->stuvwab", pst, ku, kv2, kv1, k)
    S, T, U, V1, V2, A, B = range(7)
    out = np.empty(7)
    out[0] = _cmi(j, [A], [U])
    out[1] = _cmi(j, [A, B], [S], [U])
    out[2] = _cmi(j, [U], [V1])
    out[3] = _cmi(j, [V2], [S], [U])
    out[4] = _cmi(j, [V2], [T], [U])
    sa = j.sum(axis=(T, U, V1, V2, B))
    sb = j.sum(axis=(T, U, V1, V2, A))
    out[5] = float((sa * d1).sum())
    out[6] = float((sb * d2).sum())
    return out


def inner_full_slacks(pst, py, pz, d1, d2, nu1, nu2, nv1, nv2, nw, params, rate, dist1, dist2, rho):
    pst = np.asarray(pst, dtype=float)
    py, pz = np.asarray(py, dtype=float), np.asarray(pz, dtype=float)
    ns, nt = pst.shape
    nx = py.shape[0]
    nu = nu1 * nu2
    o_v2 = ns * nu
    o_v1 = o_v2 + nt * nv2
    o_w = o_v1 + nv2 * nv1
    o_x = o_w + nw
    width = o_x + nw * nx
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[1] != width:
        raise ValueError(f"parameter rows need {width} entries, got {params.shape[1]}")
    out = np.empty((len(params), 5))
    for i, row in enumerate(params):
        st = inner_source_stats(
            pst, row[:o_v2].reshape(ns, nu), row[o_v2:o_v1].reshape(nt, nv2),
            row[o_v1:o_w].reshape(nv2, nv1), d1, d2, nu1, nu2,
        )
        ch = _bc(row[o_w:o_x], row[o_x:width].reshape(nw, nx), py, pz)
        out[i] = (
            rate - st[0] - st[1],
            rho * ch[0] - st[2],
            rho * (ch[0] + ch[1]) - st[2] - st[3],
            dist1 - st[4],
            dist2 - st[5],
        )
    return out
