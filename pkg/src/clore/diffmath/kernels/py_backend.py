"""Numpy implementations of every tape primitive.

Each primitive is a pair: ``f_<op>(...) -> (out, aux)`` and
``b_<op>(g, grads, values..., out, aux)`` where ``grads`` is the tuple of
gradient buffers to accumulate into (an entry is None when that operand
needs no gradient). ``aux`` carries whatever the backward pass reuses:
argmax positions, gate activations, selection indices.

The Cython backend in ``_ckernels.pyx`` mirrors this module one to one;
``test_kernel_parity`` cross-checks the two.
"""

import numpy as np

LOGIT_EPS = 1e-7
NORM_EPS = 1e-12

BACKEND_NAME = "py"


def allfinite(a):
    return bool(np.all(np.isfinite(a)))


# ---------------------------------------------------------------- elementwise

def f_add(a, b):
    return a + b, None


def b_add(g, grads, a, b, out, aux):
    if grads[0] is not None:
        grads[0] += g
    if grads[1] is not None:
        grads[1] += g


def f_add_const(a, c):
    return a + c, None


def b_add_const(g, grads, a, out, aux, c):
    if grads[0] is not None:
        grads[0] += g


def f_sub(a, b):
    return a - b, None


def b_sub(g, grads, a, b, out, aux):
    if grads[0] is not None:
        grads[0] += g
    if grads[1] is not None:
        grads[1] -= g


def f_mul(a, b):
    # shapes equal, or one operand is a scalar (shape ()) broadcast
    return a * b, None


def b_mul(g, grads, a, b, out, aux):
    if grads[0] is not None:
        if a.shape == ():
            grads[0] += np.sum(g * b)
        else:
            grads[0] += g * b
    if grads[1] is not None:
        if b.shape == ():
            grads[1] += np.sum(g * a)
        else:
            grads[1] += g * a


def f_mul_const(a, c):
    return a * c, None


def b_mul_const(g, grads, a, out, aux, c):
    if grads[0] is not None:
        grads[0] += g * c


def f_sigmoid(a):
    pos = a >= 0
    ea = np.exp(np.where(pos, -a, a))  # exponent always <= 0, no overflow
    return np.where(pos, 1.0 / (1.0 + ea), ea / (1.0 + ea)), None


def b_sigmoid(g, grads, a, out, aux):
    if grads[0] is not None:
        grads[0] += g * out * (1.0 - out)


def f_tanh(a):
    return np.tanh(a), None


def b_tanh(g, grads, a, out, aux):
    if grads[0] is not None:
        grads[0] += g * (1.0 - out * out)


def f_softplus(a):
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a))), None


def b_softplus(g, grads, a, out, aux):
    if grads[0] is not None:
        grads[0] += g * f_sigmoid(a)[0]


def f_log(a):
    return np.log(a), None


def b_log(g, grads, a, out, aux):
    if grads[0] is not None:
        grads[0] += g / a


def f_logit(p):
    pc = np.clip(p, LOGIT_EPS, 1.0 - LOGIT_EPS)
    return np.log(pc) - np.log1p(-pc), None


def b_logit(g, grads, p, out, aux):
    if grads[0] is not None:
        inside = (p > LOGIT_EPS) & (p < 1.0 - LOGIT_EPS)
        pc = np.clip(p, LOGIT_EPS, 1.0 - LOGIT_EPS)
        grads[0] += np.where(inside, g / (pc * (1.0 - pc)), 0.0)


# ----------------------------------------------------------------- reductions

def f_mean(a):
    # vector -> scalar, matrix -> mean of rows (leading axis)
    return np.asarray(np.mean(a, axis=0)), None


def b_mean(g, grads, a, out, aux):
    if grads[0] is not None:
        grads[0] += np.broadcast_to(g, a.shape) / a.shape[0]


def f_softmax(v):
    e = np.exp(v - np.max(v))
    return e / np.sum(e), None


def b_softmax(g, grads, v, out, aux):
    if grads[0] is not None:
        grads[0] += out * (g - np.dot(out, g))


def f_reduce_min(v):
    idx = int(np.argmin(v))
    return np.asarray(v[idx]), idx


def b_reduce_min(g, grads, v, out, aux):
    if grads[0] is not None:
        grads[0][aux] += g


def f_reduce_max(v):
    idx = int(np.argmax(v))
    return np.asarray(v[idx]), idx


def b_reduce_max(g, grads, v, out, aux):
    if grads[0] is not None:
        grads[0][aux] += g


def f_pick(v, i):
    return np.asarray(v[i]), None


def b_pick(g, grads, v, out, aux, i):
    if grads[0] is not None:
        grads[0][i] += g


# -------------------------------------------------------------------- linear

def f_matvec(m, v):
    return m @ v, None


def b_matvec(g, grads, m, v, out, aux):
    if grads[0] is not None:
        grads[0] += np.outer(g, v)
    if grads[1] is not None:
        grads[1] += m.T @ g


def f_vecmat(v, m):
    return m.T @ v, None


def b_vecmat(g, grads, v, m, out, aux):
    if grads[0] is not None:
        grads[0] += m @ g
    if grads[1] is not None:
        grads[1] += np.outer(v, g)


def f_dot(u, v):
    return np.asarray(np.dot(u, v)), None


def b_dot(g, grads, u, v, out, aux):
    if grads[0] is not None:
        grads[0] += g * v
    if grads[1] is not None:
        grads[1] += g * u


def f_concat(*vs):
    # scalars are welcome; they contribute one slot each
    return np.concatenate([np.atleast_1d(v) for v in vs]), None


def b_concat(g, grads, *rest):
    vs = rest[:-2]
    off = 0
    for buf, v in zip(grads, vs):
        n = 1 if v.ndim == 0 else v.shape[0]
        if buf is not None:
            if v.ndim == 0:
                buf += g[off]
            else:
                buf += g[off:off + n]
        off += n


def f_stack_rows(*vs):
    return np.stack(vs), None


def b_stack_rows(g, grads, *rest):
    for i, buf in enumerate(grads):
        if buf is not None:
            buf += g[i]


def f_gather(table, ids):
    return table[ids], None


def b_gather(g, grads, table, out, aux, ids):
    if grads[0] is not None:
        np.add.at(grads[0], ids, g)


def f_cosine(u, v):
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < NORM_EPS or nv < NORM_EPS:
        return np.asarray(0.0), (nu, nv, True)
    return np.asarray(np.dot(u, v) / (nu * nv)), (nu, nv, False)


def b_cosine(g, grads, u, v, out, aux):
    nu, nv, degenerate = aux
    if degenerate:
        return
    c = float(out)
    if grads[0] is not None:
        grads[0] += g * (v / (nu * nv) - c * u / (nu * nu))
    if grads[1] is not None:
        grads[1] += g * (u / (nu * nv) - c * v / (nv * nv))


# ------------------------------------------------------------ fused kernels

def f_gru(x, h, wr, br, wz, bz, wn, bn):
    """One gated recurrent update; gates read the concatenated [x; h]."""
    cat1 = np.concatenate([x, h])
    r = f_sigmoid(wr @ cat1 + br)[0]
    z = f_sigmoid(wz @ cat1 + bz)[0]
    cat2 = np.concatenate([x, r * h])
    n = np.tanh(wn @ cat2 + bn)
    out = (1.0 - z) * n + z * h
    return out, (cat1, r, z, cat2, n)


def b_gru(g, grads, x, h, wr, br, wz, bz, wn, bn, out, aux):
    cat1, r, z, cat2, n = aux
    d = x.shape[0]

    dz = g * (h - n)
    dn = g * (1.0 - z)
    dh_direct = g * z

    dpre_n = dn * (1.0 - n * n)
    dcat2 = wn.T @ dpre_n
    dx = dcat2[:d].copy()
    drh = dcat2[d:]
    dr = drh * h
    dh = dh_direct + drh * r

    dpre_r = dr * r * (1.0 - r)
    dpre_z = dz * z * (1.0 - z)
    dcat1 = wr.T @ dpre_r + wz.T @ dpre_z
    dx += dcat1[:d]
    dh += dcat1[d:]

    if grads[0] is not None:
        grads[0] += dx
    if grads[1] is not None:
        grads[1] += dh
    if grads[2] is not None:
        grads[2] += np.outer(dpre_r, cat1)
    if grads[3] is not None:
        grads[3] += dpre_r
    if grads[4] is not None:
        grads[4] += np.outer(dpre_z, cat1)
    if grads[5] is not None:
        grads[5] += dpre_z
    if grads[6] is not None:
        grads[6] += np.outer(dpre_n, cat2)
    if grads[7] is not None:
        grads[7] += dpre_n


def _cos_matrix(x, w):
    """Cosines between every row of x and the vector w; zero norms give 0."""
    xn = np.linalg.norm(x, axis=1)
    wn = float(np.linalg.norm(w))
    if wn < NORM_EPS:
        return np.zeros(x.shape[0]), xn, wn
    denom = xn * wn
    raw = x @ w
    cos = np.where(xn < NORM_EPS, 0.0, raw / np.where(denom < NORM_EPS, 1.0, denom))
    return cos, xn, wn


def f_attr_match(x, w, tau):
    """Per attribute: sigmoid(tau * max_k cos(x_k, w_t)).

    x is the K x d token matrix, w the T x d attribute matrix, tau a
    scalar. Returns the T match scores; aux holds the winning token index
    per attribute (lowest index on ties) and cached norms.
    """
    t_n = w.shape[0]
    m = np.empty(t_n)
    pos = np.empty(t_n, dtype=np.int64)
    cos_best = np.empty(t_n)
    tau_f = float(tau)
    for t in range(t_n):
        cos, xn, wn = _cos_matrix(x, w[t])
        k = int(np.argmax(cos))
        pos[t] = k
        cos_best[t] = cos[k]
        m[t] = f_sigmoid(np.asarray(tau_f * cos[k]))[0]
    return m, (pos, cos_best)


def b_attr_match(g, grads, x, w, tau, out, aux):
    pos, cos_best = aux
    tau_f = float(tau)
    for t in range(w.shape[0]):
        gt = g[t]
        if gt == 0.0:
            continue
        k = int(pos[t])
        u = x[k]
        v = w[t]
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        mt = out[t]
        dcos_pre = gt * mt * (1.0 - mt)
        if grads[2] is not None:
            grads[2] += dcos_pre * cos_best[t]
        if nu < NORM_EPS or nv < NORM_EPS:
            continue
        dcos = dcos_pre * tau_f
        c = cos_best[t]
        if grads[0] is not None:
            grads[0][k] += dcos * (v / (nu * nv) - c * u / (nu * nu))
        if grads[1] is not None:
            grads[1][t] += dcos * (u / (nu * nv) - c * v / (nv * nv))


def f_exec_templates(m, programs):
    """Run every postfix tree program over the leaf scores m.

    Program opcodes: >= 0 pushes m[op], -1 applies AND (min), -2 applies
    OR (max). Ties keep the left operand, which in canonical templates is
    the lower leaf index. Returns the per-template scores; aux records the
    leaf each root score came from.
    """
    n = len(programs)
    s = np.empty(n)
    sel = np.empty(n, dtype=np.int64)
    for i, prog in enumerate(programs):
        stack_v = []
        stack_src = []
        for op in prog:
            if op >= 0:
                stack_v.append(m[op])
                stack_src.append(op)
            else:
                rv = stack_v.pop()
                rs = stack_src.pop()
                lv = stack_v.pop()
                ls = stack_src.pop()
                if op == -1:
                    keep_left = lv <= rv
                else:
                    keep_left = lv >= rv
                stack_v.append(lv if keep_left else rv)
                stack_src.append(ls if keep_left else rs)
        s[i] = stack_v[0]
        sel[i] = stack_src[0]
    return s, sel


def b_exec_templates(g, grads, m, out, aux, programs):
    if grads[0] is not None:
        for i in range(len(programs)):
            grads[0][aux[i]] += g[i]


def f_mix_scale(p, s, c):
    """sigmoid(c * logit(clamp(p . s))): mixture then certainty scaling."""
    u = float(np.dot(p, s))
    uc = min(max(u, LOGIT_EPS), 1.0 - LOGIT_EPS)
    lg = np.log(uc) - np.log1p(-uc)
    out = f_sigmoid(np.asarray(float(c) * lg))[0]
    clamped = (u <= LOGIT_EPS) or (u >= 1.0 - LOGIT_EPS)
    return np.asarray(out), (uc, lg, clamped)


def b_mix_scale(g, grads, p, s, c, out, aux):
    uc, lg, clamped = aux
    o = float(out)
    dpre = float(g) * o * (1.0 - o)
    if grads[2] is not None:
        grads[2] += dpre * lg
    if not clamped:
        du = dpre * float(c) / (uc * (1.0 - uc))
        if grads[0] is not None:
            grads[0] += du * s
        if grads[1] is not None:
            grads[1] += du * p
