"""Finite-difference scenario builders, one per tape primitive.

Each builder draws random inputs from `rng`, assembles a tape whose output
is a scalar, and returns (tape, output, leaves_to_check). Builders resample
internally when an input lands within TIE_EPS of a min/max/clamp tie, since
subgradients are not comparable to central differences there.
"""

import numpy as np

from clore.diffmath import Tape

TIE_EPS = 1e-5

# canonical postfix programs for the seven arity<=3 templates:
# opcode >= 0 pushes leaf, -1 applies AND (min), -2 applies OR (max)
PROGRAMS_T3 = (
    np.array([0], dtype=np.int64),
    np.array([0, 1, -1], dtype=np.int64),
    np.array([0, 1, -2], dtype=np.int64),
    np.array([0, 1, -1, 2, -1], dtype=np.int64),
    np.array([0, 1, -2, 2, -2], dtype=np.int64),
    np.array([0, 1, -1, 2, -2], dtype=np.int64),
    np.array([0, 1, -2, 2, -1], dtype=np.int64),
)


def _scalarize(tape, v, rng):
    if v.shape == ():
        return v
    if v.data.ndim == 1:
        probe = tape.leaf(rng.normal(size=v.shape), const=True)
        return tape.dot(v, probe)
    m = tape.mean(v)
    probe = tape.leaf(rng.normal(size=m.shape), const=True)
    return tape.dot(m, probe)


def _vec(rng, n=5):
    return rng.normal(size=n)


def _separated(rng, n, lo=0.0, hi=1.0):
    """Uniform values whose pairwise gaps all exceed TIE_EPS."""
    while True:
        v = rng.uniform(lo, hi, size=n)
        d = np.abs(v[:, None] - v[None, :])
        np.fill_diagonal(d, 1.0)
        if d.min() > 10 * TIE_EPS:
            return v


def build_add(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    b = t.leaf(_vec(rng))
    return t, _scalarize(t, t.add(a, b), rng), [a, b]


def build_add_const(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, _scalarize(t, t.add(a, float(rng.normal())), rng), [a]


def build_sub(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    b = t.leaf(_vec(rng))
    return t, _scalarize(t, t.sub(a, b), rng), [a, b]


def build_mul(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    b = t.leaf(_vec(rng))
    return t, _scalarize(t, t.mul(a, b), rng), [a, b]


def build_mul_scalar_broadcast(rng):
    t = Tape()
    a = t.leaf(float(rng.normal()))
    b = t.leaf(_vec(rng))
    return t, _scalarize(t, t.mul(b, a), rng), [a, b]


def build_mul_const(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, _scalarize(t, t.mul(a, float(rng.normal())), rng), [a]


def build_sigmoid(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, _scalarize(t, t.sigmoid(a), rng), [a]


def build_tanh(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, _scalarize(t, t.tanh(a), rng), [a]


def build_softplus(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, _scalarize(t, t.softplus(a), rng), [a]


def build_log(rng):
    t = Tape()
    a = t.leaf(rng.uniform(0.5, 2.0, size=5))
    return t, _scalarize(t, t.log(a), rng), [a]


def build_logit(rng):
    t = Tape()
    a = t.leaf(rng.uniform(0.05, 0.95, size=5))
    return t, _scalarize(t, t.logit(a), rng), [a]


def build_mean_vec(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, t.mean(a), [a]


def build_mean_mat(rng):
    t = Tape()
    a = t.leaf(rng.normal(size=(4, 3)))
    return t, _scalarize(t, t.mean(a), rng), [a]


def build_softmax(rng):
    t = Tape()
    a = t.leaf(_vec(rng))
    return t, _scalarize(t, t.softmax(a), rng), [a]


def build_reduce_min(rng):
    t = Tape()
    a = t.leaf(_separated(rng, 6, -1.0, 1.0))
    return t, t.reduce_min(a), [a]


def build_reduce_max(rng):
    t = Tape()
    a = t.leaf(_separated(rng, 6, -1.0, 1.0))
    return t, t.reduce_max(a), [a]


def build_pick(rng):
    t = Tape()
    a = t.leaf(_vec(rng, 6))
    return t, t.pick(a, int(rng.integers(0, 6))), [a]


def build_matvec(rng):
    t = Tape()
    m = t.leaf(rng.normal(size=(4, 3)))
    v = t.leaf(rng.normal(size=3))
    return t, _scalarize(t, t.matvec(m, v), rng), [m, v]


def build_vecmat(rng):
    t = Tape()
    v = t.leaf(rng.normal(size=4))
    m = t.leaf(rng.normal(size=(4, 3)))
    return t, _scalarize(t, t.vecmat(v, m), rng), [v, m]


def build_dot(rng):
    t = Tape()
    u = t.leaf(_vec(rng))
    v = t.leaf(_vec(rng))
    return t, t.dot(u, v), [u, v]


def build_concat(rng):
    t = Tape()
    a = t.leaf(_vec(rng, 3))
    b = t.leaf(_vec(rng, 2))
    c = t.leaf(_vec(rng, 4))
    return t, _scalarize(t, t.concat([a, b, c]), rng), [a, b, c]


def build_stack_rows(rng):
    t = Tape()
    vs = [t.leaf(_vec(rng, 4)) for _ in range(3)]
    return t, _scalarize(t, t.stack_rows(vs), rng), vs


def build_gather(rng):
    t = Tape()
    table = t.leaf(rng.normal(size=(6, 4)))
    ids = np.array([0, 2, 2, 5], dtype=np.int64)  # repeat tests scatter-add
    return t, _scalarize(t, t.gather(table, ids), rng), [table]


def build_cosine(rng):
    t = Tape()
    u = t.leaf(rng.normal(size=6) + 0.1)
    v = t.leaf(rng.normal(size=6) + 0.1)
    return t, t.cosine(u, v), [u, v]


def build_gru(rng):
    # modest scales keep gates off their saturated tails, where true
    # gradients sink below the finite-difference noise floor
    t = Tape()
    d = 4
    x = t.leaf(rng.normal(size=d) * 0.6)
    h = t.leaf(rng.normal(size=d) * 0.6)
    ws = [t.leaf(rng.normal(size=(d, 2 * d)) * 0.25) for _ in range(3)]
    bs = [t.leaf(rng.normal(size=d) * 0.25) for _ in range(3)]
    out = t.gru(x, h, ws[0], bs[0], ws[1], bs[1], ws[2], bs[2])
    return t, _scalarize(t, out, rng), [x, h] + ws + bs


def build_attr_match(rng):
    while True:
        xa = rng.normal(size=(5, 4))
        wa = rng.normal(size=(3, 4))
        ok = True
        for trow in range(3):
            w = wa[trow]
            cos = xa @ w / (np.linalg.norm(xa, axis=1) * np.linalg.norm(w))
            top2 = np.sort(cos)[-2:]
            if top2[1] - top2[0] < 10 * TIE_EPS:
                ok = False
                break
        if ok:
            break
    t = Tape()
    x = t.leaf(xa)
    w = t.leaf(wa)
    tau = t.leaf(rng.uniform(1.0, 6.0))
    return t, _scalarize(t, t.attr_match(x, w, tau), rng), [x, w, tau]


def build_exec_templates(rng):
    t = Tape()
    m = t.leaf(_separated(rng, 3, 0.05, 0.95))
    out = t.exec_templates(m, PROGRAMS_T3)
    return t, _scalarize(t, out, rng), [m]


def build_mix_scale(rng):
    t = Tape()
    praw = np.exp(rng.normal(size=4))
    p = t.leaf(praw / praw.sum())
    s = t.leaf(rng.uniform(0.1, 0.9, size=4))
    c = t.leaf(rng.uniform(0.3, 3.0))
    return t, t.mix_scale(p, s, c), [p, s, c]


BUILDERS = {
    "add": build_add,
    "add_const": build_add_const,
    "sub": build_sub,
    "mul": build_mul,
    "mul_scalar_broadcast": build_mul_scalar_broadcast,
    "mul_const": build_mul_const,
    "sigmoid": build_sigmoid,
    "tanh": build_tanh,
    "softplus": build_softplus,
    "log": build_log,
    "logit": build_logit,
    "mean_vec": build_mean_vec,
    "mean_mat": build_mean_mat,
    "softmax": build_softmax,
    "reduce_min": build_reduce_min,
    "reduce_max": build_reduce_max,
    "pick": build_pick,
    "matvec": build_matvec,
    "vecmat": build_vecmat,
    "dot": build_dot,
    "concat": build_concat,
    "stack_rows": build_stack_rows,
    "gather": build_gather,
    "cosine": build_cosine,
    "gru": build_gru,
    "attr_match": build_attr_match,
    "exec_templates": build_exec_templates,
    "mix_scale": build_mix_scale,
}
