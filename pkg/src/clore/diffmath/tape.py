"""Reverse-mode tape over 64-bit numpy arrays.

A Tape records primitives eagerly: building an op runs its forward kernel
immediately, so graph construction doubles as the first forward pass.
Leaves may be rebound afterwards and the whole tape re-executed with
``forward`` (used by the finite-difference oracle), and ``backward``
accumulates gradients for every non-const leaf. Scalars are shape-()
arrays; vectors 1-D; matrices 2-D. No broadcasting beyond scalar * array.

Tapes are single-writer. Concurrent evaluation needs independent tapes.
"""

import numpy as np

from ..errors import NonFiniteError, ShapeMismatchError, TapeStateError
from . import kernels

_OP_CACHE = {}


def _dispatch(backend):
    table = _OP_CACHE.get(backend)
    if table is None:
        names = [
            "add", "add_const", "sub", "mul", "mul_const", "sigmoid", "tanh",
            "softplus", "log", "logit", "mean", "softmax", "reduce_min",
            "reduce_max", "pick", "matvec", "vecmat", "dot", "concat",
            "stack_rows", "gather", "cosine", "gru", "attr_match",
            "exec_templates", "mix_scale",
        ]
        table = {n: (getattr(backend, "f_" + n), getattr(backend, "b_" + n)) for n in names}
        _OP_CACHE[backend] = table
    return table


class Value:
    """One tape slot: data plus a gradient buffer of the same shape."""

    __slots__ = ("tape", "idx", "data", "grad")

    def __init__(self, tape, idx, data):
        self.tape = tape
        self.idx = idx
        self.data = data
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Value(idx={self.idx}, shape={self.data.shape})"


class _Node:
    __slots__ = ("op", "inputs", "out", "aux", "consts")

    def __init__(self, op, inputs, out, aux, consts):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.aux = aux
        self.consts = consts


def _as_array(data):
    a = np.asarray(data, dtype=np.float64)
    if a.ndim > 0 and not a.flags["C_CONTIGUOUS"]:
        a = np.ascontiguousarray(a)  # ascontiguousarray would promote 0-d to 1-d
    return a


class Tape:
    def __init__(self, backend=None):
        self.backend = backend if backend is not None else kernels.backend
        self._ops = _dispatch(self.backend)
        self.values = []
        self.nodes = []
        self._producer = {}
        self._named_inputs = {}
        self._named_outputs = {}
        self._no_grad = set()
        self._stale = False

    # ------------------------------------------------------------ leaves

    def leaf(self, data, name=None, const=False):
        v = Value(self, len(self.values), _as_array(data))
        self.values.append(v)
        if const:
            self._no_grad.add(v.idx)
        if name is not None:
            if name in self._named_inputs:
                raise TapeStateError(f"duplicate input name {name!r}")
            self._named_inputs[name] = v
        return v

    def constant(self, data):
        return self.leaf(data, const=True)

    def set_data(self, value, data):
        arr = _as_array(data)
        if arr.shape != value.data.shape:
            raise ShapeMismatchError(value.idx, f"rebind shape {arr.shape} != {value.data.shape}")
        value.data = arr
        self._stale = True

    def mark_output(self, name, value):
        self._named_outputs[name] = value.idx

    def node_aux(self, value):
        """Aux record of the node that produced `value` (argmax indices etc.)."""
        node = self._producer.get(value.idx)
        if node is None:
            raise TapeStateError("value was not produced by a node")
        return node.aux

    # --------------------------------------------------------- recording

    def _record(self, op, inputs, consts=()):
        fwd = self._ops[op][0]
        node_id = len(self.values)
        args = [v.data for v in inputs] + list(consts)
        out_data, aux = fwd(*args)
        out_data = np.asarray(out_data)
        if not self.backend.allfinite(out_data):
            raise NonFiniteError(node_id, op)
        out = Value(self, node_id, out_data)
        self.values.append(out)
        node = _Node(op, tuple(v.idx for v in inputs), node_id, aux, consts)
        self.nodes.append(node)
        self._producer[node_id] = node
        return out

    def _next_id(self):
        return len(self.values)

    def _check(self, ok, msg):
        if not ok:
            raise ShapeMismatchError(self._next_id(), msg)

    # -------------------------------------------------------- primitives

    def add(self, a, b):
        if isinstance(b, Value):
            self._check(a.shape == b.shape, f"add {a.shape} vs {b.shape}")
            return self._record("add", (a, b))
        return self._record("add_const", (a,), (float(b),))

    def sub(self, a, b):
        self._check(a.shape == b.shape, f"sub {a.shape} vs {b.shape}")
        return self._record("sub", (a, b))

    def mul(self, a, b):
        if isinstance(b, Value):
            self._check(a.shape == b.shape or a.shape == () or b.shape == (),
                        f"mul {a.shape} vs {b.shape}")
            return self._record("mul", (a, b))
        return self._record("mul_const", (a,), (float(b),))

    def sigmoid(self, a):
        return self._record("sigmoid", (a,))

    def tanh(self, a):
        return self._record("tanh", (a,))

    def softplus(self, a):
        return self._record("softplus", (a,))

    def log(self, a):
        return self._record("log", (a,))

    def logit(self, a):
        return self._record("logit", (a,))

    def mean(self, a):
        self._check(a.data.ndim in (1, 2) and a.data.shape[0] > 0, f"mean of shape {a.shape}")
        return self._record("mean", (a,))

    def softmax(self, v):
        self._check(v.data.ndim == 1, f"softmax of shape {v.shape}")
        return self._record("softmax", (v,))

    def reduce_min(self, v):
        self._check(v.data.ndim == 1 and v.data.shape[0] > 0, f"reduce_min of shape {v.shape}")
        return self._record("reduce_min", (v,))

    def reduce_max(self, v):
        self._check(v.data.ndim == 1 and v.data.shape[0] > 0, f"reduce_max of shape {v.shape}")
        return self._record("reduce_max", (v,))

    def pick(self, v, i):
        self._check(v.data.ndim == 1 and 0 <= i < v.data.shape[0], f"pick {i} from {v.shape}")
        return self._record("pick", (v,), (int(i),))

    def matvec(self, m, v):
        self._check(m.data.ndim == 2 and v.data.ndim == 1 and m.data.shape[1] == v.data.shape[0],
                    f"matvec {m.shape} @ {v.shape}")
        return self._record("matvec", (m, v))

    def vecmat(self, v, m):
        self._check(m.data.ndim == 2 and v.data.ndim == 1 and m.data.shape[0] == v.data.shape[0],
                    f"vecmat {v.shape} @ {m.shape}")
        return self._record("vecmat", (v, m))

    def dot(self, u, v):
        self._check(u.data.ndim == 1 and u.shape == v.shape, f"dot {u.shape} . {v.shape}")
        return self._record("dot", (u, v))

    def concat(self, vs):
        self._check(len(vs) > 0 and all(v.data.ndim <= 1 for v in vs),
                    "concat needs scalar or 1-D parts")
        return self._record("concat", tuple(vs))

    def stack_rows(self, vs):
        self._check(len(vs) > 0 and all(v.shape == vs[0].shape and v.data.ndim == 1 for v in vs),
                    "stack_rows needs equal 1-D parts")
        return self._record("stack_rows", tuple(vs))

    def gather(self, table, ids):
        ids = np.asarray(ids, dtype=np.int64)
        self._check(table.data.ndim == 2, f"gather from shape {table.shape}")
        self._check(ids.ndim == 1 and (len(ids) == 0 or (ids.min() >= 0 and ids.max() < table.data.shape[0])),
                    "gather ids out of range")
        return self._record("gather", (table,), (ids,))

    def cosine(self, u, v):
        self._check(u.data.ndim == 1 and u.shape == v.shape, f"cosine {u.shape} vs {v.shape}")
        return self._record("cosine", (u, v))

    def gru(self, x, h, wr, br, wz, bz, wn, bn):
        d = x.data.shape[0]
        ok = (x.data.ndim == 1 and h.shape == (d,)
              and wr.shape == (d, 2 * d) and wz.shape == (d, 2 * d) and wn.shape == (d, 2 * d)
              and br.shape == (d,) and bz.shape == (d,) and bn.shape == (d,))
        self._check(ok, "gru parameter shapes inconsistent with input")
        return self._record("gru", (x, h, wr, br, wz, bz, wn, bn))

    def attr_match(self, x, w, tau):
        self._check(x.data.ndim == 2 and w.data.ndim == 2 and x.data.shape[1] == w.data.shape[1],
                    f"attr_match {x.shape} vs {w.shape}")
        self._check(tau.shape == (), "attr_match tau must be scalar")
        return self._record("attr_match", (x, w, tau))

    def exec_templates(self, m, programs):
        self._check(m.data.ndim == 1, f"exec_templates over shape {m.shape}")
        for prog in programs:
            leaves = [op for op in prog if op >= 0]
            self._check(all(op < m.data.shape[0] for op in leaves), "template leaf index out of range")
        return self._record("exec_templates", (m,), (programs,))

    def mix_scale(self, p, s, c):
        self._check(p.shape == s.shape and p.data.ndim == 1, f"mix_scale {p.shape} vs {s.shape}")
        self._check(c.shape == (), "mix_scale certainty must be scalar")
        return self._record("mix_scale", (p, s, c))

    # --------------------------------------------------- forward/backward

    def forward(self, **rebind):
        """Re-execute the whole tape, optionally rebinding named leaves.

        Returns the named outputs. Raises NonFiniteError or
        ShapeMismatchError with the offending node id.
        """
        for name, arr in rebind.items():
            if name not in self._named_inputs:
                raise TapeStateError(f"unknown input {name!r}")
            self.set_data(self._named_inputs[name], arr)
        for node in self.nodes:
            fwd = self._ops[node.op][0]
            args = [self.values[i].data for i in node.inputs] + list(node.consts)
            out_data, aux = fwd(*args)
            out_data = np.asarray(out_data)
            if not self.backend.allfinite(out_data):
                raise NonFiniteError(node.out, node.op)
            self.values[node.out].data = out_data
            node.aux = aux
        self._stale = False
        return {name: self.values[i] for name, i in self._named_outputs.items()}

    def backward(self, output):
        """Accumulate gradients of `output` (a scalar) into every reachable
        non-const value. Returns {name: grad} for the named leaves."""
        if self._stale:
            raise TapeStateError("inputs were rebound; run forward before backward")
        if output.shape != ():
            raise TapeStateError("backward requires a scalar output")

        reachable = bytearray(len(self.values))
        reachable[output.idx] = 1
        for node in reversed(self.nodes):
            if reachable[node.out]:
                for i in node.inputs:
                    reachable[i] = 1

        for v in self.values:
            if reachable[v.idx] and v.idx not in self._no_grad:
                v.grad = np.zeros_like(v.data)
            else:
                v.grad = None
        output.grad = np.ones_like(output.data)

        for node in reversed(self.nodes):
            out_v = self.values[node.out]
            if out_v.grad is None:
                continue
            bwd = self._ops[node.op][1]
            ins = [self.values[i] for i in node.inputs]
            grads = [v.grad for v in ins]
            args = [v.data for v in ins] + [out_v.data, node.aux] + list(node.consts)
            bwd(out_v.grad, grads, *args)

        return {name: v.grad for name, v in self._named_inputs.items()}

    def zero_grad(self):
        for v in self.values:
            v.grad = None
