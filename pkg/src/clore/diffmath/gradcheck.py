"""Central finite-difference oracle for checking tape gradients.

The oracle only re-runs forward passes, so it is independent of every
backward kernel it is used to verify.
"""

import numpy as np


def numeric_gradient(tape, output, leaf, step=1e-6):
    """Central-difference d(output)/d(leaf), element by element."""
    base = leaf.data.copy()
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)
    n = flat.shape[0]
    work = base.copy()
    wflat = work.reshape(-1)
    bflat = base.reshape(-1)
    for i in range(n):
        wflat[i] = bflat[i] + step
        tape.set_data(leaf, work)
        tape.forward()
        f_plus = float(output.data)
        wflat[i] = bflat[i] - step
        tape.set_data(leaf, work)
        tape.forward()
        f_minus = float(output.data)
        wflat[i] = bflat[i]
        flat[i] = (f_plus - f_minus) / (2.0 * step)
    tape.set_data(leaf, base)
    tape.forward()
    return grad


def max_relative_error(tape, output, leaves, step=1e-6):
    """Largest per-leaf ||analytic - central difference|| / (||analytic|| + 1e-8).

    Norms are L2 over each leaf. An element-wise ratio would drown in the
    finite-difference rounding floor (~1e-10 at step 1e-6) whenever a true
    gradient entry is tiny, so the vector norm is the meaningful comparison.
    """
    tape.backward(output)
    analytic = {leaf.idx: (np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy())
                for leaf in leaves}
    worst = 0.0
    for leaf in leaves:
        fd = numeric_gradient(tape, output, leaf, step=step)
        an = analytic[leaf.idx]
        rel = np.linalg.norm(an - fd) / (np.linalg.norm(an) + 1e-8)
        worst = max(worst, float(rel))
    return worst
