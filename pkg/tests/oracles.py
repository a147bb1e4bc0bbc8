"""Independent reference implementations used only by the tests.

These deliberately avoid the production algorithms: the isotonic reference
runs projected gradient on the dual of the projection problem (so it never
calls the pool-adjacent-violators routine it checks), the fused-lasso
reference runs projected gradient on the box-constrained dual, and network
gradients are approximated by central finite differences.
"""

from __future__ import annotations

import numpy as np


def _diff_t(u):
    """Adjoint of first differences: (D^T u)_j = u_{j-1} - u_j (edges padded)."""
    out = np.zeros((u.shape[0] + 1,) + u.shape[1:])
    out[:-1] -= u
    out[1:] += u
    return out


def isotonic_oracle_batch(vectors, step: float = 0.5, max_iter: int = 10 ** 6):
    """Projection onto the nondecreasing cone by dual projected gradient.

    Solves min_{mu >= 0} 0.5 ||v + D^T mu||^2 per vector; theta = v + D^T mu
    is the projection.  All vectors must share one length and are iterated
    as a matrix.  Stops early at an exact floating-point fixed point (or a
    two-cycle, which at float resolution is the same accuracy).
    """
    V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    n = V.shape[0]
    if n == 1:
        return [V[:, j].copy() for j in range(V.shape[1])]
    mu = np.zeros((n - 1, V.shape[1]))
    prev = None
    for _ in range(max_iter):
        theta = V + _diff_t(mu)
        grad = np.diff(theta, axis=0)  # gradient of the dual objective
        mu_new = np.maximum(0.0, mu - step * grad)
        if np.array_equal(mu_new, mu):
            break
        if prev is not None and np.array_equal(mu_new, prev):
            break  # exact two-cycle; iterates differ below resolution
        prev = mu
        mu = mu_new
    theta = V + _diff_t(mu)
    return [theta[:, j] for j in range(theta.shape[1])]


def isotonic_oracle(v, step: float = 0.5, max_iter: int = 10 ** 6):
    return isotonic_oracle_batch([v], step=step, max_iter=max_iter)[0]


def fused_lasso_oracle(v, lam: float, step: float = 0.5,
                       obj_tol: float = 1e-12, max_iter: int = 500_000):
    """Fused lasso by projected gradient on the dual box ||u||_inf <= lam.

    theta = v - D^T u; iterates until the primal objective changes by less
    than obj_tol over ten consecutive iterations (or an exact fixed point).
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if n == 1 or lam == 0.0:
        return v.copy()
    u = np.zeros(n - 1)

    def primal(theta):
        r = v - theta
        return 0.5 * r @ r + lam * np.abs(np.diff(theta)).sum()

    theta = v - _diff_t(u[:, None])[:, 0]
    last = primal(theta)
    calm = 0
    for _ in range(max_iter):
        grad = -np.diff(theta)  # gradient of the dual objective in u
        u_new = np.clip(u - step * grad, -lam, lam)
        if np.array_equal(u_new, u):
            break
        u = u_new
        theta = v - _diff_t(u[:, None])[:, 0]
        val = primal(theta)
        if abs(val - last) < obj_tol:
            calm += 1
            if calm >= 10:
                break
        else:
            calm = 0
        last = val
    return theta


def finite_difference_grads(params, x, targets, loss: str, eps: float = 1e-5):
    """Central-difference gradients matching relunet.loss_and_grads layout."""
    from cdfreg.relunet import loss_and_grads

    def value_at(p):
        return loss_and_grads(p, x, targets, loss)[0]

    grads = []
    for li, (w, b) in enumerate(params):
        gw = np.zeros_like(w)
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            wp = [(wi.copy(), bi.copy()) for wi, bi in params]
            wp[li][0][idx] += eps
            up = value_at(wp)
            wp[li][0][idx] -= 2 * eps
            down = value_at(wp)
            gw[idx] = (up - down) / (2 * eps)
        gb = np.zeros_like(b)
        for j in range(b.size):
            wp = [(wi.copy(), bi.copy()) for wi, bi in params]
            wp[li][1][j] += eps
            up = value_at(wp)
            wp[li][1][j] -= 2 * eps
            down = value_at(wp)
            gb[j] = (up - down) / (2 * eps)
        grads.append((gw, gb))
    return grads


def min_hidden_preactivation(params, x):
    """Smallest |pre-activation| over all hidden units and batch rows."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = x
    worst = np.inf
    for i, (w, b) in enumerate(params):
        z = a @ w + b
        if i < len(params) - 1:
            worst = min(worst, float(np.min(np.abs(z))))
            a = np.maximum(z, 0.0)
    return worst
