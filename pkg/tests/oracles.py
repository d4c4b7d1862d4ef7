"""Independent reference implementations used to check the fast paths.

These stay deliberately naive: explicit loops, finite differences and
grid searches that are slow but easy to trust.
"""

import numpy as np

from bippt.objective import objective_f


def pt_reference(a, dims, subsystems):
    """Partial transpose via an explicit double loop over multi-indices."""
    dims = tuple(dims)
    d = int(np.prod(dims))
    sel = {s - 1 for s in subsystems}
    out = np.zeros_like(a)
    for i in range(d):
        for j in range(d):
            im = list(np.unravel_index(i, dims))
            jm = list(np.unravel_index(j, dims))
            for k in sel:
                im[k], jm[k] = jm[k], im[k]
            out[np.ravel_multi_index(im, dims), np.ravel_multi_index(jm, dims)] = a[i, j]
    return out


def fd_grad_x(x, y, rho, h=1e-6):
    """Central finite differences of the objective in every component entry."""
    out = np.zeros_like(x.blocks)
    base = x.blocks
    for i in range(x.m):
        for r in range(x.d):
            for c in range(x.d):
                up = base.copy()
                up[i, r, c] += h
                dn = base.copy()
                dn[i, r, c] -= h
                out[i, r, c] = (
                    objective_f(x.like(up), y, rho) - objective_f(x.like(dn), y, rho)
                ) / (2 * h)
    return out


def fd_grad_y(x, y, rho, h=1e-6):
    out = np.zeros_like(y)
    for i in range(y.size):
        up = y.copy()
        up[i] += h
        dn = y.copy()
        dn[i] -= h
        out[i] = (objective_f(x, up, rho) - objective_f(x, dn, rho)) / (2 * h)
    return out


def simplex_grid_min(qp, coarse=1e-2, fine=1e-3):
    """Two-stage grid search over the m=3 simplex."""
    best, best_y = np.inf, None
    steps = int(round(1.0 / coarse))
    for i in range(steps + 1):
        for j in range(steps - i + 1):
            y = np.array([i * coarse, j * coarse, 1.0 - (i + j) * coarse])
            val = qp.objective(y)
            if val < best:
                best, best_y = val, y
    lo = np.maximum(best_y - coarse, 0.0)
    hi = np.minimum(best_y + coarse, 1.0)
    for a in np.arange(lo[0], hi[0] + fine / 2, fine):
        for b in np.arange(lo[1], hi[1] + fine / 2, fine):
            c = 1.0 - a - b
            if c < -1e-12 or c > 1.0:
                continue
            y = np.array([a, b, max(c, 0.0)])
            val = qp.objective(y)
            if val < best:
                best, best_y = val, y
    return best, best_y
