"""Fourth-order finite-difference stencils on uniform grids."""
from functools import lru_cache

import numpy as np

from .errors import GridError


def fornberg_weights(x0, nodes, m):
    """Weights of the derivatives 0..m at `x0` from values at `nodes`.

    Fornberg's recursion; returns an array of shape (m + 1, len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@lru_cache(maxsize=None)
def _stencils(order, accuracy):
    """Integer-offset stencils: central for the interior, one-sided near edges."""
    half = (order + accuracy - 1) // 2
    width = 2 * half + 1
    central = fornberg_weights(0, np.arange(-half, half + 1), order)[order]
    one_sided = []
    npts = order + accuracy
    for i in range(half):
        offsets = np.arange(-i, npts - i)
        one_sided.append((offsets, fornberg_weights(0, offsets, order)[order]))
    return half, width, central, tuple(one_sided)


def derivative(values, h, axis=0, order=1, accuracy=4):
    """d^order/dx^order of uniformly sampled `values` along `axis`.

    Central stencils in the interior and one-sided stencils of the same
    accuracy at the ends.
    """
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    half, width, central, one_sided = _stencils(order, accuracy)
    need = max(width, order + accuracy)
    if n < need:
        raise GridError(f"need at least {need} samples along axis {axis}, got {n}",
                        samples=n, required=need)
    out = np.empty(f.shape, dtype=np.result_type(f, float))
    inner = np.zeros((n - 2 * half,) + f.shape[1:], dtype=out.dtype)
    for k, w in enumerate(central):
        if w != 0:
            inner += w * f[k:n - 2 * half + k]
    out[half:n - half] = inner
    for i, (offsets, w) in enumerate(one_sided):
        out[i] = np.tensordot(w, f[i + offsets], axes=(0, 0))
        out[n - 1 - i] = np.tensordot(w[::-1] * (-1) ** order,
                                      f[n - 1 - i - offsets[::-1]], axes=(0, 0))
    return np.moveaxis(out / h ** order, 0, axis)


@lru_cache(maxsize=None)
def _central_1d(order):
    # 4th-order central weights on offsets -half..half
    half = (order + 3) // 2
    offsets = np.arange(-half, half + 1)
    return offsets, fornberg_weights(0, offsets, order)[order]


def partial(func, x, y, nx, ny, h):
    """Central 4th-order estimate of d^(nx+ny) func / dx^nx dy^ny at (x, y).

    `func` is evaluated on broadcast arrays, so `x`, `y` may be arrays.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if nx == 0 and ny == 0:
        return func(x, y)
    ox, wx = _central_1d(nx) if nx else (np.array([0]), np.array([1.0]))
    oy, wy = _central_1d(ny) if ny else (np.array([0]), np.array([1.0]))
    total = 0.0
    for a, wa in zip(ox, wx):
        if wa == 0:
            continue
        for b, wb in zip(oy, wy):
            if wb == 0:
                continue
            total = total + wa * wb * func(x + a * h, y + b * h)
    return total / h ** (nx + ny)
