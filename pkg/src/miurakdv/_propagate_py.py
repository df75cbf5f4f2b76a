"""NumPy fallback for the compiled propagation kernels.

Cell products are formed by pairwise tree reduction, vectorized over both
cells and spectral points, with per-product rescaling to avoid overflow.
"""
import numpy as np

_CHUNK = 512


def _cell_matrices(cells, z):
    p, q0, s0, s1, a, b = (cells[:, i][:, None] for i in range(6))
    w = s0 + s1 * z[None, :]
    d = p * p + q0 * w
    s = np.sqrt(d.astype(complex))
    small = np.abs(s) < 1e-4
    safe = np.where(small, 1.0, s)
    ch = np.where(small, 1.0 + d / 2.0 + d * d / 24.0, np.cosh(s))
    sh = np.where(small, 1.0 + d / 6.0 + d * d / 120.0, np.sinh(s) / safe)
    e11 = ch + sh * p
    e12 = sh * q0
    e21 = sh * w
    e22 = ch - sh * p
    e11 = e11 + a * e12
    e21 = e21 + a * e22
    m = np.empty(e11.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = e11
    m[..., 0, 1] = e12
    m[..., 1, 0] = e21 - b * e11
    m[..., 1, 1] = e22 - b * e12
    return m


def _reduce(mats):
    """Ordered product ``M[n-1] @ ... @ M[0]`` with a running log scale."""
    logs = np.zeros(mats.shape[:-2])
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            eye = np.broadcast_to(np.eye(2, dtype=complex), (1,) + mats.shape[1:])
            mats = np.concatenate([mats, eye])
            logs = np.concatenate([logs, np.zeros((1,) + logs.shape[1:])])
        prod = mats[1::2] @ mats[0::2]
        logs = logs[1::2] + logs[0::2]
        sc = np.max(np.abs(prod.real) + np.abs(prod.imag), axis=(-2, -1))
        sc = np.where(sc > 0, sc, 1.0)
        mats = prod / sc[..., None, None]
        logs = logs + np.log(sc)
    return mats[0], logs[0]


def transfer_matrices(cells, z):
    cells = np.asarray(cells, dtype=float).reshape(-1, 6)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty((z.size, 2, 2), dtype=complex)
    logs = np.zeros(z.size)
    if cells.shape[0] == 0:
        out[:] = np.eye(2)
        return out, logs
    for i0 in range(0, z.size, _CHUNK):
        sl = slice(i0, i0 + _CHUNK)
        out[sl], logs[sl] = _reduce(_cell_matrices(cells, z[sl]))
    return out, logs


def propagate_state(cells, z, y0):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    y0 = np.broadcast_to(np.asarray(y0, dtype=complex), (z.size, 2))
    T, _ = transfer_matrices(cells, z)
    y = np.einsum("nij,nj->ni", T, y0)
    sc = np.max(np.abs(y.real) + np.abs(y.imag), axis=1)
    return y / np.where(sc > 0, sc, 1.0)[:, None]
