"""Pure-Python (numpy) cyclic Jacobi eigensolver.

Fallback for the compiled ``_jacobi`` extension. The batched routine applies
each (p, q) rotation to the whole stack at once, so it stays usable on the
million-matrix grids of the additivity scan.
"""

from __future__ import annotations

import numpy as np


def _rotation(app, aqq, apq):
    g = np.abs(apq)
    safe = g > 1e-300
    gs = np.where(safe, g, 1.0)
    ph = np.where(safe, apq / gs, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tau = (aqq - app) / (2.0 * gs)
        root = np.sqrt(1.0 + tau * tau)
        t = np.where(tau >= 0.0, 1.0 / (tau + root), -1.0 / (-tau + root))
    t = np.where(safe, t, 0.0)
    cs = 1.0 / np.sqrt(1.0 + t * t)
    sn = t * cs
    return g, ph, t, cs, sn


def _sweep(a, v=None):
    n = a.shape[-1]
    for p in range(n - 1):
        for q in range(p + 1, n):
            app = a[..., p, p].real.copy()
            aqq = a[..., q, q].real.copy()
            g, ph, t, cs, sn = _rotation(app, aqq, a[..., p, q])
            cs_ = cs[..., None]
            sn_ = sn[..., None]
            phc = np.conj(ph)[..., None]
            x = a[..., :, p].copy()
            y = a[..., :, q]
            a[..., :, p] = cs_ * x - sn_ * phc * y
            a[..., :, q] = sn_ * x + cs_ * phc * y
            x = a[..., p, :].copy()
            y = a[..., q, :]
            a[..., p, :] = cs_ * x - sn_ * ph[..., None] * y
            a[..., q, :] = sn_ * x + cs_ * ph[..., None] * y
            a[..., p, q] = 0.0
            a[..., q, p] = 0.0
            a[..., p, p] = app - t * g
            a[..., q, q] = aqq + t * g
            if v is not None:
                x = v[..., :, p].copy()
                y = v[..., :, q]
                v[..., :, p] = cs_ * x - sn_ * phc * y
                v[..., :, q] = sn_ * x + cs_ * phc * y


def _off_mass(a):
    n = a.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[..., mask]) ** 2, axis=-1))


def eigh(h, tol=1e-14, max_sweeps=100):
    """Eigen-decomposition of one Hermitian matrix: ``(w, V)``, ``w`` ascending."""
    a = np.array(h, dtype=np.complex128, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    thresh = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        if _off_mass(a) < thresh:
            break
        _sweep(a, v)
    else:
        if _off_mass(a) >= thresh:
            raise ArithmeticError("Jacobi sweeps did not converge")
    w = np.real(np.diagonal(a)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvalsh_batch(hs, tol=1e-14, max_sweeps=100):
    """Ascending eigenvalues for a stack of Hermitian matrices of shape (N, d, d)."""
    a = np.array(hs, dtype=np.complex128, copy=True)
    if a.shape[0] == 0:
        return np.empty(a.shape[:2], dtype=np.float64)
    thresh = tol * np.maximum(1.0, np.linalg.norm(a, axis=(-2, -1)))
    active = np.arange(a.shape[0])
    for _ in range(max_sweeps):
        sub = a[active]
        done = _off_mass(sub) < thresh[active]
        active = active[~done]
        if active.size == 0:
            break
        sub = a[active]
        _sweep(sub)
        a[active] = sub
    else:
        if np.any(_off_mass(a[active]) >= thresh[active]):
            raise ArithmeticError(
                f"Jacobi sweeps did not converge for {active.size} matrices")
    out = np.real(np.diagonal(a, axis1=-2, axis2=-1)).copy()
    out.sort(axis=1)
    return out
