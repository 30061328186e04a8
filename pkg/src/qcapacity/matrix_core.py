"""Dense complex linear algebra for small tensor-product spaces.

Matrices are plain ``numpy`` complex arrays. Factor dimensions are tuples of
positive integers whose product equals the matrix dimension, listed in the
same order as the tensor factors (``(2, 4)`` for ``H_o (x) H_a``).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import _backend
from .errors import DimensionError, NotHermitianError

HERMITIAN_TOL = 1e-10
CLIP_TOL = 1e-12


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_dims(dim: int, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"invalid factor dimensions {dims}")
    if int(np.prod(dims)) != dim:
        raise DimensionError(f"factors {dims} do not multiply to {dim}")
    return dims


def kron(a, b) -> np.ndarray:
    """Tensor (Kronecker) product of two matrices or vectors."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def kron_all(factors: Iterable) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        out = np.kron(out, f)
    return out


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    The kept factors stay in their original order.
    """
    m = as_matrix(m)
    dims = check_dims(m.shape[0], dims)
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} factors")
    t = m.reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out_idx = keep + [k + n for k in keep]
    t = np.einsum(t, row + col, out_idx)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.asarray(t).reshape(d, d)


def partial_transpose(m, dims: Sequence[int], which: int = 0) -> np.ndarray:
    """Transpose factor ``which`` of a bipartite operator."""
    m = as_matrix(m)
    dims = check_dims(m.shape[0], dims)
    if len(dims) != 2:
        raise DimensionError("partial transpose needs exactly two factors")
    if which not in (0, 1):
        raise DimensionError(f"factor index {which} out of range")
    t = m.reshape(dims + dims)
    if which == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(m.shape)


def hermitize(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(h + h^dagger)/2`` after checking ``h`` is Hermitian within ``tol``."""
    h = as_matrix(h)
    dev = float(np.max(np.abs(h - h.conj().T)))
    if dev > tol:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3e}")
    return 0.5 * (h + h.conj().T)


def hermitian_eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching eigenvector columns."""
    h = hermitize(h)
    w, v = _backend.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def hermitian_eigenvalues(h) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix in descending order."""
    return hermitian_eigh(h)[0]


def hermitian_eigenvalues_batch(hs) -> np.ndarray:
    """Descending eigenvalues for a stack ``(N, d, d)`` of Hermitian matrices.

    No Hermiticity check; callers build the stack themselves.
    """
    hs = np.asarray(hs, dtype=np.complex128)
    hs = 0.5 * (hs + np.conj(np.swapaxes(hs, -1, -2)))
    return _backend.eigvalsh_batch(hs)[:, ::-1]


def clip_spectrum(w, tol: float = CLIP_TOL) -> np.ndarray:
    """Zero out eigenvalues in ``[-tol, 0)`` so entropy formulas stay finite."""
    w = np.array(w, dtype=np.float64, copy=True)
    w[(w < 0) & (w >= -tol)] = 0.0
    return w


def matrix_function(h, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply ``fn`` to the spectrum of Hermitian ``h``."""
    w, v = hermitian_eigh(h)
    return (v * fn(w)) @ v.conj().T


def trace_norm(m) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(hermitian_eigenvalues(m))))


def random_unitary(d: int, rng: np.random.Generator, rotations: int | None = None) -> np.ndarray:
    """Product of random complex Givens (Jacobi) rotations and phases."""
    u = np.diag(np.exp(2j * np.pi * rng.random(d)))
    for _ in range(rotations or 4 * d * d):
        p, q = rng.choice(d, size=2, replace=False)
        theta = rng.uniform(0, 2 * np.pi)
        phi = rng.uniform(0, 2 * np.pi)
        g = np.eye(d, dtype=np.complex128)
        c, s = np.cos(theta), np.sin(theta)
        g[p, p], g[q, q] = c, c
        g[p, q], g[q, p] = -s * np.exp(-1j * phi), s * np.exp(1j * phi)
        u = g @ u
    return u
