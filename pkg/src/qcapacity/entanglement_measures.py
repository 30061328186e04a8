"""Two-qubit concurrence and E_F, logarithmic negativity, the Pauli-channel
E_C / E_N gap test, and antisymmetric-state quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidStateError
from .matrix_core import (
    hermitian_eigenvalues,
    hermitize,
    partial_transpose,
    trace_norm,
)
from .quantum_info import binary_entropy, density_matrix, shannon_entropy
from .qubit_channel import king_ruskai, stinespring_pair_state

SYSY = np.array([[0, 0, 0, -1],
                 [0, 0, 1, 0],
                 [0, 1, 0, 0],
                 [-1, 0, 0, 0]], dtype=np.complex128)

# Eigenvalues of rho at or below this are treated as exact zeros before the
# square root; rounding noise there would otherwise leak into the concurrence
# at the square-root scale.
RANK_TOL = 1e-14


def _two_qubit(rho) -> np.ndarray:
    m = np.asarray(rho.matrix if hasattr(rho, "matrix") else rho, dtype=np.complex128)
    if m.shape != (4, 4):
        raise DimensionError(f"expected a 2x2 two-qubit operator, got shape {m.shape}")
    return m


def spin_flip(rho) -> np.ndarray:
    """(sigma_y (x) sigma_y) rho^T (sigma_y (x) sigma_y)."""
    m = _two_qubit(rho)
    return SYSY @ m.T @ SYSY


def concurrence(rho) -> float:
    """max(0, l1 - l2 - l3 - l4) over square roots of the spectrum of rho rho~.

    With rho = X X^dagger, the spectrum of rho rho~ equals that of
    tau^dagger tau for tau = X^T (sigma_y (x) sigma_y) X, so the l_i are the
    singular values of tau.
    """
    return float(concurrence_batch(hermitize(_two_qubit(rho))[None])[0])


def eof_from_concurrence(c: float) -> float:
    c = min(1.0, max(0.0, c))
    return binary_entropy((1.0 - math.sqrt(1.0 - c * c)) / 2.0)


def eof_two_qubit(rho) -> float:
    """Entanglement of formation of a two-qubit state, in ebits."""
    return eof_from_concurrence(concurrence(rho))


def concurrence_batch(rhos: np.ndarray) -> np.ndarray:
    """Concurrence for a stack ``(N, 4, 4)`` of two-qubit density matrices."""
    rhos = np.asarray(rhos, dtype=np.complex128)
    rhos = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
    w, v = np.linalg.eigh(rhos)
    x = v * np.sqrt(np.where(w > RANK_TOL, w, 0.0))[..., None, :]
    tau = np.swapaxes(x, -1, -2) @ SYSY @ x
    lam = np.linalg.svd(tau, compute_uv=False)
    return np.maximum(0.0, lam[:, 0] - lam[:, 1] - lam[:, 2] - lam[:, 3])


def eof_batch(c: np.ndarray) -> np.ndarray:
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    z = (1.0 - np.sqrt(1.0 - c * c)) / 2.0
    out = np.zeros_like(z)
    nz = (z > 0) & (z < 1)
    zz = z[nz]
    out[nz] = -zz * np.log2(zz) - (1 - zz) * np.log2(1 - zz)
    return out


def log_negativity(rho, dims: Sequence[int]) -> float:
    """log2 of the trace norm of the partial transpose (first factor)."""
    m = np.asarray(density_matrix(rho, dims).matrix)
    if len(tuple(dims)) != 2:
        raise DimensionError("logarithmic negativity needs a bipartition")
    return max(0.0, math.log2(trace_norm(partial_transpose(m, dims, 0))))


# -- Pauli-channel pair states: E_N versus E_C ----------------------------------

def gap_polynomial(p0: float, px: float, py: float, pz: float) -> np.ndarray:
    """Coefficients (highest first) of t^4 - t^3 + 4 e3 t - 16 p0 px py pz."""
    e3 = p0 * px * py + p0 * px * pz + p0 * py * pz + px * py * pz
    return np.array([1.0, -1.0, 0.0, 4.0 * e3, -16.0 * p0 * px * py * pz])


def _negative_root(coeffs: np.ndarray) -> float:
    """Negative root t0 of f(2t) on [-1/2, 0); 0.0 when f(2t) has none there."""
    g = lambda t: float(np.polyval(coeffs, 2.0 * t))
    grid = np.concatenate([np.linspace(-0.5, -1e-3, 500), -np.geomspace(1e-3, 1e-16, 200)])
    vals = np.array([g(t) for t in grid])
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    exact = np.nonzero(vals == 0.0)[0]
    if sign_change.size == 0:
        return float(grid[exact[0]]) if exact.size else 0.0
    i = sign_change[-1]  # closest to zero
    lo, hi = grid[i], grid[i + 1]
    glo = vals[i]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        gm = g(mid)
        if gm == 0.0:
            return float(mid)
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return float(0.5 * (lo + hi))


@dataclass(frozen=True)
class GapReport:
    p: tuple[float, float, float, float]
    t0: float
    e_n: float
    e_c: float
    condition_value: float
    gap_holds: bool
    trace_norm_pt: float

    def as_dict(self) -> dict:
        return {
            "p": list(self.p),
            "t0": self.t0,
            "e_n": self.e_n,
            "e_c": self.e_c,
            "condition_value": self.condition_value,
            "gap_holds": self.gap_holds,
            "trace_norm_pt": self.trace_norm_pt,
        }


def gap_condition_value(p0: float, px: float, py: float, pz: float) -> float:
    """f(-(2^H - 1)/2) with H = H(p0 + pz, px + py); positive means E_N < E_C."""
    h = binary_entropy(min(1.0, max(0.0, p0 + pz)))
    return float(np.polyval(gap_polynomial(p0, px, py, pz), -(2.0 ** h - 1.0) / 2.0))


def gap_condition(p0: float, px: float, py: float, pz: float,
                  check_king_ruskai: bool = True) -> GapReport:
    """Compare E_N and E_C for the equal mixture of the Stinespring pair states."""
    p = (float(p0), float(px), float(py), float(pz))
    if any(v < -1e-12 for v in p) or abs(sum(p) - 1.0) > 1e-12:
        raise InvalidStateError(f"{p} is not a probability vector")
    if check_king_ruskai and not king_ruskai(*p):
        raise ValueError(f"{p} violates p0+pz-px-py >= |p0+py-px-pz|, |p0+px-py-pz|")
    t0 = _negative_root(gap_polynomial(*p))
    e_n = math.log2(1.0 - 4.0 * t0)
    e_c = binary_entropy(min(1.0, max(0.0, p[0] + p[3])))
    cond = gap_condition_value(*p)
    rho = stinespring_pair_state(*p, 0.5)
    tn = trace_norm(partial_transpose(rho.matrix, (2, 4), 0))
    return GapReport(p, t0, e_n, e_c, cond, bool(cond > 0), tn)


def gap_family(u: float, v: float) -> tuple[float, float, float, float]:
    """(p0, px, py, pz) = (u/2, (1 - v)/2, v/2, (1 - u)/2)."""
    return (u / 2.0, (1.0 - v) / 2.0, v / 2.0, (1.0 - u) / 2.0)


# -- antisymmetric states --------------------------------------------------------

def antisym_lower_bound(d: int) -> float:
    """log2(d / (d - 1))."""
    if d < 2:
        raise ValueError("d must be at least 2")
    return math.log2(d / (d - 1))


def antisym_basis(d: int) -> np.ndarray:
    """Rows (|ij> - |ji>)/sqrt 2 for i < j, in lexicographic order."""
    rows = []
    for i in range(d):
        for j in range(i + 1, d):
            v = np.zeros(d * d, dtype=np.complex128)
            v[i * d + j] = 1 / math.sqrt(2)
            v[j * d + i] = -1 / math.sqrt(2)
            rows.append(v)
    return np.array(rows)


def random_antisym_state(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Complex-Gaussian state on the n-fold tensor power of the antisymmetric space.

    Factor order is (A1, B1, A2, B2, ...), each of dimension d.
    """
    basis = antisym_basis(d)
    m = basis.shape[0]
    coeff = rng.normal(size=(m,) * n) + 1j * rng.normal(size=(m,) * n)
    coeff /= np.linalg.norm(coeff)
    out = coeff
    for _ in range(n):
        # contract one antisym index into a (d*d) pair index
        out = np.tensordot(out, basis, axes=([0], [0]))
    return out.reshape(-1)


def antisym_residual(psi: np.ndarray, d: int, n: int) -> float:
    """Norm of the component of psi outside the antisymmetric tensor power."""
    basis = antisym_basis(d)
    proj = basis.T @ basis.conj()  # projector on one pair
    t = np.asarray(psi, dtype=np.complex128).reshape((d * d,) * n)
    for k in range(n):
        t = np.moveaxis(np.tensordot(proj, t, axes=([1], [k])), 0, k)
    return float(np.linalg.norm(t.reshape(-1) - np.asarray(psi).reshape(-1)))


def max_reduced_eigenvalue(psi, d: int, n: int, tol: float = 1e-10) -> float:
    """Largest eigenvalue of the A1...An reduction of an antisymmetric state."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != d ** (2 * n):
        raise DimensionError(f"state size {psi.size} != {d}^{2 * n}")
    if antisym_residual(psi, d, n) > tol:
        raise InvalidStateError("state is not in the antisymmetric tensor power")
    t = psi.reshape((d,) * (2 * n))
    a_axes = list(range(0, 2 * n, 2))
    b_axes = list(range(1, 2 * n, 2))
    m = t.transpose(a_axes + b_axes).reshape(d ** n, d ** n)
    return float(hermitian_eigenvalues(m @ m.conj().T)[0])


@dataclass(frozen=True)
class AntisymSpectrum:
    p: tuple[float, float, float]
    eigenvalues: np.ndarray
    block_eigenvalues: np.ndarray
    entropy: float


def antisym_pair_state(p12: float, p13: float, p23: float) -> np.ndarray:
    """sum_{i<j} sqrt(p_ij) |i,j>_{A1B1} |i,j>_{A2B2}; factor order (A1, B1, A2, B2)."""
    basis = antisym_basis(3)  # order: 12, 13, 23
    p = np.array([p12, p13, p23], dtype=float)
    out = np.zeros(81, dtype=np.complex128)
    for w, v in zip(p, basis):
        out += math.sqrt(w) * np.kron(v, v)
    return out


def antisym_block(p12: float, p13: float, p23: float) -> np.ndarray:
    """The 3x3 block of the A1A2 reduction (the rest is diagonal p_ij/4 pairs)."""
    s = math.sqrt
    return 0.25 * np.array([
        [p12 + p13, s(p13 * p23), s(p12 * p23)],
        [s(p13 * p23), p12 + p23, s(p12 * p13)],
        [s(p12 * p23), s(p12 * p13), p13 + p23],
    ], dtype=np.complex128)


def antisym_pair_spectrum(p12: float, p13: float, p23: float) -> AntisymSpectrum:
    """Spectrum and entropy of the A1A2 reduction of the antisymmetric pair state."""
    p = (float(p12), float(p13), float(p23))
    if any(v < -1e-12 for v in p) or abs(sum(p) - 1.0) > 1e-12:
        raise InvalidStateError(f"{p} is not a point of the probability simplex")
    p = tuple(max(0.0, v) for v in p)
    psi = antisym_pair_state(*p).reshape(3, 3, 3, 3)
    m = psi.transpose(0, 2, 1, 3).reshape(9, 9)
    xi = m @ m.conj().T
    ev = hermitian_eigenvalues(xi)
    block = hermitian_eigenvalues(antisym_block(*p))
    return AntisymSpectrum(p, ev, block, shannon_entropy(ev))


def antisym_pair_entropy(p12: float, p13: float, p23: float) -> float:
    return antisym_pair_spectrum(p12, p13, p23).entropy


def antisym_cubic(p12: float, p13: float, p23: float) -> np.ndarray:
    """Coefficients of l^3 - l^2/2 + l/16 - p12 p13 p23 / 16."""
    return np.array([1.0, -0.5, 1.0 / 16.0, -p12 * p13 * p23 / 16.0])
