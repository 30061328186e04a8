"""State-level functionals: entropies, divergence, fidelity, teleportation.

All logarithms are base 2. ``0 log 0`` is taken as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidStateError
from .matrix_core import (
    as_matrix,
    check_dims,
    clip_spectrum,
    hermitian_eigh,
    hermitian_eigenvalues,
    hermitize,
    partial_trace,
)

STATE_TOL = 1e-10
SUPPORT_TOL = 1e-12

#: Returned by :func:`quantum_divergence` when supp(rho) is not inside supp(sigma).
INFINITE_DIVERGENCE = math.inf


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix with declared tensor factors."""

    matrix: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        m = as_matrix(self.matrix)
        dims = check_dims(m.shape[0], self.dims or (m.shape[0],))
        try:
            m = hermitize(m, STATE_TOL)
        except ValueError as exc:
            raise InvalidStateError(str(exc)) from exc
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise InvalidStateError(f"trace is {tr!r}, expected 1")
        w = hermitian_eigenvalues(m)
        if w[-1] < -STATE_TOL:
            raise InvalidStateError(f"negative eigenvalue {w[-1]:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector with declared tensor factors."""

    vector: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.complex128).reshape(-1)
        dims = check_dims(v.size, self.dims or (v.size,))
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > STATE_TOL:
            raise InvalidStateError(f"state norm is {norm!r}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def normalized(cls, vector, dims: Sequence[int] = ()) -> "PureState":
        v = np.asarray(vector, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidStateError("zero vector cannot be normalized")
        return cls(v / norm, tuple(dims))

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.vector, self.vector.conj()), self.dims)


def density_matrix(rho, dims: Sequence[int] = ()) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    if isinstance(rho, PureState):
        return rho.density()
    return DensityMatrix(np.asarray(rho), tuple(dims))


def shannon_entropy(probs) -> float:
    """Shannon entropy in bits; tiny negative entries are clipped to zero."""
    p = clip_spectrum(np.asarray(probs, dtype=np.float64))
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr rho log2 rho, from the spectrum."""
    rho = density_matrix(rho)
    return max(0.0, shannon_entropy(hermitian_eigenvalues(rho.matrix)))


def binary_entropy(z: float) -> float:
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"binary entropy argument {z!r} outside [0, 1]")
    return shannon_entropy([z, 1.0 - z])


def quantum_divergence(rho, sigma) -> float:
    """Quantum relative entropy H(rho || sigma) in bits.

    Returns :data:`INFINITE_DIVERGENCE` when rho has weight outside the
    support of sigma.
    """
    rho = density_matrix(rho)
    sigma = density_matrix(sigma)
    if rho.dim != sigma.dim:
        raise DimensionError(f"dimension mismatch {rho.dim} vs {sigma.dim}")
    lam, u = hermitian_eigh(rho.matrix)
    mu, v = hermitian_eigh(sigma.matrix)
    lam = clip_spectrum(lam)
    mu = clip_spectrum(mu)
    overlap = np.abs(u.conj().T @ v) ** 2
    weight = lam @ overlap  # rho-weight carried by each eigenvector of sigma
    outside = mu < SUPPORT_TOL
    if np.any(weight[outside] > SUPPORT_TOL):
        return INFINITE_DIVERGENCE
    pos = lam > 0
    neg_entropy = float(np.sum(lam[pos] * np.log2(lam[pos])))
    cross = float(np.sum(weight[~outside] * np.log2(mu[~outside])))
    return max(0.0, neg_entropy - cross)


def fidelity_bures(rho, sigma) -> tuple[float, float]:
    """Fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)) and B = 2 sqrt(1 - F)."""
    rho = density_matrix(rho)
    sigma = density_matrix(sigma)
    if rho.dim != sigma.dim:
        raise DimensionError(f"dimension mismatch {rho.dim} vs {sigma.dim}")
    w, u = hermitian_eigh(rho.matrix)
    sq = (u * np.sqrt(clip_spectrum(w).clip(min=0))) @ u.conj().T
    inner = sq @ sigma.matrix @ sq
    ev = clip_spectrum(hermitian_eigenvalues(0.5 * (inner + inner.conj().T)))
    f = float(np.sum(np.sqrt(ev.clip(min=0))))
    f = min(1.0, max(0.0, f))
    return f, 2.0 * math.sqrt(1.0 - f)


def pure_fidelity(psi, phi) -> float:
    """|<psi|phi>| for normalized vectors (phase-invariant)."""
    return float(abs(np.vdot(np.asarray(psi), np.asarray(phi))))


def _bipartition_matrix(psi: PureState, dims: tuple[int, ...], cut: Sequence[int]) -> np.ndarray:
    cut = sorted(set(int(c) for c in cut))
    n = len(dims)
    rest = [i for i in range(n) if i not in cut]
    if not cut or not rest or any(c < 0 or c >= n for c in cut):
        raise DimensionError(f"invalid bipartition {cut} of {n} factors")
    t = psi.vector.reshape(dims).transpose(cut + rest)
    da = int(np.prod([dims[i] for i in cut]))
    return t.reshape(da, -1)


def reduced_entanglement_entropy(psi, dims: Sequence[int] | None = None,
                                 cut: Sequence[int] = (0,)) -> float:
    """Entropy of the reduction of a pure state onto the factors in ``cut``."""
    if not isinstance(psi, PureState):
        psi = PureState(psi, tuple(dims or ()))
    dims = check_dims(psi.vector.size, dims or psi.dims)
    m = _bipartition_matrix(psi, dims, cut)
    return von_neumann_entropy(DensityMatrix(m @ m.conj().T))


def reduced_state(psi, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    v = np.asarray(psi.vector if isinstance(psi, PureState) else psi, dtype=np.complex128)
    return partial_trace(np.outer(v, v.conj()), dims, keep)


# -- teleportation -----------------------------------------------------------

def _omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def teleport_basis_state(d: int, x: int, y: int) -> np.ndarray:
    """Measurement vector sum_i omega^{ix}/sqrt(d) |i>_O |i+y>_A."""
    v = np.zeros(d * d, dtype=np.complex128)
    w = _omega(d)
    for i in range(d):
        v[i * d + (i + y) % d] = w ** (i * x) / math.sqrt(d)
    return v


def teleport_correction(d: int, x: int, y: int) -> np.ndarray:
    """Bob's unitary sum_i omega^{ix} |i><i+y|."""
    u = np.zeros((d, d), dtype=np.complex128)
    w = _omega(d)
    for i in range(d):
        u[i, (i + y) % d] = w ** (i * x)
    return u


def teleport_outcome(d: int, psi: np.ndarray, x: int, y: int) -> tuple[np.ndarray, float]:
    """Bob's corrected state and the probability of outcome ``(x, y)``."""
    shared = np.zeros(d * d, dtype=np.complex128)
    for i in range(d):
        shared[i * d + i] = 1.0 / math.sqrt(d)
    joint = np.kron(psi, shared).reshape(d * d, d)  # (O A) x B
    bob = teleport_basis_state(d, x, y).conj() @ joint
    prob = float(np.vdot(bob, bob).real)
    bob = teleport_correction(d, x, y) @ (bob / math.sqrt(prob))
    return bob, prob


def teleport_roundtrip(d: int, psi, seed: int | None = None,
                       outcome: tuple[int, int] | None = None):
    """Teleport a d-level pure state; returns ``(received, fidelity, (x, y))``.

    The outcome is sampled from the measurement distribution with
    ``numpy.random.default_rng(seed)`` unless ``outcome`` fixes it.
    """
    if d < 2:
        raise ValueError("teleportation needs d >= 2")
    if not isinstance(psi, PureState):
        psi = PureState(psi)
    if psi.vector.size != d:
        raise DimensionError(f"state has dimension {psi.vector.size}, expected {d}")
    vec = np.asarray(psi.vector)
    if outcome is None:
        probs = np.array([teleport_outcome(d, vec, x, y)[1]
                          for x in range(d) for y in range(d)])
        rng = np.random.default_rng(seed)
        k = int(rng.choice(d * d, p=probs / probs.sum()))
        outcome = divmod(k, d)
    x, y = outcome
    received, _ = teleport_outcome(d, vec, x, y)
    return PureState(received), pure_fidelity(received, vec), (x, y)


def teleport_all_outcomes(d: int, psi) -> list[tuple[tuple[int, int], float, float]]:
    """Every outcome with its probability and the fidelity after correction."""
    if not isinstance(psi, PureState):
        psi = PureState(psi)
    vec = np.asarray(psi.vector)
    out = []
    for x in range(d):
        for y in range(d):
            received, prob = teleport_outcome(d, vec, x, y)
            out.append(((x, y), prob, pure_fidelity(received, vec)))
    return out
