"""Qubit channels as affine maps of the Bloch ball.

A channel is stored as ``r -> linear @ r + shift`` acting on Bloch vectors.
Pauli (generalized depolarizing) channels also keep their Kraus weights
``(p0, px, py, pz)`` so both evaluation routes stay available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidStateError, NotCPTPError
from .matrix_core import hermitian_eigenvalues
from .quantum_info import DensityMatrix, PureState, density_matrix

BALL_TOL = 1e-12
PROB_TOL = 1e-12
CPTP_TOL = 1e-10

I2 = np.eye(2, dtype=np.complex128)
SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (I2, SX, SY, SZ)


@dataclass(frozen=True)
class BlochPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.x * self.x + self.y * self.y + self.z * self.z > 1.0 + BALL_TOL:
            raise InvalidStateError(f"point {self.as_array()} lies outside the Bloch ball")

    @classmethod
    def from_array(cls, a) -> "BlochPoint":
        x, y, z = (float(t) for t in np.asarray(a, dtype=float).reshape(3))
        return cls(x, y, z)

    @classmethod
    def from_angles(cls, polar: float, azimuth: float) -> "BlochPoint":
        """Surface point at polar angle ``polar`` from +z and azimuth ``azimuth``."""
        return cls(math.sin(polar) * math.cos(azimuth),
                   math.sin(polar) * math.sin(azimuth),
                   math.cos(polar))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def radius(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def angles(self) -> tuple[float, float]:
        """``(polar, azimuth)`` in radians, azimuth in (-pi, pi]."""
        r = self.radius
        polar = math.acos(max(-1.0, min(1.0, self.z / r))) if r > 0 else 0.0
        return polar, math.atan2(self.y, self.x)


def stokes_matrix(r) -> np.ndarray:
    """(I + x X + y Y + z Z)/2 without validation; works on stacks ``(..., 3)``."""
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    out = np.empty(r.shape[:-1] + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = 0.5 * (1 + z)
    out[..., 0, 1] = 0.5 * (x - 1j * y)
    out[..., 1, 0] = 0.5 * (x + 1j * y)
    out[..., 1, 1] = 0.5 * (1 - z)
    return out


def stokes_density(p) -> DensityMatrix:
    if not isinstance(p, BlochPoint):
        p = BlochPoint.from_array(p)
    return DensityMatrix(stokes_matrix(p.as_array()))


def stokes_vector(m) -> np.ndarray:
    """Bloch vector ``(Tr rho X, Tr rho Y, Tr rho Z)`` of a 2x2 operator."""
    m = np.asarray(m)
    return np.array([2 * m[1, 0].real, 2 * m[1, 0].imag, (m[0, 0] - m[1, 1]).real])


def density_to_stokes(rho) -> BlochPoint:
    rho = density_matrix(rho)
    if rho.dim != 2:
        raise InvalidStateError("Stokes parameters need a qubit state")
    return BlochPoint.from_array(stokes_vector(rho.matrix))


@dataclass(frozen=True)
class QubitChannel:
    """Affine Bloch-ball map ``r -> linear @ r + shift``."""

    linear: np.ndarray
    shift: np.ndarray
    kraus_probs: tuple[float, float, float, float] | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        lin = np.array(self.linear, dtype=float).reshape(3, 3)
        sh = np.array(self.shift, dtype=float).reshape(3)
        lin.setflags(write=False)
        sh.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "shift", sh)
        if self.kraus_probs is not None:
            probs = _check_probs(self.kraus_probs)
            lin_k, sh_k = _pauli_affine(probs)
            if not (np.allclose(lin, lin_k, atol=PROB_TOL) and np.allclose(sh, sh_k, atol=PROB_TOL)):
                raise ValueError("affine form disagrees with the recorded Kraus weights")
            object.__setattr__(self, "kraus_probs", probs)

    def bloch(self, r) -> np.ndarray:
        """Image of Bloch vector(s) ``r`` with shape ``(..., 3)``."""
        return np.asarray(r, dtype=float) @ self.linear.T + self.shift

    def __call__(self, rho) -> DensityMatrix:
        return apply_channel(self, rho)

    def tensor_square_output(self, omega: np.ndarray) -> np.ndarray:
        """(Lambda (x) Lambda)(omega) for a 4x4 operator on two qubits."""
        t = _transfer_matrix(self)
        big = np.kron(t, t)
        return _from_pauli_coords(big @ _to_pauli_coords(omega), 2)


def _check_probs(probs) -> tuple[float, float, float, float]:
    p = tuple(float(v) for v in probs)
    if len(p) != 4 or any(not math.isfinite(v) for v in p):
        raise InvalidStateError(f"need four finite probabilities, got {probs!r}")
    if any(v < -PROB_TOL for v in p) or abs(sum(p) - 1.0) > PROB_TOL:
        raise InvalidStateError(f"{p} is not a probability vector")
    return tuple(max(0.0, v) for v in p)


def _pauli_affine(p) -> tuple[np.ndarray, np.ndarray]:
    p0, px, py, pz = p
    radii = [p0 + px - py - pz, p0 + py - px - pz, p0 + pz - px - py]
    return np.diag(radii), np.zeros(3)


def pauli_channel(p0: float, px: float, py: float, pz: float, name: str = "") -> QubitChannel:
    """rho -> sum_s p_s sigma_s rho sigma_s^dagger."""
    probs = _check_probs((p0, px, py, pz))
    lin, sh = _pauli_affine(probs)
    return QubitChannel(lin, sh, probs, name)


def affine_channel(linear, shift=(0.0, 0.0, 0.0), name: str = "") -> QubitChannel:
    return QubitChannel(np.asarray(linear, dtype=float), np.asarray(shift, dtype=float), None, name)


def diagonal_channel(scales, shift=(0.0, 0.0, 0.0), name: str = "") -> QubitChannel:
    return affine_channel(np.diag(scales), shift, name)


def apply_channel(c: QubitChannel, rho) -> DensityMatrix:
    """Output state via the affine action on the Stokes vector."""
    rho = density_matrix(rho)
    out = c.bloch(stokes_vector(rho.matrix))
    if float(out @ out) > (1.0 + 1e-9) ** 2:
        raise NotCPTPError(f"output Bloch vector {out} leaves the ball")
    return DensityMatrix(stokes_matrix(out))


def apply_kraus(c: QubitChannel, rho) -> np.ndarray:
    """Output via the Pauli-Kraus sum; only for channels with Kraus weights."""
    if c.kraus_probs is None:
        raise ValueError("channel has no Kraus representation recorded")
    m = np.asarray(density_matrix(rho).matrix)
    return sum(p * s @ m @ s.conj().T for p, s in zip(c.kraus_probs, PAULIS))


# -- Pauli-coordinate transfer matrix (linear extension to all operators) ----

def _transfer_matrix(c: QubitChannel) -> np.ndarray:
    """4x4 real matrix acting on (Tr A, Tr AX, Tr AY, Tr AZ)."""
    t = np.zeros((4, 4))
    t[0, 0] = 1.0
    t[1:, 0] = c.shift
    t[1:, 1:] = c.linear
    return t


def _to_pauli_coords(m: np.ndarray) -> np.ndarray:
    n = int(round(math.log2(m.shape[0])))
    coords = []
    for idx in np.ndindex(*(4,) * n):
        op = PAULIS[idx[0]]
        for k in idx[1:]:
            op = np.kron(op, PAULIS[k])
        coords.append(np.trace(m @ op))
    return np.array(coords)


def _from_pauli_coords(coords: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((2 ** n, 2 ** n), dtype=np.complex128)
    for c, idx in zip(coords, np.ndindex(*(4,) * n)):
        op = PAULIS[idx[0]]
        for k in idx[1:]:
            op = np.kron(op, PAULIS[k])
        out += c * op
    return out / 2 ** n


def apply_linear(c: QubitChannel, m) -> np.ndarray:
    """Linear extension of the channel to an arbitrary 2x2 operator."""
    return _from_pauli_coords(_transfer_matrix(c) @ _to_pauli_coords(np.asarray(m, dtype=np.complex128)), 1)


class CPTPReport(NamedTuple):
    is_cptp: bool
    min_eigenvalue: float


def choi_matrix(c: QubitChannel) -> np.ndarray:
    """(Lambda (x) id)(|Omega><Omega|) with |Omega> = (|00> + |11>)/sqrt 2."""
    out = np.zeros((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2))
            e[i, j] = 1.0
            out += 0.5 * np.kron(apply_linear(c, e), e)
    return out


def cptp_check(c: QubitChannel, tol: float = CPTP_TOL) -> CPTPReport:
    lo = float(hermitian_eigenvalues(choi_matrix(c))[-1])
    return CPTPReport(lo >= -tol, lo)


def cptp_threshold(family: Callable[[float], QubitChannel], lo: float, hi: float,
                   xtol: float = 1e-12) -> float:
    """Parameter where the minimum Choi eigenvalue of ``family`` crosses zero.

    ``family(lo)`` must be CPTP and ``family(hi)`` must not be.
    """
    g = lambda t: cptp_check(family(t)).min_eigenvalue
    if g(lo) < 0 or g(hi) >= 0:
        raise ValueError("bracket does not straddle the CPTP boundary")
    return float(brentq(g, lo, hi, xtol=xtol))


def king_ruskai(p0: float, px: float, py: float, pz: float) -> bool:
    """True when the z axis of the Pauli channel's ellipsoid is the longest."""
    a = p0 + pz - px - py
    return a >= abs(p0 + py - px - pz) - PROB_TOL and a >= abs(p0 + px - py - pz) - PROB_TOL


# -- Stinespring pair states on H_o (x) H_a, dims (2, 4) ---------------------

@dataclass(frozen=True)
class StinespringPair:
    psi: PureState
    psi_perp: PureState

    def rho_mix(self, s: float) -> DensityMatrix:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"mixing weight {s!r} outside [0, 1]")
        a = np.asarray(self.psi.vector)
        b = np.asarray(self.psi_perp.vector)
        m = s * np.outer(a, a.conj()) + (1 - s) * np.outer(b, b.conj())
        return DensityMatrix(m, (2, 4))


def stinespring_pair(p0: float, px: float, py: float, pz: float) -> StinespringPair:
    """Images of |0> and |1> under U = (sqrt p_s sigma_s)_s stacked over H_a.

    Basis index of ``|o> (x) |a>`` is ``4 o + a`` with ``a`` running over
    the auxiliary labels (0, x, y, z).
    """
    probs = _check_probs((p0, px, py, pz))
    amp = [math.sqrt(v) for v in probs]
    psi = np.zeros(8, dtype=np.complex128)
    perp = np.zeros(8, dtype=np.complex128)
    for a, (r, s) in enumerate(zip(amp, PAULIS)):
        psi[a::4] += r * s[:, 0]
        perp[a::4] += r * s[:, 1]
    return StinespringPair(PureState(psi, (2, 4)), PureState(perp, (2, 4)))


def stinespring_pair_state(p0: float, px: float, py: float, pz: float, s: float = 0.5) -> DensityMatrix:
    """s |psi><psi| + (1 - s) |psi_perp><psi_perp| on 2 (x) 4."""
    return stinespring_pair(p0, px, py, pz).rho_mix(s)


# -- named channels ------------------------------------------------------------

def identity_channel() -> QubitChannel:
    return pauli_channel(1.0, 0.0, 0.0, 0.0, name="identity")


def fully_depolarizing_channel() -> QubitChannel:
    return pauli_channel(0.25, 0.25, 0.25, 0.25, name="depolarizing")


def lambda4() -> QubitChannel:
    """rho(x, y, z) -> rho(0.6x + 0.021, 0.601y, 0.5z + 0.495): four engaging inputs."""
    return diagonal_channel((0.6, 0.601, 0.5), (0.021, 0.0, 0.495), name="lambda4")


def lambda3() -> QubitChannel:
    """rho(x, y, z) -> rho(0.6x, 0.6y, 0.5z + 0.5): three engaging inputs."""
    return diagonal_channel((0.6, 0.6, 0.5), (0.0, 0.0, 0.5), name="lambda3")


def lambda3_eps(eps: float) -> QubitChannel:
    """rho(x, y, z) -> rho(0.6x + eps, 0.601y, 0.5z + 0.495)."""
    return diagonal_channel((0.6, 0.601, 0.5), (eps, 0.0, 0.495), name=f"lambda3_eps({eps:g})")


# -- text serialization ----------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def channel_to_line(c: QubitChannel, name: str | None = None) -> str:
    """``name mxx mxy ... mzz cx cy cz`` or ``name pauli p0 px py pz``."""
    name = name or c.name or "channel"
    if c.kraus_probs is not None:
        return " ".join([name, "pauli"] + [_fmt(v) for v in c.kraus_probs])
    return " ".join([name] + [_fmt(v) for v in c.linear.reshape(-1)] + [_fmt(v) for v in c.shift])


def parse_channel_line(line: str) -> QubitChannel:
    parts = line.split()
    if len(parts) == 6 and parts[1] == "pauli":
        return pauli_channel(*(float(v) for v in parts[2:]), name=parts[0])
    if len(parts) == 13:
        vals = [float(v) for v in parts[1:]]
        return affine_channel(np.reshape(vals[:9], (3, 3)), vals[9:], name=parts[0])
    raise ValueError(f"cannot parse channel line: {line!r}")


def read_channel_file(path) -> list[QubitChannel]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(parse_channel_line(line))
    return out


def write_channel_file(path, channels: Sequence[QubitChannel]) -> None:
    Path(path).write_text("".join(channel_to_line(c) + "\n" for c in channels))
