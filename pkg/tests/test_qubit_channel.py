import math

import numpy as np
import pytest

from qcapacity.errors import InvalidStateError, NotCPTPError
from qcapacity.matrix_core import hermitian_eigenvalues, partial_trace
from qcapacity.quantum_info import DensityMatrix
from qcapacity.qubit_channel import (
    BlochPoint,
    affine_channel,
    apply_channel,
    apply_kraus,
    channel_to_line,
    cptp_check,
    cptp_threshold,
    density_to_stokes,
    fully_depolarizing_channel,
    identity_channel,
    king_ruskai,
    lambda3_eps,
    lambda4,
    parse_channel_line,
    pauli_channel,
    read_channel_file,
    stinespring_pair,
    stinespring_pair_state,
    stokes_density,
    stokes_matrix,
    write_channel_file,
)
from conftest import random_density


def _random_probs(rng):
    return tuple(rng.dirichlet(np.ones(4)))


def test_stokes_examples(kernel):
    assert np.allclose(stokes_density((0, 0, 0)).matrix, np.eye(2) / 2)
    assert np.allclose(stokes_density((0, 0, 1)).matrix, np.diag([1, 0]))
    p = np.array([0.36, 0.0, 0.48])  # |p| = 0.6
    assert np.allclose(hermitian_eigenvalues(stokes_density(p).matrix), [0.8, 0.2], atol=1e-14)


def test_stokes_round_trip(rng):
    for _ in range(50):
        v = rng.standard_normal(3)
        v *= rng.uniform() / np.linalg.norm(v)
        back = density_to_stokes(stokes_density(v)).as_array()
        assert np.max(np.abs(back - v)) <= 1e-14


def test_point_outside_ball():
    with pytest.raises(InvalidStateError):
        stokes_density((0.8, 0.8, 0.0))


def test_pauli_channel_examples():
    assert np.allclose(identity_channel().linear, np.eye(3))
    dep = fully_depolarizing_channel()
    assert np.allclose(dep.linear, 0) and np.allclose(dep.shift, 0)
    c = pauli_channel(0.5, 1 / 6, 1 / 6, 1 / 6)
    assert np.allclose(c.linear, np.eye(3) / 3, atol=1e-15)
    with pytest.raises(InvalidStateError):
        pauli_channel(0.5, 0.5, 0.1, -0.1)
    with pytest.raises(InvalidStateError):
        pauli_channel(0.5, 0.5, 0.1, 0.1)


def test_apply_identity_fixes_state(rng):
    rho = random_density(rng, 2)
    assert np.allclose(apply_channel(identity_channel(), rho).matrix, rho, atol=1e-14)


def test_apply_lambda4_center():
    out = density_to_stokes(apply_channel(lambda4(), np.eye(2) / 2)).as_array()
    assert np.allclose(out, [0.021, 0.0, 0.495], atol=1e-15)


def test_pauli_and_affine_routes_agree(rng):
    for _ in range(100):
        c = pauli_channel(*_random_probs(rng))
        rho = random_density(rng, 2)
        a = apply_channel(c, rho).matrix
        b = apply_kraus(c, rho)
        assert np.max(np.abs(a - b)) <= 1e-12
        assert abs(np.trace(a) - 1) <= 1e-12
        assert np.max(np.abs(a - a.conj().T)) <= 1e-12


def test_non_cptp_output_rejected():
    c = affine_channel(np.eye(3), (0.5, 0, 0))
    with pytest.raises(NotCPTPError):
        apply_channel(c, stokes_matrix((1.0, 0.0, 0.0)))


def test_cptp_examples(kernel):
    rep = cptp_check(identity_channel())
    assert rep.is_cptp and rep.min_eigenvalue == pytest.approx(0.0, abs=1e-14)
    assert not cptp_check(lambda3_eps(0.06)).is_cptp
    assert cptp_check(lambda3_eps(0.05)).is_cptp


def test_cptp_bisection_threshold():
    eps = cptp_threshold(lambda3_eps, 0.0, 0.06)
    assert abs(eps - 0.05277) <= 5e-4
    # frozen oracle value
    assert eps == pytest.approx(0.05277289232, abs=1e-9)


def test_cptp_threshold_bad_bracket():
    with pytest.raises(ValueError):
        cptp_threshold(lambda3_eps, 0.06, 0.07)


def test_pauli_channels_pass_cptp(rng):
    for _ in range(100):
        assert cptp_check(pauli_channel(*_random_probs(rng))).is_cptp


def test_king_ruskai_predicate():
    assert king_ruskai(0.5, 1 / 6, 1 / 6, 1 / 6)
    assert not king_ruskai(0.1, 0.6, 0.2, 0.1)


def test_stinespring_orthogonal(rng):
    for _ in range(100):
        pair = stinespring_pair(*_random_probs(rng))
        assert abs(np.vdot(pair.psi.vector, pair.psi_perp.vector)) <= 1e-12


def test_stinespring_reproduces_channel(rng):
    for _ in range(20):
        probs = _random_probs(rng)
        pair = stinespring_pair(*probs)
        psi = np.asarray(pair.psi.vector)
        out = partial_trace(np.outer(psi, psi.conj()), (2, 4), [0])
        assert np.allclose(out, apply_kraus(pauli_channel(*probs), np.diag([1.0, 0.0])), atol=1e-12)


def test_stinespring_single_kraus():
    m = stinespring_pair_state(1, 0, 0, 0, 0.5).matrix
    expected = np.zeros((8, 8))
    expected[0, 0] = expected[4, 4] = 0.5  # |0>|0> and |1>|0> in the 2 (x) 4 layout
    assert np.allclose(m, expected)


def test_stinespring_mix_weight_bounds():
    with pytest.raises(ValueError):
        stinespring_pair(1, 0, 0, 0).rho_mix(1.5)



def _printed_matrix():
    a, b, q, i = 1 / (4 * math.sqrt(3)), 1 / 12, 1 / 4, 1j
    return np.array([
        [q, 0, 0, -i * a, 0, a, a, 0],
        [0, b, -i * a, 0, -i * b, 0, 0, i * b],
        [0, i * a, q, 0, a, 0, 0, -a],
        [i * a, 0, 0, b, 0, i * b, i * b, 0],
        [0, i * b, a, 0, b, 0, 0, -b],
        [a, 0, 0, -i * b, 0, b, b, 0],
        [a, 0, 0, -i * b, 0, b, b, 0],
        [0, -i * b, -a, 0, -b, 0, 0, b],
    ])


@pytest.mark.xfail(strict=True, reason="printed 8x8 matrix is not the equal mixture for these weights")
def test_stinespring_matches_printed_matrix():
    m = stinespring_pair_state(0.5, 1 / 6, 1 / 6, 1 / 6, 0.5).matrix
    assert np.allclose(m, _printed_matrix(), atol=1e-12)


def test_printed_matrix_marginal_mismatch():
    # the printed matrix is a valid state, but its auxiliary marginal is not (1/2, 1/6, 1/6, 1/6)
    p = _printed_matrix()
    DensityMatrix(p, (2, 4))
    aux = np.real(np.diag(partial_trace(p, (2, 4), [1])))
    assert not np.allclose(aux, [0.5, 1 / 6, 1 / 6, 1 / 6])
    ours = stinespring_pair_state(0.5, 1 / 6, 1 / 6, 1 / 6).matrix
    assert np.allclose(np.real(np.diag(partial_trace(ours, (2, 4), [1]))), [0.5, 1 / 6, 1 / 6, 1 / 6])


def test_serialization_round_trip(tmp_path, rng):
    chans = [lambda4(), pauli_channel(0.5, 1 / 6, 1 / 6, 1 / 6, name="p"),
             affine_channel(rng.uniform(-0.3, 0.3, (3, 3)), rng.uniform(-0.1, 0.1, 3), name="g")]
    path = tmp_path / "channels.txt"
    write_channel_file(path, chans)
    back = read_channel_file(path)
    for a, b in zip(chans, back):
        assert np.array_equal(a.linear, b.linear) and np.array_equal(a.shift, b.shift)
        assert a.kraus_probs == b.kraus_probs
    assert channel_to_line(back[0]) == channel_to_line(chans[0])
    with pytest.raises(ValueError):
        parse_channel_line("bad 1 2 3")


def test_bloch_point_angles():
    b = BlochPoint.from_angles(0.7, -1.2)
    pol, az = b.angles()
    assert pol == pytest.approx(0.7) and az == pytest.approx(-1.2)
