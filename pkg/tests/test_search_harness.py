import math

import numpy as np
import pytest

from qcapacity.entanglement_measures import eof_two_qubit
from qcapacity.errors import InvalidStateError
from qcapacity.matrix_core import partial_trace
from qcapacity.qubit_channel import king_ruskai
from qcapacity.quantum_info import von_neumann_entropy
from qcapacity.search_harness import (
    VIOLATION_TOL,
    MinimumSchedule,
    family_closed_form,
    family_condition,
    gap_region_scan,
    gap_scan_csv,
    minimum_search,
    neighborhood_state,
    random_search,
    random_state,
    schmidt_coefficients_4x4,
    simplex_grid,
    superadd_check,
    zero_neighborhood_search,
)
from conftest import random_pure

DIMS = (2, 2, 2, 2)  # A1 B1 A2 B2


def _oracle(psi):
    rho = np.outer(psi, psi.conj())
    lhs = von_neumann_entropy(partial_trace(rho, DIMS, [0, 2]))
    rhs = eof_two_qubit(partial_trace(rho, DIMS, [0, 1])) + eof_two_qubit(partial_trace(rho, DIMS, [2, 3]))
    return lhs, rhs


def test_pipeline_matches_matrix_oracle(kernel):
    for i in range(30):
        psi = random_state(3, i)
        s = superadd_check(psi, i)
        lhs, rhs = _oracle(psi)
        assert s.lhs == pytest.approx(lhs, abs=1e-10)
        assert s.rhs == pytest.approx(rhs, abs=1e-8)
        assert s.margin == pytest.approx(s.lhs - s.rhs)


def test_product_state_equality(kernel):
    rng = np.random.default_rng(30)
    for _ in range(20):
        psi = np.kron(random_pure(rng, 4), random_pure(rng, 4))
        s = superadd_check(psi)
        assert abs(s.lhs - s.rhs) <= 1e-9
        assert not s.violated


def test_singlets_across_cut():
    # A1-A2 and B1-B2 each in a singlet: S(A1A2) = 0 and both pair states are product
    singlet = np.array([0, 1, -1, 0]) / math.sqrt(2)
    t = np.einsum("ik,jl->ijkl", singlet.reshape(2, 2), singlet.reshape(2, 2))
    s = superadd_check(t.reshape(-1))
    assert s.lhs == pytest.approx(0.0, abs=1e-12) and s.rhs == pytest.approx(0.0, abs=1e-12)
    # A1-B2 and B1-A2 singlets: rho_A1A2 maximally mixed, pair states maximally mixed
    t = np.einsum("il,jk->ijkl", singlet.reshape(2, 2), singlet.reshape(2, 2))
    s = superadd_check(t.reshape(-1))
    assert s.lhs == pytest.approx(2.0, abs=1e-12) and s.rhs == pytest.approx(0.0, abs=1e-12)
    assert s.lhs >= s.rhs


def test_violation_flag_direction():
    s = superadd_check(random_state(1, 0))
    assert s.violated == (s.rhs > s.lhs + VIOLATION_TOL)


def test_unnormalized_rejected():
    with pytest.raises(InvalidStateError):
        superadd_check(np.ones(16))


def test_random_search_small():
    rep = random_search(500, 42)
    assert rep.violations == sum(s.violated for s in rep.points) == 0
    assert rep.min_margin >= 0
    assert rep.min_margin == min(s.margin for s in rep.points)
    assert rep.points[rep.argmin_index].margin == rep.min_margin


def test_random_search_deterministic_and_parallel():
    a = random_search(4500, 7)
    b = random_search(4500, 7, workers=3)
    assert a.to_csv() == b.to_csv()
    assert random_search(1, 7).to_csv() == random_search(1, 7).to_csv()


def test_sample_independent_of_run_length():
    a = random_search(10, 9)
    b = random_search(3, 9)
    assert [s.lhs for s in a.points[:3]] == [s.lhs for s in b.points]


def test_square_sampling_flag():
    x, y = random_state(5, 0), random_state(5, 0, square=True)
    assert not np.allclose(x, y)
    assert np.linalg.norm(y) == pytest.approx(1.0)


def test_zero_neighborhood_small():
    for eps in (0.2, 0.05):
        rep = zero_neighborhood_search(eps, 200, 42)
        assert rep.violations == 0 and rep.epsilon == eps
    with pytest.raises(ValueError):
        zero_neighborhood_search(0.0, 10, 1)


def test_neighborhood_margin_shrinks_with_epsilon():
    worst = [max(abs(superadd_check(neighborhood_state(4, i, eps)).margin) for i in range(50))
             for eps in (1e-1, 1e-3, 1e-5)]
    assert worst[0] > worst[1] > worst[2]
    assert worst[2] < 1e-6


def test_minimum_search_descends():
    traj = minimum_search(11, 0)
    margins = [m for _, m, _ in traj.steps]
    assert all(a >= b for a, b in zip(margins, margins[1:]))
    assert traj.final_margin <= 1e-6
    assert traj.final_margin == pytest.approx(superadd_check(traj.final_state).margin, abs=1e-12)
    assert minimum_search(11, 0).to_csv() == traj.to_csv()


def test_minimum_search_shrink_strategy_monotone():
    traj = minimum_search(11, 1, MinimumSchedule(max_stages=60), strategy="shrink")
    margins = [m for _, m, _ in traj.steps]
    assert all(a >= b for a, b in zip(margins, margins[1:]))
    assert traj.strategy == "shrink"
    with pytest.raises(ValueError):
        minimum_search(1, 0, strategy="nope")


def test_schmidt_coefficients_of_product():
    rng = np.random.default_rng(31)
    sv = schmidt_coefficients_4x4(np.kron(random_pure(rng, 4), random_pure(rng, 4)))
    assert sv[0] == pytest.approx(1.0) and np.all(sv[1:] < 1e-12)


def test_simplex_grid():
    pts = list(simplex_grid(0.1))
    assert len(pts) == math.comb(13, 3)
    assert all(abs(sum(p) - 1) < 1e-12 and min(p) >= 0 for p in pts)
    with pytest.raises(ValueError):
        list(simplex_grid(0.3))


def test_gap_region_scan():
    rows = gap_region_scan(0.1)
    assert rows and all(king_ruskai(1 - r.px - r.py - r.pz, r.px, r.py, r.pz) for r in rows)
    assert all(r.gap_holds == (r.condition_value > 0) for r in rows)
    text = gap_scan_csv(rows, 0.1)
    assert text.startswith("# mode=gap-scan grid_step=0.1")
    assert text == gap_scan_csv(gap_region_scan(0.1), 0.1)
    with pytest.raises(ValueError):
        gap_region_scan(0.2)


def test_gap_scan_fine_grid_holds_example_point():
    rows = gap_region_scan(1 / 60)
    hit = [r for r in rows if abs(r.px - 1 / 6) < 1e-12 and abs(r.py - 1 / 6) < 1e-12 and abs(r.pz - 1 / 6) < 1e-12]
    assert len(hit) == 1 and hit[0].gap_holds


def test_family_centre_and_closed_form():
    assert family_condition(0.5, 0.5) == pytest.approx(0.0, abs=1e-12)
    for u, v in [(0.1, 0.9), (0.3, 0.2), (1.0, 0.0)]:
        assert family_condition(u, v) == pytest.approx(family_closed_form(u, v), abs=1e-10)
