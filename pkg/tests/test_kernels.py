import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcapacity import _jacobi_py
from conftest import KERNELS, _kernel_module, random_hermitian


@pytest.mark.parametrize("name", KERNELS)
@pytest.mark.parametrize("d", [1, 2, 3, 4, 8, 16])
def test_eigh_matches_lapack(name, d):
    mod = _kernel_module(name)
    h = random_hermitian(np.random.default_rng(d), d)
    w, v = mod.eigh(h)
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-12)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(h - (v * w) @ v.conj().T)) <= 1e-10 * d
    assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-12)


@pytest.mark.parametrize("name", KERNELS)
def test_batch_matches_single(name):
    mod = _kernel_module(name)
    rng = np.random.default_rng(5)
    hs = np.array([random_hermitian(rng, 4) for _ in range(50)])
    batch = mod.eigvalsh_batch(hs)
    for h, w in zip(hs, batch):
        assert np.allclose(w, mod.eigh(h)[0], atol=1e-12)


@pytest.mark.parametrize("name", KERNELS)
def test_degenerate_and_diagonal(name):
    mod = _kernel_module(name)
    w, v = mod.eigh(np.eye(4) * 0.25)
    assert np.allclose(w, 0.25)
    w, _ = mod.eigh(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(w, [-1.0, 2.0, 3.0])


def test_backends_agree():
    if len(KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    cy = _kernel_module("cython")
    rng = np.random.default_rng(11)
    hs = np.array([random_hermitian(rng, 8) for _ in range(20)])
    assert np.allclose(cy.eigvalsh_batch(hs), _jacobi_py.eigvalsh_batch(hs), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_property_trace_and_order(d, seed):
    h = random_hermitian(np.random.default_rng(seed), d)
    for name in KERNELS:
        w, _ = _kernel_module(name).eigh(h)
        assert abs(w.sum() - np.trace(h).real) <= 1e-10 * max(1.0, np.abs(h).max()) * d
        assert np.all(np.diff(w) >= -1e-15)
