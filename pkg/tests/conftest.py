import importlib

import numpy as np
import pytest

from qcapacity import _backend, _jacobi_py

KERNELS = ["python"]
try:
    importlib.import_module("qcapacity._jacobi")
    KERNELS.append("cython")
except ImportError:  # extension not built
    pass


def _kernel_module(name):
    if name == "cython":
        return importlib.import_module("qcapacity._jacobi")
    return _jacobi_py


@pytest.fixture(params=KERNELS)
def kernel(request, monkeypatch):
    """Route every eigensolve through one backend for the duration of a test."""
    mod = _kernel_module(request.param)
    monkeypatch.setattr(_backend, "eigh", mod.eigh)
    monkeypatch.setattr(_backend, "eigvalsh_batch", mod.eigvalsh_batch)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_hermitian(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


def random_pure(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def accept():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def check(label, ok, detail=""):
        line = f"{label}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
