"""Seeded searches for violations of strong superadditivity of E_F on
2x2x2x2 pure states, plus the Pauli-channel gap-region scan.

Qubit order is A1, B1, A2, B2 (tensor index ``ijkl``).  For a pure state the
left-hand side E_F across (A1 A2 | B1 B2) is the entropy S(rho_A1A2); the
right-hand side is E_F(rho_A1B1) + E_F(rho_A2B2) via the concurrence.  A
counterexample needs rhs > lhs (the point lands above the diagonal x = y).

Reproducibility: sample ``index`` of a run with ``master_seed`` draws from
``numpy.random.Generator(PCG64(SeedSequence([master_seed, index])))``.
"""

from __future__ import annotations

import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import cma
import numpy as np

from .entanglement_measures import concurrence_batch, eof_batch, gap_condition, gap_family
from .errors import InvalidStateError
from .matrix_core import hermitian_eigenvalues_batch
from .qubit_channel import king_ruskai

VIOLATION_TOL = 1e-9
NORM_TOL = 1e-10


@dataclass(frozen=True)
class SuperaddSample:
    seed_index: int
    lhs: float
    rhs: float
    violated: bool

    @property
    def margin(self) -> float:
        """lhs - rhs; negative beyond the tolerance means a counterexample."""
        return self.lhs - self.rhs


@dataclass
class SearchReport:
    mode: str
    samples: int
    violations: int
    min_margin: float
    master_seed: int
    argmin_index: int = -1
    epsilon: float | None = None
    points: list[SuperaddSample] = field(default_factory=list, repr=False)

    def header(self) -> str:
        eps = "" if self.epsilon is None else f" epsilon={self.epsilon!r}"
        return f"# mode={self.mode} master_seed={self.master_seed} samples={self.samples}{eps}"

    def to_csv(self) -> str:
        """Scatter data: x = S(rho_A1A2), y = E_F(rho_A1B1) + E_F(rho_A2B2)."""
        out = io.StringIO()
        out.write(self.header() + "\n")
        out.write("index,x,y,violated\n")
        for s in self.points:
            out.write(f"{s.seed_index},{s.lhs!r},{s.rhs!r},{int(s.violated)}\n")
        return out.getvalue()

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "master_seed": self.master_seed,
            "epsilon": self.epsilon,
            "samples": self.samples,
            "violations": self.violations,
            "min_margin": self.min_margin,
            "argmin_index": self.argmin_index,
        }


# -- sampling -------------------------------------------------------------------

def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, index])))


def random_coefficients(rng: np.random.Generator, size: int, square: bool = False) -> np.ndarray:
    """Normalized complex vector; real parts drawn first, then imaginary parts.

    ``square=True`` draws each coordinate uniformly from the square with
    corners +-1 +-i instead of the complex Gaussian.
    """
    if square:
        re, im = rng.uniform(-1.0, 1.0, size), rng.uniform(-1.0, 1.0, size)
    else:
        re, im = rng.standard_normal(size), rng.standard_normal(size)
    z = re + 1j * im
    return z / np.linalg.norm(z)


def random_state(master_seed: int, index: int, square: bool = False) -> np.ndarray:
    return random_coefficients(sample_rng(master_seed, index), 16, square)


def neighborhood_state(master_seed: int, index: int, epsilon: float,
                       square: bool = False) -> np.ndarray:
    """Product core (A1B1)(A2B2) plus an epsilon-weighted generic perturbation, normalized."""
    rng = sample_rng(master_seed, index)
    a12 = random_coefficients(rng, 4, square)
    a34 = random_coefficients(rng, 4, square)
    pert = random_coefficients(rng, 16, square)
    psi = np.kron(a12, a34) + epsilon * pert
    return psi / np.linalg.norm(psi)


# -- pipeline -------------------------------------------------------------------

def reduced_pairs(psis: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho_A1A2, rho_A1B1, rho_A2B2) for a stack of 16-component states."""
    t = np.asarray(psis, dtype=np.complex128).reshape(-1, 2, 2, 2, 2)
    tc = t.conj()
    r_a1a2 = np.einsum("nijkl,nbjdl->nikbd", t, tc).reshape(-1, 4, 4)
    r_a1b1 = np.einsum("nijkl,nabkl->nijab", t, tc).reshape(-1, 4, 4)
    r_a2b2 = np.einsum("nijkl,nijcd->nklcd", t, tc).reshape(-1, 4, 4)
    return r_a1a2, r_a1b1, r_a2b2


def _entropy_batch(rhos: np.ndarray) -> np.ndarray:
    ev = np.clip(hermitian_eigenvalues_batch(rhos), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.sum(np.where(ev > 0, ev * np.log2(np.where(ev > 0, ev, 1.0)), 0.0), axis=1)


def superadd_terms(psis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (lhs, rhs) of the superadditivity comparison."""
    psis = np.atleast_2d(psis)
    if psis.shape[1] != 16:
        raise InvalidStateError(f"expected 16 amplitudes, got {psis.shape[1]}")
    norms = np.linalg.norm(psis, axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise InvalidStateError("state is not normalized")
    r12, r1, r2 = reduced_pairs(psis)
    lhs = _entropy_batch(r12)
    rhs = eof_batch(concurrence_batch(r1)) + eof_batch(concurrence_batch(r2))
    return lhs, rhs


def superadd_check(psi, seed_index: int = -1) -> SuperaddSample:
    v = np.asarray(getattr(psi, "vector", psi), dtype=np.complex128).reshape(-1)
    lhs, rhs = superadd_terms(v[None, :])
    lhs, rhs = float(lhs[0]), float(rhs[0])
    return SuperaddSample(seed_index, lhs, rhs, rhs > lhs + VIOLATION_TOL)


def _evaluate(states_for: callable, n: int, workers: int, chunk: int = 2000) -> list[SuperaddSample]:
    def run(start: int) -> list[SuperaddSample]:
        idx = range(start, min(n, start + chunk))
        psis = np.array([states_for(i) for i in idx])
        lhs, rhs = superadd_terms(psis)
        return [SuperaddSample(i, float(a), float(b), bool(b > a + VIOLATION_TOL))
                for i, a, b in zip(idx, lhs, rhs)]

    starts = list(range(0, n, chunk))
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return [s for part in parts for s in part]


def _report(mode: str, samples: list[SuperaddSample], master_seed: int,
            epsilon: float | None = None) -> SearchReport:
    margins = np.array([s.margin for s in samples])
    j = int(np.argmin(margins))  # first occurrence: smallest index wins ties
    return SearchReport(mode, len(samples), sum(s.violated for s in samples), float(margins[j]),
                        master_seed, samples[j].seed_index, epsilon, samples)


def random_search(n: int, master_seed: int, square: bool = False, workers: int = 1) -> SearchReport:
    if n < 1:
        raise ValueError("need at least one sample")
    samples = _evaluate(lambda i: random_state(master_seed, i, square), n, workers)
    return _report("random", samples, master_seed)


def zero_neighborhood_search(epsilon: float, n: int, master_seed: int, square: bool = False,
                             workers: int = 1) -> SearchReport:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("need at least one sample")
    samples = _evaluate(lambda i: neighborhood_state(master_seed, i, epsilon, square), n, workers)
    return _report("zero_neighborhood", samples, master_seed, epsilon)


# -- descent on the margin --------------------------------------------------------

@dataclass(frozen=True)
class MinimumSchedule:
    """Neighborhood schedule for :func:`minimum_search`.

    ``candidates`` points per stage, starting neighborhood ``radius``,
    stop once the neighborhood is below ``final_radius`` or, for the
    adaptive strategy, once the stage-best margin has changed by less than
    ``stall_tol`` over recent stages. ``shrink`` is the radius factor applied
    after a failed stage by the isotropic strategy.
    """

    candidates: int = 200
    radius: float = 0.3
    shrink: float = 0.5
    final_radius: float = 1e-6
    max_stages: int = 20000
    stall_tol: float = 1e-13


@dataclass
class MinimumTrajectory:
    master_seed: int
    trial: int
    steps: list[tuple[int, float, float]]
    final_state: np.ndarray
    final_margin: float
    strategy: str = "adaptive"

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# mode=minimum strategy={self.strategy} master_seed={self.master_seed} "
                  f"trial={self.trial}\n")
        out.write("stage,margin,radius\n")
        for st, m, r in self.steps:
            out.write(f"{st},{m!r},{r!r}\n")
        return out.getvalue()


def _margins(psis: np.ndarray) -> np.ndarray:
    lhs, rhs = superadd_terms(psis)
    return lhs - rhs


def _shrink_search(x, rng, schedule):
    """Best-of-neighborhood descent with an isotropic neighborhood.

    Candidates are x + r*s*g/|g| (g complex Gaussian, s uniform on [0, 1])
    renormalized to the unit sphere; the best one is accepted only if it
    lowers the margin, otherwise r shrinks by ``schedule.shrink``.
    """
    best = float(_margins(x[None, :])[0])
    r = schedule.radius
    steps = [(0, best, r)]
    stage = 0
    n = schedule.candidates
    while r >= schedule.final_radius and stage < schedule.max_stages:
        stage += 1
        g = rng.standard_normal((n, 16)) + 1j * rng.standard_normal((n, 16))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        s = rng.uniform(0.0, 1.0, (n, 1))
        cand = x + r * s * g
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        m = _margins(cand)
        j = int(np.argmin(m))
        if m[j] < best:
            x, best = cand[j], float(m[j])
        else:
            r *= schedule.shrink
        steps.append((stage, best, r))
    return x, best, steps


def _as_complex(v: np.ndarray) -> np.ndarray:
    z = v[..., :16] + 1j * v[..., 16:]
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _adaptive_search(x, rng, schedule):
    """Best-of-neighborhood descent whose Gaussian neighborhood adapts its shape.

    Each stage draws ``candidates`` points from N(mean, r^2 C) in the 32 real
    coordinates (CMA-ES update of mean, C and r). The margin is invariant
    under rescaling the vector, so the ranking adds (|v|^2 - 1)^2 to keep
    the search on the sphere; reported margins are those of the normalized
    state.
    """
    v0 = np.concatenate([x.real, x.imag])
    opts = {
        "popsize": schedule.candidates,
        "tolx": schedule.final_radius,
        "tolfun": schedule.stall_tol,
        "tolfunhist": schedule.stall_tol,
        "tolstagnation": schedule.max_stages,
        "maxiter": schedule.max_stages,
        "seed": float("nan"),  # leave numpy's global generator alone
        "randn": lambda *shape: rng.standard_normal(shape),
        "verbose": -9,
    }
    best_v = v0
    best = float(_margins(x[None, :])[0])
    steps = [(0, best, schedule.radius)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        es = cma.CMAEvolutionStrategy(v0, schedule.radius, opts)
        while not es.stop():
            cand = np.asarray(es.ask())
            m = _margins(_as_complex(cand))
            es.tell(list(cand), list(m + (np.sum(cand * cand, axis=1) - 1.0) ** 2))
            j = int(np.argmin(m))
            if m[j] < best:
                best, best_v = float(m[j]), cand[j]
            steps.append((es.countiter, best, float(es.sigma)))
    return _as_complex(best_v), best, steps


STRATEGIES = {"adaptive": _adaptive_search, "shrink": _shrink_search}


def minimum_search(master_seed: int, trial: int = 0,
                   schedule: MinimumSchedule = MinimumSchedule(),
                   strategy: str = "adaptive") -> MinimumTrajectory:
    """Local descent on the margin S(A1A2) - E_F(A1B1) - E_F(A2B2).

    Starts from the random state of ``(master_seed, trial)``; each stage
    samples ``schedule.candidates`` points around the current point and the
    neighborhood shrinks as the search progresses. The recorded margin is
    the best so far, so the trajectory is non-increasing.

    ``strategy="shrink"`` uses a fixed isotropic neighborhood;
    ``"adaptive"`` (default) also adapts the neighborhood's shape, which
    keeps the descent moving along the narrow valleys near states whose
    two-qubit reductions are close to rank deficient.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = sample_rng(master_seed, trial)
    x = random_coefficients(rng, 16)
    x, best, steps = STRATEGIES[strategy](x, rng, schedule)
    return MinimumTrajectory(master_seed, trial, steps, x, best, strategy)


def schmidt_coefficients_4x4(psi: np.ndarray) -> np.ndarray:
    """Schmidt coefficients across (A1 B1 | A2 B2), descending."""
    return np.linalg.svd(np.asarray(psi).reshape(4, 4), compute_uv=False)


# -- gap region ---------------------------------------------------------------------

def simplex_grid(step: float) -> Iterator[tuple[float, float, float, float]]:
    """(p0, px, py, pz) on the probability simplex with spacing ``step``."""
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError("grid_step must divide 1")
    for i in range(n + 1):
        for j in range(n + 1 - i):
            for k in range(n + 1 - i - j):
                px, py, pz = i / n, j / n, k / n
                yield (max(0.0, 1.0 - px - py - pz), px, py, pz)


@dataclass(frozen=True)
class GapScanRow:
    px: float
    py: float
    pz: float
    condition_value: float
    gap_holds: bool


def gap_region_scan(grid_step: float) -> list[GapScanRow]:
    """Gap test on every simplex grid point admitted by the positivity constraints."""
    if not 0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")
    rows = []
    for p in simplex_grid(grid_step):
        if not king_ruskai(*p):
            continue
        rep = gap_condition(*p)
        rows.append(GapScanRow(p[1], p[2], p[3], rep.condition_value, rep.gap_holds))
    return rows


def gap_scan_csv(rows: Sequence[GapScanRow], grid_step: float) -> str:
    out = io.StringIO()
    out.write(f"# mode=gap-scan grid_step={grid_step!r} points={len(rows)}\n")
    out.write("px,py,pz,condition_value,gap_holds\n")
    for r in rows:
        out.write(f"{r.px!r},{r.py!r},{r.pz!r},{r.condition_value!r},{int(r.gap_holds)}\n")
    return out.getvalue()


def family_condition(u: float, v: float) -> float:
    """Gap condition along the (u, v) family with p0 + pz = 1/2."""
    return gap_condition(*gap_family(u, v), check_king_ruskai=False).condition_value


def family_closed_form(u: float, v: float) -> float:
    a, b = (u - 0.5) ** 2, (v - 0.5) ** 2
    return 0.5 * a + 0.5 * b - a * b
