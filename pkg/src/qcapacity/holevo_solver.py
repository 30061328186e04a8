"""Holevo capacity of qubit channels by lattice discretization.

The Bloch sphere is covered by the lattice ``l_k``; the capacity restricted to
lattice inputs is a concave maximization over the probability simplex.  Its
solution is certified by the divergence radius (all engaging outputs sit at
the same quantum divergence from the average output, every other output no
farther), then sharpened by Newton iteration on the continuous sphere.

Everything qubit-level is evaluated in closed form on Bloch vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConvergenceError, NotCPTPError
from .matrix_core import hermitian_eigenvalues_batch
from .quantum_info import INFINITE_DIVERGENCE
from .qubit_channel import BlochPoint, QubitChannel, apply_linear, cptp_check, stokes_vector

LN2 = math.log(2.0)
PRUNE = 1e-6
PURE_TOL = 1e-14


# -- closed-form qubit entropies -----------------------------------------------

def bloch_entropy(r) -> np.ndarray:
    """Von Neumann entropy (bits) of qubit states with Bloch radius ``r``."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    lo = (1.0 - r) / 2.0
    hi = (1.0 + r) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = np.where(lo > 0, -lo * np.log2(np.where(lo > 0, lo, 1.0)), 0.0)
        t_hi = np.where(hi > 0, -hi * np.log2(np.where(hi > 0, hi, 1.0)), 0.0)
    return t_lo + t_hi


def _entropy_derivs(r: float) -> tuple[float, float]:
    """dS/dr and d2S/dr2 of the Bloch entropy at radius ``r`` (bits)."""
    r = min(max(r, 0.0), 1.0 - 1e-16)
    d1 = 0.5 * math.log2((1.0 - r) / (1.0 + r))
    d2 = -1.0 / ((1.0 - r * r) * LN2)
    return d1, d2


def _log_sigma_coeffs(b) -> tuple[float, np.ndarray]:
    """``log2 sigma = c0 I + c . pauli`` for the qubit state with Bloch vector ``b``."""
    b = np.asarray(b, dtype=float)
    r = float(np.linalg.norm(b))
    if r >= 1.0 - PURE_TOL:
        raise ZeroDivisionError("pure average output")
    c0 = 0.5 * math.log2((1.0 - r * r) / 4.0)
    if r < 1e-300:
        return c0, np.zeros(3)
    return c0, 0.5 * math.log2((1.0 + r) / (1.0 - r)) * b / r


def bloch_divergence(a, b) -> np.ndarray:
    """H(rho_a || rho_b) in bits for Bloch vectors ``a`` (stack) and ``b``.

    Infinite entries mark outputs outside the support of a pure ``b``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    ra = np.linalg.norm(a, axis=1)
    rb = float(np.linalg.norm(b))
    if rb >= 1.0 - PURE_TOL:
        out = np.full(a.shape[0], INFINITE_DIVERGENCE)
        same = np.linalg.norm(a - b, axis=1) < 1e-12
        out[same] = 0.0
        return out
    c0, cv = _log_sigma_coeffs(b)
    return np.maximum(0.0, -bloch_entropy(ra) - (c0 + a @ cv))


# -- lattice ----------------------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    k: int
    points: np.ndarray
    delta: float

    @property
    def n(self) -> int:
        return self.points.shape[0]


def lattice_points(k: int) -> np.ndarray:
    """Vertices (sin(u pi/k) cos(2 v pi/k), sin(u pi/k) sin(2 v pi/k), cos(u pi/k)).

    Poles appear once: north pole first, south pole last.
    """
    pts = [(0.0, 0.0, 1.0)]
    for u in range(1, k):
        s, c = math.sin(u * math.pi / k), math.cos(u * math.pi / k)
        for v in range(k):
            a = 2.0 * v * math.pi / k
            pts.append((s * math.cos(a), s * math.sin(a), c))
    pts.append((0.0, 0.0, -1.0))
    return np.array(pts)


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def coarseness(points: np.ndarray, samples: int) -> float:
    """Max over a deterministic sphere sample of the geodesic distance to the nearest point."""
    chord, _ = cKDTree(points).query(fibonacci_sphere(samples))
    return float(2.0 * np.arcsin(np.clip(chord.max() / 2.0, 0.0, 1.0)))


@lru_cache(maxsize=16)
def build_lattice(k: int) -> Lattice:
    if k < 2:
        raise ValueError("lattice needs k >= 2")
    pts = lattice_points(k)
    pts.setflags(write=False)
    return Lattice(k, pts, coarseness(pts, 10 * k * k))


# -- results -------------------------------------------------------------------------

@dataclass
class CapacityResult:
    value: float
    ensemble: list[tuple[float, BlochPoint]]
    average_output: BlochPoint
    certificate_gap: float
    error_bound: float
    k_used: int
    average_input: BlochPoint | None = None
    support: list[tuple[float, BlochPoint]] = field(default_factory=list)
    divergences: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def engaging_number(self) -> int:
        return len(self.ensemble)

    def as_dict(self) -> dict:
        def pt(b):
            return None if b is None else [b.x, b.y, b.z]

        return {
            "value": self.value,
            "engaging_number": self.engaging_number,
            "ensemble": [
                {"probability": p, "input": pt(b), "polar_deg": math.degrees(b.angles()[0]),
                 "azimuth_deg": math.degrees(b.angles()[1])}
                for p, b in self.ensemble
            ],
            "divergences": list(self.divergences),
            "average_input": pt(self.average_input),
            "average_output": pt(self.average_output),
            "certificate_gap": self.certificate_gap,
            "error_bound": self.error_bound,
            "k_used": self.k_used,
        }


def _require_cptp(c: QubitChannel) -> None:
    rep = cptp_check(c)
    if not rep.is_cptp:
        raise NotCPTPError(f"channel is not CPTP (min Choi eigenvalue {rep.min_eigenvalue:.3e})")


def holevo_objective(p: np.ndarray, outputs: np.ndarray, out_entropy: np.ndarray) -> float:
    """S(sum p_i Lambda rho_i) - sum p_i S(Lambda rho_i)."""
    b = p @ outputs
    return float(bloch_entropy(np.linalg.norm(b)) - p @ out_entropy)


# -- simplex solvers --------------------------------------------------------------

def _multiplicative_weights(outputs, out_entropy, p, iters, tol):
    """Damped exponentiated-gradient ascent p_i <- p_i 2^{D_i} (normalized)."""
    it = 0
    for it in range(1, iters + 1):
        b = p @ outputs
        if np.linalg.norm(b) >= 1.0 - PURE_TOL:
            break
        d = bloch_divergence(outputs, b)
        obj = float(bloch_entropy(np.linalg.norm(b)) - p @ out_entropy)
        if d.max() - obj < tol:
            break
        w = p * np.exp2(d - d.max())
        p = w / w.sum()
    return p, it


def _entropy_hessian(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = float(np.linalg.norm(b))
    d1, d2 = _entropy_derivs(r)
    if r < 1e-10:
        return np.zeros(3), (-1.0 / LN2) * np.eye(3)
    u = b / r
    grad = d1 * u
    hess = d2 * np.outer(u, u) + (d1 / r) * (np.eye(3) - np.outer(u, u))
    return grad, hess


def _newton_direction(outputs, p, grad, h_s, mu, dense):
    """Equality-constrained Newton step for the barrier objective.

    The Hessian is -diag(mu/p^2) + A H_S A^T; for large active sets the KKT
    system is reduced to 4x4 through that low-rank structure.
    """
    m = len(p)
    if dense:
        hess = outputs @ h_s @ outputs.T - np.diag(mu / (p * p))
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = hess
        kkt[:m, m] = 1.0
        kkt[m, :m] = 1.0
        rhs = np.concatenate([-grad, [0.0]])
        try:
            return np.linalg.solve(kkt, rhs)[:m]
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(kkt, rhs, rcond=None)[0][:m]
    dinv = p * p / mu
    w_mat = np.column_stack([outputs, np.ones(m)])
    lhs = (w_mat.T * dinv) @ w_mat
    lhs[:3, :3] -= np.linalg.inv(h_s)
    rhs = -(w_mat.T @ (dinv * grad))
    try:
        w = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return dinv * (w_mat @ w + grad)


def _barrier_solve(outputs, out_entropy, p0, mu_final=1e-15, dense_max=80):
    """Interior-point maximization of the Holevo objective over a small simplex.

    Log-barrier with equality-constrained Newton steps.  Large active sets use
    the low-rank step until the barrier is small, then shrink to the heavy
    indices and finish with dense steps.  Returns full-length weights.
    """
    m_all = outputs.shape[0]
    idx = np.arange(m_all)
    p = np.full(m_all, 1.0 / m_all) if p0 is None else np.clip(p0, 1e-12, None)
    p = 0.5 * p / p.sum() + 0.5 / m_all
    mu = 1e-3

    def phi(q, mu_, a, s):
        b = q @ a
        if np.linalg.norm(b) >= 1.0 - PURE_TOL:
            return -np.inf
        return float(bloch_entropy(np.linalg.norm(b)) - q @ s + mu_ * np.sum(np.log(q)))

    while True:
        if len(idx) > dense_max and mu < 1e-8:
            # off-support weights have collapsed to O(mu / gap); drop them
            keep = p > 1e3 * mu
            idx, p = idx[keep], p[keep] / p[keep].sum()
        a, s = outputs[idx], out_entropy[idx]
        dense = len(idx) <= dense_max
        for _ in range(100):
            b = p @ a
            g_s, h_s = _entropy_hessian(b)
            grad = a @ g_s - s + mu / p
            dp = _newton_direction(a, p, grad, h_s, mu, dense)
            ad = a.T @ dp
            dec = float(dp @ (dp * mu / (p * p)) - ad @ h_s @ ad)
            if dec < 1e-20:
                break
            neg = dp < 0
            step = 1.0
            if np.any(neg):
                step = min(1.0, 0.99 * float(np.min(-p[neg] / dp[neg])))
            f0 = phi(p, mu, a, s)
            for _ in range(60):
                q = p + step * dp
                if np.all(q > 0) and phi(q, mu, a, s) >= f0 + 1e-4 * step * float(grad @ dp) - 1e-16:
                    break
                step *= 0.5
            p = np.clip(q, 1e-300, None)
            p /= p.sum()
            if step * np.max(np.abs(dp)) < 1e-16:
                break
        if mu <= mu_final:
            out = np.zeros(m_all)
            out[idx] = p
            return out
        mu = max(mu_final, mu * 0.1)


def _minimal_support(outputs, b_star, candidates, max_pairs=64, max_triples=120):
    """Smallest subset (size <= 3 by search) whose output hull contains ``b_star``.

    Returns ``(indices, weights)`` or None.
    """
    cand = np.asarray(candidates)
    a = outputs[cand]
    dist = np.linalg.norm(a - b_star, axis=1)
    hit = np.nonzero(dist < 1e-9)[0]
    if hit.size:
        return cand[hit[:1]], np.array([1.0])
    # pairs b* = t a_i + (1 - t) a_j, with i among the leading candidates
    a_all = outputs[cand]
    for i in range(min(max_pairs, len(cand))):
        d = outputs[cand[i]] - a_all
        dd = np.einsum("ij,ij->i", d, d)
        ok = dd > 1e-24
        t = np.where(ok, np.einsum("ij,ij->i", b_star - a_all, d) / np.where(ok, dd, 1.0), -1.0)
        res = np.linalg.norm(a_all + t[:, None] * d - b_star, axis=1)
        good = np.nonzero(ok & (t > 1e-12) & (t < 1 - 1e-12) & (res < 1e-9))[0]
        good = good[good > i]
        if good.size:
            g = good[0]
            return cand[[i, g]], np.array([t[g], 1.0 - t[g]])
    sub = cand[:max_triples]
    a = outputs[sub]
    if len(sub) >= 3:
        tri = np.array(list(combinations(range(len(sub)), 3)))
        m = np.concatenate([np.transpose(a[tri], (0, 2, 1)), np.ones((len(tri), 1, 3))], axis=1)
        rhs = np.concatenate([b_star, [1.0]])
        mtm = np.einsum("nki,nkj->nij", m, m)
        mtb = np.einsum("nki,k->ni", m, rhs)
        det = np.linalg.det(mtm)
        ok = np.abs(det) > 1e-18
        w = np.zeros((len(tri), 3))
        w[ok] = np.linalg.solve(mtm[ok], mtb[ok][..., None])[..., 0]
        res = np.linalg.norm(np.einsum("nkj,nj->nk", m, w) - rhs, axis=1)
        good = np.nonzero(ok & (res < 1e-9) & np.all(w > 1e-12, axis=1))[0]
        if good.size:
            g = good[0]
            return sub[tri[g]], w[g]
    return None


def _caratheodory(outputs, idx, w):
    """Reduce a convex combination to at most four affinely independent points."""
    idx = list(idx)
    w = np.array(w, dtype=float)
    while len(idx) > 4:
        m = np.vstack([outputs[idx].T, np.ones(len(idx))])
        _, _, vt = np.linalg.svd(m)
        z = vt[-1]
        if not np.any(z > 0):
            z = -z
        pos = z > 1e-14
        t = np.min(w[pos] / z[pos])
        w = w - t * z
        keep = w > 1e-14
        idx = [i for i, k in zip(idx, keep) if k]
        w = w[keep]
    return np.array(idx), w / w.sum()


def _cluster(points: np.ndarray, weights: np.ndarray, radius: float):
    """Single-linkage merge of sphere points within geodesic ``radius``."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    cosr = math.cos(radius)
    for i in range(n):
        for j in range(i + 1, n):
            if float(points[i] @ points[j]) >= cosr - 1e-12:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        w = weights[members]
        c = w @ points[members]
        nrm = np.linalg.norm(c)
        c = c / nrm if nrm > 0 else points[members[0]]
        out.append((float(w.sum()), c))
    out.sort(key=lambda t: (-t[1][2], -t[1][0], -t[1][1]))
    return out


# -- certificate --------------------------------------------------------------------

def certify_radius(c: QubitChannel, sigma, lat: Lattice) -> float:
    """max over lattice inputs of H(Lambda rho || sigma); ``sigma`` is an output state."""
    b = _as_bloch(sigma)
    return float(np.max(bloch_divergence(c.bloch(lat.points), b)))


def _as_bloch(sigma) -> np.ndarray:
    if isinstance(sigma, BlochPoint):
        return sigma.as_array()
    a = np.asarray(getattr(sigma, "matrix", sigma))
    if a.shape == (2, 2):
        return stokes_vector(a)
    return np.asarray(a, dtype=float).reshape(3)


def _divergence_gradient(c: QubitChannel, n: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of H(Lambda rho(n) || rho_b) with respect to the input Bloch vector n."""
    a = c.bloch(n)
    ra = float(np.linalg.norm(a))
    d1, _ = _entropy_derivs(ra)
    grad_s = d1 * a / ra if ra > 1e-300 else np.zeros(3)
    _, cv = _log_sigma_coeffs(b)
    return c.linear.T @ (-grad_s - cv)


def _tangent_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - (helper @ n) * n
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def sphere_max_divergence(c: QubitChannel, b: np.ndarray, starts: np.ndarray,
                          iters: int = 400) -> tuple[float, np.ndarray]:
    """Local ascent of H(Lambda rho(n) || rho_b) over the unit sphere from several starts."""
    best_val, best_n = -np.inf, None
    for n in np.atleast_2d(starts):
        n = n / np.linalg.norm(n)
        val = float(bloch_divergence(c.bloch(n), b)[0])
        step = 0.1
        for _ in range(iters):
            g = _divergence_gradient(c, n, b)
            g = g - (g @ n) * n
            gn = float(np.linalg.norm(g))
            if gn < 1e-15:
                break
            while step > 1e-18:
                m = n + step * g / gn
                m /= np.linalg.norm(m)
                v = float(bloch_divergence(c.bloch(m), b)[0])
                if v > val:
                    n, val = m, v
                    step *= 2.0
                    break
                step *= 0.5
            else:
                break
        if val > best_val:
            best_val, best_n = val, n
    return best_val, best_n


# -- restricted problem --------------------------------------------------------------

def restricted_capacity(c: QubitChannel, lat: Lattice, tol: float = 1e-11,
                        max_rounds: int = 30, mw_iters: int = 3000) -> CapacityResult:
    """Maximize the Holevo objective with inputs fixed at the lattice vertices."""
    _require_cptp(c)
    outputs = c.bloch(lat.points)
    out_entropy = bloch_entropy(np.linalg.norm(outputs, axis=1))
    n = lat.n

    p, used = _multiplicative_weights(outputs, out_entropy, np.full(n, 1.0 / n), mw_iters, 1e-7)
    b = p @ outputs
    d = bloch_divergence(outputs, b)
    order = np.argsort(-d, kind="stable")
    heavy = np.argsort(-p, kind="stable")[:40]
    active = set(order[:40].tolist()) | set(heavy[p[heavy] > 1e-12].tolist())

    value = holevo_objective(p, outputs, out_entropy)
    mw_p, mw_value, mw_gap = p, value, float(d.max() - value)
    full_p = p
    for rnd in range(max_rounds if mw_gap > tol else 0):
        idx = np.array(sorted(active))
        q = _barrier_solve(outputs[idx], out_entropy[idx], p[idx])
        full_p = np.zeros(n)
        full_p[idx] = q
        b = full_p @ outputs
        value = holevo_objective(full_p, outputs, out_entropy)
        d = bloch_divergence(outputs, b)
        gap = float(d.max() - value)
        if gap <= tol:
            break
        top = np.argsort(-d, kind="stable")
        # keep the live support, add the worst violators, drop dead weight
        support = set(np.nonzero(full_p > 1e-10)[0].tolist())
        viol = set(int(i) for i in top[:60] if d[i] > value + tol)
        nxt = support | viol | set(top[:20].tolist())
        if nxt == active:
            break
        active = nxt
        p = full_p + 1e-9

    b = full_p @ outputs
    d = bloch_divergence(outputs, b)
    gap = float(d.max() - value)
    if mw_gap < gap:
        full_p, value = mw_p, mw_value
        b = full_p @ outputs
        d = bloch_divergence(outputs, b)
        gap = mw_gap

    keep = np.nonzero(full_p >= PRUNE)[0]
    weights = full_p[keep] / full_p[keep].sum()
    if len(keep) > 4:
        ties = np.nonzero(d >= value - 1e-9)[0]
        found = _minimal_support(outputs, b, ties)
        if found is None:
            found = _caratheodory(outputs, keep, weights)
        keep, weights = found

    support = [(float(w), BlochPoint.from_array(lat.points[i])) for i, w in zip(keep, weights)]
    clusters = _cluster(lat.points[keep], np.asarray(weights), 2.0 * math.pi / lat.k)
    ensemble = [(w, BlochPoint.from_array(pt)) for w, pt in clusters]

    starts = lat.points[np.argsort(-d, kind="stable")[:12]]
    smax, _ = sphere_max_divergence(c, b, starts)
    return CapacityResult(
        value=value,
        ensemble=ensemble,
        average_output=BlochPoint.from_array(b),
        certificate_gap=gap,
        error_bound=max(0.0, smax - value),
        k_used=lat.k,
        average_input=BlochPoint.from_array(full_p @ lat.points),
        support=support,
        divergences=[float(x) for x in bloch_divergence(c.bloch(np.array([pt for _, pt in clusters])), b)],
        iterations=used,
    )


# -- Newton refinement on the sphere --------------------------------------------------

def _refine_residual(c, normals, probs, cap):
    m = len(probs)
    b = c.bloch(probs @ normals)
    res = np.empty(3 * m + 1)
    res[:m] = bloch_divergence(c.bloch(normals), b) - cap
    for j in range(m):
        g = _divergence_gradient(c, normals[j], b)
        e1, e2 = _tangent_basis(normals[j])
        res[m + 2 * j] = g @ e1
        res[m + 2 * j + 1] = g @ e2
    res[3 * m] = probs.sum() - 1.0
    return res


def _unpack(x, bases, centers, m):
    normals = np.empty((m, 3))
    for j in range(m):
        e1, e2 = bases[j]
        v = centers[j] + x[2 * j] * e1 + x[2 * j + 1] * e2
        normals[j] = v / np.linalg.norm(v)
    probs = x[2 * m:3 * m]
    return normals, probs, x[3 * m]


def _balance_weights(c, normals, probs, cap, steps=20):
    """Newton on (weights, capacity) alone so the divergences agree before moving inputs.

    Keeps symmetric degenerate ensembles (antipodal pairs and the like) from
    drifting along flat directions driven by round-off in the average output.
    """
    m = len(probs)
    outs = c.bloch(normals)

    def fun(x):
        b = c.bloch(x[:m] @ normals)
        return np.concatenate([bloch_divergence(outs, b) - x[m], [x[:m].sum() - 1.0]])

    x = np.concatenate([probs, [cap]])
    r = fun(x)
    for _ in range(steps):
        if float(np.max(np.abs(r))) < 1e-15:
            break
        jac = np.empty((m + 1, m + 1))
        for i in range(m + 1):
            e = np.zeros(m + 1)
            e[i] = 1e-7
            jac[:, i] = (fun(x + e) - fun(x - e)) / 2e-7
        x1 = x + np.linalg.lstsq(jac, -r, rcond=None)[0]
        if np.any(x1[:m] <= 0):
            break
        r1 = fun(x1)
        if float(np.max(np.abs(r1))) >= float(np.max(np.abs(r))):
            break
        x, r = x1, r1
    return x[:m], float(x[m])


def refine_capacity(c: QubitChannel, seed: CapacityResult, tol: float = 1e-13,
                    max_steps: int = 100, lattice: Lattice | None = None) -> CapacityResult:
    """Damped Newton solve of the stationarity system around the seed's engaging inputs.

    Unknowns per input: two tangent coordinates and a weight, plus the capacity.
    Equations: equal divergence to the average output, vanishing tangential
    gradient of that divergence, and normalization of the weights.
    """
    _require_cptp(c)
    normals = np.array([b.as_array() / max(b.radius, 1e-300) for _, b in seed.ensemble])
    probs = np.array([p for p, _ in seed.ensemble], dtype=float)
    probs /= probs.sum()
    m = len(probs)
    cap = float(np.mean(bloch_divergence(c.bloch(normals), c.bloch(probs @ normals))))

    probs, cap = _balance_weights(c, normals, probs, cap)
    res = _refine_residual(c, normals, probs, cap)
    rnorm = float(np.max(np.abs(res)))
    steps = 0
    while rnorm >= tol:
        if steps >= max_steps:
            raise ConvergenceError(f"Newton refinement stalled at residual {rnorm:.3e}")
        steps += 1
        centers = normals.copy()
        bases = [_tangent_basis(n) for n in centers]
        x0 = np.concatenate([np.zeros(2 * m), probs, [cap]])

        def fun(x):
            nn, pp, cc = _unpack(x, bases, centers, m)
            return _refine_residual(c, nn, pp, cc)

        f0 = fun(x0)
        jac = np.empty((len(f0), len(x0)))
        h = 1e-7
        for i in range(len(x0)):
            e = np.zeros(len(x0))
            e[i] = h
            jac[:, i] = (fun(x0 + e) - fun(x0 - e)) / (2 * h)
        dx = np.linalg.lstsq(jac, -f0, rcond=None)[0]
        lam = 1.0
        for _ in range(21):
            x1 = x0 + lam * dx
            nn, pp, cc = _unpack(x1, bases, centers, m)
            if np.all(pp > 0):
                r1 = fun(x1)
                if float(np.max(np.abs(r1))) < rnorm:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError(f"Newton damping exhausted at residual {rnorm:.3e}")
        normals, probs, cap = nn, pp, cc
        new = float(np.max(np.abs(r1)))
        if new >= rnorm * (1 - 1e-3) and new < 1e3 * tol:
            rnorm = new
            break
        rnorm = new

    b_in = probs @ normals
    b = c.bloch(b_in)
    out_entropy = bloch_entropy(np.linalg.norm(c.bloch(normals), axis=1))
    value = float(bloch_entropy(np.linalg.norm(b)) - probs @ out_entropy)
    divs = bloch_divergence(c.bloch(normals), b)
    lat = lattice or build_lattice(max(seed.k_used, 10))
    ld = bloch_divergence(c.bloch(lat.points), b)
    starts = np.vstack([normals, lat.points[np.argsort(-ld, kind="stable")[:12]]])
    smax, _ = sphere_max_divergence(c, b, starts)
    gap = max(float(divs.max()), smax) - value
    order = sorted(range(m), key=lambda j: (-normals[j][2], -normals[j][0], -normals[j][1]))
    return CapacityResult(
        value=value,
        ensemble=[(float(probs[j]), BlochPoint.from_array(normals[j])) for j in order],
        average_output=BlochPoint.from_array(b),
        certificate_gap=gap,
        error_bound=max(gap, rnorm),
        k_used=seed.k_used,
        average_input=BlochPoint.from_array(b_in),
        support=list(seed.support),
        divergences=[float(divs[j]) for j in order],
        iterations=steps,
    )


# -- orchestration -------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    k: int
    restricted: float
    refined: float
    error_bound: float


def capacity(c: QubitChannel, target_err: float = 1e-9, k_start: int = 10,
             k_max: int = 80, history: list | None = None) -> CapacityResult:
    """Lattice doubling plus Newton refinement until successive values agree."""
    _require_cptp(c)
    k = k_start
    prev = None
    best = None
    while True:
        lat = build_lattice(k)
        seed = restricted_capacity(c, lat)
        try:
            result = refine_capacity(c, seed, lattice=lat)
            if result.value < seed.value - 1e-8:
                result = seed
        except ConvergenceError:
            result = seed
        if history is not None:
            history.append(ConvergenceRow(k, seed.value, result.value, seed.error_bound))
        if prev is not None:
            result.error_bound = max(result.error_bound, abs(result.value - prev.value))
            if abs(result.value - prev.value) < target_err and result.certificate_gap < target_err:
                return result
        elif result is not seed and result.certificate_gap < target_err and seed.error_bound < 1e-3:
            # one more level to confirm the refined value
            pass
        best = result
        prev = result
        if 2 * k > k_max:
            raise ConvergenceError(f"k limit {k_max} reached before the target error", best=best)
        k *= 2


def convergence_table(c: QubitChannel, ks: Sequence[int] = (10, 20, 40, 80),
                      reference: float | None = None) -> list[ConvergenceRow]:
    """Restricted capacities along nested lattices with their a-posteriori bounds."""
    rows = []
    refined = reference
    for k in ks:
        seed = restricted_capacity(c, build_lattice(k))
        if refined is None:
            refined = refine_capacity(c, seed).value
        rows.append(ConvergenceRow(k, seed.value, refined, seed.error_bound))
    return rows


# -- additivity scan ------------------------------------------------------------------------

@dataclass(frozen=True)
class SchmidtPoint:
    p: float
    theta_u: float
    phi_u: float
    theta_v: float
    phi_v: float
    nu: float


def schmidt_state(sp: SchmidtPoint) -> np.ndarray:
    """sqrt(p)|u>|v> + e^{i nu} sqrt(1 - p)|u_perp>|v_perp>."""
    return schmidt_states(np.array([[sp.p, sp.theta_u, sp.phi_u, sp.theta_v, sp.phi_v, sp.nu]]))[0]


def schmidt_states(params: np.ndarray) -> np.ndarray:
    """Vectorized :func:`schmidt_state` over rows (p, th_u, ph_u, th_v, ph_v, nu)."""
    p, tu, pu, tv, pv, nu = (params[:, i] for i in range(6))
    u = np.stack([np.cos(tu), np.exp(1j * pu) * np.sin(tu)], axis=1)
    v = np.stack([np.cos(tv), np.exp(1j * pv) * np.sin(tv)], axis=1)
    up = np.stack([np.exp(-1j * pu) * np.sin(tu), -np.cos(tu) + 0j], axis=1)
    vp = np.stack([np.exp(-1j * pv) * np.sin(tv), -np.cos(tv) + 0j], axis=1)
    a = np.sqrt(p)[:, None] * (u[:, :, None] * v[:, None, :]).reshape(-1, 4)
    b = (np.exp(1j * nu) * np.sqrt(1 - p))[:, None] * (up[:, :, None] * vp[:, None, :]).reshape(-1, 4)
    return a + b


def superoperator(c: QubitChannel) -> np.ndarray:
    """S[a', c', a, c] = <a'| Lambda(|a><c|) |c'>."""
    s = np.zeros((2, 2, 2, 2), dtype=np.complex128)
    for a in range(2):
        for cc in range(2):
            e = np.zeros((2, 2))
            e[a, cc] = 1.0
            s[:, :, a, cc] = apply_linear(c, e)
    return s


def tensor_square_outputs(c: QubitChannel, psis: np.ndarray) -> np.ndarray:
    """(Lambda (x) Lambda)(|psi><psi|) for a stack of two-qubit vectors."""
    s = superoperator(c)
    t = psis.reshape(-1, 2, 2)
    omega = np.einsum("nab,ncd->nabcd", t, t.conj())
    out = np.einsum("ikac,jlbd,nabcd->nijkl", s, s, omega, optimize=True)
    return out.reshape(-1, 4, 4)


def product_divergence(c: QubitChannel, psis: np.ndarray, sigma_out) -> np.ndarray:
    """H((Lambda (x) Lambda) psi || sigma (x) sigma) for each row of ``psis``."""
    b = _as_bloch(sigma_out)
    c0, cv = _log_sigma_coeffs(b)
    outs = tensor_square_outputs(c, psis)
    ev = np.clip(hermitian_eigenvalues_batch(outs), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(ev > 0, ev * np.log2(np.where(ev > 0, ev, 1.0)), 0.0), axis=1)
    t = outs.reshape(-1, 2, 2, 2, 2)
    rho_a = np.einsum("nijkj->nik", t)
    rho_b = np.einsum("nijil->njl", t)
    cross = 0.0
    for r in (rho_a, rho_b):
        bl = np.stack([2 * r[:, 1, 0].real, 2 * r[:, 1, 0].imag, (r[:, 0, 0] - r[:, 1, 1]).real], axis=1)
        cross = cross + (c0 + bl @ cv)
    return -ent - cross


@dataclass
class AdditivityScan:
    max_value: float
    argmax: SchmidtPoint
    p_values: np.ndarray
    p_slice_max: np.ndarray
    points: int


def additivity_scan(c: QubitChannel, sigma_prime, p_points: int = 17,
                    angle_points: int = 9, chunk: int = 40000) -> AdditivityScan:
    """Grid maximum of H(Lambda^{(x)2} omega || sigma'^{(x)2}) over Schmidt-form pure inputs."""
    ps = np.linspace(0.0, 1.0, p_points)
    full = np.linspace(0.0, 2 * math.pi, angle_points)
    quarter = np.linspace(0.0, math.pi / 2, angle_points)
    angle_grid = np.array(np.meshgrid(full, quarter, full, quarter, full, indexing="ij")).reshape(5, -1).T
    best = -np.inf
    best_row = None
    slice_max = np.full(p_points, -np.inf)
    for pi_, p in enumerate(ps):
        for start in range(0, len(angle_grid), chunk):
            ang = angle_grid[start:start + chunk]
            rows = np.column_stack([np.full(len(ang), p), ang])
            vals = product_divergence(c, schmidt_states(rows), sigma_prime)
            j = int(np.argmax(vals))
            if vals[j] > slice_max[pi_]:
                slice_max[pi_] = vals[j]
            if vals[j] > best:
                best, best_row = float(vals[j]), rows[j]
    return AdditivityScan(best, SchmidtPoint(*(float(v) for v in best_row)), ps, slice_max,
                          p_points * len(angle_grid))


def entropy_slice(c: QubitChannel, ps: Iterable[float]) -> np.ndarray:
    """S((Lambda (x) Lambda)|psi_p><psi_p|) with psi_p = sqrt(p)|00> + sqrt(1-p)|11>."""
    ps = np.asarray(list(ps), dtype=float)
    psis = np.zeros((len(ps), 4), dtype=np.complex128)
    psis[:, 0] = np.sqrt(ps)
    psis[:, 3] = np.sqrt(1 - ps)
    ev = np.clip(hermitian_eigenvalues_batch(tensor_square_outputs(c, psis)), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.sum(np.where(ev > 0, ev * np.log2(np.where(ev > 0, ev, 1.0)), 0.0), axis=1)
