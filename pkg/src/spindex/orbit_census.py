"""Fixed points of iterates of sphere time-one maps: search, classification,
Lefschetz bookkeeping, twist perturbations and a rationality test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from . import _io
from .hamiltonian import HamiltonianSpec, TwistPerturbation, compile_spec, twisted
from .index_core import (
    DEGENERACY_TOL,
    IndexReport,
    LemmaInapplicableError,
    ModularIndex,
    index_report,
    reduce_mod,
)
from .sphere_flow import (
    DEFAULT_STEP,
    TrivializationRecord,
    _basis_with_axis,
    _far_point,
    _to_path,
    integrate,
    sphere_point,
)

DEDUPE_RADIUS = 1e-6
CHAIN_FACTOR = 10.0
PROBE_DISTANCE = 1e-5
TRACE_MARGIN = 1e-8
SEARCH_STEP = 1e-2
MAX_REPORTED = 16
MERGE_RADIUS = 1e-3


class CensusIncompleteError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicOrbit:
    point: np.ndarray
    period: int
    trace: float
    classification: str
    index_report: IndexReport
    modular_delta: ModularIndex
    trivialization: TrivializationRecord
    homotopy_tag: str = "S2"
    det_i_minus_d: float = float("nan")

    @property
    def delta(self) -> float:
        return self.index_report.delta

    def to_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "period": self.period,
            "trace": self.trace,
            "class": self.classification,
            "delta_lifted": self.index_report.delta,
            "delta_mod4": self.modular_delta.value,
            "mu": self.index_report.mu,
            "trivialization": self.trivialization.to_dict(),
            "homotopy_tag": self.homotopy_tag,
        }


@dataclass(frozen=True)
class CensusReport:
    orbits: list[PeriodicOrbit]
    lefschetz: int | None
    continuum_flag: bool
    period: int = 1
    notes: tuple[str, ...] = ()
    truncated: bool = False

    @property
    def lefschetz_sum(self) -> int | None:
        return self.lefschetz

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "continuum_flag": self.continuum_flag,
            "lefschetz_sum": self.lefschetz,
            "truncated": self.truncated,
            "notes": list(self.notes),
            "orbits": [o.to_dict() for o in self.orbits],
        }

    def csv_rows(self):
        for o in self.orbits:
            yield (*[float(v) for v in o.point], o.period, o.trace, o.classification,
                   o.index_report.delta, o.modular_delta.value, o.index_report.mu)

    CSV_HEADER = ("x", "y", "z", "period", "trace", "class", "delta_lifted", "delta_mod4", "mu")

    def write_csv(self, path) -> None:
        _io.write_csv(path, self.CSV_HEADER, self.csv_rows())


# -- classification ---------------------------------------------------------

def classify_trace(trace: float, margin: float = TRACE_MARGIN) -> str:
    if abs(trace) < 2.0 - margin:
        return "elliptic"
    if abs(trace) > 2.0 + margin:
        return "hyperbolic"
    return "degenerate"


def classify(orbit) -> str:
    """Classification from the trace of a PeriodicOrbit, matrix, or number."""
    if isinstance(orbit, PeriodicOrbit):
        return classify_trace(orbit.trace)
    if np.ndim(orbit) == 2:
        return classify_trace(float(np.trace(orbit)))
    return classify_trace(float(orbit))


def lefschetz_index(d: np.ndarray) -> int:
    det = float(np.linalg.det(np.eye(2) - d))
    if abs(det) <= DEGENERACY_TOL:
        raise LemmaInapplicableError("Lefschetz inapplicable: degenerate fixed point")
    return 1 if det > 0 else -1


def lefschetz_sum(report: CensusReport, expected: int = 2) -> int:
    """Sum of local indices; raises when the census cannot equal the Euler characteristic."""
    if report.continuum_flag:
        raise LemmaInapplicableError("Lefschetz inapplicable: non-isolated fixed points")
    if any(o.classification == "degenerate" for o in report.orbits):
        raise LemmaInapplicableError("Lefschetz inapplicable: degenerate fixed point")
    total = sum(1 if o.det_i_minus_d > 0 else -1 for o in report.orbits)
    if total != expected:
        raise CensusIncompleteError(f"census incomplete: Lefschetz sum {total} != {expected}")
    return total


# -- search -----------------------------------------------------------------

def seed_grid(n_lat: int = 32, n_lon: int = 64) -> np.ndarray:
    """Cell-centred latitude/longitude grid, poles excluded."""
    if n_lat < 32 or n_lon < 64:
        raise ValueError("grid density must be at least 32x64")
    colat = (np.arange(n_lat) + 0.5) * math.pi / n_lat
    lon = (np.arange(n_lon) + 0.5 * (np.arange(n_lat)[:, None] % 2)) * 2 * math.pi / n_lon
    s = np.sin(colat)[:, None]
    pts = np.stack([s * np.cos(lon), s * np.sin(lon), np.cos(colat)[:, None] * np.ones_like(lon)], axis=-1)
    return pts.reshape(-1, 3)


def _tangent_frames(P: np.ndarray) -> np.ndarray:
    """Orthonormal tangent bases as columns, shape (N, 3, 2)."""
    seed = np.where(np.abs(P[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    a = seed - P * np.sum(seed * P, axis=1, keepdims=True)
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    return np.stack([a, np.cross(P, a)], axis=2)


def _residual_and_jac(H, P: np.ndarray, k: int, step: float):
    E = _tangent_frames(P)
    _, Q, V = integrate(H, P, float(k), step, V0=E)
    g = Q - P
    J = V - E
    return g, J, E


def _newton(H, P: np.ndarray, k: int, step: float, tol: float, max_iter: int = 30, init=None):
    """Damped Newton on the displacement, solved in each point's tangent plane.

    Singular Jacobians use the pseudo-inverse and a halving line search.
    Returns points, final residual norms, and the last Jacobians.
    """
    P = P.copy()
    g, J, E = init if init is not None else _residual_and_jac(H, P, k, step)
    g, J, E = g.copy(), J.copy(), E.copy()
    res = np.linalg.norm(g, axis=1)
    active = res > tol
    merged = np.zeros(len(P), bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        dp = np.stack([-np.linalg.pinv(J[i], rcond=1e-10) @ g[i] for i in idx])
        dp_len = np.linalg.norm(dp, axis=1, keepdims=True)
        dp *= np.minimum(1.0, 0.5 / np.maximum(dp_len, 1e-300))
        scale = np.ones(idx.size)
        best_P = P[idx].copy()
        best_res = res[idx].copy()
        pending = np.ones(idx.size, bool)
        new_g = g[idx].copy()
        new_J = J[idx].copy()
        for _halving in range(4):
            sel = np.flatnonzero(pending)
            if sel.size == 0:
                break
            trial = P[idx[sel]] + scale[sel, None] * np.einsum("nij,nj->ni", E[idx[sel]], dp[sel])
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            tg, tJ, _ = _residual_and_jac(H, trial, k, step)
            tr = np.linalg.norm(tg, axis=1)
            ok = tr < best_res[sel] * (1.0 - 1e-4 * scale[sel]) + 1e-15
            for j, s in enumerate(sel):
                if ok[j] or _halving == 3:
                    if ok[j]:
                        best_P[s], best_res[s], new_g[s], new_J[s] = trial[j], tr[j], tg[j], tJ[j]
                    pending[s] = False
            scale[pending] *= 0.5
        stalled = best_res >= res[idx]
        P[idx], res[idx], g[idx], J[idx] = best_P, best_res, new_g, new_J
        E[idx] = _tangent_frames(P[idx])
        active[idx] = (best_res > tol) & ~stalled
        # iterates that have met follow the same path from here on
        idx = np.flatnonzero(active)
        if idx.size > 1:
            rep = _dedupe(P[idx], MERGE_RADIUS)
            dropped = np.setdiff1d(np.arange(idx.size), rep)
            active[idx[dropped]] = False
            merged[idx[dropped]] = True
    res[merged] = np.inf
    return P, res, J, E


def _dedupe(P: np.ndarray, radius: float) -> np.ndarray:
    """Indices of representatives, greedy in a deterministic coordinate order."""
    order = np.lexsort((P[:, 1], P[:, 0], -P[:, 2]))
    tree = cKDTree(P)
    taken = np.zeros(len(P), bool)
    keep = []
    for i in order:
        if taken[i]:
            continue
        keep.append(int(i))
        taken[tree.query_ball_point(P[i], radius)] = True
    return np.asarray(keep, dtype=int)


def _has_chain(P: np.ndarray, radius: float) -> bool:
    if len(P) < 2:
        return False
    return bool(cKDTree(P).query_pairs(CHAIN_FACTOR * radius))


def _kernel_probe(H, p: np.ndarray, D: np.ndarray, E: np.ndarray, k: int, step: float, tol: float) -> bool:
    """Is ``p`` part of a curve of fixed points?  Offset along the kernel of
    ``D - I``, then re-solve only transversally; a curve is reported when the
    transversal solve converges to a distinct fixed point."""
    _, s, vt = np.linalg.svd(D - np.eye(2))
    v = vt[-1]
    kern, normal = E @ v, E @ vt[0]
    if s[0] < 1e-12:  # D == I: any nearby point should already be fixed
        q = p + PROBE_DISTANCE * kern
        q /= np.linalg.norm(q)
        g, _, _ = _residual_and_jac(H, q[None], k, step)
        return bool(np.linalg.norm(g) <= tol)
    q = p + PROBE_DISTANCE * kern
    for _ in range(8):
        q /= np.linalg.norm(q)
        g, J, Eq = _residual_and_jac(H, q[None], k, step)
        if np.linalg.norm(g[0]) <= tol:
            return bool(np.linalg.norm(q - p) > 0.5 * PROBE_DISTANCE)
        col = J[0] @ (Eq[0].T @ normal)
        t = -float(col @ g[0]) / max(float(col @ col), 1e-300)
        q = q + t * normal
    return False


def _seed_maps(J: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Tangent maps (N, 2, 2) in the seed frames from displacement Jacobians."""
    return np.einsum("nji,njk->nik", E, J + E)


@dataclass(frozen=True)
class _Root:
    point: np.ndarray
    D: np.ndarray
    E: np.ndarray


def linearize_roots(H, points: np.ndarray, k: int, step: float, frames: list) -> list:
    """Batched linearized flow along several closed orbits.

    ``frames[i]`` maps (n, 3) points to (n, 2, 3) row frames.  Returns
    ``(ts, orbit_points, A)`` per root with ``A`` the tangent maps in those frames.
    """
    F0 = np.stack([f(p[None])[0] for f, p in zip(frames, points)])
    ts, P, V = integrate(H, points, float(k), step, V0=np.linalg.pinv(F0), record=True)
    return [(ts, P[:, i], np.einsum("nij,njk->nik", f(P[:, i]), V[:, i])) for i, f in enumerate(frames)]


def _orbit_record(ts, pts, A, k, triv, tag, label="") -> PeriodicOrbit:
    path = _to_path(ts, A, float(k), triv.winding_correction if triv else 0, label)
    rep = index_report(path)
    D = path.endpoint
    tr = float(np.trace(D))
    return PeriodicOrbit(pts[0].copy(), k, tr, classify_trace(tr), rep, reduce_mod(rep.delta, 4),
                         triv, tag, float(np.linalg.det(np.eye(2) - D)))


def _index_orbits(H, roots: list[_Root], k: int, step: float, tag: str,
                  triv: TrivializationRecord | None) -> list[PeriodicOrbit]:
    """Linearize every root and build the orbit records in stereographic frames."""
    if not roots:
        return []
    P0 = np.stack([r.point for r in roots])
    trivs = [triv or TrivializationRecord(tuple(-p)) for p in P0]
    out: list[PeriodicOrbit | None] = [None] * len(roots)
    for _attempt in range(2):
        todo = [i for i in range(len(roots)) if out[i] is None]
        if not todo:
            break
        lin = linearize_roots(H, P0[todo], k, step, [trivs[i].frame for i in todo])
        for i, (ts, pts, A) in zip(todo, lin):
            t = trivs[i]
            if np.min(np.linalg.norm(pts - t.q, axis=1)) < max(10 * step, 1e-6):
                # orbit runs into the excluded point: move it away for the retry
                trivs[i] = TrivializationRecord(tuple(_far_point(pts)), t.winding_correction)
                continue
            out[i] = _orbit_record(ts, pts, A, k, t, tag, f"orbit {i}")
    return [o for o in out if o is not None]


@dataclass(frozen=True)
class SearchResult:
    roots: list[_Root]
    continuum: bool
    notes: tuple[str, ...] = ()
    n_fixed_seeds: int = 0


def search_roots(H, seeds: np.ndarray, k: int = 1, newton_tol: float = 1e-10,
                 search_step: float = SEARCH_STEP, step: float = DEFAULT_STEP,
                 dedupe_radius: float = DEDUPE_RADIUS) -> SearchResult:
    """Newton from every seed, polish, dedupe, and continuum detection."""
    g0, J0, E0 = _residual_and_jac(H, seeds, k, search_step)
    # continuum shortcut: seeds that are already (nearly) fixed with D ~ I
    D0 = _seed_maps(J0, E0)
    near = np.flatnonzero((np.linalg.norm(g0, axis=1) <= 1e-6)
                          & (np.abs(np.trace(D0, axis1=1, axis2=2) - 2) <= 1e-4))
    if near.size:
        Pn, rn, Jn, En = _newton(H, seeds[near[:MAX_REPORTED]], k, step, newton_tol)
        ok = rn <= newton_tol
        Dn = _seed_maps(Jn, En)
        if any(c and classify_trace(float(np.trace(d))) == "degenerate"
               and _kernel_probe(H, p, d, e, k, step, newton_tol) for c, p, d, e in zip(ok, Pn, Dn, En)):
            keep = np.flatnonzero(ok)
            keep = keep[_dedupe(Pn[keep], dedupe_radius)]
            note = f"continuum of fixed points: {near.size} grid seeds are fixed; reporting a sample"
            return SearchResult([_Root(Pn[i], Dn[i], En[i]) for i in keep], True, (note,), int(near.size))
    # coarse search, then polish the distinct candidates at the accurate step
    P, res, _, _ = _newton(H, seeds, k, search_step, newton_tol, init=(g0, J0, E0))
    cand = np.flatnonzero(res <= 1e3 * newton_tol)
    if cand.size == 0:
        return SearchResult([], False, ("no fixed points found",))
    cand = cand[_dedupe(P[cand], dedupe_radius)]
    P2, res2, J2, E2 = _newton(H, P[cand], k, step, newton_tol)
    good = np.flatnonzero(res2 <= newton_tol)
    keep = good[_dedupe(P2[good], dedupe_radius)] if good.size else good
    P2, J2, E2 = P2[keep], J2[keep], E2[keep]
    D = _seed_maps(J2, E2)
    continuum = _has_chain(P2, dedupe_radius)
    if not continuum:
        continuum = any(classify_trace(float(np.trace(d))) == "degenerate"
                        and _kernel_probe(H, p, d, e, k, step, newton_tol) for p, d, e in zip(P2, D, E2))
    return SearchResult([_Root(p, d, e) for p, d, e in zip(P2, D, E2)], continuum)


def find_fixed_points(H, k: int = 1, grid: tuple[int, int] = (32, 64), newton_tol: float = 1e-10,
                      search_step: float = SEARCH_STEP, step: float = DEFAULT_STEP,
                      dedupe_radius: float = DEDUPE_RADIUS, homotopy_tag: str = "S2",
                      trivialization: TrivializationRecord | None = None) -> CensusReport:
    """Census of Fix(phi^k) from Newton runs on every grid seed."""
    if newton_tol > 1e-10:
        raise ValueError("newton tol must be <= 1e-10")
    if k < 1:
        raise ValueError("iterate k must be a positive integer")
    sr = search_roots(H, seed_grid(*grid), k, newton_tol, search_step, step, dedupe_radius)
    notes = list(sr.notes)
    roots = sr.roots
    truncated = (sr.continuum and len(roots) > MAX_REPORTED) or sr.n_fixed_seeds > len(roots)
    if sr.continuum and len(roots) > MAX_REPORTED:
        notes.append(f"continuum of fixed points: reporting {MAX_REPORTED} of {len(roots)} roots")
        roots = roots[:MAX_REPORTED]
    orbits = _index_orbits(H, roots, k, step, homotopy_tag, trivialization)
    lef = None
    if not sr.continuum and all(o.classification != "degenerate" for o in orbits):
        lef = sum(1 if o.det_i_minus_d > 0 else -1 for o in orbits)
        if lef != 2:
            notes.append(f"census incomplete: Lefschetz sum {lef} != 2")
    return CensusReport(orbits, lef, sr.continuum, k, tuple(notes), truncated)


# -- twist perturbation -----------------------------------------------------

def is_static_fixed_point(H, R, tol: float = 1e-12, samples: int = 41) -> bool:
    """True when the vector field vanishes at ``R`` for all sampled times."""
    ham = compile_spec(H)
    R = sphere_point(R)[None]
    ts = np.linspace(0.0, 1.0, samples)
    return all(np.linalg.norm(np.cross(ham.grad(t, R), R)) <= tol for t in ts)


def twist_perturbation(H: HamiltonianSpec, R, tp: TwistPerturbation) -> HamiltonianSpec:
    """Add a local rotation about the static fixed point ``R``."""
    R = sphere_point(R)
    if not is_static_fixed_point(H, R):
        raise ValueError("twist center must be a static fixed point of the flow")
    tp = TwistPerturbation(tuple(R), tp.lambda0, tp.support_radius, tp.window, tp.profile)
    if tp.lambda0 == 0.0:
        return H
    spec = twisted(H, tp)
    compile_spec(spec)  # runs the time-support check
    return spec


# -- rationality ------------------------------------------------------------

@dataclass(frozen=True)
class RationalityVerdict:
    rational: bool
    best: Fraction
    error: float
    qmax: int
    tol: float

    def to_dict(self) -> dict:
        return {"rational": self.rational, "best_p": self.best.numerator, "best_q": self.best.denominator,
                "error": self.error, "qmax": self.qmax, "tol": self.tol}

    def __str__(self) -> str:
        if self.rational:
            return f"rational({self.best.numerator}/{self.best.denominator})"
        return f"no rational with q <= {self.qmax}"


def rationality_test(delta: float, qmax: int = 10_000, tol: float = 1e-9) -> RationalityVerdict:
    """Best rational approximation with denominator at most ``qmax`` (continued fractions)."""
    if qmax < 2:
        raise ValueError("qmax must be >= 2")
    best = Fraction(float(delta)).limit_denominator(qmax)
    err = abs(float(delta) - best.numerator / best.denominator)
    return RationalityVerdict(err <= tol, best, err, qmax, tol)
