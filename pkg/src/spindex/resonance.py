"""Integer resonance relations among mean indices and the two-point verdict."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .orbit_census import CensusReport, rationality_test

BUDGET = 20_000_000


class ResonanceError(ValueError):
    pass


@dataclass(frozen=True)
class ResonanceConfig:
    N: int = 2
    n: int = 1
    a_max: int = 6
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.N < self.n + 1:
            raise ValueError("need N >= n + 1")
        if not 1 <= self.a_max <= 20:
            raise ValueError("a_max must lie in [1, 20]")

    @property
    def modulus(self) -> int:
        return 2 * self.N

    @property
    def generator_bound(self) -> float:
        return self.N / (self.N - self.n)

    def to_dict(self) -> dict:
        return {"N": self.N, "n": self.n, "modulus": self.modulus, "a_max": self.a_max, "tol": self.tol}


@dataclass(frozen=True)
class ResonanceSet:
    deltas: tuple[float, ...]
    vectors: tuple[tuple[int, ...], ...]
    residues: tuple[float, ...]
    rank_estimate: int
    config: ResonanceConfig = field(default_factory=ResonanceConfig)

    def to_dict(self) -> dict:
        return {"deltas": list(self.deltas), "vectors": [list(v) for v in self.vectors],
                "residues": list(self.residues), "rank_estimate": self.rank_estimate,
                "config": self.config.to_dict()}


def _centered_residue(x: np.ndarray, modulus: float) -> np.ndarray:
    """Representative of ``x mod modulus`` in (-modulus/2, modulus/2]."""
    r = np.mod(x, modulus)
    return np.where(r > modulus / 2, r - modulus, r)


def _sign_normalize(v: tuple[int, ...]) -> tuple[int, ...]:
    for c in v:
        if c:
            return v if c > 0 else tuple(-x for x in v)
    return v


def find_resonances(deltas, cfg: ResonanceConfig | None = None) -> ResonanceSet:
    """Exhaustive scan of the box ``|a_i| <= a_max`` for ``a . delta = 0 mod 2N``.

    A solution is kept when it is not an integer multiple of a smaller
    solution; for a generic solution set that means primitive, but a single
    index with ``4 delta = 0`` keeps ``(4)`` because ``(1), (2)`` fail.
    """
    cfg = cfg or ResonanceConfig()
    d = np.mod(np.asarray(deltas, dtype=float).ravel(), cfg.modulus)
    m = d.size
    if m == 0:
        raise ResonanceError("deltas must be nonempty")
    if (2 * cfg.a_max + 1) ** m > BUDGET:
        raise ResonanceError("brute force budget exceeded: use smaller a_max")
    rng = np.arange(-cfg.a_max, cfg.a_max + 1)
    grids = np.stack(np.meshgrid(*([rng] * m), indexing="ij"), axis=-1).reshape(-1, m)
    # keep one of each +- pair (first nonzero entry positive); drops the zero vector
    nz = grids != 0
    first = grids[np.arange(len(grids)), np.argmax(nz, axis=1)]
    grids = grids[first > 0]
    res = _centered_residue(grids @ d, cfg.modulus)
    hits = grids[np.abs(res) <= cfg.tol]
    hit_set = {tuple(int(x) for x in v) for v in hits}
    vectors, residues = [], []
    for v in sorted(hit_set, key=lambda v: (sum(abs(x) for x in v), tuple(-x for x in v))):
        g = math.gcd(*v)
        if any(tuple(x * j // g for x in v) in hit_set for j in range(1, g)):
            continue
        vectors.append(_sign_normalize(v))
        residues.append(float(_centered_residue(np.dot(v, d), cfg.modulus)))
    rank = int(np.linalg.matrix_rank(np.array(vectors, dtype=float))) if vectors else 0
    return ResonanceSet(tuple(float(x) for x in d), tuple(vectors), tuple(residues), rank, cfg)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    message: str
    details: dict = field(default_factory=dict)
    informational: bool = False

    def to_dict(self) -> dict:
        return {"passed": self.passed, "informational": self.informational, "message": self.message,
                **self.details}


def check_generator_bound(rs: ResonanceSet | tuple, cfg: ResonanceConfig | None = None) -> Verdict:
    """Generator with nonnegative entries and entry sum at most N / (N - n)."""
    cfg = cfg or (rs.config if isinstance(rs, ResonanceSet) else ResonanceConfig())
    if isinstance(rs, ResonanceSet):
        if rs.rank_estimate != 1:
            raise ResonanceError(f"bound inapplicable: rank {rs.rank_estimate} != 1")
        gen = min(rs.vectors, key=lambda v: sum(abs(x) for x in v))
    else:
        gen = tuple(int(x) for x in rs)
    if any(x < 0 for x in gen) and all(x <= 0 for x in gen):
        gen = tuple(-x for x in gen)
    total = sum(gen)
    ok = all(x >= 0 for x in gen) and total <= cfg.generator_bound + 1e-12
    return Verdict(ok, f"generator {gen}: sum {total} {'<=' if ok else '>'} {cfg.generator_bound:g}",
                   {"generator": list(gen), "sum": total, "bound": cfg.generator_bound})


def verify_two_point_theorem(census: CensusReport, cfg: ResonanceConfig | None = None,
                             tol: float = 1e-6, qmax: int = 10_000, rat_tol: float = 1e-9) -> Verdict:
    """Check the two-fixed-point conclusions on a census."""
    cfg = cfg or ResonanceConfig()
    if census.continuum_flag:
        raise ResonanceError("census has a continuum of fixed points")
    orbits = census.orbits
    if len(orbits) > 2:
        return Verdict(True, "theorem predicts infinitely many periodic points for higher iterates",
                       {"n_orbits": len(orbits)}, informational=True)
    if len(orbits) < 2:
        return Verdict(False, f"census has {len(orbits)} fixed point(s); a sphere map has at least two",
                       {"n_orbits": len(orbits)})
    details: dict = {"tol": tol, "qmax": qmax, "rationality_tol": rat_tol}
    if any(o.classification == "degenerate" for o in orbits):
        details["violation"] = True
        return Verdict(False, "degenerate orbit in a two-point census: violates the two-point theorem", details)
    deltas = [o.delta for o in orbits]
    total = sum(deltas)
    resid = float(_centered_residue(np.array(total), cfg.modulus))
    rats = [rationality_test(dl, qmax, rat_tol) for dl in deltas]
    elliptic = all(o.classification == "elliptic" for o in orbits)
    ok = elliptic and abs(resid) <= tol and not any(r.rational for r in rats)
    details.update({"deltas": deltas, "classes": [o.classification for o in orbits], "sum": total,
                    "sum_residue_mod": resid, "modulus": cfg.modulus,
                    "rationality": [r.to_dict() for r in rats]})
    msg = "two-point conclusions hold" if ok else f"two-point conclusions fail (residue {resid:.3e})"
    return Verdict(ok, msg, details)
