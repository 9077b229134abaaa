"""Declarative time-periodic Hamiltonians on the unit sphere.

A :class:`HamiltonianSpec` is plain data (JSON round-trippable).  ``compile``
turns it into a :class:`Hamiltonian` that evaluates values, ambient gradients and
Hessians on batches of points, which is all the integrator needs.

Every autonomous part ``H0`` is run on the schedule ``zeta'(t) H0`` where ``zeta``
is a smooth onto reparameterization of [0, 1] that is constant on the flat
window ``|t| < delta_h`` (mod 1).  The time-one map is unchanged by the schedule.
Twist terms ``kappa(t) G`` live inside the flat window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Any

import numpy as np

TWO_PI = 2.0 * math.pi
KINDS = ("zero", "rotation", "perturbed_rotation", "twisted", "tabulated")
ZETAS = ("smoothstep", "smootherstep")


# -- smooth profiles --------------------------------------------------------

def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _smootherstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 + u * (-15.0 + 6.0 * u))


def _smootherstep_d(u):
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


def _smootherstep_int(u):
    """Antiderivative of smootherstep on [0, 1] (equals 1/2 at u = 1)."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 4 * (2.5 + u * (-3.0 + u))


@dataclass(frozen=True)
class Schedule:
    delta_h: float = 0.05
    zeta: str = "smoothstep"

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta_h < 0.5:
            raise ValueError("delta_h must lie in [0, 0.5)")
        if self.zeta not in ZETAS:
            raise ValueError(f"unknown zeta profile {self.zeta!r}")

    def zeta_prime(self, t: float) -> float:
        """Derivative of the reparameterization at ``t`` (period one)."""
        d = self.delta_h
        u = (t % 1.0 - d) / (1.0 - 2.0 * d)
        if not 0.0 < u < 1.0:
            return 0.0
        if self.zeta == "smoothstep":
            return 6.0 * u * (1.0 - u) / (1.0 - 2.0 * d)
        return 30.0 * u * u * (1.0 - u) ** 2 / (1.0 - 2.0 * d)

    def reparam(self, t: float) -> float:
        """Cumulative time reparameterization, ``reparam(n + 1) = n + 1``."""
        d = self.delta_h
        n, frac = divmod(t, 1.0)
        u = (frac - d) / (1.0 - 2.0 * d)
        s = _smoothstep(u) if self.zeta == "smoothstep" else _smootherstep(u)
        return float(n + s)

    def breakpoints(self) -> tuple[float, ...]:
        return (self.delta_h, 1.0 - self.delta_h) if self.delta_h > 0 else ()

    def to_dict(self) -> dict:
        return {"delta_h": self.delta_h, "zeta": self.zeta}


@dataclass(frozen=True)
class TwistPerturbation:
    """Local rotation term ``kappa(t) * lambda0 * b(p . center)``.

    Near ``center`` the term is a quadratic well whose flow turns the tangent
    plane at ``center`` by ``lambda0 * kappa(t) dt`` radians, counter-clockwise
    in the outward-oriented frame.  ``window = (start, length)`` is the time
    support of the bump ``kappa``; ``kappa = 1`` on its middle half.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 1.0)
    lambda0: float = 0.1
    support_radius: float = 0.5
    window: tuple[float, float] = (0.95, 0.1)
    profile: str = "bump"

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", tuple(float(v) for v in c / np.linalg.norm(c)))
        object.__setattr__(self, "window", (float(self.window[0]) % 1.0, float(self.window[1])))
        if self.profile not in ("bump", "constant"):
            raise ValueError("profile must be 'bump' or 'constant'")
        if not 0.0 < self.support_radius < math.pi:
            raise ValueError("support_radius must be in (0, pi)")
        if self.profile == "bump" and not 0.0 < self.window[1] <= 1.0:
            raise ValueError("window length must be in (0, 1]")

    def kappa(self, t: float) -> float:
        if self.profile == "constant":
            return 1.0
        start, length = self.window
        u = ((t - start) % 1.0) / length
        if u >= 1.0:
            return 0.0
        return float(min(_smoothstep(4.0 * u), _smoothstep(4.0 * (1.0 - u))))

    @property
    def kappa_integral(self) -> float:
        # smoothstep ramps are antisymmetric about their midpoint
        return 1.0 if self.profile == "constant" else 0.75 * self.window[1]

    @property
    def lam(self) -> float:
        return self.lambda0 * self.kappa_integral

    def breakpoints(self) -> tuple[float, ...]:
        if self.profile == "constant":
            return ()
        s, L = self.window
        return tuple((s + f * L) % 1.0 for f in (0.0, 0.25, 0.75, 1.0))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "lambda0": self.lambda0, "support_radius": self.support_radius,
                "window": list(self.window), "profile": self.profile}

    @classmethod
    def from_dict(cls, d: dict) -> "TwistPerturbation":
        return cls(tuple(d.get("center", (0, 0, 1))), float(d.get("lambda0", 0.1)),
                   float(d.get("support_radius", 0.5)), tuple(d.get("window", (0.95, 0.1))),
                   d.get("profile", "bump"))


@dataclass(frozen=True)
class HamiltonianSpec:
    kind: str
    params: dict = field(default_factory=dict)
    schedule: Schedule = field(default_factory=Schedule)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")

    def to_dict(self) -> dict:
        params = dict(self.params)
        if self.kind == "twisted":
            params["base"] = params["base"].to_dict() if isinstance(params["base"], HamiltonianSpec) else params["base"]
            tw = params["twist"]
            params["twist"] = tw.to_dict() if isinstance(tw, TwistPerturbation) else tw
        return {"kind": self.kind, "params": params, "schedule": self.schedule.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        sched = d.get("schedule", {}) or {}
        schedule = Schedule(float(sched.get("delta_h", 0.05)), sched.get("zeta", "smoothstep"))
        params = dict(d.get("params", {}) or {})
        if d["kind"] == "twisted":
            base = params["base"]
            params["base"] = base if isinstance(base, HamiltonianSpec) else cls.from_dict(base)
            tw = params["twist"]
            params["twist"] = tw if isinstance(tw, TwistPerturbation) else TwistPerturbation.from_dict(tw)
        return cls(d["kind"], params, schedule)

    @property
    def base(self) -> "HamiltonianSpec":
        return self.params["base"] if self.kind == "twisted" else self


# -- catalog constructors ---------------------------------------------------

def zero(schedule: Schedule | None = None) -> HamiltonianSpec:
    return HamiltonianSpec("zero", {}, schedule or Schedule())


def rotation(alpha: float, schedule: Schedule | None = None) -> HamiltonianSpec:
    return HamiltonianSpec("rotation", {"alpha": float(alpha)}, schedule or Schedule())


def perturbed_rotation(alpha: float, eps: float = 0.0, m: int = 1, beta: float = 0.0,
                       profile: str = "linear", schedule: Schedule | None = None) -> HamiltonianSpec:
    """Rotation with latitude-dependent rate and an angular-mode perturbation.

    The angular rate is ``alpha + beta z`` (``profile='linear'``) or
    ``alpha - beta (1 - z^2)`` (``profile='bulge'``); the perturbation
    ``eps (x^2 + y^2) Re((x + i y)^m)`` vanishes to order ``m + 2`` at the poles,
    so the poles stay static with unchanged linearization.
    """
    return HamiltonianSpec("perturbed_rotation",
                           {"alpha": float(alpha), "eps": float(eps), "m": int(m), "beta": float(beta),
                            "profile": profile}, schedule or Schedule())


def twisted(base: HamiltonianSpec, twist: TwistPerturbation) -> HamiltonianSpec:
    return HamiltonianSpec("twisted", {"base": base, "twist": twist}, base.schedule)


def tabulated(terms: list[tuple[int, int, int, float]], schedule: Schedule | None = None) -> HamiltonianSpec:
    """Polynomial ``sum c x^i y^j z^k`` from a table of ``(i, j, k, c)`` rows."""
    return HamiltonianSpec("tabulated", {"terms": [list(t) for t in terms]}, schedule or Schedule())


def fourier_perturbation(spec: HamiltonianSpec, eps: float, seed: int, modes: int = 3) -> HamiltonianSpec:
    """Add a seeded small perturbation ``eps (x^2+y^2)^2 sum c_m Re/Im((x+iy)^m) z^l``.

    The factor ``(x^2+y^2)^2`` keeps both poles static with unchanged
    linearization, so marked points of the catalog survive the perturbation.
    """
    rng = np.random.default_rng(seed)
    terms: list[list[float]] = []
    for m in range(0, modes + 1):
        for part in ("re", "im"):
            if m == 0 and part == "im":
                continue
            c = float(rng.normal()) * eps
            for l in (0, 1):
                cl = c * (1.0 if l == 0 else float(rng.normal()))
                for (i, j, k), v in _mode_terms(m, part).items():
                    for (a, b), w in {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}.items():
                        terms.append([i + a, j + b, k + l, cl * v * w])
    params = dict(spec.params)
    params["extra_terms"] = list(params.get("extra_terms", [])) + terms
    return HamiltonianSpec(spec.kind, params, spec.schedule)


def _mode_terms(m: int, part: str) -> dict[tuple[int, int, int], float]:
    """Monomials of Re((x+iy)^m) or Im((x+iy)^m)."""
    out: dict[tuple[int, int, int], float] = {}
    for j in range(m + 1):
        # i^j is real for even j, imaginary for odd j
        if (part == "re") != (j % 2 == 0):
            continue
        sign = (-1) ** (j // 2)
        out[(m - j, j, 0)] = out.get((m - j, j, 0), 0.0) + sign * comb(m, j)
    return out


# -- compiled evaluation ----------------------------------------------------

class Polynomial:
    """Sum of monomials ``c x^i y^j z^k`` evaluated on (N, 3) arrays."""

    def __init__(self, exps: np.ndarray, coef: np.ndarray):
        exps = np.asarray(exps, dtype=int).reshape(-1, 3)
        coef = np.asarray(coef, dtype=float).reshape(-1)
        keep = coef != 0.0
        self.exps, self.coef = exps[keep], coef[keep]
        self.degree = int(self.exps.sum(axis=1).max()) if len(self.coef) else 0
        self._grad: tuple[np.ndarray, np.ndarray] | None = None
        self._hess: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_terms(cls, terms) -> "Polynomial":
        if not terms:
            return cls(np.zeros((0, 3)), np.zeros(0))
        arr = np.asarray(terms, dtype=float)
        return cls(arr[:, :3].astype(int), arr[:, 3])

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.vstack([self.exps, other.exps]), np.concatenate([self.coef, other.coef]))

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.exps, self.coef * c)

    @property
    def is_zero(self) -> bool:
        return len(self.coef) == 0

    def derivative(self, axis: int) -> "Polynomial":
        e = self.exps.copy()
        c = self.coef * e[:, axis]
        e[:, axis] = np.maximum(e[:, axis] - 1, 0)
        return Polynomial(e, c)

    def _monomials(self, exps: np.ndarray, p: np.ndarray) -> np.ndarray:
        d = int(exps.max()) if exps.size else 0
        pw = np.ones((d + 1, 3, len(p)))
        for n in range(1, d + 1):
            pw[n] = pw[n - 1] * p.T
        return pw[exps[:, 0], 0] * pw[exps[:, 1], 1] * pw[exps[:, 2], 2]

    def __call__(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        if self.is_zero:
            return np.zeros(len(p))
        return self.coef @ self._monomials(self.exps, p)

    @staticmethod
    def _stack(polys: list["Polynomial"]) -> tuple[np.ndarray, np.ndarray]:
        """Shared monomial table and coefficient matrix for several polynomials."""
        keys: dict[tuple[int, int, int], int] = {}
        for q in polys:
            for e in q.exps:
                keys.setdefault(tuple(int(v) for v in e), len(keys))
        exps = np.array(list(keys), dtype=int).reshape(-1, 3)
        C = np.zeros((len(polys), len(keys)))
        for r, q in enumerate(polys):
            for e, c in zip(q.exps, q.coef):
                C[r, keys[tuple(int(v) for v in e)]] += c
        return exps, C

    def grad(self, p: np.ndarray) -> np.ndarray:
        if self._grad is None:
            self._grad = self._stack([self.derivative(a) for a in range(3)])
        p = np.atleast_2d(p)
        exps, C = self._grad
        if not exps.size:
            return np.zeros_like(p, dtype=float)
        return (C @ self._monomials(exps, p)).T

    def hess(self, p: np.ndarray) -> np.ndarray:
        if self._hess is None:
            g = [self.derivative(a) for a in range(3)]
            self._hess = self._stack([g[a].derivative(b) for a, b in _PAIRS])
        p = np.atleast_2d(p)
        exps, C = self._hess
        out = np.zeros((len(p), 3, 3))
        if not exps.size:
            return out
        vals = C @ self._monomials(exps, p)
        for r, (a, b) in enumerate(_PAIRS):
            out[:, a, b] = out[:, b, a] = vals[r]
        return out


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


class TwistTerm:
    """Spatial part ``lambda0 * b(p . c)`` of a twist, with ``b' = 1`` near c."""

    def __init__(self, tp: TwistPerturbation):
        self.c = np.asarray(tp.center, dtype=float)
        self.lambda0 = tp.lambda0
        self.s0 = math.cos(tp.support_radius)
        self.s1 = math.cos(0.5 * tp.support_radius)
        self.width = self.s1 - self.s0

    def _u(self, p):
        return (np.atleast_2d(p) @ self.c - self.s0) / self.width

    def __call__(self, p):
        u = self._u(p)
        inner = self.width * _smootherstep_int(u)
        outer = self.width * 0.5 + np.maximum(u - 1.0, 0.0) * self.width
        return self.lambda0 * np.where(u <= 1.0, inner, outer)

    def grad(self, p):
        return (self.lambda0 * _smootherstep(self._u(p)))[:, None] * self.c

    def hess(self, p):
        d2 = self.lambda0 * _smootherstep_d(self._u(p)) / self.width
        return d2[:, None, None] * np.outer(self.c, self.c)


def _rate_polynomial(params: dict) -> Polynomial:
    alpha = float(params.get("alpha", 0.0))
    beta = float(params.get("beta", 0.0))
    profile = params.get("profile", "linear")
    if profile == "linear":
        terms = [(0, 0, 1, TWO_PI * alpha), (0, 0, 2, TWO_PI * beta / 2.0)]
    elif profile == "bulge":
        terms = [(0, 0, 1, TWO_PI * (alpha - beta)), (0, 0, 3, TWO_PI * beta / 3.0)]
    else:
        raise ValueError(f"unknown rate profile {profile!r}")
    return Polynomial.from_terms(terms)


def _mode_perturbation(eps: float, m: int) -> Polynomial:
    terms = []
    for (i, j, k), v in _mode_terms(m, "re").items():
        terms.append((i + 2, j, k, eps * v))
        terms.append((i, j + 2, k, eps * v))
    return Polynomial.from_terms(terms)


class Hamiltonian:
    """Compiled form of a spec: ``H(t, p) = zeta'(t) P(p) + sum kappa_i(t) G_i(p)``."""

    def __init__(self, spec: HamiltonianSpec):
        self.spec = spec
        self.schedule = spec.schedule
        base = spec.base
        poly = Polynomial.from_terms([])
        if base.kind == "rotation":
            poly = Polynomial.from_terms([(0, 0, 1, TWO_PI * float(base.params["alpha"]))])
        elif base.kind == "perturbed_rotation":
            poly = _rate_polynomial(base.params)
            eps = float(base.params.get("eps", 0.0))
            if eps:
                poly = poly + _mode_perturbation(eps, int(base.params.get("m", 1)))
        elif base.kind == "tabulated":
            poly = Polynomial.from_terms(base.params.get("terms", []))
        elif base.kind == "twisted":
            raise ValueError("nested twists must be flattened")
        extra = list(base.params.get("extra_terms", [])) + (
            list(spec.params.get("extra_terms", [])) if spec.kind == "twisted" else [])
        if extra:
            poly = poly + Polynomial.from_terms(extra)
        self.poly = poly
        self.twists: list[tuple[TwistPerturbation, TwistTerm]] = []
        if spec.kind == "twisted":
            tp = spec.params["twist"]
            _check_twist_window(spec.base, tp)
            if tp.lambda0 != 0.0:
                self.twists.append((tp, TwistTerm(tp)))

    @property
    def is_zero(self) -> bool:
        return self.poly.is_zero and not self.twists

    def breakpoints(self) -> tuple[float, ...]:
        pts = set(self.schedule.breakpoints())
        for tp, _ in self.twists:
            pts.update(tp.breakpoints())
        return tuple(sorted(pts))

    def vanishes_on(self, t0: float, t1: float) -> bool:
        """True when H is identically zero on [t0, t1].

        Valid for intervals that do not straddle a breakpoint, so the midpoint decides.
        """
        mid = 0.5 * (t0 + t1)
        zp, ks = self._factors(mid)
        return (zp == 0.0 or self.poly.is_zero) and all(k == 0.0 for k in ks)

    def _factors(self, t: float) -> tuple[float, list[float]]:
        return self.schedule.zeta_prime(t), [tp.kappa(t) for tp, _ in self.twists]

    def value(self, t: float, p: np.ndarray) -> np.ndarray:
        zp, ks = self._factors(t)
        p = np.atleast_2d(p)
        out = zp * self.poly(p) if zp else np.zeros(len(p))
        for k, (_, term) in zip(ks, self.twists):
            if k:
                out = out + k * term(p)
        return out

    def autonomous_value(self, p: np.ndarray) -> np.ndarray:
        return self.poly(np.atleast_2d(p))

    def grad(self, t: float, p: np.ndarray) -> np.ndarray:
        zp, ks = self._factors(t)
        p = np.atleast_2d(p)
        out = zp * self.poly.grad(p) if (zp and not self.poly.is_zero) else np.zeros_like(p)
        for k, (_, term) in zip(ks, self.twists):
            if k:
                out = out + k * term.grad(p)
        return out

    def hess(self, t: float, p: np.ndarray) -> np.ndarray:
        zp, ks = self._factors(t)
        p = np.atleast_2d(p)
        out = zp * self.poly.hess(p) if (zp and not self.poly.is_zero) else np.zeros((len(p), 3, 3))
        for k, (_, term) in zip(ks, self.twists):
            if k:
                out = out + k * term.hess(p)
        return out


def _check_twist_window(base: HamiltonianSpec, tp: TwistPerturbation) -> None:
    base_zero = base.kind == "zero" and not base.params.get("extra_terms")
    if base_zero:
        return
    if tp.profile == "constant":
        raise ValueError("overlapping time supports: a constant twist needs a zero base Hamiltonian")
    d = base.schedule.delta_h
    start, length = tp.window
    offset = (start - (1.0 - d)) % 1.0
    if offset + length > 2.0 * d + 1e-12:
        raise ValueError(
            f"overlapping time supports: twist window {tp.window} leaves the flat window |t| < {d}"
        )


def compile_spec(spec: HamiltonianSpec | dict | Hamiltonian) -> Hamiltonian:
    if isinstance(spec, Hamiltonian):
        return spec
    if isinstance(spec, dict):
        spec = HamiltonianSpec.from_dict(spec)
    return Hamiltonian(spec)


def spec_summary(spec: HamiltonianSpec) -> dict[str, Any]:
    return spec.to_dict()
