"""Mean index and Conley-Zehnder index of paths in Sp(2).

A path is a sequence of 2x2 symplectic matrices sampled on ``0 = t_0 < ... < t_n = 1``
with ``M(0) = I``.  The mean index is obtained by lifting a continuous circle map
``rho: Sp(2) -> R/2piZ`` along the samples and dividing the total lift by pi.  The
circle map is the eigenvalue argument on the elliptic region and is locally
constant (0 or pi) on the hyperbolic region, which makes it conjugation invariant
and homogeneous under powers; both properties are what the iteration formula needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._io import dumps

DET_TOL = 1e-8
DEGENERACY_TOL = 1e-8
MAX_STEP = 0.5
MAX_ANGLE_JUMP = math.pi / 2
TWO_PI = 2.0 * math.pi


class NonSymplecticError(ValueError):
    pass


class UndersampledPathError(ValueError):
    pass


class LemmaInapplicableError(ValueError):
    pass


def _check_det(m: np.ndarray, tol: float = DET_TOL) -> None:
    # cancellation in ad - bc grows with the squared entry size
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    scale = np.maximum(1.0, np.sum(m * m, axis=(-2, -1)) / 2.0)
    err = np.abs(det - 1.0) / scale
    if np.any(err > tol):
        worst = float(np.max(err))
        raise NonSymplecticError(f"matrix is not symplectic: |det - 1| = {worst:.3e} > {tol:g}")


def _step_sizes(ms: np.ndarray) -> np.ndarray:
    """Relative steps ||M_{i+1} - M_i|| / max(1, ||M_i||) in the Frobenius norm,
    which bounds the operator norm of the difference from above."""
    diff = np.sqrt(np.sum((ms[1:] - ms[:-1]) ** 2, axis=(1, 2)))
    scale = np.maximum(1.0, np.sqrt(np.sum(ms[:-1] ** 2, axis=(1, 2)) / 2.0))
    return diff / scale


@dataclass(frozen=True, eq=False)
class SymplecticPath2:
    """Sampled path in Sp(2) starting at the identity.

    ``ts`` has shape (n,), ``ms`` has shape (n, 2, 2).  Construction validates the
    path invariants; pass ``validate=False`` only for intermediate objects that
    are refined immediately afterwards.
    """

    ts: np.ndarray
    ms: np.ndarray
    meta: str = ""
    validate: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        ts = np.asarray(self.ts, dtype=float).copy()
        ms = np.asarray(self.ms, dtype=float).reshape(-1, 2, 2).copy()
        ts.setflags(write=False)
        ms.setflags(write=False)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "ms", ms)
        if self.validate:
            self.check()

    def check(self) -> None:
        ts, ms = self.ts, self.ms
        if len(ts) != len(ms) or len(ts) < 2:
            raise ValueError("path needs at least two samples with matching times")
        if ts[0] != 0.0 or not np.array_equal(ms[0], np.eye(2)):
            raise ValueError("path must start at t = 0 with the identity matrix")
        if ts[-1] != 1.0:
            raise ValueError("path must end at t = 1")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("sample times must be strictly increasing")
        _check_det(ms)
        steps = _step_sizes(ms)
        if np.any(steps > MAX_STEP):
            raise UndersampledPathError(
                f"consecutive samples differ by {float(steps.max()):.3f} (relative) > {MAX_STEP}"
            )

    def __len__(self) -> int:
        return len(self.ts)

    @property
    def endpoint(self) -> np.ndarray:
        return self.ms[-1]

    @classmethod
    def from_function(cls, func: Callable[[float], np.ndarray], n: int = 257, meta: str = "") -> "SymplecticPath2":
        ts = np.linspace(0.0, 1.0, n)
        ms = np.array([np.asarray(func(t), dtype=float) for t in ts])
        ms[0] = np.eye(2)
        return cls(ts, ms, meta)

    def to_records(self) -> list[dict]:
        return [{"t": float(t), "m": [float(v) for v in m.ravel()]} for t, m in zip(self.ts, self.ms)]

    def to_json(self) -> str:
        return dumps(self.to_records())

    @classmethod
    def from_json(cls, text: str, meta: str = "") -> "SymplecticPath2":
        records = json.loads(text)
        ts = [r["t"] for r in records]
        ms = [np.reshape(r["m"], (2, 2)) for r in records]
        return cls(np.array(ts), np.array(ms), meta)


@dataclass(frozen=True)
class IndexReport:
    delta: float
    mu: int | str
    n: int
    endpoint_eigenvalues: tuple[complex, complex]

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "mu": self.mu,
            "n": self.n,
            "eigenvalues": [[z.real, z.imag] for z in self.endpoint_eigenvalues],
        }


@dataclass(frozen=True)
class ModularIndex:
    value: float
    modulus: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.value < self.modulus:
            raise ValueError(f"value {self.value} outside [0, {self.modulus})")

    def distance_to_zero(self) -> float:
        """Distance from the class to 0 on the circle R / modulus Z."""
        return min(self.value, self.modulus - self.value)

    def to_dict(self) -> dict:
        return {"value": self.value, "modulus": self.modulus}


def rho_angle(m: np.ndarray) -> float:
    """Circle map Sp(2) -> [0, 2pi).

    Elliptic matrices map to the argument of the eigenvalue ``e^{i phi}`` whose
    rotation sense matches ``m[1, 0]`` (positive for counter-clockwise rotation);
    hyperbolic and parabolic matrices map to 0 or pi according to the sign of the
    trace.
    """
    m = np.asarray(m, dtype=float)
    _check_det(m)
    tr = m[0, 0] + m[1, 1]
    if tr >= 2.0:
        return 0.0
    if tr <= -2.0:
        return math.pi
    phi = math.acos(tr / 2.0)
    # elliptic: bc = ad - 1 < 0, so m[1,0] never vanishes
    return phi if m[1, 0] > 0 else TWO_PI - phi


def _rho_many(ms: np.ndarray) -> np.ndarray:
    tr = ms[:, 0, 0] + ms[:, 1, 1]
    phi = np.arccos(np.clip(tr / 2.0, -1.0, 1.0))
    return np.where(ms[:, 1, 0] > 0, phi, np.where(tr >= 2.0, 0.0, TWO_PI - phi) % TWO_PI)


def _wrapped_jumps(ms: np.ndarray) -> np.ndarray:
    rho = _rho_many(ms)
    return (np.diff(rho) + math.pi) % TWO_PI - math.pi


def lifted_angles(path: SymplecticPath2) -> np.ndarray:
    """Continuous lift of rho along the samples, starting at 0."""
    jumps = _wrapped_jumps(path.ms)
    if jumps.size and np.max(np.abs(jumps)) > MAX_ANGLE_JUMP:
        i = int(np.argmax(np.abs(jumps)))
        raise UndersampledPathError(
            f"undersampled path: angle jump {jumps[i]:.3f} rad between t={path.ts[i]:.6g} and t={path.ts[i + 1]:.6g}"
        )
    return np.concatenate([[0.0], np.cumsum(jumps)])


def mean_index(path: SymplecticPath2) -> float:
    return float(lifted_angles(path)[-1] / math.pi)


def eigenvalues(m: np.ndarray) -> tuple[complex, complex]:
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = complex(tr * tr / 4.0 - det)
    root = disc ** 0.5
    lam1, lam2 = tr / 2.0 + root, tr / 2.0 - root
    # sort: positive imaginary part first, then larger real part
    return tuple(sorted((complex(lam1), complex(lam2)), key=lambda z: (-z.imag, -z.real)))  # type: ignore[return-value]


def is_degenerate(m: np.ndarray, tol: float = DEGENERACY_TOL) -> bool:
    """True when 1 is an eigenvalue of ``m`` up to ``tol``.

    Uses both the eigenvalue distance and ``|2 - trace| = |det(I - M)|`` so that
    the verdict agrees with trace-based classification near the identity.
    """
    tr = m[0, 0] + m[1, 1]
    lam = eigenvalues(m)
    return min(abs(z - 1.0) for z in lam) <= tol or abs(2.0 - tr) <= tol


def cz_index(path: SymplecticPath2) -> int | str:
    """Conley-Zehnder index by counting crossings of the lift through 2piZ.

    Each signed crossing contributes 2; an elliptic endpoint adds 1, a
    hyperbolic endpoint sits on a multiple of pi and contributes its half-turn
    count directly.
    """
    theta = lifted_angles(path)
    end = path.endpoint
    if is_degenerate(end):
        return "degenerate"
    levels = np.floor(theta / TWO_PI)
    crossings = int(np.sum(np.diff(levels)))
    tr = end[0, 0] + end[1, 1]
    if abs(tr) < 2.0:
        return 2 * crossings + 1
    return int(round(theta[-1] / math.pi))


def cz_via_closest_odd(delta: float) -> int:
    delta = float(delta)
    if abs(delta - round(delta)) <= 1e-9:
        raise LemmaInapplicableError(f"lemma inapplicable: mean index {delta!r} is an integer")
    return 2 * math.floor(delta / 2.0) + 1


def index_report(path: SymplecticPath2) -> IndexReport:
    return IndexReport(mean_index(path), cz_index(path), 1, eigenvalues(path.endpoint))


def _normalize(ms: np.ndarray) -> np.ndarray:
    det = ms[..., 0, 0] * ms[..., 1, 1] - ms[..., 0, 1] * ms[..., 1, 0]
    return ms / np.sqrt(det)[..., None, None]


def refine(path: SymplecticPath2, max_jump: float = math.pi / 4, max_step: float = 0.25,
           max_passes: int = 40) -> SymplecticPath2:
    """Insert midpoints (entrywise linear interpolation, rescaled to det 1)
    until every step is below ``max_step`` and every angle jump below ``max_jump``."""
    ts, ms = np.array(path.ts), np.array(path.ms)
    for _ in range(max_passes):
        bad = (_step_sizes(ms) > max_step) | (np.abs(_wrapped_jumps(ms)) > max_jump)
        if not bad.any():
            break
        idx = np.nonzero(bad)[0]
        mid_t = 0.5 * (ts[idx] + ts[idx + 1])
        mid_m = _normalize(0.5 * (ms[idx] + ms[idx + 1]))
        ts = np.insert(ts, idx + 1, mid_t)
        ms = np.insert(ms, idx + 1, mid_m, axis=0)
    else:
        raise UndersampledPathError("refinement did not converge")
    return SymplecticPath2(ts, ms, path.meta)


def iterate_path(path: SymplecticPath2, k: int) -> SymplecticPath2:
    """Path of the k-th iterate: ``t -> A(kt - j) A(1)^j`` on ``[j/k, (j+1)/k]``."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    k = int(k)
    ts_parts = [path.ts]
    ms_parts = [path.ms]
    power = np.eye(2)
    end = path.endpoint
    for j in range(1, k):
        power = power @ end
        ts_parts.append(path.ts[1:] + j)
        ms_parts.append(path.ms[1:] @ power)
    ts = np.concatenate(ts_parts) / k
    ts[-1] = 1.0
    ms = _normalize(np.concatenate(ms_parts))
    ms[0] = np.eye(2)
    raw = SymplecticPath2(ts, ms, f"{path.meta}^{k}", validate=False)
    return refine(raw)


def reduce_mod(delta: float, modulus: int = 4) -> ModularIndex:
    if modulus <= 0 or modulus % 2:
        raise ValueError("modulus must be a positive even integer")
    value = math.fmod(float(delta), modulus)
    if value < 0:
        value += modulus
    if value >= modulus:
        value = 0.0
    return ModularIndex(value, int(modulus))


def perturb_path(path: SymplecticPath2, eps: float, rng: np.random.Generator) -> SymplecticPath2:
    """Move every sample (except M(0)) by at most ``eps`` in operator norm, keeping det = 1."""
    noise = rng.standard_normal((len(path) - 1, 2, 2))
    noise /= np.linalg.norm(noise, ord=2, axis=(1, 2))[:, None, None]
    ms = np.array(path.ms)
    ms[1:] = _normalize(ms[1:] + 0.5 * eps * noise)
    return SymplecticPath2(path.ts, ms, path.meta + "~")


# -- path constructors ------------------------------------------------------

def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_path(total_angle: float, n: int = 257) -> SymplecticPath2:
    ts = np.linspace(0.0, 1.0, n)
    c, s = np.cos(total_angle * ts), np.sin(total_angle * ts)
    ms = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    ms[0] = np.eye(2)
    return SymplecticPath2(ts, ms, f"rotation({total_angle:g})")


def _exp_sl2(x: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """exp(t X) for a traceless 2x2 matrix X, vectorized over t."""
    d = -float(np.linalg.det(x))
    eye = np.eye(2)
    # X^2 = d I
    if d > 1e-14:
        w = math.sqrt(d)
        a, b = np.cosh(w * ts), np.sinh(w * ts) / w
    elif d < -1e-14:
        w = math.sqrt(-d)
        a, b = np.cos(w * ts), np.sin(w * ts) / w
    else:
        a, b = np.ones_like(ts), ts.copy()
    return a[:, None, None] * eye + b[:, None, None] * x


def exp_path(generator: np.ndarray, n: int = 257) -> SymplecticPath2:
    """Path ``t -> exp(t X)`` for X in sp(2) (traceless)."""
    generator = np.asarray(generator, dtype=float)
    if abs(np.trace(generator)) > 1e-12:
        raise ValueError("generator must be traceless")
    ts = np.linspace(0.0, 1.0, n)
    ms = _exp_sl2(generator, ts)
    ms[0] = np.eye(2)
    return SymplecticPath2(ts, ms, "exp")


def smooth_random_path(rng: np.random.Generator, n: int = 257, turns: float = 2.0,
                       stretch: float = 1.5) -> SymplecticPath2:
    """Smooth random path ``R(theta(t)) exp(t X)`` used by property checks.

    ``theta`` combines a random winding (up to ``turns`` full turns either way)
    with a smooth wobble; ``X`` is a random element of sp(2) of norm ``<= stretch``.
    """
    ts = np.linspace(0.0, 1.0, n)
    a = rng.uniform(-turns, turns)
    b = rng.uniform(-1.0, 1.0)
    theta = TWO_PI * a * ts + b * np.sin(math.pi * ts) ** 2
    sym = rng.standard_normal((2, 2))
    sym = 0.5 * (sym + sym.T)
    sym *= rng.uniform(0.0, stretch) / max(np.linalg.norm(sym, 2), 1e-12)
    gen = np.array([[0.0, -1.0], [1.0, 0.0]]) @ sym
    gen -= 0.5 * np.trace(gen) * np.eye(2)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    ms = rot @ _exp_sl2(gen, ts)
    ms[0] = np.eye(2)
    return refine(SymplecticPath2(ts, ms, "random", validate=False))


def concatenate_paths(first: SymplecticPath2, second: SymplecticPath2) -> SymplecticPath2:
    """Run ``first`` on [0, 1/2] then ``second`` right-multiplied by first's endpoint."""
    ts = np.concatenate([0.5 * first.ts, 0.5 + 0.5 * second.ts[1:]])
    ms = np.concatenate([first.ms, second.ms[1:] @ first.endpoint])
    return refine(SymplecticPath2(ts, ms, f"{first.meta}*{second.meta}", validate=False))


def paths_from_sequence(matrices: Sequence[np.ndarray]) -> SymplecticPath2:
    ms = np.asarray(matrices, dtype=float)
    ts = np.linspace(0.0, 1.0, len(ms))
    return SymplecticPath2(ts, ms)
