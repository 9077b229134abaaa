"""Hamiltonian flows on the unit sphere and their linearizations.

Conventions.  The area form in cylindrical coordinates is ``dz ^ dtheta`` so that
``zdot = -dH/dtheta`` and ``thetadot = dH/dz``; in the ambient space this is
``X = grad H x p``.  Linearizations are expressed in frames that are positively
oriented for the outward normal.  With these choices ``H = 2 pi alpha z`` is the
counter-clockwise rotation by ``2 pi alpha`` with mean index ``2 alpha`` at the
north pole and ``-2 alpha`` at the south pole.

The integrator is the two-stage Gauss-Legendre collocation method applied in the
ambient space to positions and tangent vectors together.  It preserves ``|p|``
exactly (a quadratic invariant) and is symplectic for the linear tangent
dynamics, so no chart hand-off is needed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _io
from .hamiltonian import Hamiltonian, HamiltonianSpec, compile_spec
from .index_core import ModularIndex, SymplecticPath2, mean_index, reduce_mod, rotation

EPS_CAP = 0.05
DEFAULT_STEP = 1e-3

_SQ3 = math.sqrt(3.0)
_GL_A = np.array([[0.25, 0.25 - _SQ3 / 6.0], [0.25 + _SQ3 / 6.0, 0.25]])
_GL_C = np.array([0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0])


class TrivializationError(ValueError):
    pass


class NonClosedOrbitError(ValueError):
    pass


def sphere_point(v) -> np.ndarray:
    """Unit vector from anything array-like (the SpherePoint type)."""
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero vector is not a sphere point")
    return v / n


NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])


# -- charts -----------------------------------------------------------------

class ChartAtlas:
    """Cylindrical chart ``(z, theta)`` and two polar Lambert caps.

    The caps use ``rho = 1 -+ z`` with ``X^2 + Y^2 = 2 rho`` (equal-area azimuthal
    coordinates), ordered so that every chart carries the area form ``dz ^ dtheta``.
    """

    eps_cap = EPS_CAP

    @staticmethod
    def to_cylindrical(p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        return np.stack([p[:, 2], np.arctan2(p[:, 1], p[:, 0]) % (2 * math.pi)], axis=-1)

    @staticmethod
    def from_cylindrical(zt: np.ndarray) -> np.ndarray:
        zt = np.atleast_2d(zt)
        z, th = zt[:, 0], zt[:, 1]
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return np.stack([r * np.cos(th), r * np.sin(th), z], axis=-1)

    @staticmethod
    def to_cap(p: np.ndarray, pole: str) -> np.ndarray:
        p = np.atleast_2d(p)
        x, y, z = p.T
        if pole == "north":
            f = np.sqrt(2.0 / (1.0 + z))
            return np.stack([f * x, -f * y], axis=-1)
        f = np.sqrt(2.0 / (1.0 - z))
        return np.stack([f * x, f * y], axis=-1)

    @staticmethod
    def from_cap(w: np.ndarray, pole: str) -> np.ndarray:
        w = np.atleast_2d(w)
        X, Y = w.T
        q = X * X + Y * Y
        g = np.sqrt(np.clip(1.0 - q / 4.0, 0.0, None))
        if pole == "north":
            return np.stack([g * X, -g * Y, 1.0 - q / 2.0], axis=-1)
        return np.stack([g * X, g * Y, q / 2.0 - 1.0], axis=-1)

    @classmethod
    def chart_for(cls, p: np.ndarray) -> str:
        z = float(np.asarray(p).reshape(3)[2])
        if z > 1.0 - cls.eps_cap:
            return "north"
        if z < -1.0 + cls.eps_cap:
            return "south"
        return "cylinder"


# -- vector field -----------------------------------------------------------

def _field(ham: Hamiltonian, t: float, p: np.ndarray) -> np.ndarray:
    return _cross(ham.grad(t, p), p)


def vector_field(H, t: float, p) -> np.ndarray:
    """Hamiltonian vector field in the ambient embedding, ``X = grad H x p``."""
    ham = compile_spec(H)
    single = np.ndim(p) == 1
    out = _field(ham, t, np.atleast_2d(np.asarray(p, dtype=float)))
    return out[0] if single else out


@dataclass(frozen=True)
class ChartVector:
    chart: str
    components: tuple[float, float]


def chart_velocity(H, t: float, p) -> ChartVector:
    """Velocity in the natural chart at ``p``: ``(zdot, thetadot)`` on the
    cylinder, Lambert-cap components inside the polar caps."""
    p = sphere_point(p)
    v = vector_field(H, t, p)
    chart = ChartAtlas.chart_for(p)
    if chart == "cylinder":
        r2 = p[0] ** 2 + p[1] ** 2
        return ChartVector(chart, (float(v[2]), float((p[0] * v[1] - p[1] * v[0]) / r2)))
    jac = _cap_jacobian(p, chart)
    comp = jac @ v
    return ChartVector(chart, (float(comp[0]), float(comp[1])))


def _cap_jacobian(p: np.ndarray, pole: str) -> np.ndarray:
    x, y, z = p
    if pole == "north":
        f = math.sqrt(2.0 / (1.0 + z))
        df = -0.5 * f / (1.0 + z)
        return np.array([[f, 0.0, df * x], [0.0, -f, -df * y]])
    f = math.sqrt(2.0 / (1.0 - z))
    df = 0.5 * f / (1.0 - z)
    return np.array([[f, 0.0, df * x], [0.0, f, df * y]])


# -- integrator -------------------------------------------------------------

def _time_grid(T: float, step: float, breakpoints: tuple[float, ...]) -> np.ndarray:
    """Uniform-ish grid on [0, T] that includes every breakpoint of the schedule."""
    if T == 0.0:
        return np.array([0.0])
    n_periods = int(math.ceil(T - 1e-12))
    knots = {0.0, float(T)}
    for j in range(n_periods):
        for b in breakpoints:
            if 0.0 < j + b < T:
                knots.add(j + b)
        if 0.0 < j < T:
            knots.add(float(j))
    knots = sorted(knots)
    grid = [0.0]
    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, int(math.ceil((b - a) / step - 1e-9)))
        grid.extend(np.linspace(a, b, n + 1)[1:])
    return np.asarray(grid)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product; much cheaper than np.cross for small arrays."""
    out = np.empty(np.broadcast(a, b).shape)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def _skew(a: np.ndarray) -> np.ndarray:
    z = np.zeros(a.shape[:-1])
    x, y, w = a[..., 0], a[..., 1], a[..., 2]
    return np.stack([np.stack([z, -w, y], -1), np.stack([w, z, -x], -1), np.stack([-y, x, z], -1)], -2)


def _stage_solve(ham: Hamiltonian, t: float, h: float, P: np.ndarray, K: np.ndarray,
                 tol: float = 1e-15, max_iter: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-point iteration for the Gauss-Legendre position stages."""
    for _ in range(max_iter):
        Q = P[None] + h * np.tensordot(_GL_A, K, axes=1)
        K_new = np.stack([_cross(ham.grad(t + _GL_C[i] * h, Q[i]), Q[i]) for i in range(2)])
        delta = np.max(np.abs(K_new - K))
        K = K_new
        if delta * h < tol:
            break
    Q = P[None] + h * np.tensordot(_GL_A, K, axes=1)
    return K, Q


def _tangent_stages(ham: Hamiltonian, t: float, h: float, Q: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Stages of the variation ``V' = DX V`` with DX frozen at the position stages.

    ``DX = -[p]x Hess + [grad H]x``; the stage equations are linear, so they are
    solved exactly as one 6x6 system per point.
    """
    M = [-_skew(Q[i]) @ ham.hess(t + _GL_C[i] * h, Q[i]) + _skew(ham.grad(t + _GL_C[i] * h, Q[i]))
         for i in range(2)]
    n = Q.shape[1]
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    S = np.empty((n, 6, 6))
    S[:, :3, :3] = eye - h * _GL_A[0, 0] * M[0]
    S[:, :3, 3:] = -h * _GL_A[0, 1] * M[0]
    S[:, 3:, :3] = -h * _GL_A[1, 0] * M[1]
    S[:, 3:, 3:] = eye - h * _GL_A[1, 1] * M[1]
    rhs = np.concatenate([M[0] @ V, M[1] @ V], axis=1)
    L = np.linalg.solve(S, rhs)
    return np.stack([L[:, :3], L[:, 3:]])


def integrate(H, P0, T: float, step: float = DEFAULT_STEP, V0=None, record: bool = False):
    """Integrate points (N, 3) and optional tangent frames (N, 3, m) for time T.

    Returns ``(ts, P, V)`` where ``P``/``V`` are final arrays, or full histories
    of shape (len(ts), ...) when ``record`` is set.
    """
    ham = compile_spec(H)
    P = np.atleast_2d(np.asarray(P0, dtype=float)).copy()
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    V = None if V0 is None else np.asarray(V0, dtype=float).copy()
    ts = _time_grid(float(T), step, ham.breakpoints())
    hist_P = [P.copy()] if record else None
    hist_V = [V.copy()] if (record and V is not None) else None
    K = np.zeros((2,) + P.shape)
    if ham.is_zero:
        if record:
            hist_P = [P.copy() for _ in ts]
            hist_V = [V.copy() for _ in ts] if V is not None else None
            return ts, np.array(hist_P), (np.array(hist_V) if hist_V is not None else None)
        return ts, P, V
    for t0, t1 in zip(ts[:-1], ts[1:]):
        h = t1 - t0
        if ham.vanishes_on(t0, t1):
            if record:
                hist_P.append(P.copy())
                if V is not None:
                    hist_V.append(V.copy())
            continue
        K = np.stack([_field(ham, t0 + _GL_C[i] * h, P) for i in range(2)]) if not K.any() else K
        K, Q = _stage_solve(ham, t0, h, P, K)
        if V is not None:
            L = _tangent_stages(ham, t0, h, Q, V)
            V = V + 0.5 * h * (L[0] + L[1])
        P = P + 0.5 * h * (K[0] + K[1])
        P /= np.linalg.norm(P, axis=1, keepdims=True)
        if V is not None:
            V = V - P[:, :, None] * np.einsum("nk,nkm->nm", P, V)[:, None, :]
        if record:
            hist_P.append(P.copy())
            if V is not None:
                hist_V.append(V.copy())
    if record:
        return ts, np.array(hist_P), (np.array(hist_V) if hist_V is not None else None)
    return ts, P, V


@dataclass(frozen=True)
class Trajectory:
    ts: np.ndarray
    points: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def to_csv(self, path) -> None:
        rows = [(t, *p) for t, p in zip(self.ts, self.points)]
        _io.write_csv(path, ["t", "x", "y", "z"], rows)


def flow(H, p0, T: float, step: float = DEFAULT_STEP) -> Trajectory:
    """Trajectory of ``p0`` sampled on the integration grid (spacing <= step)."""
    notes: list[str] = []
    if step > DEFAULT_STEP:
        msg = f"step {step:g} exceeds {DEFAULT_STEP:g}; downstream angle lifting may be undersampled"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    ts, P, _ = integrate(H, sphere_point(p0)[None], T, step, record=True)
    return Trajectory(ts, P[:, 0, :], tuple(notes))


def time_one_map(H, P, k: int = 1, step: float = DEFAULT_STEP) -> np.ndarray:
    return integrate(H, P, float(k), step)[1]


# -- trivializations --------------------------------------------------------

def _basis_with_axis(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (a, b) with (a, b, q) right-handed."""
    seed = np.array([1.0, 0.0, 0.0]) if abs(q[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    a = seed - q * (seed @ q)
    a /= np.linalg.norm(a)
    return a, np.cross(q, a)


@dataclass(frozen=True)
class TrivializationRecord:
    """Frame class along an orbit: stereographic chart from ``excluded_point``
    plus ``winding_correction`` full turns."""

    excluded_point: tuple[float, float, float] = (0.0, 0.0, -1.0)
    winding_correction: int = 0
    reference_loop_class: str = "contractible"

    def __post_init__(self) -> None:
        q = sphere_point(self.excluded_point)
        object.__setattr__(self, "excluded_point", tuple(float(v) for v in q))

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.excluded_point)

    def frame(self, P: np.ndarray) -> np.ndarray:
        """Orthonormal outward-oriented frames (N, 2, 3) from the chart's coordinate directions."""
        q = self.q
        a, b = _basis_with_axis(q)
        P = np.atleast_2d(P)
        one_minus = 1.0 - P @ q
        # chart w = (p.b, p.a) / (1 - p.q); swap makes it outward-oriented
        rows = []
        for u in (b, a):
            g = u[None, :] / one_minus[:, None] + (P @ u)[:, None] * q[None, :] / (one_minus ** 2)[:, None]
            g = g - P * np.sum(g * P, axis=1, keepdims=True)
            rows.append(g)
        F = np.stack(rows, axis=1)
        return F / np.linalg.norm(F[:, :1, :], axis=2, keepdims=True)

    def to_dict(self) -> dict:
        return {"excluded_point": list(self.excluded_point), "winding_correction": self.winding_correction,
                "reference_loop_class": self.reference_loop_class}


def default_trivialization(points: np.ndarray) -> TrivializationRecord:
    """Excluded point as far as possible from the given orbit samples."""
    points = np.atleast_2d(points)
    centroid = points.mean(axis=0)
    if np.linalg.norm(centroid) > 1e-6:
        cand = -centroid / np.linalg.norm(centroid)
        if np.min(np.linalg.norm(points - cand, axis=1)) > 0.1:
            return TrivializationRecord(tuple(cand))
    return TrivializationRecord(tuple(_far_point(points)))


def _far_point(points: np.ndarray, n: int = 400) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = math.pi * (1 + 5 ** 0.5) * i
    cand = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)
    dist = np.min(np.linalg.norm(cand[:, None, :] - points[None, ::max(1, len(points) // 200), :], axis=2), axis=1)
    return cand[int(np.argmax(dist))]


# -- linearization ----------------------------------------------------------

FrameFn = Callable[[np.ndarray], np.ndarray]


def linearize(H, p0, T: float, frame: FrameFn, frame_inverse0: np.ndarray | None = None,
              step: float = DEFAULT_STEP) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the orbit of ``p0`` with its variational equation.

    ``frame(P)`` returns (N, 2, 3) row frames; the tangent map is expressed as
    ``A(t) = F(x(t)) DPhi_t F(x0)^+``.  Returns ``(ts, points, A)``.
    """
    p0 = sphere_point(p0)
    F0 = frame(p0[None])[0]
    E0 = frame_inverse0 if frame_inverse0 is not None else np.linalg.pinv(F0)
    ts, P, V = integrate(H, p0[None], T, step, V0=E0[None], record=True)
    F = frame(P[:, 0, :])
    A = np.einsum("nij,njk->nik", F, V[:, 0])
    A[0] = np.eye(2)
    return ts, P[:, 0, :], A


def linearized_flow(H, p0, T: float = 1.0, triv: TrivializationRecord | None = None,
                    step: float = DEFAULT_STEP) -> SymplecticPath2:
    """Linearized flow along the orbit of ``p0`` as a path on t in [0, 1]
    (time rescaled by ``T``), in the frame class given by ``triv``."""
    p0 = sphere_point(p0)
    if triv is None:
        triv = TrivializationRecord(tuple(-p0))
    ts, pts, A = _linearize_checked(H, p0, T, triv, step)
    return _to_path(ts, A, T, triv.winding_correction, "linearized")


def _linearize_checked(H, p0, T, triv, step):
    margin = max(10.0 * step, 1e-6)
    if np.linalg.norm(p0 - triv.q) < margin:
        # the frame is singular at the start; probe the orbit without it
        pts = integrate(H, p0[None], T, step, record=True)[1][:, 0, :]
    else:
        ts, pts, A = linearize(H, p0, T, triv.frame, step=step)
    dist = np.linalg.norm(pts - triv.q, axis=1)
    if dist.min() < margin:
        alt = _far_point(pts)
        raise TrivializationError(
            f"trivialization breakdown: orbit passes within {dist.min():.2e} of the excluded point; "
            f"try excluded_point={alt.round(6).tolist()}"
        )
    return ts, pts, A


def _to_path(ts, A, T, winding: int, meta: str) -> SymplecticPath2:
    s = ts / ts[-1] if T else np.linspace(0.0, 1.0, len(ts))
    if T == 0.0:
        s = np.array([0.0, 1.0])
        A = np.stack([np.eye(2), np.eye(2)])
    A = np.array(A)
    if winding:
        A = np.array([rotation(2.0 * math.pi * winding * u) @ a for u, a in zip(s, A)])
    A[0] = np.eye(2)
    s[-1] = 1.0
    return SymplecticPath2(s, A, meta)


def orbit_with_path(H, p0, T: float, triv: TrivializationRecord, step: float = DEFAULT_STEP):
    """Trajectory points and linearized path in one integration."""
    ts, pts, A = _linearize_checked(H, sphere_point(p0), T, triv, step)
    return pts, _to_path(ts, A, T, triv.winding_correction, "linearized")


def mean_index_orbit(H, p0, T: float = 1.0, triv: TrivializationRecord | None = None,
                     step: float = DEFAULT_STEP, closure_tol: float = 1e-7) -> tuple[float, ModularIndex]:
    """Lifted mean index of a closed orbit and its class modulo 4."""
    p0 = sphere_point(p0)
    if triv is None:
        triv = TrivializationRecord(tuple(-p0))
    pts, path = orbit_with_path(H, p0, T, triv, step)
    gap = float(np.linalg.norm(pts[-1] - p0))
    if gap > closure_tol:
        raise NonClosedOrbitError(f"orbit is not closed: endpoint misses the start by {gap:.3e}")
    delta = mean_index(path)
    return delta, reduce_mod(delta, 4)


def area_drift(H, T: float = 1.0, n: int = 64, seed: int = 0, step: float = DEFAULT_STEP) -> float:
    """Max deviation from one of the Jacobian determinant of the time-T map,
    measured in orthonormal tangent frames at random points."""
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((n, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    E = np.stack([np.stack(_basis_with_axis(p), axis=1) for p in P])
    _, Q, V = integrate(H, P, T, step, V0=E)
    out = []
    for q, v in zip(Q, V):
        a, b = _basis_with_axis(q)
        out.append(abs(np.linalg.det(np.stack([a, b]) @ v) - 1.0))
    return float(max(out))
