"""Blow-up of a sphere map at two antipodal elliptic fixed points, gluing two
copies into a torus isotopy, flux, torus census and index-gap tables.

Coordinates.  The cylinder is ``(z, theta)`` about the axis through the first
marked point ``P`` (``z = p . P``), with area form ``dz ^ dtheta``.  The torus
uses ``(s, theta)`` with ``Omega = ds ^ dtheta``:

    copy +      s in [0, 2]                 z = s - 1
    collar 1    s in [2, 2 + tau]           joins P of copy + to Q of copy -
    copy -      s in [2 + tau, 4 + tau]     z = s - 3 - tau
    collar 2    s in [4 + tau, 4 + 2 tau]   joins P of copy - to Q of copy +

so ``L1 = 4 + 2 tau``, ``L2 = 2 pi`` and the total area is ``(8 + 4 tau) pi``.
Boundary angles are lifted angles in the shared ``theta`` coordinate:
``beta_P = pi Delta(P)`` and ``beta_Q = -pi Delta(Q)``, the sign at ``Q``
coming from the outward frame at ``Q`` being opposite to ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import _io
from .hamiltonian import HamiltonianSpec, compile_spec
from .index_core import LemmaInapplicableError, SymplecticPath2, cz_index, iterate_path, mean_index
from .orbit_census import (
    DEDUPE_RADIUS,
    SEARCH_STEP,
    _to_path,
    classify_trace,
    is_static_fixed_point,
    linearize_roots,
    search_roots,
)
from .sphere_flow import DEFAULT_STEP, TrivializationRecord, _basis_with_axis, area_drift, integrate, sphere_point

TWO_PI = 2.0 * math.pi
COLLAR_MARGIN = 1e-3
RIGIDITY_TOL = 1e-6


class CollarError(ValueError):
    pass


class BlowUpError(ValueError):
    pass


# -- cylinder coordinates about an axis --------------------------------------

@dataclass(frozen=True)
class AxisFrame:
    """Orthonormal (a, b, c) with c the axis; theta measured from a towards b."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def about(cls, c) -> "AxisFrame":
        c = sphere_point(c)
        if np.allclose(c, [0.0, 0.0, 1.0]):
            return cls(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), c)
        a, b = _basis_with_axis(c)
        return cls(a, b, c)

    def to_cyl(self, P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(P)
        return np.stack([P @ self.c, np.mod(np.arctan2(P @ self.b, P @ self.a), TWO_PI)], axis=-1)

    def from_cyl(self, z, th) -> np.ndarray:
        z, th = np.broadcast_arrays(np.asarray(z, float), np.asarray(th, float))
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return (r * np.cos(th))[..., None] * self.a + (r * np.sin(th))[..., None] * self.b + z[..., None] * self.c

    def cyl_frame(self, P: np.ndarray) -> np.ndarray:
        """Rows grad z and grad theta (tangential), shape (N, 2, 3)."""
        P = np.atleast_2d(P)
        gz = self.c[None] - (P @ self.c)[:, None] * P
        pa, pb = P @ self.a, P @ self.b
        r2 = pa * pa + pb * pb
        gth = (pa[:, None] * self.b[None] - pb[:, None] * self.a[None]) / r2[:, None]
        return np.stack([gz, gth], axis=1)

    def velocity(self, ham, t: float, z: np.ndarray, th: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Hamiltonian velocity (zdot, thetadot) in cylinder coordinates."""
        shape = np.shape(z)
        P = self.from_cyl(z, th).reshape(-1, 3)
        X = np.cross(ham.grad(t, P), P)
        F = self.cyl_frame(P)
        out = np.einsum("nij,nj->ni", F, X)
        return out[:, 0].reshape(shape), out[:, 1].reshape(shape)


def rotation_rate(ham, c: np.ndarray, t: float) -> float:
    """Angular speed of the linearized flow at a static point ``c`` (outward frame)."""
    a, b = _basis_with_axis(c)
    C = c[None]
    M = -_skew3(c) @ ham.hess(t, C)[0] + _skew3(ham.grad(t, C)[0])
    return 0.5 * float(b @ M @ a - a @ M @ b)


def _skew3(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


# -- blow-up -------------------------------------------------------------------

@dataclass(frozen=True)
class MarkedPoint:
    point: tuple[float, float, float]
    delta: float
    trace: float
    classification: str
    rigidity_residual: float


@dataclass
class CylinderMap:
    """Time-k map of the sphere in cylinder coordinates, completed at both ends."""

    spec: HamiltonianSpec
    k: int
    frame: AxisFrame
    marked: tuple[MarkedPoint, MarkedPoint]
    z_nodes: np.ndarray
    theta_nodes: np.ndarray
    z_image: np.ndarray
    theta_shift: np.ndarray
    step: float = DEFAULT_STEP
    _splines: tuple | None = field(default=None, repr=False)

    @property
    def boundary_rotations(self) -> tuple[float, float]:
        """Lifted rotation angles (theta coordinate) on the P and Q boundary circles."""
        return (math.pi * self.marked[0].delta, -math.pi * self.marked[1].delta)

    @property
    def local_rotations(self) -> tuple[float, float]:
        """Rotation angles in each marked point's own outward frame."""
        return (math.pi * self.marked[0].delta, math.pi * self.marked[1].delta)

    def boundary_action(self, which: str, theta):
        beta = self.boundary_rotations[0 if which == "P" else 1]
        return np.mod(np.asarray(theta, float) + beta, TWO_PI)

    def boundary_rigidity(self) -> float:
        return max(m.rigidity_residual for m in self.marked)

    def evaluate(self, z, theta) -> tuple[np.ndarray, np.ndarray]:
        """Exact image by integrating the flow; boundary rows use the rotations."""
        z = np.atleast_1d(np.asarray(z, float))
        theta = np.atleast_1d(np.asarray(theta, float))
        z, theta = np.broadcast_arrays(z, theta)
        zo, to = z.astype(float).copy(), theta.astype(float).copy()
        top, bot = np.isclose(z, 1.0, atol=0.0), np.isclose(z, -1.0, atol=0.0)
        to[top] = self.boundary_action("P", theta[top])
        to[bot] = self.boundary_action("Q", theta[bot])
        inner = ~(top | bot)
        if inner.any():
            P = self.frame.from_cyl(z[inner], theta[inner])
            Q = integrate(self.spec, P, float(self.k), self.step)[1]
            zt = self.frame.to_cyl(Q)
            zo[inner], to[inner] = zt[:, 0], zt[:, 1]
        return zo, to

    def interpolate(self, z, theta) -> tuple[np.ndarray, np.ndarray]:
        """Bicubic interpolation of the sampled grid (periodic in theta)."""
        if self._splines is None:
            th = np.concatenate([self.theta_nodes[-3:] - TWO_PI, self.theta_nodes, self.theta_nodes[:3] + TWO_PI])
            pad = lambda a: np.concatenate([a[:, -3:], a, a[:, :3]], axis=1)
            self._splines = (RectBivariateSpline(self.z_nodes, th, pad(self.z_image)),
                             RectBivariateSpline(self.z_nodes, th, pad(self.theta_shift)))
        sz, st = self._splines
        z = np.asarray(z, float)
        theta = np.mod(np.asarray(theta, float), TWO_PI)
        return sz.ev(z, theta), np.mod(theta + st.ev(z, theta), TWO_PI)

    def area_drift(self, n: int = 64, seed: int = 0) -> float:
        return area_drift(self.spec, float(self.k), n=n, seed=seed, step=self.step)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "axis": list(self.frame.c),
            "boundary_rotations": list(self.boundary_rotations),
            "local_rotations": list(self.local_rotations),
            "marked": [{"point": list(m.point), "delta": m.delta, "trace": m.trace, "class": m.classification,
                        "rigidity_residual": m.rigidity_residual} for m in self.marked],
            "grid": [len(self.z_nodes), len(self.theta_nodes)],
        }

    def write_grid_csv(self, path) -> None:
        rows = ((z, t, zi, ts) for z, row_z, row_t in zip(self.z_nodes, self.z_image, self.theta_shift)
                for t, zi, ts in zip(self.theta_nodes, row_z, row_t))
        _io.write_csv(path, ["z", "theta", "z_image", "theta_shift"], rows)


def _marked_point(spec, c: np.ndarray, k: int, step: float) -> MarkedPoint:
    if not is_static_fixed_point(spec, c):
        raise BlowUpError(f"marked point {np.round(c, 6).tolist()} is not a static fixed point")
    triv = TrivializationRecord(tuple(-c))
    (ts, pts, A), = linearize_roots(spec, c[None], k, step, [triv.frame])
    path = _to_path(ts, A, float(k), 0, "marked")
    D = path.endpoint
    tr = float(np.trace(D))
    cls = classify_trace(tr)
    if cls != "elliptic":
        raise BlowUpError(f"marked point is {cls}: completion undefined")
    rigid = float(np.linalg.norm(D.T @ D - np.eye(2)))
    return MarkedPoint(tuple(float(v) for v in c), mean_index(path), tr, cls, rigid)


def blow_up(H: HamiltonianSpec, k: int = 1, P=(0.0, 0.0, 1.0), Q=None, grid: tuple[int, int] = (64, 128),
            step: float = DEFAULT_STEP) -> CylinderMap:
    """Complete the time-k map on the sphere minus {P, Q} to the closed cylinder."""
    P = sphere_point(P)
    Q = -P if Q is None else sphere_point(Q)
    if np.linalg.norm(P + Q) > 1e-12:
        raise BlowUpError("the marked points must be antipodal")
    frame = AxisFrame.about(P)
    marked = (_marked_point(H, P, k, step), _marked_point(H, Q, k, step))
    nz, nt = grid
    zs = np.linspace(-1.0, 1.0, nz)
    ths = np.arange(nt) * TWO_PI / nt
    Z, T = np.meshgrid(zs[1:-1], ths, indexing="ij")
    Q1 = integrate(H, frame.from_cyl(Z.ravel(), T.ravel()), float(k), step)[1]
    zt = frame.to_cyl(Q1)
    z_img = np.empty((nz, nt))
    shift = np.empty((nz, nt))
    z_img[0], z_img[-1] = -1.0, 1.0
    z_img[1:-1] = zt[:, 0].reshape(Z.shape)
    raw = np.mod(zt[:, 1].reshape(Z.shape) - T + math.pi, TWO_PI) - math.pi
    beta_p, beta_q = math.pi * marked[0].delta, -math.pi * marked[1].delta
    shift[-1], shift[0] = beta_p, beta_q
    # lift the wrapped shifts continuously from the lower boundary row upward
    shift[1:-1] = raw
    for i in range(1, nz - 1):
        shift[i] += TWO_PI * np.round((shift[i - 1] - shift[i]) / TWO_PI)
    return CylinderMap(H, k, frame, marked, zs, ths, z_img, shift, step)


# -- torus isotopies -----------------------------------------------------------

def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_d(u):
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, 6.0 * u * (1.0 - u), 0.0)


@dataclass(frozen=True)
class FluxVector:
    """Flux on the generators ``a1`` (s-loop) and ``a2`` (theta-loop), reduced
    to (-A/2, A/2] with ``A`` the total area (the period lattice)."""

    A1: float
    A2: float
    lattice: float
    raw: tuple[float, float] = (0.0, 0.0)

    def is_zero(self, tol: float = 1e-8) -> bool:
        return abs(self.A1) <= tol and abs(self.A2) <= tol

    def norm(self) -> float:
        return math.hypot(self.A1, self.A2)

    def to_dict(self) -> dict:
        return {"A1": self.A1, "A2": self.A2, "lattice": self.lattice, "raw": list(self.raw)}


class TorusIsotopy:
    """Time-dependent divergence-free vector field on ``[0, L1) x [0, 2 pi)``.

    ``velocity(t, s, theta)`` returns ``(X^s, X^theta)`` for ``t`` in ``[0, T]``.
    """

    kind = "abstract"

    def __init__(self, L1: float, T: float = 1.0):
        self.L1 = float(L1)
        self.L2 = TWO_PI
        self.T = float(T)

    @property
    def total_area(self) -> float:
        return self.L1 * self.L2

    def velocity(self, t: float, s: np.ndarray, th: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def t_breakpoints(self) -> tuple[float, ...]:
        return ()

    def s_breakpoints(self) -> tuple[float, ...]:
        return ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "L1": self.L1, "L2": self.L2, "T": self.T, "total_area": self.total_area}


class IdentityIsotopy(TorusIsotopy):
    kind = "identity"

    def velocity(self, t, s, th):
        return np.zeros_like(np.asarray(s, float)), np.zeros_like(np.asarray(th, float))


class TranslationIsotopy(TorusIsotopy):
    """``S_t(s, theta) = (s + t v1, theta + t v2)``."""

    kind = "translation"

    def __init__(self, L1: float, v1: float, v2: float, T: float = 1.0):
        super().__init__(L1, T)
        self.v1, self.v2 = float(v1), float(v2)

    def velocity(self, t, s, th):
        s = np.asarray(s, float)
        return np.full_like(s, self.v1), np.full(np.shape(th), self.v2)


class TorusHamiltonianIsotopy(TorusIsotopy):
    """Flow of a torus function ``F = sum c cos(2 pi m s / L1 + n theta + phase) g(t)``,
    with ``i_X Omega = dF``: ``X^s = dF/dtheta``, ``X^theta = -dF/ds``."""

    kind = "hamiltonian"

    def __init__(self, L1: float, modes: list[tuple[int, int, float, float]], T: float = 1.0,
                 time_modulation: bool = True):
        super().__init__(L1, T)
        self.modes = [(int(m), int(n), float(c), float(ph)) for m, n, c, ph in modes]
        self.time_modulation = time_modulation

    @classmethod
    def random(cls, L1: float, seed: int, amplitude: float = 0.05, n_modes: int = 4, **kw):
        rng = np.random.default_rng(seed)
        modes = []
        for _ in range(n_modes):
            m, n = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
            if m == 0 and n == 0:
                n = 1
            modes.append((m, n, amplitude * float(rng.normal()), float(rng.uniform(0, TWO_PI))))
        return cls(L1, modes, **kw)

    def _g(self, t: float) -> float:
        return 1.0 + 0.5 * math.sin(TWO_PI * t / self.T) if self.time_modulation else 1.0

    def value(self, t, s, th):
        s, th = np.asarray(s, float), np.asarray(th, float)
        out = np.zeros(np.broadcast(s, th).shape)
        for m, n, c, ph in self.modes:
            out = out + c * np.cos(TWO_PI * m * s / self.L1 + n * th + ph)
        return self._g(t) * out

    def velocity(self, t, s, th):
        s, th = np.asarray(s, float), np.asarray(th, float)
        xs = np.zeros(np.broadcast(s, th).shape)
        xt = np.zeros_like(xs)
        for m, n, c, ph in self.modes:
            sn = np.sin(TWO_PI * m * s / self.L1 + n * th + ph)
            xs = xs - c * n * sn
            xt = xt + c * (TWO_PI * m / self.L1) * sn
        g = self._g(t)
        return g * xs, g * xt

    def to_dict(self) -> dict:
        return {**super().to_dict(), "modes": [list(m) for m in self.modes]}


class ConcatenatedIsotopy(TorusIsotopy):
    """Run the pieces one after another; piece j occupies ``[sum T_<j, sum T_<=j]``."""

    kind = "concatenation"

    def __init__(self, pieces: list[TorusIsotopy]):
        if not pieces:
            raise ValueError("nothing to concatenate")
        L1 = pieces[0].L1
        if any(abs(p.L1 - L1) > 1e-12 for p in pieces):
            raise ValueError("pieces live on different tori")
        super().__init__(L1, sum(p.T for p in pieces))
        self.pieces = list(pieces)
        self.offsets = np.concatenate([[0.0], np.cumsum([p.T for p in pieces])])

    def _piece(self, t: float) -> tuple[TorusIsotopy, float]:
        j = int(np.clip(np.searchsorted(self.offsets, t, side="right") - 1, 0, len(self.pieces) - 1))
        return self.pieces[j], t - self.offsets[j]

    def velocity(self, t, s, th):
        piece, tl = self._piece(t)
        return piece.velocity(tl, s, th)

    def t_breakpoints(self):
        out = set(float(o) for o in self.offsets[1:-1])
        for o, p in zip(self.offsets, self.pieces):
            out.update(o + b for b in p.t_breakpoints())
        return tuple(sorted(out))

    def s_breakpoints(self):
        return tuple(sorted(set(b for p in self.pieces for b in p.s_breakpoints())))

    def to_dict(self) -> dict:
        return {**super().to_dict(), "pieces": [p.to_dict() for p in self.pieces]}


class GluedIsotopy(TorusIsotopy):
    """Two copies of the blown-up sphere flow joined by rotating collars."""

    kind = "glued"

    def __init__(self, cyl: CylinderMap, tau: float):
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        super().__init__(4.0 + 2.0 * tau, float(cyl.k))
        self.cyl, self.tau = cyl, float(tau)
        self.ham = compile_spec(cyl.spec)
        self.P, self.Q = cyl.frame.c, -cyl.frame.c
        self.fixed_tags = ("+", "-")

    @property
    def total_area(self) -> float:
        return (8.0 + 4.0 * self.tau) * math.pi

    def pieces(self, s: np.ndarray) -> np.ndarray:
        """0 copy +, 1 collar 1, 2 copy -, 3 collar 2."""
        s = np.mod(np.asarray(s, float), self.L1)
        edges = np.array([2.0, 2.0 + self.tau, 4.0 + self.tau])
        return np.searchsorted(edges, s, side="right")

    def s_breakpoints(self):
        return (2.0, 2.0 + self.tau, 4.0 + self.tau)

    def t_breakpoints(self):
        bps = self.ham.breakpoints()
        return tuple(j + b for j in range(int(self.T)) for b in bps if 0 < j + b < self.T) + \
            tuple(float(j) for j in range(1, int(self.T)))

    def boundary_rates(self, t: float) -> tuple[float, float]:
        """d/dt of the boundary angles beta_P and beta_Q in the theta coordinate."""
        return rotation_rate(self.ham, self.P, t), -rotation_rate(self.ham, self.Q, t)

    def collar_angles(self, s: np.ndarray, beta_p: float, beta_q: float) -> np.ndarray:
        s = np.mod(np.asarray(s, float), self.L1)
        u1 = (s - 2.0) / self.tau
        u2 = (s - 4.0 - self.tau) / self.tau
        in1 = (s >= 2.0) & (s <= 2.0 + self.tau)
        # collar 1 runs from P (copy +) to Q (copy -); collar 2 from P (copy -) to Q (copy +)
        u = np.where(in1, u1, u2)
        return beta_p + (beta_q - beta_p) * _smoothstep(u)

    def velocity(self, t, s, th):
        s = np.asarray(s, float)
        th = np.asarray(th, float)
        s, th = np.broadcast_arrays(s, th)
        piece = self.pieces(s)
        xs = np.zeros(s.shape)
        xt = np.zeros(s.shape)
        sm = np.mod(s, self.L1)
        copy = (piece == 0) | (piece == 2)
        if copy.any():
            z = np.where(piece == 0, sm - 1.0, sm - 3.0 - self.tau)[copy]
            z = np.clip(z, -1.0 + 1e-15, 1.0 - 1e-15)
            vz, vt = self.cyl.frame.velocity(self.ham, t, z, th[copy])
            xs[copy], xt[copy] = vz, vt
        collar = ~copy
        if collar.any():
            wp, wq = self.boundary_rates(t)
            xt[collar] = self.collar_angles(sm[collar], wp, wq)
        return xs, xt

    def check_collars(self) -> float:
        """Distance of the swept collar angles [lo, hi] from 2 pi Z; raises below the margin."""
        lo, hi = sorted(self.cyl.boundary_rotations)
        n = math.floor(lo / TWO_PI)
        dist = min(lo - TWO_PI * n, TWO_PI * (n + 1) - hi)
        if dist < COLLAR_MARGIN:
            raise CollarError("cannot guarantee fixed-point-free collar: the collar rotation comes within "
                              f"{max(dist, 0.0):.3g} of 0 mod 2pi (margin {COLLAR_MARGIN:g})")
        return float(dist)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "tau": self.tau, "cylinder": self.cyl.to_dict(),
                "fixed_tags": list(self.fixed_tags)}


def glue(cyl: CylinderMap, tau: float = 0.5) -> GluedIsotopy:
    """Torus isotopy from two copies of ``cyl`` and two connecting collars."""
    if cyl.boundary_rigidity() > RIGIDITY_TOL:
        raise BlowUpError("boundary action is not a rigid rotation; collar interpolation undefined")
    iso = GluedIsotopy(cyl, tau)
    iso.check_collars()
    return iso


# -- flux ----------------------------------------------------------------------

def _composite_gauss(lo: float, hi: float, breaks, min_nodes: int, order: int = 8):
    """Composite Gauss-Legendre nodes/weights on [lo, hi] split at ``breaks``."""
    edges = sorted({lo, hi, *(b for b in breaks if lo < b < hi)})
    n_panels = len(edges) - 1
    sub = max(1, math.ceil(min_nodes / (order * n_panels)))
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        for j in range(sub):
            c0 = a + (b - a) * j / sub
            c1 = a + (b - a) * (j + 1) / sub
            nodes.append(0.5 * (c1 - c0) * x + 0.5 * (c1 + c0))
            weights.append(0.5 * (c1 - c0) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def divergence_drift(iso: TorusIsotopy, n: int = 64, seed: int = 0, h: float = 1e-5) -> float:
    """Max |div X| by central differences at random points away from seams."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, iso.T, n)
    s = rng.uniform(0.0, iso.L1, n)
    th = rng.uniform(0.0, TWO_PI, n)
    seams = np.array(list(iso.s_breakpoints()) + [0.0, iso.L1])
    ok = np.min(np.abs(s[:, None] - seams[None]), axis=1) > 10 * h if seams.size else np.ones(n, bool)
    worst = 0.0
    for ti, si, thi in zip(t[ok], s[ok], th[ok]):
        xs_p, _ = iso.velocity(ti, np.array([si + h]), np.array([thi]))
        xs_m, _ = iso.velocity(ti, np.array([si - h]), np.array([thi]))
        _, xt_p = iso.velocity(ti, np.array([si]), np.array([thi + h]))
        _, xt_m = iso.velocity(ti, np.array([si]), np.array([thi - h]))
        div = (xs_p[0] - xs_m[0] + xt_p[0] - xt_m[0]) / (2 * h)
        worst = max(worst, abs(float(div)))
    return worst


def _reduce(x: float, period: float) -> float:
    r = math.fmod(x, period)
    if r > period / 2:
        r -= period
    elif r <= -period / 2:
        r += period
    return r


def flux(iso: TorusIsotopy, n_t: int = 64, n_s: int = 128, n_theta: int = 64, check: bool = True) -> FluxVector:
    """Integrate ``theta_t = -i_X Omega`` over ``t`` and the generator loops.

    ``A1 = int dt int_{a1} X^theta ds`` and ``A2 = -int dt int_{a2} X^s dtheta``,
    each averaged over the transverse coordinate.  A translation with rates
    ``(v1, v2)`` gives ``(v2 L1, -v1 L2)``.
    """
    if n_t < 64:
        raise ValueError("need at least 64 time samples")
    if check:
        drift = divergence_drift(iso)
        if drift > 1e-6:
            raise ValueError(f"isotopy is not area preserving (divergence {drift:.2e} > 1e-6)")
    tn, tw = _composite_gauss(0.0, iso.T, iso.t_breakpoints(), n_t)
    sn, sw = _composite_gauss(0.0, iso.L1, iso.s_breakpoints(), n_s)
    th = np.arange(n_theta) * TWO_PI / n_theta
    S, TH = np.meshgrid(sn, th, indexing="ij")
    a1 = a2 = 0.0
    for t, w in zip(tn, tw):
        xs, xt = iso.velocity(float(t), S, TH)
        a1 += w * float(sw @ xt.mean(axis=1))
        a2 -= w * float(TWO_PI * (sw @ xs.mean(axis=1)) / iso.L1)
    A = iso.total_area
    return FluxVector(_reduce(a1, A), _reduce(a2, A), A, (a1, a2))


def rates_from_flux(fv: FluxVector, L1: float, L2: float = TWO_PI) -> tuple[float, float]:
    """Invert the translation convention: ``v1 = -A2 / L2``, ``v2 = A1 / L1``."""
    return -fv.A2 / L2, fv.A1 / L1


# -- torus census --------------------------------------------------------------

@dataclass(frozen=True)
class TorusFixedPoint:
    label: str
    copy: str
    s: float
    theta: float
    trace: float
    classification: str
    delta: float
    path: SymplecticPath2 | None
    homotopy_class: tuple[int, int] = (0, 0)
    det_i_minus_d: float = float("nan")

    def to_dict(self) -> dict:
        return {"label": self.label, "copy": self.copy, "s": self.s, "theta": self.theta, "trace": self.trace,
                "class": self.classification, "delta_lifted": self.delta,
                "homotopy_class": list(self.homotopy_class)}


@dataclass(frozen=True)
class TorusCensus:
    points: list[TorusFixedPoint]
    collar_fixed_points: int
    collar_clearance: float
    lefschetz_sum: int | None
    continuum_flag: bool = False
    notes: tuple[str, ...] = ()

    def copy(self, tag: str) -> list[TorusFixedPoint]:
        return [p for p in self.points if p.copy == tag]

    def to_dict(self) -> dict:
        return {"points": [p.to_dict() for p in self.points], "collar_fixed_points": self.collar_fixed_points,
                "collar_clearance": self.collar_clearance, "lefschetz_sum": self.lefschetz_sum,
                "continuum_flag": self.continuum_flag, "notes": list(self.notes)}


def _copy_seeds(frame: AxisFrame, grid: tuple[int, int], offset: float) -> np.ndarray:
    nz, nt = grid
    z = -1.0 + (np.arange(nz) + 0.5) * 2.0 / nz
    th = (np.arange(nt)[None, :] + offset + 0.5 * (np.arange(nz)[:, None] % 2)) * TWO_PI / nt
    Z = np.broadcast_to(z[:, None], th.shape)
    return frame.from_cyl(Z.ravel(), th.ravel())


def torus_census(iso: GluedIsotopy, grid: tuple[int, int] = (32, 64), newton_tol: float = 1e-10,
                 search_step: float = SEARCH_STEP, step: float = DEFAULT_STEP) -> TorusCensus:
    """Fixed points of the glued time-k map: a Newton search on each copy
    (seeds offset by half a cell on the second copy) plus the analytic collars."""
    cyl, frame, k = iso.cyl, iso.cyl.frame, iso.cyl.k
    notes: list[str] = []
    clearance = iso.check_collars()
    # collars are rigid rotations by angles in [beta_lo, beta_hi]; sample to confirm
    ss = np.linspace(2.0, 2.0 + iso.tau, 257)
    ang = iso.collar_angles(ss, *cyl.boundary_rotations)
    collar_fixed = int(np.sum(np.abs(ang - TWO_PI * np.round(ang / TWO_PI)) < 1e-9))
    points: list[TorusFixedPoint] = []
    continuum = False
    for tag, offset, s0 in (("+", 0.0, 1.0), ("-", 0.5, 3.0 + iso.tau)):
        sr = search_roots(cyl.spec, _copy_seeds(frame, grid, offset), k, newton_tol, search_step, step)
        if sr.continuum:
            continuum = True
            notes.append(f"copy {tag}: continuum of fixed points")
            continue
        roots = [r.point for r in sr.roots
                 if min(np.linalg.norm(r.point - frame.c), np.linalg.norm(r.point + frame.c)) > DEDUPE_RADIUS]
        if not roots:
            continue
        P0 = np.stack(roots)
        lin = linearize_roots(cyl.spec, P0, k, step, [frame.cyl_frame] * len(roots))
        rows = []
        for ts, pts, A in lin:
            path = _to_path(ts, A, float(k), 0, f"copy {tag}")
            zt = frame.to_cyl(pts)
            wind = int(round((np.unwrap(zt[:, 1])[-1] - zt[0, 1]) / TWO_PI))
            D = path.endpoint
            tr = float(np.trace(D))
            rows.append((float(zt[0, 0] + s0), float(zt[0, 1]), tr, path, wind,
                         float(np.linalg.det(np.eye(2) - D))))
        rows.sort(key=lambda r: (round(r[0], 9), round(r[1], 9)))
        for i, (s, th, tr, path, wind, det) in enumerate(rows):
            points.append(TorusFixedPoint(f"x{i}{tag}", tag, s, th, tr, classify_trace(tr), mean_index(path),
                                          path, (0, wind), det))
    lef = None
    if not continuum and all(p.classification != "degenerate" for p in points):
        lef = sum(1 if p.det_i_minus_d > 0 else -1 for p in points)
    return TorusCensus(points, collar_fixed, clearance, lef, continuum, tuple(notes))


def _torus_map(iso: TorusIsotopy, X: np.ndarray, n_steps: int = 256) -> np.ndarray:
    """Classical RK4 for a general torus isotopy, positions (N, 2) in (s, theta)."""
    h = iso.T / n_steps
    X = X.copy()

    def f(t, Y):
        xs, xt = iso.velocity(t, Y[:, 0], Y[:, 1])
        return np.stack([xs, xt], axis=-1)

    for i in range(n_steps):
        t = i * h
        k1 = f(t, X)
        k2 = f(t + h / 2, X + h / 2 * k1)
        k3 = f(t + h / 2, X + h / 2 * k2)
        k4 = f(t + h, X + h * k3)
        X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def generic_torus_census(iso: TorusIsotopy, grid: tuple[int, int] = (16, 32), tol: float = 1e-10,
                         n_steps: int = 256, max_iter: int = 30) -> TorusCensus:
    """Newton census for a torus isotopy given only by its vector field."""
    per = np.array([iso.L1, iso.L2])
    wrap = lambda d: d - per * np.round(d / per)
    ns, nt = grid
    S, TH = np.meshgrid((np.arange(ns) + 0.5) * iso.L1 / ns, (np.arange(nt) + 0.5) * TWO_PI / nt, indexing="ij")
    X = np.stack([S.ravel(), TH.ravel()], axis=-1)
    eps = 1e-6

    def residual_jac(X):
        off = np.array([[0, 0], [eps, 0], [-eps, 0], [0, eps], [0, -eps]])
        Y = _torus_map(iso, (X[:, None, :] + off[None]).reshape(-1, 2), n_steps).reshape(len(X), 5, 2)
        g = wrap(Y[:, 0] - X)
        J = np.stack([wrap(Y[:, 1] - Y[:, 2]), wrap(Y[:, 3] - Y[:, 4])], axis=-1) / (2 * eps)
        return g, J

    g, J = residual_jac(X)
    if np.all(np.linalg.norm(g, axis=1) <= tol):
        return TorusCensus([], 0, float("inf"), None, True, ("continuum of fixed points: every seed is fixed",))
    for _ in range(max_iter):
        res = np.linalg.norm(g, axis=1)
        act = res > tol
        if not act.any():
            break
        step = np.stack([np.linalg.lstsq(j - np.eye(2), -r, rcond=None)[0] for j, r in zip(J[act], g[act])])
        step *= np.minimum(1.0, 0.5 / np.maximum(np.linalg.norm(step, axis=1, keepdims=True), 1e-300))
        X[act] = np.mod(X[act] + step, per)
        g[act], J[act] = residual_jac(X[act])
    good = np.linalg.norm(g, axis=1) <= tol
    Xg, Jg = X[good], J[good]
    keep: list[int] = []
    for i in range(len(Xg)):
        if all(np.linalg.norm(wrap(Xg[i] - Xg[j])) > DEDUPE_RADIUS for j in keep):
            keep.append(i)
    pts = []
    for n_, i in enumerate(keep):
        tr = float(np.trace(Jg[i]))
        det = float(np.linalg.det(np.eye(2) - Jg[i]))
        pts.append(TorusFixedPoint(f"y{n_}", "", float(Xg[i, 0]), float(Xg[i, 1]), tr, classify_trace(tr),
                                   float("nan"), None, (0, 0), det))
    lef = None
    if all(p.classification != "degenerate" for p in pts):
        lef = sum(1 if p.det_i_minus_d > 0 else -1 for p in pts)
    return TorusCensus(pts, 0, float("inf"), lef)


# -- index gaps and verdicts ---------------------------------------------------

@dataclass(frozen=True)
class GapRow:
    a: str
    b: str
    k: int
    delta_a: float
    delta_b: float
    gap: float
    equal: bool
    flagged: bool

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "k": self.k, "delta_a": self.delta_a, "delta_b": self.delta_b,
                "gap": self.gap, "equal": self.equal, "flagged": self.flagged}


def iterate_deltas(census: TorusCensus, k: int) -> dict[str, float]:
    """Lifted mean index of each fixed point for the k-th iterate."""
    return {p.label: (mean_index(iterate_path(p.path, k)) if k > 1 else p.delta)
            for p in census.points if p.path is not None}


def index_precondition(census: TorusCensus, k: int) -> dict[str, bool]:
    """Whether each nondegenerate point has ``|mu| > 1`` for the k-th iterate."""
    out = {}
    for p in census.points:
        if p.path is None:
            continue
        mu = cz_index(iterate_path(p.path, k) if k > 1 else p.path)
        if mu != "degenerate":
            out[p.label] = abs(mu) > 1
    return out


def index_gap_report(census: TorusCensus, base_tag: str | None = None, k: int = 1,
                     equal_tol: float = 1e-6, threshold: float = 3.0) -> list[GapRow]:
    """Pairwise lifted-index gaps within each homotopy class at iterate k.

    With ``base_tag`` only pairs involving that point are reported.
    """
    deltas = iterate_deltas(census, k)
    pts = [p for p in census.points if p.label in deltas]
    if base_tag is not None:
        base = next((p for p in pts if p.label == base_tag), None)
        if base is None:
            raise KeyError(f"no fixed point labelled {base_tag!r}")
        pairs = [(base, q) for q in pts if q is not base and q.homotopy_class == base.homotopy_class]
    else:
        pairs = [(p, q) for i, p in enumerate(pts) for q in pts[i + 1:] if p.homotopy_class == q.homotopy_class]
    rows = []
    for p, q in pairs:
        da, db = deltas[p.label], deltas[q.label]
        gap = abs(da - db)
        equal = gap <= equal_tol
        rows.append(GapRow(p.label, q.label, k, da, db, gap, equal, (not equal) and gap > threshold))
    return rows


@dataclass(frozen=True)
class DichotomyVerdict:
    verdict: str
    reason: str
    flux: FluxVector
    n_fixed: int

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "reason": self.reason, "flux": self.flux.to_dict(), "n_fixed": self.n_fixed}


def dichotomy_verdict(fv: FluxVector, census: TorusCensus, tol: float = 1e-8) -> DichotomyVerdict:
    """Compare the flux class with the fixed-point census of the torus map."""
    n = len(census.points)
    if census.lefschetz_sum not in (None, 0):
        return DichotomyVerdict("inconsistent", f"torus Lefschetz sum {census.lefschetz_sum} != 0", fv, n)
    if fv.is_zero(tol):
        if n == 0 and not census.continuum_flag:
            return DichotomyVerdict("inconsistent", "zero flux but no fixed points", fv, n)
        return DichotomyVerdict("hamiltonian-like", "zero flux and fixed points present", fv, n)
    return DichotomyVerdict("fixed-point-free-like", "nonzero flux", fv, n)
