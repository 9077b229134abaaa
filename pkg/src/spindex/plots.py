"""Static SVG figures: sphere phase portraits and index-gap growth."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sphere_flow import ChartAtlas, integrate  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_SVG_META = {"Date": None, "Creator": "spindex"}
plt.rcParams["svg.hashsalt"] = "spindex"


def phase_portrait(H, path, census=None, n_orbits: int = 48, n_iter: int = 60, step: float = 1e-2,
                   seed: int = 0) -> Path:
    """Iterates of the time-one map in (theta, z) with census points overlaid."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.98, 0.98, n_orbits)
    th = rng.uniform(0.0, 2 * math.pi, n_orbits)
    P = ChartAtlas.from_cylindrical(np.stack([z, th], axis=-1))
    hist = [P]
    for _ in range(n_iter):
        P = integrate(H, P, 1.0, step)[1]
        hist.append(P)
    pts = ChartAtlas.to_cylindrical(np.concatenate(hist))
    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.scatter(pts[:, 1], pts[:, 0], s=0.6, c="0.35", lw=0)
    if census is not None:
        marks = {"elliptic": ("o", "tab:blue"), "hyperbolic": ("x", "tab:red"), "degenerate": ("s", "tab:gray")}
        for o in census.orbits:
            zt = ChartAtlas.to_cylindrical(np.asarray(o.point)[None])[0]
            m, c = marks[o.classification]
            ax.plot(zt[1], zt[0], m, color=c, ms=6)
    ax.set_xlim(0, 2 * math.pi)
    ax.set_ylim(-1, 1)
    ax.set_xlabel("theta")
    ax.set_ylabel("z")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def gap_growth(rows_by_k: dict[int, list], path, threshold: float = 3.0) -> Path:
    """Largest and smallest non-equal lifted-index gap against the iterate k."""
    ks = sorted(rows_by_k)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, pick in (("max gap", max), ("min gap", min)):
        vals = [pick([r.gap for r in rows_by_k[k] if not r.equal], default=0.0) for k in ks]
        ax.plot(ks, vals, "o-", label=label)
    ax.axhline(threshold, color="tab:red", ls="--", lw=1, label=f"threshold {threshold:g}")
    ax.set_xlabel("iterate k")
    ax.set_ylabel("|gap of lifted mean index|")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path
