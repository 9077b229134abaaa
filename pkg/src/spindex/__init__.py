"""Symplectic index toolkit for area-preserving maps of the sphere.

Modules: ``index_core`` (mean and Conley-Zehnder indices of 2x2 symplectic
paths), ``hamiltonian`` and ``sphere_flow`` (catalog Hamiltonians and their
flows), ``orbit_census`` (fixed points, twist perturbations), ``resonance``
(integer relations among indices), ``blowup_glue`` (cylinder completion, torus
gluing, flux) and ``cli`` (scenario runner).
"""

__version__ = "0.1.0"
