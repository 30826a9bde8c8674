"""Consistent and lumped mass-matrix baselines and the det(K - w^2 M) sweep.

The consistent matrix uses the linear shape function N(x) = 1 - x, for which

    integral_0^L N^2 dz = L/3        (diagonal blocks, rho*A*L/3 * e e^T)
    integral_0^L N(1-N) dz = L/6     (coupling blocks, +rho*A*L/6 * e e^T globally)

The lumped matrix (step shape function) is diagonal with half the mass of each
incident rod at every joint. det(K - w^2 M) = 0 reproduces det(D) = 0 only to
second order in omega.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _roots
from .assembly import _accumulate, _layout, assemble_stiffness
from .model import Truss, subdivide
from .spectrum import GRID_DENSITY, FrequencyWindow, _free_basis

MASS_KINDS = ("consistent", "lumped")


@dataclass
class MassMatrix:
    entries: np.ndarray
    index_map: dict
    reduced: bool
    kind: str


def assemble_mass(truss: Truss, kind: str = "consistent", reduce_anchors: bool = True) -> MassMatrix:
    if kind not in MASS_KINDS:
        raise ValueError(f"mass kind must be one of {MASS_KINDS}, got {kind!r}")
    index_map, size, terms = _layout(truss, reduce_anchors)
    entries = np.zeros((size, size))
    dim = truss.dimension
    for term, rod in zip(terms, truss.rods):
        props = truss.rod_properties(rod)
        mass = truss.materials[rod.material].density * rod.area * props.length
        if kind == "consistent":
            _accumulate(entries, term, dim, mass / 3.0, mass / 6.0)
        else:
            for off in (term.offset_a, term.offset_b):
                if off >= 0:
                    entries[off : off + dim, off : off + dim] += 0.5 * mass * np.eye(dim)
    return MassMatrix(entries=entries, index_map=index_map, reduced=reduce_anchors, kind=kind)


def fem_determinant(
    truss: Truss, omega: float, kind: str = "consistent", reduce_anchors: bool = True
) -> float:
    k = assemble_stiffness(truss, reduce_anchors).entries
    m = assemble_mass(truss, kind, reduce_anchors).entries
    return float(np.linalg.det(k - omega**2 * m))


def fem_frequencies(
    truss: Truss,
    window: FrequencyWindow,
    kind: str = "consistent",
    divisions: int = 1,
    reduce_anchors: bool = True,
    threads: int = 1,
):
    """Roots of det(K - w^2 M) after subdividing each rod.

    Shares the bracketing machinery of the network-matrix sweep; this method
    has no poles, so the window is swept as a single segment. Transverse
    directions at joints whose rods are collinear (every interior subdivision
    joint) carry no axial stiffness and are projected out, exactly as in the
    network-matrix sweep; without this the consistent-mass determinant is
    identically zero.
    """
    if divisions < 1:
        raise ValueError(f"divisions must be >= 1, got {divisions}")
    fine = subdivide(truss, divisions)
    k = assemble_stiffness(fine, reduce_anchors).entries
    m = assemble_mass(fine, kind, reduce_anchors).entries
    basis, _ = _free_basis(fine, include_anchored=not reduce_anchors)
    if basis is not None:
        k = basis.T @ k @ basis
        m = basis.T @ m @ basis

    def func(omegas):
        stack = k[None, :, :] - np.asarray(omegas)[:, None, None] ** 2 * m[None, :, :]
        return np.linalg.slogdet(stack)

    def sigma(omega):
        svals = np.linalg.svd(k - omega**2 * m, compute_uv=False)
        return float(svals[-1]), float(svals[0])

    if window.grid_points is not None:
        n_pts = window.grid_points
    else:
        n_pts = _roots.grid_count(window.omega_min, window.omega_max, fine.tau_min, GRID_DENSITY)
    roots, _ = _roots.sign_sweep_roots(
        func, window.omega_min, window.omega_max, n_pts, window.tol_at,
        threads=threads, sigma_fn=sigma, sigma_tol=1e-7,
    )
    return _roots.dedupe_sorted(roots, window.tol_at)
