"""Assembly of the frequency-dependent network matrix D(omega) and the static stiffness K.

Block structure over joints, in the global aligned frame (e_ba = -e_ab):

    D[a,a] += Lambda * omega * cot(omega*tau) * e e^T     for every rod at a
    D[a,b]  = -Lambda * omega * csc(omega*tau) * e e^T    for rod ab

Natural frequencies are the omega where det(D) vanishes; D*U = P relates joint
displacement amplitudes to applied joint forces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Truss

# Distance (in omega*tau radians) from a rod resonance omega*tau = n*pi, n >= 1,
# below which cot/csc entries are considered corrupted. omega*tau -> 0 is a
# removable limit (D -> K), not a pole, so n = 0 never trips the guard.
POLE_GUARD = 1e-5

# Reciprocal condition estimate below this means "omega is a natural frequency".
RCOND_SINGULAR = 1e-12


class PoleProximityError(Exception):
    """omega*tau is within the pole guard of a rod resonance n*pi."""

    def __init__(self, rod_id, order, omega):
        self.rod_id = rod_id
        self.order = order
        self.omega = omega
        super().__init__(
            f"omega={omega!r} puts rod '{rod_id}' within {POLE_GUARD} of its "
            f"resonance omega*tau = {order}*pi; use the resonance path instead"
        )


class SingularAtFrequencyError(Exception):
    """D(omega) is numerically singular: omega is a natural frequency."""


@dataclass(frozen=True)
class RodSpectralFactors:
    cot_term: float  # cot(omega*tau)
    csc_term: float  # csc(omega*tau)
    eta: float  # cot(omega*tau) / Lambda
    pole_distance: float  # min over n >= 0 of |omega*tau - n*pi|


def rod_spectral_factors(truss: Truss, rod, omega: float) -> RodSpectralFactors:
    props = truss.rod_properties(rod)
    x = omega * props.transit_time
    s = math.sin(x)
    cot = math.cos(x) / s
    csc = 1.0 / s
    return RodSpectralFactors(
        cot_term=cot,
        csc_term=csc,
        eta=cot / props.line_impedance,
        pole_distance=abs(x - math.pi * round(x / math.pi)),
    )


@dataclass
class SpectralMatrix:
    omega: float
    entries: np.ndarray
    index_map: dict
    reduced: bool


@dataclass
class StiffnessMatrix:
    entries: np.ndarray
    index_map: dict
    reduced: bool


@dataclass(frozen=True)
class _RodTerm:
    offset_a: int  # block offset of the first endpoint, -1 if dropped by reduction
    offset_b: int
    outer: np.ndarray  # e e^T in global coordinates
    line_impedance: float
    transit_time: float
    rod_id: str


def _layout(truss: Truss, reduce_anchors: bool):
    """Joint block offsets and per-rod assembly terms."""
    dim = truss.dimension
    if reduce_anchors:
        kept = [j.id for j in truss.joints if not j.anchored]
    else:
        kept = [j.id for j in truss.joints]
    index_map = {jid: dim * i for i, jid in enumerate(kept)}
    terms = []
    for rod in truss.rods:
        props = truss.rod_properties(rod)
        e = props.unit_vector
        terms.append(
            _RodTerm(
                offset_a=index_map.get(rod.joints[0], -1),
                offset_b=index_map.get(rod.joints[1], -1),
                outer=np.outer(e, e),
                line_impedance=props.line_impedance,
                transit_time=props.transit_time,
                rod_id=rod.id,
            )
        )
    return index_map, dim * len(kept), terms


def check_pole_guard(truss: Truss, omega: float, guard: float = POLE_GUARD):
    """Raise PoleProximityError if any rod resonance n*pi (n >= 1) is too close."""
    for rod in truss.rods:
        x = omega * truss.rod_properties(rod).transit_time
        n = round(x / math.pi)
        if n >= 1 and abs(x - n * math.pi) < guard:
            raise PoleProximityError(rod.id, n, omega)


def _accumulate(matrix, term, dim, diag_coeff, offdiag_coeff):
    """Add one rod's blocks; `matrix` may be (d, d) or batched (m, d, d)."""
    ia, ib = term.offset_a, term.offset_b
    block = term.outer
    if np.ndim(diag_coeff) == 0:
        diag = diag_coeff * block
        off = offdiag_coeff * block
    else:
        diag = np.asarray(diag_coeff)[:, None, None] * block
        off = np.asarray(offdiag_coeff)[:, None, None] * block
    if ia >= 0:
        matrix[..., ia : ia + dim, ia : ia + dim] += diag
    if ib >= 0:
        matrix[..., ib : ib + dim, ib : ib + dim] += diag
    if ia >= 0 and ib >= 0:
        matrix[..., ia : ia + dim, ib : ib + dim] += off
        matrix[..., ib : ib + dim, ia : ia + dim] += off


def laplacian_evaluator(truss: Truss, reduce_anchors: bool = True):
    """Reusable batched D(omega) builder; layout work is done once up front.

    Sweeps call the returned function thousands of times (grid plus bisection
    refinement). D(w) = sum_r diag_r(w) P_r + off_r(w) Q_r with constant block
    patterns P, Q per rod, so for moderate sizes the whole batch collapses to
    two (n_omega x rods) @ (rods x size^2) products. Larger structures fall
    back to a per-rod accumulation loop to bound the pattern memory.
    """
    _, size, terms = _layout(truss, reduce_anchors)
    dim = truss.dimension
    taus = np.array([t.transit_time for t in terms])
    lams = np.array([t.line_impedance for t in terms])

    def coefficients(omegas):
        x = omegas[:, None] * taus[None, :]
        s = np.sin(x)
        lam_omega = lams[None, :] * omegas[:, None]
        return lam_omega * np.cos(x) / s, -lam_omega / s

    if len(terms) * size * size <= 2_000_000:
        diag_pat = np.zeros((len(terms), size, size))
        off_pat = np.zeros((len(terms), size, size))
        for r, term in enumerate(terms):
            _accumulate(diag_pat[r], term, dim, 1.0, 0.0)
            _accumulate(off_pat[r], term, dim, 0.0, 1.0)
        diag_flat = diag_pat.reshape(len(terms), -1)
        off_flat = off_pat.reshape(len(terms), -1)

        def build(omegas) -> np.ndarray:
            omegas = np.asarray(omegas, dtype=float)
            diag, off = coefficients(omegas)
            flat = diag @ diag_flat + off @ off_flat
            return flat.reshape(omegas.size, size, size)

    else:

        def build(omegas) -> np.ndarray:
            omegas = np.asarray(omegas, dtype=float)
            diag, off = coefficients(omegas)
            out = np.zeros((omegas.size, size, size))
            for r, term in enumerate(terms):
                _accumulate(out, term, dim, diag[:, r], off[:, r])
            return out

    return build


def laplacian_batch(truss: Truss, omegas, reduce_anchors: bool = True) -> np.ndarray:
    """D(omega) stacked over a 1-D array of frequencies; no pole guard."""
    return laplacian_evaluator(truss, reduce_anchors)(omegas)


def assemble_laplacian(
    truss: Truss, omega: float, reduce_anchors: bool = True, check_poles: bool = True
) -> SpectralMatrix:
    if not (omega > 0.0):
        raise ValueError(f"omega must be > 0, got {omega}")
    if check_poles:
        check_pole_guard(truss, omega)
    index_map, size, terms = _layout(truss, reduce_anchors)
    entries = np.zeros((size, size))
    dim = truss.dimension
    for term in terms:
        x = omega * term.transit_time
        s = math.sin(x)
        lam_omega = term.line_impedance * omega
        _accumulate(entries, term, dim, lam_omega * math.cos(x) / s, -lam_omega / s)
    return SpectralMatrix(omega=omega, entries=entries, index_map=index_map, reduced=reduce_anchors)


def assemble_stiffness(truss: Truss, reduce_anchors: bool = True) -> StiffnessMatrix:
    """Static stiffness from the spring formula k = A*E/L (exact omega -> 0 limit)."""
    index_map, size, terms = _layout(truss, reduce_anchors)
    entries = np.zeros((size, size))
    dim = truss.dimension
    for term in terms:
        k = term.line_impedance / term.transit_time
        _accumulate(entries, term, dim, k, -k)
    return StiffnessMatrix(entries=entries, index_map=index_map, reduced=reduce_anchors)


def laplacian_determinant(
    truss: Truss, omega: float, reduce_anchors: bool = True, check_poles: bool = True
) -> float:
    matrix = assemble_laplacian(truss, omega, reduce_anchors, check_poles=check_poles)
    return float(np.linalg.det(matrix.entries))


def laplacian_sign_logdet(truss: Truss, omegas, reduce_anchors: bool = True):
    """Batched (sign, log|det|) of D over a frequency grid, for root bracketing."""
    stack = laplacian_batch(truss, omegas, reduce_anchors)
    sign, logabs = np.linalg.slogdet(stack)
    return sign, logabs


def solve_forced_response(truss: Truss, omega: float, forces) -> dict:
    """Displacement amplitudes U of the free joints under applied forces P, D U = P.

    `forces` maps free-joint ids to force vectors; omitted joints carry zero
    force. Raises SingularAtFrequencyError when omega is (numerically) a
    natural frequency and the response is undefined.
    """
    matrix = assemble_laplacian(truss, omega, reduce_anchors=True)
    index_map = matrix.index_map
    dim = truss.dimension
    rhs = np.zeros(matrix.entries.shape[0])
    for jid, vec in forces.items():
        if jid not in index_map:
            raise ValueError(f"force applied to unknown or anchored joint '{jid}'")
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (dim,):
            raise ValueError(f"force vector for joint '{jid}' must have {dim} components")
        rhs[index_map[jid] : index_map[jid] + dim] = vec

    d = matrix.entries
    if d.size:
        if 1.0 / np.linalg.cond(d) < RCOND_SINGULAR:
            raise SingularAtFrequencyError(
                f"D(omega) is singular at omega={omega!r}: natural frequency"
            )
    solution = np.linalg.solve(d, rhs) if d.size else rhs.copy()
    # one step of iterative refinement keeps the residual near round-off
    solution += np.linalg.solve(d, rhs - d @ solution) if d.size else 0.0
    scale = np.linalg.norm(rhs)
    if scale > 0.0 and np.linalg.norm(d @ solution - rhs) > 1e-9 * scale:
        raise SingularAtFrequencyError(
            f"forced response residual exceeds tolerance at omega={omega!r}"
        )
    return {
        jid: solution[offset : offset + dim].copy() for jid, offset in index_map.items()
    }
