"""Pole-aware natural-frequency sweep, mode extraction and the rod-resonance path.

Away from rod resonances the natural frequencies are sign-change roots of
det(D(omega)) bracketed on a grid laid between consecutive poles. At a pole
omega*tau = n*pi the matrix entries diverge and finite joint forces require

    (-1)^n e^T u_a + e_ba^T u_b = 0

per resonant rod; candidate motions from that constraint are kept when the
diverging rod terms (resolved by L'Hopital into a linear operator on the
frequency derivative of the motion) can absorb the forces the remaining rods
apply. Feasible candidates are resonant natural modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _roots
from .assembly import (
    POLE_GUARD,
    assemble_laplacian,
    check_pole_guard,
    laplacian_evaluator,
    _layout,
)
from .model import Truss

GRID_DENSITY = 2000.0  # base sweep points per unit of omega*tau_min between poles
MODE_TOL = 1e-7  # relative singular-value cutoff for null-space membership
FEAS_TOL = 1e-8  # relative residual cutoff for resonant feasibility
DEFAULT_ROOT_RTOL = 1e-10  # bisection tolerance, relative to omega


class NotARootError(Exception):
    """omega is not a natural frequency of the structure."""

    def __init__(self, omega, smallest_relative_sv):
        self.omega = omega
        self.smallest_relative_sv = smallest_relative_sv
        super().__init__(
            f"D({omega!r}) has no null space: smallest relative singular value "
            f"{smallest_relative_sv:.3e}"
        )


@dataclass(frozen=True)
class FrequencyWindow:
    omega_min: float
    omega_max: float
    grid_points: int | None = None  # total base grid points; None = density rule
    root_tol: float | None = None  # absolute; None = DEFAULT_ROOT_RTOL * omega
    pole_guard: float = POLE_GUARD

    def __post_init__(self):
        if not (0.0 < self.omega_min < self.omega_max):
            raise ValueError(
                f"need 0 < omega_min < omega_max, got ({self.omega_min}, {self.omega_max})"
            )
        if self.grid_points is not None and self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")

    def tol_at(self, omega: float) -> float:
        if self.root_tol is not None:
            return self.root_tol
        return DEFAULT_ROOT_RTOL * max(abs(omega), self.omega_min)


@dataclass(frozen=True)
class Pole:
    omega: float
    rods: tuple  # rod ids resonant at this frequency
    orders: tuple  # matching n of omega*tau = n*pi


@dataclass
class ModeResult:
    omega: float
    kind: str  # "regular" | "resonant"
    displacements: dict | None = None  # free joint id -> vector, unit overall norm
    anchor_forces: dict | None = None  # anchored joint id -> vector, mode scale
    resonant_order: int | None = None


@dataclass
class SweepResult:
    modes: list
    warnings: list = field(default_factory=list)
    mechanisms: list = field(default_factory=list)  # free joints whose rods span < dim

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    @property
    def omegas(self):
        return [m.omega for m in self.modes]


def pole_set(truss: Truss, window: FrequencyWindow):
    """All rod resonances omega*tau = n*pi inside the window, grouped and sorted."""
    events = []
    for rod in truss.rods:
        tau = truss.rod_properties(rod).transit_time
        n_lo = max(1, math.ceil(window.omega_min * tau / math.pi))
        n_hi = math.floor(window.omega_max * tau / math.pi)
        for n in range(n_lo, n_hi + 1):
            events.append((n * math.pi / tau, rod.id, n))
    events.sort()
    poles = []
    for omega, rod_id, n in events:
        if poles and abs(omega - poles[-1][0]) <= 1e-9 * omega:
            poles[-1][1].append(rod_id)
            poles[-1][2].append(n)
        else:
            poles.append((omega, [rod_id], [n]))
    return [Pole(om, tuple(rods), tuple(orders)) for om, rods, orders in poles]


# -- deficient-joint handling -------------------------------------------------


def _free_basis(truss: Truss, include_anchored: bool = False):
    """Orthonormal rod-span basis per free joint; identity unless deficient.

    A free joint whose rods span fewer than `dim` directions makes det(D)
    vanish identically (the transverse motion is a mechanism); those
    directions are projected out of the swept system.
    """
    dim = truss.dimension
    blocks = []
    mechanisms = []
    deficient = False
    for joint in truss.joints if include_anchored else truss.free_joints:
        edges = truss.neighbors(joint.id)
        vecs = []
        for other, rod in edges:
            e = truss.rod_properties(rod).unit_vector
            vecs.append(e if rod.joints[0] == joint.id else -e)
        mat = np.array(vecs, dtype=float).T if vecs else np.zeros((dim, 0))
        u, s, _ = np.linalg.svd(mat, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * (s[0] if s.size else 1.0)))
        if rank < dim:
            deficient = True
            mechanisms.append(joint.id)
            blocks.append(u[:, :rank])
        else:
            blocks.append(np.eye(dim))
    if not deficient:
        return None, []
    size = dim * len(blocks)
    width = sum(b.shape[1] for b in blocks)
    basis = np.zeros((size, width))
    col = 0
    for i, b in enumerate(blocks):
        basis[dim * i : dim * (i + 1), col : col + b.shape[1]] = b
        col += b.shape[1]
    return basis, mechanisms


def _det_eval(truss: Truss, reduce_anchors: bool, basis):
    build = laplacian_evaluator(truss, reduce_anchors)

    def func(omegas):
        stack = build(omegas)
        if basis is not None:
            stack = np.einsum("ij,mjk,kl->mil", basis.T, stack, basis, optimize=True)
        sign, logabs = np.linalg.slogdet(stack)
        return sign, logabs

    return func


def _sigma_eval(truss: Truss, reduce_anchors: bool, basis):
    build = laplacian_evaluator(truss, reduce_anchors)

    def sigma(omega):
        matrix = build(np.array([omega]))[0]
        if basis is not None:
            matrix = basis.T @ matrix @ basis
        svals = np.linalg.svd(matrix, compute_uv=False)
        return float(svals[-1]), float(svals[0])

    return sigma


def _segments(window: FrequencyWindow, truss: Truss, poles):
    """Sweep intervals between consecutive poles, clipped by the pole guard."""
    cuts = [(window.omega_min, 0.0)]
    for pole in poles:
        # guard distance in omega for the widest-guard rod of the group
        guard = max(
            window.pole_guard / truss.rod_properties(rid).transit_time for rid in pole.rods
        )
        cuts.append((pole.omega, guard))
    cuts.append((window.omega_max, 0.0))
    segments = []
    for (x0, g0), (x1, g1) in zip(cuts[:-1], cuts[1:]):
        lo, hi = x0 + g0, x1 - g1
        if hi > lo:
            segments.append((lo, hi))
    return segments


def find_natural_frequencies(
    truss: Truss, window: FrequencyWindow, reduce_anchors: bool = True, threads: int = 1
) -> SweepResult:
    """Locate every natural frequency in the window.

    Regular roots come from sign-change bracketing of det(D) between poles;
    each pole is additionally dispatched to resonant_mode_check. Output is
    sorted by frequency and deduplicated within the root tolerance.
    """
    poles = pole_set(truss, window)
    basis, mechanisms = _free_basis(truss)
    func = _det_eval(truss, reduce_anchors, basis)
    sigma = _sigma_eval(truss, reduce_anchors, basis)
    tau_min = truss.tau_min

    roots = []
    brackets = []
    warnings = []
    total_width = window.omega_max - window.omega_min
    for lo, hi in _segments(window, truss, poles):
        if window.grid_points is not None:
            n_pts = max(2, round(window.grid_points * (hi - lo) / total_width))
        else:
            n_pts = _roots.grid_count(lo, hi, tau_min, GRID_DENSITY)
        seg_roots, seg_brackets, seg_warnings = _roots.find_brackets(
            func, lo, hi, n_pts, threads=threads,
            sigma_fn=sigma, sigma_tol=MODE_TOL, tol_at=window.tol_at,
        )
        roots.extend(seg_roots)
        brackets.extend(seg_brackets)
        warnings.extend(seg_warnings)
    # brackets never span a pole (segments are clipped), so all segments can
    # share one vectorized bisection pass
    roots.extend(_roots.bisect_brackets(func, brackets, window.tol_at, threads=threads))
    roots = _roots.dedupe_sorted(sorted(roots), window.tol_at)

    modes = [ModeResult(omega=r, kind="regular") for r in roots]
    for pole in poles:
        modes.extend(
            resonant_mode_check(truss, pole.omega, pole.rods, pole.orders, reduce_anchors)
        )
    modes.sort(key=lambda m: m.omega)
    return SweepResult(modes=modes, warnings=warnings, mechanisms=mechanisms)


# -- mode extraction -----------------------------------------------------------


def _normalize_sign(vec: np.ndarray) -> np.ndarray:
    vec = vec / np.linalg.norm(vec)
    for x in vec:
        if abs(x) > 1e-8:
            return -vec if x < 0 else vec
    return vec


def _as_joint_dict(truss: Truss, index_map, vec):
    dim = truss.dimension
    return {jid: vec[off : off + dim].copy() for jid, off in index_map.items()}


def _full_vector(truss: Truss, displacements: dict) -> np.ndarray:
    """Embed free-joint displacements into the unreduced block vector."""
    dim = truss.dimension
    full = np.zeros(dim * len(truss.joints))
    full_map, _, _ = _layout(truss, reduce_anchors=False)
    for jid, vec in displacements.items():
        off = full_map[jid]
        full[off : off + dim] = vec
    return full


def _anchor_rows_product(truss: Truss, omega: float, displacements: dict, check_poles=True):
    """Force vectors at anchored joints: full-matrix anchor rows times the mode."""
    anchored = truss.anchored_joints
    if not anchored:
        return {}
    full = assemble_laplacian(truss, omega, reduce_anchors=False, check_poles=check_poles)
    vec = _full_vector(truss, displacements)
    product = full.entries @ vec
    dim = truss.dimension
    return {
        j.id: product[full.index_map[j.id] : full.index_map[j.id] + dim].copy()
        for j in anchored
    }


def extract_modes(truss: Truss, omega_star: float, reduce_anchors: bool = True):
    """Null-space mode shapes of D(omega*) via singular value decomposition."""
    check_pole_guard(truss, omega_star)
    basis, _ = _free_basis(truss)
    matrix = assemble_laplacian(truss, omega_star, reduce_anchors)
    entries = matrix.entries
    if basis is not None:
        entries = basis.T @ entries @ basis
    _, svals, vt = np.linalg.svd(entries)
    smax = svals[0] if svals.size else 0.0
    selected = np.nonzero(svals <= MODE_TOL * smax)[0]
    if selected.size == 0:
        raise NotARootError(omega_star, float(svals[-1] / smax) if smax else 0.0)

    modes = []
    for i in selected:
        vec = vt[i]
        if basis is not None:
            vec = basis @ vec
        vec = _normalize_sign(vec)
        displacements = _as_joint_dict(truss, matrix.index_map, vec)
        modes.append(
            ModeResult(
                omega=omega_star,
                kind="regular",
                displacements=displacements,
                anchor_forces=_anchor_rows_product(truss, omega_star, displacements),
            )
        )
    return modes


def anchor_forces(truss: Truss, mode: ModeResult) -> dict:
    """Reaction forces at anchored joints for a mode, at the mode's scale.

    Works for any free-joint displacement state at a regular frequency -- a
    forced-response result wrapped in a ModeResult recovers its reactions the
    same way, via the anchored rows of the unreduced matrix.
    """
    if mode.displacements is None:
        raise ValueError("mode carries no displacements; extract modes first")
    if mode.kind == "resonant":
        return {} if mode.anchor_forces is None else dict(mode.anchor_forces)
    return _anchor_rows_product(truss, mode.omega, mode.displacements)


# -- rod resonance path --------------------------------------------------------


def _resonant_operators(truss: Truss, omega_pole: float, resonant: dict):
    """Constraint matrix plus force operators split into resonant/non-resonant rods.

    Returns (constraint, finite_op, limit_op, full_map, free_map). finite_op is
    the unreduced D(omega) restricted to non-resonant rods, with free-joint
    columns; limit_op maps frequency-derivative parameters at free joints to
    forces via the per-rod factor Lambda*omega/tau.
    """
    dim = truss.dimension
    full_map, full_size, terms = _layout(truss, reduce_anchors=False)
    free_map, free_size, _ = _layout(truss, reduce_anchors=True)

    free_cols = np.zeros(full_size, dtype=bool)
    for jid, off in free_map.items():
        free_cols[full_map[jid] : full_map[jid] + dim] = True

    constraint_rows = []
    finite = np.zeros((full_size, full_size))
    limit = np.zeros((full_size, full_size))
    for term, rod in zip(terms, truss.rods):
        ia, ib = term.offset_a, term.offset_b
        e = truss.rod_properties(rod).unit_vector
        if rod.id in resonant:
            n = resonant[rod.id]
            row = np.zeros(free_size)
            a_id, b_id = rod.joints
            if a_id in free_map:
                row[free_map[a_id] : free_map[a_id] + dim] = ((-1.0) ** n) * e
            if b_id in free_map:
                row[free_map[b_id] : free_map[b_id] + dim] = -e
            constraint_rows.append(row)
            coeff = term.line_impedance * omega_pole / term.transit_time
            block = coeff * term.outer
            limit[ia : ia + dim, ia : ia + dim] += block
            limit[ib : ib + dim, ib : ib + dim] += block
            limit[ia : ia + dim, ib : ib + dim] += -((-1.0) ** n) * block
            limit[ib : ib + dim, ia : ia + dim] += -((-1.0) ** n) * block
        else:
            x = omega_pole * term.transit_time
            s = math.sin(x)
            lam_omega = term.line_impedance * omega_pole
            diag = lam_omega * math.cos(x) / s * term.outer
            off = -lam_omega / s * term.outer
            finite[ia : ia + dim, ia : ia + dim] += diag
            finite[ib : ib + dim, ib : ib + dim] += diag
            finite[ia : ia + dim, ib : ib + dim] += off
            finite[ib : ib + dim, ia : ia + dim] += off

    constraint = (
        np.array(constraint_rows) if constraint_rows else np.zeros((0, free_size))
    )
    return constraint, finite[:, free_cols], limit[:, free_cols], full_map, free_map


@dataclass
class ResonantConstraintSystem:
    constraint_matrix: np.ndarray  # one row per resonant rod, free-joint columns
    nonresonant_force_operator: np.ndarray  # free displacements -> joint forces
    limit_force_operator: np.ndarray  # frequency-derivative params -> joint forces


def resonant_constraint_system(
    truss: Truss, omega_pole: float, resonant_rods, n_values
) -> ResonantConstraintSystem:
    resonant = dict(zip(resonant_rods, n_values))
    constraint, finite, limit, _, _ = _resonant_operators(truss, omega_pole, resonant)
    return ResonantConstraintSystem(constraint, finite, limit)


def _null_basis(matrix: np.ndarray, rtol: float):
    if matrix.shape[0] == 0:
        return np.eye(matrix.shape[1])
    _, svals, vt = np.linalg.svd(matrix, full_matrices=True)
    smax = svals[0] if svals.size else 0.0
    keep = np.sum(svals > rtol * smax) if smax > 0 else 0
    return vt[keep:].T


def resonant_mode_check(
    truss: Truss,
    omega_pole: float,
    resonant_rods,
    n_values,
    reduce_anchors: bool = True,
):
    """Natural modes at a rod resonance, or an empty list when none exists.

    Candidates are the null space of the per-rod end-motion constraints;
    a candidate survives when the forces contributed by the non-resonant rods
    lie in the range of the resonant rods' L'Hopital limit operator, i.e. the
    least-squares residual is ~zero relative to the forcing.
    """
    del reduce_anchors  # anchored joints are always excluded from candidate motion
    resonant = dict(zip(resonant_rods, n_values))
    constraint, finite, limit, full_map, free_map = _resonant_operators(
        truss, omega_pole, resonant
    )
    dim = truss.dimension
    free_size = constraint.shape[1]
    if free_size == 0:
        return []

    basis, _ = _free_basis(truss)
    if basis is not None:
        candidates = basis @ _null_basis(constraint @ basis, 1e-10)
    else:
        candidates = _null_basis(constraint, 1e-10)
    if candidates.shape[1] == 0:
        return []

    free_rows = np.zeros(finite.shape[0], dtype=bool)
    for jid, off in free_map.items():
        free_rows[full_map[jid] : full_map[jid] + dim] = True
    finite_free = finite[free_rows]
    limit_free = limit[free_rows]

    forced = finite_free @ candidates  # forces each candidate needs absorbed
    u_l, s_l, _ = np.linalg.svd(limit_free, full_matrices=False)
    rank = int(np.sum(s_l > 1e-10 * s_l[0])) if s_l.size and s_l[0] > 0 else 0
    residual_op = forced - u_l[:, :rank] @ (u_l[:, :rank].T @ forced)

    scale = np.linalg.norm(forced) + np.linalg.norm(limit_free)
    _, s_m, vt_m = np.linalg.svd(residual_op, full_matrices=True)
    smax = s_m[0] if s_m.size else 0.0
    cutoff = max(FEAS_TOL * smax, 1e-13 * scale)
    keep = np.sum(s_m > cutoff) if smax > 0 else 0
    coeffs = vt_m[keep:].T
    if coeffs.shape[1] == 0:
        return []

    modes = []
    order = min(n_values) if n_values else None
    for c in coeffs.T:
        vec = candidates @ c
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            continue
        vec = _normalize_sign(vec)
        rhs = -(finite_free @ vec)
        xi, *_ = np.linalg.lstsq(limit_free, rhs, rcond=1e-10)
        # relative residual test, with an absolute floor for rhs that is pure
        # round-off of the zero vector (the trivially feasible case)
        residual = np.linalg.norm(limit_free @ xi - rhs)
        if residual > FEAS_TOL * np.linalg.norm(rhs) + 1e-12 * scale:
            continue
        force_full = finite @ vec + limit @ xi
        anchor = {
            j.id: force_full[full_map[j.id] : full_map[j.id] + dim].copy()
            for j in truss.anchored_joints
        }
        modes.append(
            ModeResult(
                omega=omega_pole,
                kind="resonant",
                displacements=_as_joint_dict(truss, free_map, vec),
                anchor_forces=anchor,
                resonant_order=order,
            )
        )
    return modes
