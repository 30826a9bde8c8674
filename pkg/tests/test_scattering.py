import math

import numpy as np
import pytest

from spectruss import (
    DegenerateJointError,
    EventExplosionError,
    FrequencyWindow,
    Impulse,
    Joint,
    Material,
    Rod,
    Truss,
    find_natural_frequencies,
    reverberation_determinant,
    reverberation_frequencies,
    scatter,
    simulate_wavefronts,
    transmission_matrix,
)
from spectruss.scattering import TOWARD_END, TOWARD_START, reverberation_dof

SQRT2 = math.sqrt(2.0)


def _reorder(tm, wanted):
    """Permute a transmission matrix into the requested neighbor ordering."""
    perm = [tm.column_order.index(j) for j in wanted]
    return tm.entries[np.ix_(perm, perm)]


def test_square_joint2_closed_form(square):
    # neighbor ordering (1, 4, 3) = rods (12, 24, 23)
    tm = transmission_matrix(square, "2")
    got = _reorder(tm, ("1", "4", "3"))
    expected = 0.5 * np.array(
        [[1.0, -1.0, SQRT2], [-1.0, 1.0, SQRT2], [SQRT2, SQRT2, 0.0]]
    )
    assert np.allclose(got, expected, atol=1e-12)


def test_square_corner_identity(square):
    for joint in ("1", "4"):
        tm = transmission_matrix(square, joint)
        assert np.allclose(tm.entries, np.eye(2), atol=1e-12)


def _random_star(rng, dim):
    """A joint with >= dim rods in general position plus satellite joints.

    Directions are redrawn until the coupling Gram matrix is well conditioned,
    so the 1e-12 involution bound is meaningful rather than dominated by
    amplified round-off.
    """
    n = int(rng.integers(dim, dim + 4))
    while True:
        dirs = rng.normal(size=(n, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        lams = rng.uniform(0.5, 2.0, size=n)
        gram = dirs.T @ np.diag(lams) @ dirs
        if np.linalg.matrix_rank(dirs) == dim and np.linalg.cond(gram) < 200.0:
            break
    joints = [Joint("hub", tuple(np.zeros(dim)))]
    rods = []
    for i, d in enumerate(dirs):
        joints.append(Joint(f"s{i}", tuple(d * float(rng.uniform(0.5, 2.0)))))
        area = lams[i]  # unit material: line impedance equals area
        rods.append(Rod(f"r{i}", ("hub", f"s{i}"), float(area), "m"))
    return Truss(dim, joints, rods, {"m": Material("m", 1.0, 1.0)})


def test_involution_over_random_joints():
    rng = np.random.default_rng(42)
    for trial in range(100):
        truss = _random_star(rng, dim=2 if trial % 2 == 0 else 3)
        tm = transmission_matrix(truss, "hub")
        identity = np.eye(tm.entries.shape[0])
        assert np.max(np.abs(tm.entries @ tm.entries - identity)) <= 1e-12
        # (I+T)/2 projects onto the velocity-compatible subspace
        proj = 0.5 * (identity + tm.entries)
        assert np.max(np.abs(proj @ proj - proj)) <= 1e-12


def test_degenerate_joint_raises():
    mat = Material("m", 1.0, 1.0)
    truss = Truss(
        2,
        [Joint("a", (0.0, 0.0)), Joint("b", (1.0, 0.0))],
        [Rod("ab", ("a", "b"), 1.0, "m")],
        {"m": mat},
    )
    with pytest.raises(DegenerateJointError):
        transmission_matrix(truss, "a")


def test_scatter_zero_and_pulse(square):
    tm = transmission_matrix(square, "2")
    assert np.all(scatter(tm, np.zeros(3)) == 0.0)
    pulse = np.zeros(3)
    pulse[tm.column_order.index("1")] = 1.0  # unit pulse arriving along rod 12
    out = scatter(tm, pulse)
    by_neighbor = dict(zip(tm.column_order, out))
    assert by_neighbor["1"] == pytest.approx(0.5)
    assert by_neighbor["4"] == pytest.approx(-0.5)
    assert by_neighbor["3"] == pytest.approx(SQRT2 / 2.0)


def test_scatter_identity_joint(square):
    tm = transmission_matrix(square, "1")
    incoming = np.array([0.3, -0.8])
    assert np.allclose(scatter(tm, incoming), incoming)


def test_scatter_dimension_mismatch(square):
    tm = transmission_matrix(square, "2")
    with pytest.raises(ValueError):
        scatter(tm, np.zeros(2))


def test_scatter_force_injection(square):
    # corner joint 1 has orthonormal rod directions and unit impedances, so the
    # force coupling reduces to the identity: F = B + P / (i*omega)
    tm = transmission_matrix(square, "1")
    omega = 2.0
    out = scatter(tm, np.zeros(2), force=np.array([1.0, 0.0]), omega=omega)
    assert out[0] == pytest.approx(1.0 / (1j * omega))
    assert out[1] == pytest.approx(0.0)
    with pytest.raises(ValueError):
        scatter(tm, np.zeros(2), force=np.array([1.0, 0.0]))


def test_matching_zeros_of_clamped_rod():
    # a single rod clamped at both ends is singular exactly at omega*tau = n*pi
    mat = Material("m", 1.0, 1.0)
    truss = Truss(
        2,
        [Joint("a", (0.0, 0.0), anchored=True), Joint("b", (1.0, 0.0), anchored=True)],
        [Rod("ab", ("a", "b"), 1.0, "m")],
        {"m": mat},
    )
    assert reverberation_determinant(truss, math.pi) <= 1e-12
    assert reverberation_determinant(truss, 2.0 * math.pi) <= 1e-12
    assert reverberation_determinant(truss, 0.5 * math.pi) > 1.0


def test_reverberation_dof_counts(square, bridge):
    assert reverberation_dof(square) == 20  # vs 2*4 = 8 network DOF
    assert reverberation_dof(bridge) == 28  # vs 2*5 = 10 unreduced network DOF


def test_reverberation_zeros_match_network_roots(square, bridge):
    for truss, reduce in ((square, False), (bridge, True)):
        window = FrequencyWindow(0.05, 1.05 * math.pi)
        rev = reverberation_frequencies(truss, window)
        lap_modes = find_natural_frequencies(truss, window, reduce_anchors=reduce).modes
        lap = []
        for m in lap_modes:
            if not lap or abs(m.omega - lap[-1]) > 1e-9:
                lap.append(m.omega)
        assert len(rev) == len(lap)
        assert rev == pytest.approx(lap, abs=1e-8)


def test_reverberation_modulus_positive_between_roots(bridge):
    # midpoints between adjacent natural frequencies are manifestly regular
    assert reverberation_determinant(bridge, 0.73) > 1e-3
    assert reverberation_determinant(bridge, 1.6) > 1e-3


# -- wavefront simulator ---------------------------------------------------------


def fig2_impulse():
    return Impulse(rod="12", direction=TOWARD_END, stress_amplitude=-1.0, start_time=0.0)


def test_wavefront_timeline_and_signs(square):
    sim = simulate_wavefronts(square, [fig2_impulse()], t_max=2.5)
    assert len(sim.events) == 4

    first = sim.events[0]
    assert first.time == pytest.approx(1.0, abs=1e-9)
    assert first.joint == "2"
    out = dict(first.outgoing)
    assert set(out) == {"12", "24", "23"}
    assert out["12"] == pytest.approx(0.5)  # reflected tensile
    assert out["24"] == pytest.approx(-0.5)  # transmitted compressive
    assert out["23"] == pytest.approx(SQRT2 / 2.0)  # transmitted tensile

    reflections = [e for e in sim.events if e.time == pytest.approx(2.0, abs=1e-9)]
    assert sorted(e.joint for e in reflections) == ["1", "4"]
    for e in reflections:
        (rod_in, amp_in), = e.incoming
        (rod_out, amp_out), = e.outgoing
        assert rod_in == rod_out
        assert amp_out == pytest.approx(-amp_in)  # identity joint reflects velocity,
        # inverting the stress step carried in the opposite direction

    arrival = sim.events[-1]
    assert arrival.joint == "3"
    assert arrival.time == pytest.approx(1.0 + SQRT2, abs=1e-9)


def test_wavefront_snapshots(square):
    sim = simulate_wavefronts(square, [fig2_impulse()], t_max=2.5)

    prof = sim.stress_profile(1.0 / 3.0)
    (z0, z1, sigma), (z2, z3, rest) = prof["12"]
    assert (z0, sigma) == (0.0, pytest.approx(-1.0))
    assert z1 == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert rest == 0.0

    prof = sim.stress_profile(4.0 / 3.0)
    segments = prof["12"]
    assert segments[0][2] == pytest.approx(-1.0)
    assert segments[0][1] == pytest.approx(2.0 / 3.0, abs=1e-9)  # reflected front
    assert segments[1][2] == pytest.approx(-0.5)
    assert prof["24"][0][1] == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert prof["24"][0][2] == pytest.approx(-0.5)
    assert prof["23"][0][1] == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert prof["23"][0][2] == pytest.approx(SQRT2 / 2.0)

    prof = sim.stress_profile(7.0 / 3.0)
    # crossbar front launched at t=1 has travelled 4/3 < sqrt(2): joint 3 untouched
    assert prof["23"][0][1] == pytest.approx(4.0 / 3.0, abs=1e-9)
    fronts = {f.rod: f for f in sim.active_fronts(7.0 / 3.0)}
    assert fronts["23"].position == pytest.approx(4.0 / 3.0, abs=1e-9)
    assert fronts["12"].position == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert fronts["12"].direction == TOWARD_END


def test_no_impulses(square):
    sim = simulate_wavefronts(square, [], t_max=1.0)
    assert sim.events == []
    assert all(
        seg == (0.0, truss_len(square, rod), 0.0)
        for rod, segs in sim.stress_profile(0.5).items()
        for seg in segs
    )


def truss_len(truss, rod_id):
    return truss.rod_properties(rod_id).length


def test_determinism(square):
    a = simulate_wavefronts(square, [fig2_impulse()], t_max=6.0)
    b = simulate_wavefronts(square, [fig2_impulse()], t_max=6.0)
    assert [(e.time, e.joint, e.incoming, e.outgoing) for e in a.events] == [
        (e.time, e.joint, e.incoming, e.outgoing) for e in b.events
    ]


def _rect_with_crossbar():
    """Rectangle with an irrational aspect ratio: transit times never coincide,
    so fronts never merge and the population grows exponentially."""
    mat = Material("m", 1.0, 1.0)
    h = 1.6180339887498949
    joints = [
        Joint("1", (0.0, 0.0)),
        Joint("2", (1.0, 0.0)),
        Joint("3", (0.0, h)),
        Joint("4", (1.0, h)),
    ]
    pairs = [("1", "2"), ("1", "3"), ("2", "4"), ("3", "4"), ("2", "3")]
    rods = [Rod(a + b, (a, b), 1.0, "m") for a, b in pairs]
    return Truss(2, joints, rods, {"m": mat})


def test_min_amplitude_prunes():
    truss = _rect_with_crossbar()
    imp = Impulse(rod="12", direction=TOWARD_END, stress_amplitude=-1.0)
    small = simulate_wavefronts(truss, [imp], t_max=12.0, min_amplitude=0.3)
    big = simulate_wavefronts(truss, [imp], t_max=12.0, min_amplitude=0.0)
    spawned = lambda sim: sum(len(e.outgoing) for e in sim.events)
    assert spawned(small) < spawned(big)


def test_event_explosion():
    truss = _rect_with_crossbar()
    imp = Impulse(rod="12", direction=TOWARD_END, stress_amplitude=-1.0)
    with pytest.raises(EventExplosionError):
        simulate_wavefronts(truss, [imp], t_max=60.0, front_cap=500)


def test_square_front_growth_stays_merged(square):
    # commensurate arrivals merge into single events: growth is linear, and the
    # first three scattering events reproduce the hand-enumerated front counts
    sim = simulate_wavefronts(square, [fig2_impulse()], t_max=2.5)
    assert [len(e.outgoing) for e in sim.events[:3]] == [3, 1, 1]
    long = simulate_wavefronts(square, [fig2_impulse()], t_max=40.0)
    assert len(long.events) < 40.0 * 4  # far below any exponential blow-up


def test_anchored_joint_reflects_with_velocity_inversion(bridge):
    # clamped end: velocity cancels, stress step doubles in sign convention
    imp = Impulse(rod="12", direction=TOWARD_START, stress_amplitude=-1.0)
    sim = simulate_wavefronts(bridge, [imp], t_max=1.5)
    first = sim.events[0]
    assert first.joint == "1"
    (rod_out, amp_out), = first.outgoing
    assert rod_out == "12"
    assert amp_out == pytest.approx(-1.0)  # anchored wall keeps the stress sign
