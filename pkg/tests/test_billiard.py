import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypman import billiard as bl
from hypman.errors import NotApplicable, OutOfDomain
from hypman.numcore import fd_jacobian


@pytest.fixture(scope="module")
def disk():
    return bl.BilliardTable.interior_disk()


@pytest.fixture(scope="module")
def two_disk():
    return bl.BilliardTable.exterior_disks([((0.0, 0.0), 1.0), ((4.0, 0.0), 1.0)])


@pytest.fixture(scope="module")
def three_disk():
    return bl.three_disk_table(6.0, 1.0)


# ---------------------------------------------------------------------------
# geometry


def test_table_validation():
    with pytest.raises(ValueError):
        bl.BilliardTable("interior", (bl.Disk((0, 0), 1.0), bl.Disk((3, 0), 1.0)))
    with pytest.raises(ValueError):
        bl.BilliardTable.exterior_disks([((0, 0), 1.0), ((1.5, 0), 1.0)])
    with pytest.raises(ValueError):
        bl.Disk((0, 0), -1.0)


def test_boundary_frame_interior(disk):
    x, v, n, k = bl.boundary_data(disk, 0, 0.0)
    assert np.allclose(x, [1.0, 0.0])
    assert abs(np.linalg.norm(v) - 1.0) < 1e-15
    assert abs(v @ n) < 1e-15
    assert k == 1.0
    # (v, n) positively oriented
    assert v[0] * n[1] - v[1] * n[0] > 0


def test_boundary_curvature_exterior():
    t = bl.BilliardTable.exterior_disks([((0.0, 0.0), 2.0)])
    _, _, _, k = bl.boundary_data(t, 0, 1.3)
    assert k == -0.5


def test_boundary_unit_speed_and_curvature_identity(three_disk):
    # d(tangent)/d(theta) = K * normal, via central differences
    h = 1e-6
    for comp in range(3):
        for theta in (0.1, 2.0, 4.5):
            _, vp, _, _ = bl.boundary_data(three_disk, comp, theta + h)
            _, vm, _, _ = bl.boundary_data(three_disk, comp, theta - h)
            x, v, n, k = bl.boundary_data(three_disk, comp, theta)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12
            assert np.max(np.abs((vp - vm) / (2 * h) - k * n)) < 1e-8


def test_boundary_unknown_component(disk):
    with pytest.raises(ValueError):
        bl.boundary_data(disk, 3, 0.0)


# ---------------------------------------------------------------------------
# the map


def test_unit_disk_closed_form(disk):
    rng = np.random.default_rng(3)
    for _ in range(100):
        th = rng.uniform(0, 2 * np.pi)
        sg = rng.uniform(-0.95, 0.95)
        out = bl.billiard_map(disk, bl.PhasePoint(0, th, sg))
        expected = (th + 2.0 * np.arccos(sg)) % (2.0 * np.pi)
        assert abs((out.theta - expected + np.pi) % (2 * np.pi) - np.pi) < 1e-9
        assert abs(out.sigma - sg) < 1e-9


def test_unit_disk_diameter(disk):
    out = bl.billiard_map(disk, bl.PhasePoint(0, 0.0, 0.0))
    assert out.theta == pytest.approx(np.pi, abs=1e-12)
    assert abs(out.sigma) < 1e-12


def test_two_disk_axis_orbit(two_disk):
    p1 = bl.billiard_map(two_disk, bl.PhasePoint(0, 0.0, 0.0))
    assert (p1.component, p1.theta) == (1, pytest.approx(np.pi, abs=1e-12))
    assert abs(p1.sigma) < 1e-12
    p2 = bl.billiard_map(two_disk, p1)
    assert p2.component == 0 and abs(p2.sigma) < 1e-12
    assert abs((p2.theta + np.pi) % (2 * np.pi) - np.pi) < 1e-12


def test_escape_and_glancing(two_disk, disk):
    out = bl.billiard_map(two_disk, bl.PhasePoint(0, np.pi, 0.0))  # fires away
    assert isinstance(out, bl.Escape)
    out = bl.billiard_map(disk, bl.PhasePoint(0, 0.0, 1.0 - 1e-12))
    assert isinstance(out, bl.Glancing)


def test_time_reversal_involution(disk, three_disk):
    rng = np.random.default_rng(9)
    for table in (disk, three_disk):
        count = 0
        while count < 20:
            p = bl.PhasePoint(0, rng.uniform(0, 2 * np.pi), rng.uniform(-0.9, 0.9))
            out = bl.billiard_map(table, p)
            if not isinstance(out, bl.PhasePoint):
                continue
            back = bl.billiard_map(table, bl.PhasePoint(out.component, out.theta, -out.sigma))
            assert back.component == p.component
            assert abs((back.theta - p.theta + np.pi) % (2 * np.pi) - np.pi) < 1e-9
            assert abs(back.sigma + p.sigma) < 1e-9
            count += 1


# ---------------------------------------------------------------------------
# generating function


def test_generating_function_unit_disk(disk):
    assert bl.generating_function(disk, (0, 0.3), (0, 0.3 + np.pi)) == pytest.approx(2.0)
    d = 1.234
    assert bl.generating_function(disk, (0, 0.0), (0, d)) == pytest.approx(
        2.0 * np.sin(d / 2.0), abs=1e-12
    )
    with pytest.raises(ValueError):
        bl.generating_function(disk, (0, 0.5), (0, 0.5))


def test_generating_identity(disk, three_disk):
    # sigma1 = -dPhi/dtheta1 and sigma2 = +dPhi/dtheta2 along real bounces
    h = 1e-6
    cases = [(disk, bl.PhasePoint(0, 1.0, 0.37)), (three_disk, bl.PhasePoint(0, 0.05, 0.1))]
    for table, p in cases:
        q = bl.billiard_map(table, p)
        assert isinstance(q, bl.PhasePoint)
        d1 = (
            bl.generating_function(table, (p.component, p.theta + h), (q.component, q.theta))
            - bl.generating_function(table, (p.component, p.theta - h), (q.component, q.theta))
        ) / (2 * h)
        d2 = (
            bl.generating_function(table, (p.component, p.theta), (q.component, q.theta + h))
            - bl.generating_function(table, (p.component, p.theta), (q.component, q.theta - h))
        ) / (2 * h)
        assert abs(-d1 - p.sigma) < 1e-6
        assert abs(d2 - q.sigma) < 1e-6


# ---------------------------------------------------------------------------
# differential


def test_axis_differential_exact(two_disk):
    d = bl.billiard_differential(two_disk, bl.PhasePoint(0, 0.0, 0.0))
    assert np.allclose(d, [[-3.0, -2.0], [-4.0, -3.0]], atol=1e-12)


def test_differential_determinant_and_fd(three_disk):
    pm = bl.phase_planar_map(three_disk)
    layout = bl.PhaseLayout(three_disk)
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 100:
        p = bl.PhasePoint(
            rng.integers(0, 3), rng.uniform(0, 2 * np.pi), rng.uniform(-0.9, 0.9)
        )
        out = bl.billiard_map(three_disk, p)
        if not isinstance(out, bl.PhasePoint):
            continue
        d = bl.billiard_differential(three_disk, p)
        assert np.linalg.det(d) == pytest.approx(1.0, abs=1e-9)
        w = layout.encode(p)
        d_fd = fd_jacobian(pm.forward, w, 1e-6, diff=pm.difference)
        assert np.max(np.abs(d - d_fd)) < 1e-5
        checked += 1


def test_differential_entries_negative_dispersing(three_disk):
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 50:
        p = bl.PhasePoint(0, rng.uniform(0, 2 * np.pi), rng.uniform(-0.9, 0.9))
        try:
            d = bl.billiard_differential(three_disk, p)
        except OutOfDomain:
            continue
        assert np.all(d < 0.0)
        checked += 1


def test_differential_propagates_escape(two_disk):
    with pytest.raises(OutOfDomain):
        bl.billiard_differential(two_disk, bl.PhasePoint(0, np.pi, 0.0))


# ---------------------------------------------------------------------------
# period-2 criterion


def test_period2_two_disk():
    hyp, tr = bl.period2_hyperbolic(2.0, -1.0, -1.0)
    assert hyp and tr == pytest.approx(34.0, abs=1e-12)
    prod = (1.0 - 2.0 * -1.0) * (1.0 - 2.0 * -1.0)
    assert prod == 9.0  # outside [0, 1]


def test_period2_flat_walls_parabolic():
    hyp, tr = bl.period2_hyperbolic(1.0, 0.0, 0.0)
    assert not hyp and tr == 2.0


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=50.0),
    st.floats(min_value=-10.0, max_value=-0.01),
    st.floats(min_value=-10.0, max_value=-0.01),
)
def test_period2_concave_always_hyperbolic(ell, k1, k2):
    hyp, tr = bl.period2_hyperbolic(ell, k1, k2)
    assert hyp and tr > 2.0


def test_period2_convex_sometimes_hyperbolic():
    # interior-style curvatures: hyperbolic iff the orbit is long enough
    assert bl.period2_hyperbolic(3.0, 1.0, 1.0)[0]  # (1-3)^2 = 4 > 1
    assert not bl.period2_hyperbolic(1.0, 1.0, 1.0)[0]  # (1-1)^2 = 0 in [0,1]


# ---------------------------------------------------------------------------
# no-eclipse


def test_no_eclipse(three_disk):
    assert bl.no_eclipse_check(three_disk) is True
    assert bl.no_eclipse_check(bl.three_disk_table(2.001, 1.0)) is False
    with pytest.raises(NotApplicable):
        bl.no_eclipse_check(bl.BilliardTable.exterior_disks([((0, 0), 1.0), ((4, 0), 1.0)]))
    with pytest.raises(NotApplicable):
        bl.no_eclipse_check(bl.BilliardTable.interior_disk())


# ---------------------------------------------------------------------------
# batch kernel and trapped set


def test_batch_matches_scalar(three_disk):
    rng = np.random.default_rng(5)
    n = 1500
    th = rng.uniform(0, 2 * np.pi, n)
    sg = rng.uniform(-0.999, 0.999, n)
    comp = rng.integers(0, 3, n)
    c2, th2, sg2, status = bl.billiard_map_batch(three_disk, comp, th, sg)
    for i in range(n):
        out = bl.billiard_map(three_disk, bl.PhasePoint(int(comp[i]), th[i], sg[i]))
        if isinstance(out, bl.PhasePoint):
            assert status[i] == bl.OK
            assert out.component == c2[i]
            assert abs(out.theta - th2[i]) < 1e-12
            assert abs(out.sigma - sg2[i]) < 1e-12
        elif isinstance(out, bl.Escape):
            assert status[i] == bl.ESCAPED
        else:
            assert status[i] == bl.GLANCED


def test_trapped_grid_n0_all_trapped(three_disk):
    g = bl.trapped_set(three_disk, 0, (32, 32), 0)
    assert np.all(g.mask == bl.MASK_TRAPPED)


def test_trapped_fraction_monotone(three_disk):
    fracs = [
        bl.trapped_set(three_disk, 0, (128, 128), n).trapped_fraction for n in (0, 1, 2, 3, 5)
    ]
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))
    assert fracs[0] == 1.0


def test_trapped_threads_deterministic(three_disk):
    a = bl.trapped_set(three_disk, 0, (64, 64), 3, threads=None)
    b = bl.trapped_set(three_disk, 0, (64, 64), 3, threads=4)
    assert np.array_equal(a.mask, b.mask)


def test_period2_points_survive(three_disk):
    # orbit points toward both neighbors, on each circle, survive n_max = 12
    pts = [
        bl.PhasePoint(0, 0.0, 0.0),
        bl.PhasePoint(0, 5.0 * np.pi / 3.0, 0.0),
        bl.PhasePoint(1, np.pi, 0.0),
    ]
    for p in pts:
        assert bl.point_survives(three_disk, p, 12)


def test_trapped_mask_reflection_symmetry(three_disk):
    # the table is symmetric about the line through disk 0 at 30 degrees;
    # on component 0 the reflection is (theta, sigma) -> (-pi/3 - theta, -sigma)
    g = bl.trapped_set(three_disk, 0, (256, 256), 2)
    agree = 0
    total = 0
    length = 2.0 * np.pi
    for j in range(g.n_sigma):
        for i in range(g.n_theta):
            th, sg = g.cell_center(i, j)
            th_r = (-np.pi / 3.0 - th) % length
            i2, j2 = g.cell_index(th_r, -sg)
            total += 1
            agree += g.mask[j, i] == g.mask[j2, i2]
    assert agree / total >= 0.999


def test_phase_layout_roundtrip(three_disk):
    layout = bl.PhaseLayout(three_disk)
    for comp in range(3):
        for th in (0.0, 1.0, 6.2):
            p = bl.PhasePoint(comp, th, 0.3)
            q = layout.decode(layout.encode(p))
            assert q.component == comp
            assert abs((q.theta - th + np.pi) % (2 * np.pi) - np.pi) < 1e-12


def test_sigma_norm_values():
    v = np.array([1.0, 0.0])
    assert bl.sigma_norm(0.0, v) == 1.0
    assert bl.sigma_norm(0.6, v) == pytest.approx(np.sqrt(0.64))
    assert bl.sigma_norm(0.6, np.array([0.0, 1.0])) == pytest.approx(1.0 / np.sqrt(0.64))
