"""Geometric LOS engine against hand geometry and a sampled-ray oracle."""

import math

import numpy as np
import pytest

from uavlos.los import (
    Link,
    blocked_states,
    count_crossed_buildings,
    crossing_counts,
    crossing_profile,
    footprint_crossing,
    is_blocked_by,
    is_los,
    los_mask,
)
from uavlos.scene import Building, ItuParams, UrbanScene, generate_scene

PARAMS = ItuParams(alpha=0.3, beta=300.0, gamma=13.3, patch_side=400.0)


def make_scene(buildings):
    return UrbanScene(params=PARAMS, buildings=tuple(buildings), seed=0)


def random_scene(rng, max_buildings=10):
    n = rng.integers(1, max_buildings + 1)
    bs = []
    for _ in range(n):
        hs = rng.uniform(15.0, 40.0)
        bs.append(
            Building(
                center_x=rng.uniform(hs, 400.0 - hs),
                center_y=rng.uniform(hs, 400.0 - hs),
                half_side=hs,
                height=13.3 * math.sqrt(-2.0 * math.log1p(-rng.random())),
            )
        )
    return make_scene(bs)


def oracle_los(scene, link, n_points=1000):
    """Dense point sampling along the segment with point-in-prism tests.

    Weaker than exact clipping: it can miss stretches thinner than the
    sample spacing, but a hit is always a true intersection.
    """
    t = np.linspace(0.0, 1.0, n_points)
    x = link.tx_x + t * (link.rx_x - link.tx_x)
    y = link.tx_y + t * (link.rx_y - link.tx_y)
    z = link.tx_h + t * (link.rx_h - link.tx_h)
    for b in scene.buildings:
        inside = (np.abs(x - b.center_x) <= b.half_side) & (
            np.abs(y - b.center_y) <= b.half_side
        )
        if np.any(inside & (z <= b.height)):
            return False
    return True


# ---------------------------------------------------------------------------
# footprint_crossing


def test_crossing_straight_through():
    link = Link(-10.0, 0.0, 5.0, 10.0, 0.0, 5.0)
    b = Building(0.0, 0.0, 5.0, 20.0)
    assert footprint_crossing(link, b) == pytest.approx((0.25, 0.75))


def test_crossing_miss():
    link = Link(-10.0, 20.0, 5.0, 10.0, 20.0, 5.0)
    b = Building(0.0, 0.0, 5.0, 20.0)
    assert footprint_crossing(link, b) is None


def test_crossing_zero_length_inside():
    link = Link(1.0, 2.0, 5.0, 1.0, 2.0, 9.0)
    b = Building(0.0, 0.0, 5.0, 20.0)
    assert footprint_crossing(link, b) == (0.0, 1.0)


def test_crossing_zero_length_outside():
    link = Link(25.0, 2.0, 5.0, 25.0, 2.0, 9.0)
    b = Building(0.0, 0.0, 5.0, 20.0)
    assert footprint_crossing(link, b) is None


def test_crossing_starts_inside():
    link = Link(0.0, 0.0, 5.0, 20.0, 0.0, 5.0)
    b = Building(0.0, 0.0, 5.0, 20.0)
    t_in, t_out = footprint_crossing(link, b)
    assert t_in == 0.0
    assert t_out == pytest.approx(0.25)


def test_crossing_interval_ordered_and_bounded():
    rng = np.random.default_rng(2)
    for _ in range(500):
        link = Link(*rng.uniform(0, 400, 2), rng.uniform(0, 50),
                    *rng.uniform(0, 400, 2), rng.uniform(0, 50))
        b = Building(rng.uniform(50, 350), rng.uniform(50, 350),
                     rng.uniform(5, 40), rng.uniform(0, 60))
        res = footprint_crossing(link, b)
        if res is not None:
            t_in, t_out = res
            assert 0.0 <= t_in <= t_out <= 1.0


# ---------------------------------------------------------------------------
# is_blocked_by / is_los


def test_tall_building_midway_blocks():
    link = Link(-100.0, 0.0, 10.0, 100.0, 0.0, 10.0)
    b = Building(0.0, 0.0, 10.0, 50.0)
    assert is_blocked_by(link, b)


def test_link_above_building_clears():
    link = Link(-100.0, 0.0, 60.0, 100.0, 0.0, 55.0)
    b = Building(0.0, 0.0, 10.0, 50.0)
    assert not is_blocked_by(link, b)


def test_rooftop_tie_blocks():
    # Building top exactly at the lower crossing height.
    link = Link(-100.0, 0.0, 30.0, 100.0, 0.0, 40.0)
    b = Building(0.0, 0.0, 10.0, link.height_at(0.45))
    t_in, t_out = footprint_crossing(link, b)
    assert t_in == pytest.approx(0.45)
    assert is_blocked_by(link, b)
    # A hair below the crossing height clears.
    b2 = Building(0.0, 0.0, 10.0, link.height_at(0.45) - 1e-9)
    assert not is_blocked_by(link, b2)


def test_endpoint_inside_prism_blocks():
    b = Building(0.0, 0.0, 10.0, 30.0)
    link = Link(0.0, 0.0, 10.0, 100.0, 0.0, 80.0)
    assert is_blocked_by(link, b)


def test_empty_scene_is_los():
    scene = make_scene([])
    assert is_los(scene, Link(0, 0, 1, 100, 100, 1))


def test_endpoints_above_scene_max_height():
    rng = np.random.default_rng(3)
    scene = random_scene(rng)
    top = max(b.height for b in scene.buildings)
    link = Link(0.0, 0.0, top + 1.0, 400.0, 400.0, top + 2.0)
    assert is_los(scene, link)


def test_los_symmetry():
    rng = np.random.default_rng(4)
    for _ in range(300):
        scene = random_scene(rng)
        link = Link(*rng.uniform(0, 400, 2), rng.uniform(0, 40),
                    *rng.uniform(0, 400, 2), rng.uniform(0, 40))
        assert is_los(scene, link) == is_los(scene, link.reversed())


def test_raising_both_endpoints_never_loses_los():
    rng = np.random.default_rng(5)
    for _ in range(300):
        scene = random_scene(rng)
        x0, y0, x1, y1 = rng.uniform(0, 400, 4)
        h1, h2 = rng.uniform(0, 40, 2)
        lift = rng.uniform(0, 30)
        low = is_los(scene, Link(x0, y0, h1, x1, y1, h2))
        high = is_los(scene, Link(x0, y0, h1 + lift, x1, y1, h2 + lift))
        assert high or not low


# ---------------------------------------------------------------------------
# Oracle equivalence


def test_agrees_with_sampled_ray_oracle():
    rng = np.random.default_rng(1)
    for k in range(10_000):
        scene = random_scene(rng)
        h1 = rng.uniform(0.0, 40.0)
        h2 = h1 if k % 2 == 0 else max(h1 + rng.uniform(-6.0, 6.0), 0.0)
        link = Link(rng.uniform(0, 400), rng.uniform(0, 400), h1,
                    rng.uniform(0, 400), rng.uniform(0, 400), h2)
        assert is_los(scene, link) == oracle_los(scene, link)


def test_oracle_blockage_implies_exact_blockage():
    # A sampled point inside a prism is a true intersection, so whenever
    # the oracle reports NLOS the exact method must as well, for any
    # height spread.
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(3000):
        scene = random_scene(rng)
        link = Link(rng.uniform(0, 400), rng.uniform(0, 400), rng.uniform(0, 60),
                    rng.uniform(0, 400), rng.uniform(0, 400), rng.uniform(0, 60))
        if not oracle_los(scene, link):
            assert not is_los(scene, link)
            checked += 1
    assert checked > 300


# ---------------------------------------------------------------------------
# count_crossed_buildings


def test_count_zero_cases():
    assert count_crossed_buildings(make_scene([]), Link(0, 0, 1, 10, 0, 1)) == 0
    scene = make_scene([Building(200, 200, 20, 30)])
    assert count_crossed_buildings(scene, Link(5, 5, 1, 5, 5, 2)) == 0


def test_zero_length_link_on_footprint_counts_one():
    scene = make_scene([Building(200, 200, 20, 30)])
    assert count_crossed_buildings(scene, Link(200, 200, 1, 200, 200, 2)) == 1


def test_mean_crossings_follow_linear_model():
    from uavlos.analytic import expected_buildings

    table = ItuParams(alpha=0.37, beta=188.0, gamma=13.3, patch_side=775.0)
    scene = generate_scene(table, seed=8)
    rng = np.random.default_rng(10)
    l_m = 200.0
    n = 20_000
    x0 = np.empty(n); y0 = np.empty(n); x1 = np.empty(n); y1 = np.empty(n)
    have = 0
    while have < n:
        m = (n - have) * 2 + 16
        cx = rng.uniform(0, 775, m)
        cy = rng.uniform(0, 775, m)
        th = rng.uniform(0, 2 * math.pi, m)
        ex = cx + l_m * np.cos(th)
        ey = cy + l_m * np.sin(th)
        ok = (ex >= 0) & (ex <= 775) & (ey >= 0) & (ey <= 775)
        take = min(int(ok.sum()), n - have)
        sel = np.nonzero(ok)[0][:take]
        x0[have:have + take] = cx[sel]; y0[have:have + take] = cy[sel]
        x1[have:have + take] = ex[sel]; y1[have:have + take] = ey[sel]
        have += take
    emp = float(crossing_counts(scene, x0, y0, x1, y1).mean())
    model = expected_buildings(l_m / 1000.0, 0.37, 188.0)
    assert emp == pytest.approx(model, rel=0.15)


# ---------------------------------------------------------------------------
# Vectorized kernels agree with the scalar path


def test_los_mask_matches_scalar():
    rng = np.random.default_rng(6)
    scene = random_scene(rng)
    n = 2000
    x0, y0, x1, y1 = (rng.uniform(0, 400, n) for _ in range(4))
    h0, h1 = (rng.uniform(0, 45, n) for _ in range(2))
    mask = los_mask(scene, x0, y0, h0, x1, y1, h1)
    for i in range(n):
        link = Link(x0[i], y0[i], h0[i], x1[i], y1[i], h1[i])
        assert bool(mask[i]) == is_los(scene, link)


def test_crossing_counts_match_scalar():
    rng = np.random.default_rng(7)
    scene = random_scene(rng)
    n = 1500
    x0, y0, x1, y1 = (rng.uniform(0, 400, n) for _ in range(4))
    counts = crossing_counts(scene, x0, y0, x1, y1)
    for i in range(n):
        link = Link(x0[i], y0[i], 1.0, x1[i], y1[i], 1.0)
        assert counts[i] == count_crossed_buildings(scene, link)


def test_profile_states_match_los_mask():
    rng = np.random.default_rng(8)
    scene = random_scene(rng)
    n = 4000
    px, py = rng.uniform(0, 400, n), rng.uniform(0, 400, n)
    tx = (123.0, 251.0)
    profile = crossing_profile(scene, tx[0], tx[1], px, py)
    for tx_h, rx_h in [(5.0, 2.0), (20.0, 35.0), (42.0, 3.5)]:
        states = blocked_states(profile, tx_h, rx_h)
        mask = los_mask(
            scene,
            np.full(n, tx[0]), np.full(n, tx[1]), tx_h,
            px, py, rx_h,
        )
        assert np.array_equal(states.astype(bool), mask)


def test_empty_scene_kernels():
    scene = make_scene([])
    x = np.array([1.0, 2.0])
    assert los_mask(scene, x, x, 1.0, x, x, 2.0).all()
    assert crossing_counts(scene, x, x, x, x).sum() == 0
