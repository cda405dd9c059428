"""Scene generation: parameter checks, grid layout, heights, CSV round trip."""

import math

import numpy as np
import pytest

from uavlos.scene import (
    Building,
    ItuParams,
    UrbanScene,
    generate_scene,
    rayleigh_height,
    scene_from_csv,
    scene_to_csv,
)

TABLE = ItuParams(alpha=0.37, beta=188.0, gamma=13.3, patch_side=775.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(alpha=0.0),
        dict(alpha=1.0),
        dict(alpha=1.5),
        dict(alpha=-0.2),
        dict(beta=0.0),
        dict(beta=-5.0),
        dict(gamma=0.0),
        dict(d_correction=1.0),
        dict(d_correction=-0.1),
        dict(patch_side=0.0),
    ],
)
def test_params_rejects_bad_values(kwargs):
    base = dict(alpha=0.37, beta=188.0, gamma=13.3)
    base.update(kwargs)
    with pytest.raises(ValueError):
        ItuParams(**base)


def test_building_rejects_bad_values():
    with pytest.raises(ValueError):
        Building(0.0, 0.0, 0.0, 10.0)
    with pytest.raises(ValueError):
        Building(0.0, 0.0, 5.0, -1.0)


def test_grid_arithmetic_matches_hand_values():
    assert TABLE.building_side == pytest.approx(44.4, abs=0.1)
    assert TABLE.grid_pitch == pytest.approx(72.9, abs=0.1)


def test_building_count_matches_density():
    scene = generate_scene(TABLE, seed=42)
    assert scene.n_buildings == 113  # round(188 * 0.775**2)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_count_invariant_over_random_params(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        params = ItuParams(
            alpha=float(rng.uniform(0.05, 0.7)),
            beta=float(rng.uniform(50.0, 800.0)),
            gamma=float(rng.uniform(5.0, 40.0)),
            patch_side=float(rng.uniform(300.0, 2000.0)),
        )
        if params.beta * params.patch_area_km2 < 1.0:
            continue
        scene = generate_scene(params, seed=seed)
        target = round(params.beta * params.patch_area_km2)
        assert abs(scene.n_buildings - target) <= 1


def test_coverage_ratio_close_to_alpha():
    scene = generate_scene(TABLE, seed=3)
    assert scene.coverage_ratio() == pytest.approx(0.37, rel=0.05)
    # With ten or more grid pitches per side the rounding error is tiny.
    assert scene.coverage_ratio() == pytest.approx(0.37, rel=0.005)


def test_footprints_disjoint_and_inside_patch():
    scene = generate_scene(TABLE, seed=11)
    a = scene.params.patch_side
    for b in scene.buildings:
        assert b.center_x - b.half_side >= 0.0
        assert b.center_x + b.half_side <= a
        assert b.center_y - b.half_side >= 0.0
        assert b.center_y + b.half_side <= a
    cx = scene.centers_x
    cy = scene.centers_y
    hs = scene.half_sides
    for i in range(scene.n_buildings):
        overlap_x = np.abs(cx - cx[i]) < hs + hs[i]
        overlap_y = np.abs(cy - cy[i]) < hs + hs[i]
        assert int(np.count_nonzero(overlap_x & overlap_y)) == 1  # itself only


def test_generation_deterministic_per_seed():
    s1 = generate_scene(TABLE, seed=5)
    s2 = generate_scene(TABLE, seed=5)
    s3 = generate_scene(TABLE, seed=6)
    assert np.array_equal(s1.heights, s2.heights)
    assert np.array_equal(s1.centers_x, s2.centers_x)
    assert not np.array_equal(s1.heights, s3.heights)
    # Positions are layout only, so they do not depend on the seed.
    assert np.array_equal(s1.centers_x, s3.centers_x)


def test_too_small_patch_rejected():
    params = ItuParams(alpha=0.37, beta=188.0, gamma=13.3, patch_side=50.0)
    with pytest.raises(ValueError):
        generate_scene(params, seed=0)


def test_rayleigh_height_quantiles():
    assert rayleigh_height(13.3, 0.0) == 0.0
    # The Rayleigh CDF at the scale parameter is 1 - exp(-1/2).
    assert rayleigh_height(13.3, 1.0 - math.exp(-0.5)) == pytest.approx(13.3, rel=1e-12)
    with pytest.raises(ValueError):
        rayleigh_height(0.0, 0.5)
    with pytest.raises(ValueError):
        rayleigh_height(13.3, 1.0)


def test_rayleigh_height_mean():
    rng = np.random.default_rng(123)
    draws = rayleigh_height(13.3, rng.random(1_000_000))
    expected = 13.3 * math.sqrt(math.pi / 2.0)
    assert float(draws.mean()) == pytest.approx(expected, rel=0.005)


def test_scene_heights_follow_rayleigh():
    from scipy import stats

    # One big patch provides well over 1e5 buildings.
    params = ItuParams(alpha=0.37, beta=188.0, gamma=13.3, patch_side=25_000.0)
    scene = generate_scene(params, seed=17)
    assert scene.n_buildings >= 100_000
    ks = stats.kstest(scene.heights, stats.rayleigh(scale=13.3).cdf).statistic
    assert ks < 0.01


def test_csv_round_trip(tmp_path):
    scene = generate_scene(TABLE, seed=42)
    path = tmp_path / "scene.csv"
    scene_to_csv(scene, path)
    text = path.read_text()
    first, second = text.splitlines()[:2]
    assert first.startswith("# patch_side_m=775 alpha=0.37 beta_per_km2=188 ")
    assert "gamma_m=13.3" in first and "seed=42" in first
    assert second == "center_x_m,center_y_m,half_side_m,height_m"

    back = scene_from_csv(path)
    assert back.n_buildings == scene.n_buildings
    assert back.params.alpha == scene.params.alpha
    assert back.params.patch_side == scene.params.patch_side
    assert back.seed == scene.seed
    # Values survive at the CSV's 6-significant-digit resolution.
    np.testing.assert_allclose(back.heights, scene.heights, rtol=1e-5)
    np.testing.assert_allclose(back.centers_x, scene.centers_x, rtol=1e-5)


def test_csv_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# alpha=0.37\nnot,the,right,header\n")
    with pytest.raises(ValueError):
        scene_from_csv(path)


def test_empty_scene_helpers():
    scene = UrbanScene(params=TABLE, buildings=(), seed=0)
    assert scene.coverage_ratio() == 0.0
    assert scene.max_height() == 0.0
    assert not scene.contains_point(10.0, 10.0)
