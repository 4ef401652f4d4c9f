"""Geometry construction, physics constants, and seeding."""

import math

import numpy as np
import pytest

from lcxpin.config import ConfigError, SimConfig, dbm_to_mw
from lcxpin.scenario import (
    SPEED_OF_LIGHT,
    PhysConstants,
    build_scenario,
    elevation_angle,
    trial_seed,
)


def default_constants():
    return PhysConstants.from_config(SimConfig())


def test_speed_of_light():
    assert SPEED_OF_LIGHT == 3.0e8


def test_derived_constants_frozen_values():
    c = default_constants()
    # 3e8 / 3.5e9 and lambda/(4 pi), frozen from direct evaluation
    assert c.wavelength == pytest.approx(0.08571428571428572, rel=1e-15)
    assert c.eta == pytest.approx(0.006820926132509801, rel=1e-15)
    assert c.sigma2 == pytest.approx(3.981071705534969e-07, rel=1e-15)
    assert c.P_t == pytest.approx(100.0, rel=1e-15)


def test_constants_from_config_units():
    cfg = SimConfig(noise_dbm=-60.0, pt_dbm=30.0)
    c = PhysConstants.from_config(cfg)
    assert c.sigma2 == pytest.approx(1e-6, rel=1e-12)
    assert c.P_t == pytest.approx(1000.0, rel=1e-12)
    assert c.kappa == cfg.kappa_db_per_m
    assert c.eps_r == cfg.eps_r


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kappa": -0.1},
        {"eps_r": 0.9},
        {"f_c": 0.0},
        {"sigma2": 0.0},
        {"P_t": -1.0},
    ],
)
def test_constants_validation(kwargs):
    base = dict(kappa=0.1, eps_r=1.26, f_c=3.5e9, sigma2=1e-7, P_t=100.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        PhysConstants(**base)


def test_default_layout():
    sc = build_scenario(SimConfig(), seed=0)
    assert sc.feeds.shape == (2, 3)
    assert sc.slots.shape == (2, 50, 3)
    # cables evenly spread across dy = 30 with the feed at x = -dx/2
    np.testing.assert_allclose(sc.feeds[:, 1], [-7.5, 7.5])
    np.testing.assert_allclose(sc.feeds[:, 0], [-25.0, -25.0])
    np.testing.assert_allclose(sc.feeds[:, 2], [3.0, 3.0])
    # first slot of each cable sits at its feed
    np.testing.assert_allclose(sc.slots[:, 0, :], sc.feeds)
    assert sc.slot_spacing == pytest.approx(50.0 / 49.0)
    np.testing.assert_allclose(np.diff(sc.slots[0, :, 0]), sc.slot_spacing)
    # slots stay on the cable line
    assert np.all(sc.slots[0, :, 1] == -7.5)
    assert np.all(sc.slots[:, :, 2] == 3.0)


def test_users_inside_region_on_floor():
    sc = build_scenario(SimConfig(users=8), seed=3)
    assert sc.users.shape == (8, 3)
    assert np.all(np.abs(sc.users[:, 0]) <= 25.0)
    assert np.all(np.abs(sc.users[:, 1]) <= 15.0)
    assert np.all(sc.users[:, 2] == 0.0)


def test_scatterers_on_walls():
    sc = build_scenario(SimConfig(scatterers=64), seed=5)
    pos = sc.scatterers
    assert pos.shape == (64, 3)
    on_x_wall = np.isclose(np.abs(pos[:, 0]), 25.0)
    on_y_wall = np.isclose(np.abs(pos[:, 1]), 15.0)
    assert np.all(on_x_wall | on_y_wall)
    assert np.all((pos[:, 2] >= 0.0) & (pos[:, 2] <= 3.0))
    gains = sc.scatterer_gains
    assert gains.shape == (64,)
    assert np.iscomplexobj(gains)
    # CN(0,1) draws: unit second moment within a loose MC band
    assert 0.5 < np.mean(np.abs(gains) ** 2) < 2.0


def test_no_scatterers():
    sc = build_scenario(SimConfig(scatterers=0), seed=1)
    assert sc.n_scatterers == 0
    assert sc.scatterers.shape == (0, 3)


def test_half_wavelength_spacing_rejected():
    # dx = 50 with 1400 slots gives 3.57 cm spacing, under lambda/2 = 4.29 cm
    with pytest.raises(ConfigError, match="half wavelength"):
        build_scenario(SimConfig(dx=50.0, slots=1400))
    # the same slot count is fine at a shorter wavelength
    build_scenario(SimConfig(dx=50.0, slots=1400, fc_hz=1.0e10, scatterers=0), seed=0)


def test_build_is_deterministic():
    a = build_scenario(SimConfig(), seed=42)
    b = build_scenario(SimConfig(), seed=42)
    np.testing.assert_array_equal(a.users, b.users)
    np.testing.assert_array_equal(a.scatterers, b.scatterers)
    np.testing.assert_array_equal(a.scatterer_gains, b.scatterer_gains)
    c = build_scenario(SimConfig(), seed=43)
    assert not np.array_equal(a.users, c.users)


def test_seed_argument_overrides_config_seed():
    cfg = SimConfig(seed=7)
    np.testing.assert_array_equal(
        build_scenario(cfg).users, build_scenario(SimConfig(seed=7)).users
    )
    assert not np.array_equal(
        build_scenario(cfg, seed=8).users, build_scenario(cfg).users
    )


def test_arrays_are_read_only():
    sc = build_scenario(SimConfig(), seed=0)
    for arr in (sc.feeds, sc.slots, sc.users, sc.scatterers, sc.scatterer_gains):
        assert not arr.flags.writeable
    with pytest.raises(ValueError):
        sc.users[0, 0] = 1.0


def test_trial_seed_streams_are_distinct():
    tuples = [(1, 0, 0), (1, 0, 1), (1, 1, 0), (2, 0, 0)]
    draws = [np.random.default_rng(trial_seed(*t)).random(4) for t in tuples]
    for i in range(len(draws)):
        for j in range(i + 1, len(draws)):
            assert not np.array_equal(draws[i], draws[j])
    # and reproducible
    again = np.random.default_rng(trial_seed(1, 0, 0)).random(4)
    np.testing.assert_array_equal(draws[0], again)


def test_elevation_angle_345_triangle():
    # slot 3 m above a point 4 m away horizontally: sin(phi) = 3/5
    phi = elevation_angle([0.0, 0.0, 3.0], [0.0, 4.0, 0.0])
    assert phi == pytest.approx(0.6435011087932844, rel=1e-15)
    assert elevation_angle([0, 0, 3], [0, 0, 0]) == pytest.approx(math.pi / 2.0)
    assert elevation_angle([0, 0, 3], [5, 0, 3]) == 0.0


def test_elevation_angle_guards():
    with pytest.raises(ValueError):
        elevation_angle([0, 0, 3], [0, 0, 3])
    with pytest.raises(ValueError):
        elevation_angle([0, 0, 3], [0, 0, 4])
