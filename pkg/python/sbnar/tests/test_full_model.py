import math
import unittest

import numpy as np

from sbnar.common.error import ConfigError, DataError, IntegrationError
from sbnar.common.rng import make_rng
from sbnar.forcing import ForceConfig, ForceIncrement
from sbnar.full_model import (
    BLOW_UP_THRESHOLD, IntegratorConfig, Integrator, Trajectory, etdrk4_step, integrate,
    integrate_ensemble, mean_cfl, cfl_number, initial_condition, make_initial_ensemble,
    galerkin_cfl, worker_count)
from sbnar.spectral import GridConfig, SpectralField, energy

def config(n_modes=16, dt=0.01, sigma=0.0, k0=4, seed=0, viscosity=0.02):
    return IntegratorConfig(GridConfig(n_modes, viscosity), ForceConfig(sigma, k0, seed), dt)

class Configuration(unittest.TestCase):

    def test_object(self):
        cfg = config(sigma=1.0, seed=3)
        self.assertEqual(IntegratorConfig.from_object(cfg.to_object()), cfg)
        self.assertEqual(hash(IntegratorConfig.from_object(cfg.to_object())), hash(cfg))

    def test_replace(self):
        cfg = config()
        self.assertEqual(cfg.replace(dt=0.5).dt, 0.5)
        with self.assertRaises(TypeError):
            cfg.replace(nope=1)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            config(dt=0.0)
        with self.assertRaises(ConfigError):
            IntegratorConfig(GridConfig(8, 0.02), ForceConfig(0.0, 1), 0.01, etd_contour_points=4)

    def test_active_modes(self):
        cfg = config(n_modes=8)
        self.assertEqual(Integrator(cfg).n_active, 7)
        self.assertEqual(Integrator(cfg, 4).n_active, 4)
        with self.assertRaises(ConfigError):
            Integrator(cfg, 9)

class Step(unittest.TestCase):

    def test_linear_decay(self):
        cfg = config(n_modes=8, dt=1.0)
        state = SpectralField.from_modes(8, k2=1.0)
        out = etdrk4_step(state, None, cfg, nonlinear=False)
        self.assertAlmostEqual(out[2].real, math.exp(-0.08), places=14)
        self.assertAlmostEqual(out[2].real, 0.923116, places=6)
        self.assertEqual(out[1], 0j)

    def test_zero(self):
        cfg = config()
        out = etdrk4_step(SpectralField.zeros(16), None, cfg)
        self.assertEqual(out, SpectralField.zeros(16))

    def test_constant_force_linear(self):
        # Without the nonlinearity, the force enters exactly through (e^{Ldt} - 1)/L.
        cfg = config(n_modes=8, dt=0.5)
        force = ForceIncrement(0, [0.0, 1.0 + 1.0j], 0.5)
        out = etdrk4_step(SpectralField.zeros(8), force, cfg, nonlinear=False)
        lin = -0.02 * 4
        expected = (math.exp(lin * 0.5) - 1) / lin * (1.0 + 1.0j)
        self.assertAlmostEqual(abs(out[2] - expected), 0.0, places=12)

    def test_non_finite(self):
        cfg = config(n_modes=8)
        with self.assertRaises(IntegrationError):
            etdrk4_step(SpectralField.from_modes(8, k1=float('nan')), None, cfg)

    def test_order(self):
        initial = SpectralField.from_modes(32, k1=-0.5j)
        finals = {}
        for dt in (0.01, 0.005, 0.0005):
            traj = integrate(initial, int(round(0.5 / dt)), config(n_modes=32, dt=dt),
                             save_every=int(round(0.5 / dt)))
            finals[dt] = traj.final.modes
        e1 = np.linalg.norm(finals[0.01] - finals[0.0005])
        e2 = np.linalg.norm(finals[0.005] - finals[0.0005])
        self.assertTrue(12 <= e1 / e2 <= 20, "ratio {}".format(e1 / e2))

class Integration(unittest.TestCase):

    def test_no_steps(self):
        initial = initial_condition(16)
        traj = integrate(initial, 0, config())
        self.assertEqual(len(traj), 1)
        self.assertEqual(traj.final, initial)
        self.assertFalse(traj.blown_up)

    def test_save_every(self):
        traj = integrate(initial_condition(16), 10, config(sigma=1.0), save_every=3,
                         keep_forces=True)
        self.assertEqual(len(traj), 4)
        np.testing.assert_allclose(traj.times, [0.0, 0.03, 0.06, 0.09])
        self.assertEqual(traj.force_modes.shape, (3, 16))
        np.testing.assert_array_equal(traj.force_modes[:, 4:], 0.0)
        self.assertEqual(len(traj.forces), 3)
        self.assertAlmostEqual(traj.forces[0].dt, 0.03)

    def test_forces_match_steps(self):
        # Saving every step, each aggregated force is the force of that step.
        cfg = config(n_modes=8, sigma=1.0, seed=5)
        traj = integrate(SpectralField.zeros(8), 3, cfg, keep_forces=True, nonlinear=False)
        source = make_rng(5).standard_normal((3, 4, 2)) * math.sqrt(0.01)
        expected = 0.5 * (source[..., 1] - 1j * source[..., 0]) / 0.01
        np.testing.assert_allclose(traj.force_modes[:, :4], expected)

    def test_reproducible(self):
        cfg = config(sigma=1.0, seed=9)
        a = integrate(initial_condition(16), 50, cfg, save_every=5)
        b = integrate(initial_condition(16), 50, cfg, save_every=5)
        np.testing.assert_array_equal(a.modes, b.modes)

    def test_active_modes_stay_zero(self):
        traj = integrate(initial_condition(16), 20, config(sigma=1.0), K_active=4)
        np.testing.assert_array_equal(traj.modes[:, 4:], 0.0)
        self.assertTrue(np.any(traj.modes[-1, :4] != 0))

    def test_energy_decays(self):
        traj = integrate(SpectralField.from_modes(16, k1=1 - 0.5j, k2=0.3j), 100, config())
        e = np.array([energy(m) for m in traj.modes])
        self.assertTrue(np.all(np.diff(e) <= 1e-12))

    def test_blow_up(self):
        traj = integrate(SpectralField.from_modes(16, k1=2 * BLOW_UP_THRESHOLD), 5, config())
        self.assertTrue(traj.blown_up)
        self.assertEqual(traj.blow_up_step, 0)
        self.assertEqual(len(traj), 1)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            integrate(initial_condition(16), -1, config())
        with self.assertRaises(ConfigError):
            integrate(initial_condition(16), 1, config(), save_every=0)
        with self.assertRaises(ConfigError):
            integrate(initial_condition(8), 1, config())

    def test_trajectory_checks(self):
        with self.assertRaises(DataError):
            Trajectory([0.0, 0.0], np.zeros((2, 4)))
        with self.assertRaises(DataError):
            Trajectory([0.0, 1.0], np.zeros((3, 4)))

class Ensemble(unittest.TestCase):

    def test_pool_independent(self):
        cfg = config(sigma=1.0, seed=2)
        initials = [initial_condition(16)] * 3
        serial = integrate_ensemble(initials, 20, cfg, save_every=4, workers=1)
        parallel = integrate_ensemble(initials, 20, cfg, save_every=4, workers=2)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.modes, b.modes)
        self.assertFalse(np.array_equal(serial[0].modes, serial[1].modes))

    def test_worker_count(self):
        self.assertEqual(worker_count(3), 3)
        with self.assertRaises(ConfigError):
            worker_count(0)

    def test_initial_condition(self):
        u0 = initial_condition(8)
        self.assertEqual(u0[1], 1 - 0.5j)
        grid = GridConfig(8, 0.02)
        from sbnar.spectral import to_physical
        np.testing.assert_allclose(
            to_physical(u0, grid), np.sin(grid.x) + 2 * np.cos(grid.x), atol=1e-14)

    def test_initial_ensemble(self):
        cfg = config(sigma=1.0, seed=4)
        states = make_initial_ensemble(cfg, 1.0, 3)
        self.assertEqual(len(states), 3)
        for s in states:
            self.assertTrue(s.is_finite())
            self.assertEqual(len(s), 16)
        again = make_initial_ensemble(cfg, 1.0, 3)
        self.assertEqual(states, again)
        self.assertEqual(len(make_initial_ensemble(cfg, 1.0, 1)), 1)

    def test_initial_ensemble_invalid(self):
        with self.assertRaises(ConfigError):
            make_initial_ensemble(config(), 0.0, 3)
        with self.assertRaises(ConfigError):
            make_initial_ensemble(config(), 1.0, 0)

class Cfl(unittest.TestCase):

    def test_sin(self):
        grid = GridConfig(8, 0.02)
        modes = np.zeros((2, 8), dtype=complex)
        modes[0, 0] = -0.5j
        modes[1, 0] = -1.0j
        self.assertAlmostEqual(mean_cfl(modes, grid, 0.01), 1.5 * 0.01 / grid.dx)

    def test_linear_in_dt(self):
        samples = np.array([[0.5, -2.0, 1.0]])
        np.testing.assert_allclose(cfl_number(samples, 0.2, 0.1), [4.0])
        np.testing.assert_allclose(cfl_number(samples, 0.4, 0.1), [8.0])

    def test_empty(self):
        with self.assertRaises(DataError):
            mean_cfl(np.zeros((0, 8)), GridConfig(8, 0.02), 0.01)

    def test_galerkin(self):
        cfg = config(sigma=1.0, seed=1)
        value, traj = galerkin_cfl(initial_condition(16), 4, cfg, 2, 10, make_rng(0))
        self.assertEqual(traj.modes.shape, (11, 8))
        self.assertGreater(value, 0.0)
        with self.assertRaises(ConfigError):
            galerkin_cfl(initial_condition(16), 4, cfg, 0, 10)
