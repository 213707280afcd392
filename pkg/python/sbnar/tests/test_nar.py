import math
import os
import tempfile
import unittest

import numpy as np

from sbnar.common.error import ConfigError, DataError, EvaluationError
from sbnar.dataset import DatasetMeta, TrajectoryDataset
from sbnar.forcing import ForceConfig
from sbnar.full_model import IntegratorConfig, etdrk4_step
from sbnar.nar import (
    TermMask, NarSpec, NarModel, LagWindow, r_delta, reconstruct_high_modes, phi_features,
    nar_step, simulate_nar, window_from_dataset, galerkin_warm_start, design_rows)
from sbnar.spectral import GridConfig, SpectralField

def random_window(rng, p, K, scale=0.5):
    u = scale * (rng.standard_normal((p, K)) + 1j * rng.standard_normal((p, K)))
    f = rng.standard_normal((p, K)) + 1j * rng.standard_normal((p, K))
    return LagWindow(u, f)

def brute_high_modes(u, K, viscosity, delta, j):
    def c(l):
        if l == 0 or abs(l) > K:
            return 0j
        return u[l - 1] if l > 0 else np.conj(u[-l - 1])
    out = []
    for k in range(K + 1, 2 * K + 1):
        s = sum(c(k - l) * c(l) for l in range(-K, K + 1) if abs(k - l) <= K)
        out.append(0.5j * k * math.exp(-viscosity * k * k * j * delta) * s)
    return np.array(out)

def brute_quadratic(ext1, extj, K):
    def c(ext, l):
        if l == 0 or abs(l) > 2 * K:
            return 0j
        return ext[l - 1] if l > 0 else np.conj(ext[-l - 1])
    out = []
    for k in range(1, K + 1):
        s = 0j
        for l in range(-2 * K, 2 * K + 1):
            m = k - l
            if abs(m) > 2 * K:
                continue
            if (abs(l) > K) != (abs(m) > K):
                s += c(ext1, l) * c(extj, m)
        out.append(s)
    return np.array(out)

class Masks(unittest.TestCase):

    def test_default(self):
        mask = TermMask.default(2)
        self.assertEqual(mask.columns, [('v', 1), ('R', 1), ('w', 1), ('w', 2)])
        self.assertEqual(mask.n_terms, 4)

    def test_full(self):
        self.assertEqual(TermMask.full(2).n_terms, 8)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            TermMask(2, v=(3,))
        with self.assertRaises(ConfigError):
            TermMask(2, x=(1,))
        with self.assertRaises(ConfigError):
            TermMask(1)
        with self.assertRaises(ConfigError):
            TermMask(0, v=(1,))

    def test_object(self):
        mask = TermMask(3, v=(1, 2), f=(3,), w=(1,))
        self.assertEqual(TermMask.from_object(mask.to_object()), mask)

class Spec(unittest.TestCase):

    def test_properties(self):
        spec = NarSpec(4, 2, 0.005, 0.02)
        self.assertEqual(spec.grid, GridConfig(8, 0.02))
        self.assertEqual(spec.galerkin_config.dt, 0.005)
        self.assertEqual(spec.term_mask, TermMask.default(2))
        self.assertEqual(NarSpec.from_object(spec.to_object()), spec)

    def test_mismatch(self):
        with self.assertRaises(ConfigError):
            NarSpec(4, 2, 0.005, 0.02, TermMask.default(1))
        with self.assertRaises(ConfigError):
            NarSpec(4, 1, 0.0, 0.02)

class Drift(unittest.TestCase):

    def test_zero(self):
        spec = NarSpec(4, 1, 0.01, 0.02)
        np.testing.assert_array_equal(r_delta(np.zeros(4), spec), np.zeros(4))

    def test_single_high_mode(self):
        # Within K = 2, mode 2 alone only feeds modes 0 and 4.
        spec = NarSpec(2, 1, 0.1, 0.02)
        c = 0.3 - 0.7j
        r = r_delta([0.0, c], spec)
        self.assertAlmostEqual(abs(r[0]), 0.0, places=14)
        self.assertAlmostEqual(abs(r[1] - c * (math.exp(-0.02 * 4 * 0.1) - 1) / 0.1), 0.0, places=13)

    def test_one_step(self):
        spec = NarSpec(3, 1, 0.05, 0.02)
        u = np.array([1 - 0.5j, 0.2j, -0.1])
        padded = np.zeros(6, dtype=complex)
        padded[:3] = u
        step = etdrk4_step(SpectralField(padded), None, spec.galerkin_config, K_active=3)
        np.testing.assert_allclose(u + spec.delta * r_delta(u, spec), step.modes[:3], atol=1e-14)

    def test_fine_reference(self):
        # One step of size δ against many steps of size δ/100.
        spec = NarSpec(2, 1, 0.05, 0.02)
        u = np.array([-0.5j, 0.0])
        fine = spec.galerkin_config.replace(dt=0.0005)
        state = SpectralField([-0.5j, 0.0, 0.0, 0.0])
        for _ in range(100):
            state = etdrk4_step(state, None, fine, K_active=2)
        np.testing.assert_allclose(u + spec.delta * r_delta(u, spec), state.modes[:2], atol=1e-6)
        self.assertGreater(abs(r_delta(u, spec)[1]), 0.1)

    def test_errors(self):
        spec = NarSpec(2, 1, 0.05, 0.02)
        with self.assertRaises(EvaluationError):
            r_delta([np.nan, 0.0], spec)
        with self.assertRaises(EvaluationError):
            r_delta([0.0, 0.0, 0.0], spec)

class HighModes(unittest.TestCase):

    def test_two_modes(self):
        nu, delta = 0.02, 0.01
        spec = NarSpec(2, 2, delta, nu)
        a, b = 0.3 - 0.4j, 1.1 + 0.2j
        window = LagWindow([[a, b], [a, b]], np.zeros((2, 2)))
        for j in (1, 2):
            ext = reconstruct_high_modes(window, j, spec)
            np.testing.assert_allclose(ext[:2], [a, b])
            self.assertAlmostEqual(abs(ext[2] - 3j * a * b * math.exp(-9 * nu * j * delta)), 0.0, places=14)
            self.assertAlmostEqual(abs(ext[3] - 2j * b * b * math.exp(-16 * nu * j * delta)), 0.0, places=14)

    def test_zero(self):
        spec = NarSpec(3, 1, 0.01, 0.02)
        ext = reconstruct_high_modes(LagWindow(np.zeros((1, 3)), np.zeros((1, 3))), 1, spec)
        np.testing.assert_array_equal(ext, np.zeros(6))

    def test_brute_force(self):
        rng = np.random.default_rng(5)
        spec = NarSpec(8, 3, 0.02, 0.05)
        window = random_window(rng, 3, 8)
        for j in (1, 2, 3):
            ext = reconstruct_high_modes(window, j, spec)
            ref = brute_high_modes(window.state(j), 8, 0.05, 0.02, j)
            self.assertLess(np.max(np.abs(ext[8:] - ref)), 1e-12 * max(1.0, np.max(np.abs(ref))))

    def test_lag_range(self):
        spec = NarSpec(2, 1, 0.01, 0.02)
        window = LagWindow(np.zeros((1, 2)), np.zeros((1, 2)))
        with self.assertRaises(EvaluationError):
            reconstruct_high_modes(window, 2, spec)
        with self.assertRaises(EvaluationError):
            reconstruct_high_modes(window, 0, spec)

class Features(unittest.TestCase):

    def test_count(self):
        spec = NarSpec(2, 1, 0.01, 0.02)
        window = random_window(np.random.default_rng(1), 1, 2)
        self.assertEqual(phi_features(window, spec).shape, (2, 3))

    def test_zero(self):
        spec = NarSpec(4, 2, 0.01, 0.02, TermMask.full(2))
        window = LagWindow(np.zeros((2, 4)), np.zeros((2, 4)))
        np.testing.assert_array_equal(phi_features(window, spec), np.zeros((4, 8)))

    def test_columns(self):
        rng = np.random.default_rng(2)
        spec = NarSpec(3, 2, 0.01, 0.02, TermMask.full(2))
        window = random_window(rng, 2, 3)
        phi = phi_features(window, spec)
        cols = spec.term_mask.columns
        np.testing.assert_array_equal(phi[:, cols.index(('v', 2))], window.state(2))
        np.testing.assert_array_equal(phi[:, cols.index(('f', 1))], window.force(1))
        np.testing.assert_allclose(phi[:, cols.index(('R', 1))], r_delta(window.state(1), spec))

    def test_quadratic_brute_force(self):
        rng = np.random.default_rng(3)
        for K in (2, 3, 8):
            spec = NarSpec(K, 3, 0.02, 0.05)
            window = random_window(rng, 3, K)
            phi = phi_features(window, spec)
            ext1 = reconstruct_high_modes(window, 1, spec)
            cols = spec.term_mask.columns
            for j in (1, 2, 3):
                ref = brute_quadratic(ext1, reconstruct_high_modes(window, j, spec), K)
                got = phi[:, cols.index(('w', j))]
                self.assertLess(np.max(np.abs(got - ref)), 1e-12 * max(1.0, np.max(np.abs(ref))))

    def test_design_rows(self):
        spec = NarSpec(2, 1, 0.01, 0.02)
        rng = np.random.default_rng(4)
        u = 0.5 * (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
        f = rng.standard_normal((3, 2)) + 0j
        features, response = design_rows(u, f, spec)
        self.assertEqual(features.shape, (2, 2, 3))
        self.assertEqual(response.shape, (2, 2))
        window = LagWindow(u[2:3], f[1:2])
        np.testing.assert_allclose(features[1], phi_features(window, spec))
        np.testing.assert_allclose(
            response[1], u[3] - u[2] - spec.delta * (r_delta(u[2], spec) + f[2]))
        with self.assertRaises(DataError):
            design_rows(u[:2], f[:1], spec)

class Model(unittest.TestCase):

    def test_zero_model_is_galerkin(self):
        spec = NarSpec(3, 1, 0.05, 0.02)
        window = random_window(np.random.default_rng(6), 1, 3)
        out = nar_step(window, np.zeros(3), np.zeros(3), NarModel.zero(spec))
        padded = np.zeros(6, dtype=complex)
        padded[:3] = window.state(1)
        step = etdrk4_step(SpectralField(padded), None, spec.galerkin_config, K_active=3)
        np.testing.assert_allclose(out, step.modes[:3], atol=1e-14)

    def test_matches_full_model_low_modes(self):
        K, dt = 4, 0.01
        spec = NarSpec(K, 1, dt, 0.02)
        full = IntegratorConfig(GridConfig(16, 0.02), ForceConfig(0.0, 1), dt)
        u = np.array([1 - 0.5j, 0.3j, -0.2, 0.05 + 0.05j])
        state = SpectralField(np.concatenate([u, np.zeros(12)]))
        ref = etdrk4_step(state, None, full, K_active=K).modes[:K]
        out = nar_step(LagWindow([u], np.zeros((1, K))), np.zeros(K), np.zeros(K), NarModel.zero(spec))
        np.testing.assert_allclose(out, ref, atol=1e-14)

    def test_formula(self):
        rng = np.random.default_rng(7)
        spec = NarSpec(3, 2, 0.02, 0.05)
        theta = 0.1 * (rng.standard_normal((3, spec.n_terms)) + 1j * rng.standard_normal((3, spec.n_terms)))
        model = NarModel(spec, theta, np.ones(3))
        window = random_window(rng, 2, 3)
        force = np.array([0.1, 0.2j, -0.3])
        noise = np.array([0.01, 0.0, -0.02j])
        prev = window.state(1)
        phi = np.sum(theta * phi_features(window, spec), axis=-1)
        expected = prev + spec.delta * (r_delta(prev, spec) + force + phi) + noise
        np.testing.assert_allclose(nar_step(window, force, noise, model), expected, atol=1e-14)

    def test_linear_in_theta(self):
        rng = np.random.default_rng(17)
        spec = NarSpec(4, 2, 0.02, 0.05, TermMask.full(2))
        shape = (4, spec.n_terms)
        theta1 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        theta2 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        window = random_window(rng, 2, 4)
        force = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        noise = np.zeros(4)

        def closure(theta):
            model = NarModel(spec, theta, np.zeros(4))
            return nar_step(window, force, noise, model) - nar_step(
                window, force, noise, NarModel.zero(spec))

        np.testing.assert_allclose(
            closure(theta1 + theta2), closure(theta1) + closure(theta2), atol=1e-13)
        np.testing.assert_allclose(closure(2.5 * theta1), 2.5 * closure(theta1), atol=1e-13)

    def test_invalid(self):
        spec = NarSpec(2, 1, 0.01, 0.02)
        with self.assertRaises(DataError):
            NarModel(spec, np.zeros((2, 4)), np.zeros(2))
        with self.assertRaises(DataError):
            NarModel(spec, np.zeros((2, 3)), -np.ones(2))
        with self.assertRaises(EvaluationError):
            nar_step(LagWindow(np.zeros((2, 2)), np.zeros((2, 2))), np.zeros(2), np.zeros(2),
                     NarModel.zero(spec))

    def test_coefficient(self):
        spec = NarSpec(2, 1, 0.01, 0.02)
        model = NarModel(spec, [[1, 2, 3], [4, 5, 6]], np.zeros(2))
        np.testing.assert_array_equal(model.coefficient('R', 1), [2, 5])
        with self.assertRaises(ConfigError):
            model.coefficient('f', 1)

    def test_save_load(self):
        rng = np.random.default_rng(8)
        spec = NarSpec(3, 2, 0.02, 0.05, TermMask(2, v=(1, 2), w=(2,)))
        model = NarModel(spec, rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)),
                         rng.random(3))
        with tempfile.TemporaryDirectory() as tmp:
            for name in ('m.json', 'm.cbor'):
                path = os.path.join(tmp, name)
                model.save(path)
                self.assertEqual(NarModel.load(path), model)

class Window(unittest.TestCase):

    def test_advance(self):
        window = LagWindow([[1.0], [2.0]], [[0.1], [0.2]])
        nxt = window.advance([3.0], [0.3])
        np.testing.assert_array_equal(nxt.u[:, 0], [2.0, 3.0])
        np.testing.assert_array_equal(nxt.f[:, 0], [0.2, 0.3])
        self.assertEqual(nxt.state(1)[0], 3.0)

    def test_from_dataset(self):
        meta = DatasetMeta(2, 1, 0.01, 1, 4)
        u = np.arange(10).reshape(1, 5, 2) + 0j
        f = 100 + np.arange(8).reshape(1, 4, 2) + 0j
        ds = TrajectoryDataset(meta, u, f)
        window = window_from_dataset(ds, 0, 3, 2)
        np.testing.assert_array_equal(window.u, u[0, 1:3])
        np.testing.assert_array_equal(window.f, f[0, 0:2])
        with self.assertRaises(DataError):
            window_from_dataset(ds, 0, 2, 2)
        with self.assertRaises(DataError):
            window_from_dataset(ds, 1, 3, 2)

    def test_warm_start(self):
        spec = NarSpec(3, 3, 0.01, 0.02)
        u0 = np.array([1 - 0.5j, 0.0, 0.0, 5.0])
        window = galerkin_warm_start(spec, u0)
        self.assertEqual(window.u.shape, (3, 3))
        np.testing.assert_array_equal(window.u[0], u0[:3])
        np.testing.assert_allclose(window.u[1], u0[:3] + spec.delta * r_delta(u0[:3], spec))
        noisy = galerkin_warm_start(spec, u0, ForceConfig(1.0, 2, 3))
        self.assertFalse(np.array_equal(noisy.u[1], window.u[1]))

class Simulation(unittest.TestCase):

    def test_deterministic_galerkin(self):
        spec = NarSpec(3, 1, 0.02, 0.02)
        u0 = np.array([1 - 0.5j, 0.1j, 0.0])
        run = simulate_nar(NarModel.zero(spec), LagWindow([u0], np.zeros((1, 3))), 5)
        self.assertEqual(run.modes.shape, (6, 3))
        u = u0
        for n in range(1, 6):
            u = u + spec.delta * r_delta(u, spec)
            np.testing.assert_allclose(run.modes[n], u, atol=1e-13)
        self.assertTrue(run.stable)
        self.assertEqual(run.verdict, 'stable')
        self.assertIsNone(run.blow_up_time)

    def test_recorded_force(self):
        spec = NarSpec(2, 1, 0.02, 0.02)
        u0 = np.array([0.5, 0.0j])
        force = np.array([[1.0, 0.5j], [0.0, -1.0]])
        run = simulate_nar(NarModel.zero(spec), LagWindow([u0], np.zeros((1, 2))), 2, force)
        u1 = u0 + spec.delta * (r_delta(u0, spec) + force[0])
        np.testing.assert_allclose(run.modes[1], u1, atol=1e-14)
        np.testing.assert_allclose(run.force_modes, force)
        with self.assertRaises(DataError):
            simulate_nar(NarModel.zero(spec), LagWindow([u0], np.zeros((1, 2))), 3, force)

    def test_reproducible(self):
        spec = NarSpec(2, 1, 0.02, 0.02)
        model = NarModel(spec, np.zeros((2, 3)), [0.01, 0.02])
        window = LagWindow([[0.5, 0.1j]], np.zeros((1, 2)))
        a = simulate_nar(model, window, 50, ForceConfig(1.0, 2, 4), keep_noise=True)
        b = simulate_nar(model, window, 50, ForceConfig(1.0, 2, 4), keep_noise=True)
        c = simulate_nar(model, window, 50, ForceConfig(1.0, 2, 5))
        np.testing.assert_array_equal(a.modes, b.modes)
        self.assertFalse(np.array_equal(a.modes, c.modes))
        self.assertEqual(a.noise.shape, (50, 2))

    def test_save_every(self):
        spec = NarSpec(2, 1, 0.02, 0.02)
        window = LagWindow([[0.5, 0.1j]], np.zeros((1, 2)))
        every = simulate_nar(NarModel.zero(spec), window, 10, ForceConfig(1.0, 2, 4))
        sparse = simulate_nar(NarModel.zero(spec), window, 10, ForceConfig(1.0, 2, 4), save_every=5)
        np.testing.assert_array_equal(sparse.modes, every.modes[::5])
        np.testing.assert_allclose(sparse.force_modes[0], every.force_modes[:5].mean(axis=0))

    def test_blow_up(self):
        spec = NarSpec(2, 1, 0.1, 0.02)
        theta = np.zeros((2, 3))
        theta[:, 0] = 1000.0
        run = simulate_nar(NarModel(spec, theta, np.zeros(2)), LagWindow([[1.0, 1.0]], np.zeros((1, 2))), 100)
        self.assertFalse(run.stable)
        self.assertEqual(run.verdict, 'blow-up')
        self.assertLess(run.blow_up_step, 100)
        self.assertAlmostEqual(run.blow_up_time, run.blow_up_step * 0.1)
        self.assertEqual(len(run), run.blow_up_step)
