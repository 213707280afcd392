"""Long-running reproduction checks. These take minutes to tens of minutes
and only run when SBNAR_SLOW_TESTS is set (`python3 setup.py slowtest`)."""

import os
import tempfile
import unittest

import numpy as np

from sbnar import dataset
from sbnar.estimate import fit, consistency_study
from sbnar.dataset import DatasetMeta, TrajectoryDataset
from sbnar.experiment import (
    ExperimentConfig, run_simulate, run_gen_data, validate_model, train_path, validation_path)
from sbnar.forcing import ForceConfig
from sbnar.nar import NarSpec, NarModel, LagWindow, simulate_nar

SLOW = bool(os.environ.get('SBNAR_SLOW_TESTS'))

def desk(K, gaps, sigma=1.0, directory='sbnar-out', **validation):
    return ExperimentConfig({
        'full': {'sigma': sigma},
        'reduction': {'K': K, 'gaps': gaps, 'ps': [1]},
        'data': {'n_traj': 1, 'train_time': 500.0, 'validation_time': 500.0,
                 'burn_in_time': 100.0, 'n_initial': 2},
        'validation': dict({'sim_time': 500.0, 'galerkin_baseline': True}, **validation),
        'output': {'directory': directory},
    })

@unittest.skipUnless(SLOW, "set SBNAR_SLOW_TESTS to run")
class Cfl(unittest.TestCase):

    def check(self, sigma, expected):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = ExperimentConfig({
                'full': {'sigma': sigma},
                'data': {'burn_in_time': 10.0, 'n_initial': 2},
                'validation': {'simulate_time': 100.0, 'cfl_save_every': 10},
                'output': {'directory': tmp},
            })
            cfl = run_simulate(cfg)
        self.assertAlmostEqual(cfl / expected, 1.0, delta=0.15)

    def test_strong_forcing(self):
        self.check(1.0, 0.139)

    def test_weak_forcing(self):
        self.check(0.2, 0.045)

@unittest.skipUnless(SLOW, "set SBNAR_SLOW_TESTS to run")
class Recovery(unittest.TestCase):

    def test_small_noise(self):
        theta = np.array([[-0.1, 0.05, 0.2 + 0.1j], [0.05j, -0.1, -0.3]])
        spec = NarSpec(2, 1, 0.01, 0.02)
        model = NarModel(spec, theta, [1e-10, 1e-10])
        run = simulate_nar(model, LagWindow([[0.5 - 0.2j, 0.1j]], np.zeros((1, 2))),
                           100000, ForceConfig(1.0, 2, 1))
        self.assertTrue(run.stable)
        meta = DatasetMeta(2, 1, 0.01, 1, 100000)
        ds = TrajectoryDataset(meta, run.modes[None], run.force_modes[None])
        report = fit(ds, spec)
        np.testing.assert_allclose(report.theta, theta, rtol=1e-3)
        np.testing.assert_allclose(report.sigma_g, 1e-10, rtol=0.05)

@unittest.skipUnless(SLOW, "set SBNAR_SLOW_TESTS to run")
class EightModes(unittest.TestCase):
    """K = 8 at desk scale: one data generation for gaps 5, 10 and 20."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.cfg = desk(8, [5, 10, 20], directory=cls.tmp.name)
        cls.data = run_gen_data(cls.cfg)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def validate(self, gap):
        train = dataset.load(train_path(self.data, gap))
        reference = dataset.load(validation_path(self.data, gap))
        model = fit(train, self.cfg.nar_spec(gap, 1)).model()
        return validate_model(self.cfg, model, reference)

    def test_spectrum(self):
        report = self.validate(5)
        self.assertTrue(report.stable)
        self.assertLess(np.max(report.spectrum_error), 0.1)
        self.assertGreater(report.baseline.spectrum_error[7], 0.5)

    def test_stability(self):
        self.assertTrue(self.validate(10).stable)
        self.assertFalse(self.validate(20).stable)

    def test_consistency(self):
        train = dataset.load(train_path(self.data, 5))
        n = train.meta.n_steps
        table = consistency_study(train, self.cfg.nar_spec(5, 1), [(1, n // 2), (1, n)])
        self.assertGreaterEqual(table.n_samples[0], 10000)
        self.assertLess(table.rms_relative_change(), 0.1)

@unittest.skipUnless(SLOW, "set SBNAR_SLOW_TESTS to run")
class TwoModes(unittest.TestCase):

    def run_gaps(self, sigma, gaps):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = desk(2, gaps, sigma, tmp)
            data = run_gen_data(cfg)
            reports = {}
            for gap in gaps:
                train = dataset.load(train_path(data, gap))
                reference = dataset.load(validation_path(data, gap))
                model = fit(train, cfg.nar_spec(gap, 1)).model()
                reports[gap] = validate_model(cfg, model, reference)
        return reports

    def test_distribution(self):
        report = self.run_gaps(1.0, [40])[40]
        self.assertTrue(report.stable)
        self.assertTrue(np.all(report.ks < 0.05), report.ks)
        self.assertTrue(np.all(report.acf_error < 0.1), report.acf_error)

    def test_stable_for_all_gaps(self):
        gaps = [5, 10, 20, 30, 40, 50, 80, 160]
        for sigma in (1.0, 0.2):
            for gap, report in self.run_gaps(sigma, gaps).items():
                self.assertTrue(report.stable, "sigma {}, gap {}".format(sigma, gap))
