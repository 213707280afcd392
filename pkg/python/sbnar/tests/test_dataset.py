import csv
import json
import os
import struct
import tempfile
import unittest

import numpy as np

from sbnar.common.error import (
    ConfigError, DataError, CorruptHeaderError, UnsupportedVersionError,
    DimensionMismatchError, TruncatedPayloadError)
from sbnar.common.rng import make_rng, split_seeds
from sbnar import dataset
from sbnar.dataset import DatasetMeta, TrajectoryDataset, MAGIC
from sbnar.forcing import ForceConfig
from sbnar.full_model import IntegratorConfig, integrate, make_initial_ensemble
from sbnar.spectral import GridConfig

def small_dataset(M=2, N_t=5, K=3, gap=2, dt=0.01, seed=0):
    rng = np.random.default_rng(seed)
    meta = DatasetMeta(K, gap, dt, M, N_t)
    u = rng.standard_normal((M, N_t + 1, K)) + 1j * rng.standard_normal((M, N_t + 1, K))
    f = rng.standard_normal((M, N_t, K)) + 1j * rng.standard_normal((M, N_t, K))
    return TrajectoryDataset(meta, u, f)

def full_config(seed=0):
    return IntegratorConfig(GridConfig(16, 0.02), ForceConfig(1.0, 4, seed), 0.01)

def raw_file(header, payload=b''):
    header = json.dumps(header).encode('utf-8')
    return MAGIC + struct.pack('<Q', len(header)) + header + payload

class Meta(unittest.TestCase):

    def test_delta(self):
        meta = DatasetMeta(8, 5, 0.001, 2, 10)
        self.assertAlmostEqual(meta.delta, 0.005)
        self.assertEqual(meta.u_shape, (2, 11, 8))
        self.assertEqual(meta.f_shape, (2, 10, 8))

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            DatasetMeta(0, 5, 0.001, 2, 10)
        with self.assertRaises(ConfigError):
            DatasetMeta(8, 5, -0.001, 2, 10)

    def test_object(self):
        meta = DatasetMeta(4, 2, 0.01, 1, 3, full_config(), seed=12)
        self.assertEqual(DatasetMeta.from_object(meta.to_object()), meta)

    def test_shapes(self):
        meta = DatasetMeta(3, 1, 0.01, 2, 4)
        with self.assertRaises(DimensionMismatchError):
            TrajectoryDataset(meta, np.zeros((2, 4, 3)), np.zeros((2, 4, 3)))
        with self.assertRaises(DataError):
            u = np.zeros((2, 5, 3), dtype=complex)
            u[0, 0, 0] = np.nan
            TrajectoryDataset(meta, u, np.zeros((2, 4, 3)))

class Files(unittest.TestCase):

    def test_save_load(self):
        ds = small_dataset()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'x.bnar')
            dataset.save(ds, path)
            back = dataset.load(path)
            with open(path, 'rb') as fil:
                data = fil.read()
        self.assertEqual(back, ds)
        self.assertTrue(data.startswith(b"BNAR1"))

    def test_bad_magic(self):
        with self.assertRaises(CorruptHeaderError):
            dataset._decode(b"NOPE1" + b"\x00" * 20)
        with self.assertRaises(CorruptHeaderError):
            dataset._decode(b"BN")

    def test_bad_header(self):
        with self.assertRaises(CorruptHeaderError):
            dataset._decode(MAGIC + struct.pack('<Q', 3) + b"{{{")
        with self.assertRaises(CorruptHeaderError):
            dataset._decode(MAGIC + struct.pack('<Q', 1000) + b"{}")

    def test_version(self):
        header = small_dataset().meta.to_object()
        header['format_version'] = 2
        with self.assertRaises(UnsupportedVersionError):
            dataset._decode(raw_file(header))

    def test_truncated(self):
        data = dataset._encode(small_dataset())
        with self.assertRaises(TruncatedPayloadError):
            dataset._decode(data[:-8])

    def test_trailing(self):
        data = dataset._encode(small_dataset())
        with self.assertRaises(DimensionMismatchError):
            dataset._decode(data + b"\x00" * 16)

    def test_payload_bytes(self):
        header = small_dataset().meta.to_object()
        header['payload_bytes'] = 7
        with self.assertRaises(DimensionMismatchError):
            dataset._decode(raw_file(header))

    def test_export_csv(self):
        ds = small_dataset(M=1, N_t=3, K=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'x.csv')
            dataset.export_csv(ds, 0, path)
            with open(path, newline='') as fil:
                rows = list(csv.reader(fil))
        self.assertEqual(rows[0], ['t', 're_u1', 'im_u1', 're_u2', 'im_u2',
                                   're_f1', 'im_f1', 're_f2', 'im_f2'])
        self.assertEqual(len(rows), 5)
        self.assertEqual(float(rows[1][1]), ds.u[0, 0, 0].real)
        self.assertEqual(rows[-1][5:], ['', '', '', ''])
        with self.assertRaises(DataError):
            dataset.export_csv(ds, 1, path)

class Manipulation(unittest.TestCase):

    def test_subset(self):
        ds = small_dataset(M=3)
        sub = dataset.subset(ds, [2, 0])
        self.assertEqual(sub.meta.n_traj, 2)
        np.testing.assert_array_equal(sub.u[0], ds.u[2])
        with self.assertRaises(DataError):
            dataset.subset(ds, [3])

    def test_truncate(self):
        ds = small_dataset(N_t=5)
        short = dataset.truncate(ds, 2)
        self.assertEqual(short.u.shape, (2, 3, 3))
        self.assertEqual(short.f.shape, (2, 2, 3))
        with self.assertRaises(DataError):
            dataset.truncate(ds, 6)

    def test_split(self):
        train, valid = dataset.split(small_dataset(M=3), 2)
        self.assertEqual(train.meta.n_traj, 2)
        self.assertEqual(valid.meta.n_traj, 1)
        with self.assertRaises(DataError):
            dataset.split(small_dataset(M=3), 3)

    def test_restrict(self):
        ds = small_dataset(K=3)
        low = dataset.restrict(ds, 2)
        self.assertEqual(low.meta.K, 2)
        np.testing.assert_array_equal(low.u, ds.u[..., :2])
        np.testing.assert_array_equal(low.f, ds.f[..., :2])
        self.assertEqual(dataset.restrict(ds, 3), ds)
        with self.assertRaises(DataError):
            dataset.restrict(ds, 4)

    def test_coarsen(self):
        ds = small_dataset(N_t=5, gap=2)
        coarse = dataset.coarsen(ds, 2)
        self.assertEqual(coarse.meta.gap, 4)
        self.assertEqual(coarse.meta.n_steps, 2)
        np.testing.assert_array_equal(coarse.u[:, 1], ds.u[:, 2])
        np.testing.assert_allclose(coarse.f[:, 1], (ds.f[:, 2] + ds.f[:, 3]) / 2)
        with self.assertRaises(DataError):
            dataset.coarsen(ds, 6)

class Generation(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.cfg = full_config(seed=3)
        cls.ensemble = make_initial_ensemble(cls.cfg, 1.0, 3)

    def test_shapes(self):
        ds = dataset.generate(self.cfg, 4, 2, 2, 5, self.ensemble)
        self.assertEqual(ds.u.shape, (2, 6, 4))
        self.assertEqual(ds.f.shape, (2, 5, 4))
        self.assertAlmostEqual(ds.meta.delta, 0.02)
        self.assertEqual(ds.meta.full_model_config, self.cfg)

    def test_deterministic(self):
        a = dataset.generate(self.cfg, 4, 2, 2, 5, self.ensemble, seed=8)
        b = dataset.generate(self.cfg, 4, 2, 2, 5, self.ensemble, seed=8)
        c = dataset.generate(self.cfg, 4, 2, 2, 5, self.ensemble, seed=9)
        self.assertEqual(a, b)
        self.assertFalse(np.array_equal(a.u, c.u))

    def test_gap_one_is_restriction(self):
        ds = dataset.generate(self.cfg, 4, 1, 1, 6, self.ensemble, seed=5)
        traj = integrate(self.ensemble[0], 6, self.cfg, rng=make_rng(split_seeds(5, 1)[0]),
                         keep_forces=True)
        np.testing.assert_array_equal(ds.u[0], traj.modes[:, :4])
        np.testing.assert_array_equal(ds.f[0], traj.force_modes[:, :4])

    def test_time_alignment(self):
        # u[n] is the state at t_n = nδ and f[n] the mean force over (t_n, t_{n+1}].
        gap, N_t = 3, 4
        ds = dataset.generate(self.cfg, 4, gap, 1, N_t, self.ensemble, seed=6)
        traj = integrate(self.ensemble[0], gap * N_t, self.cfg,
                         rng=make_rng(split_seeds(6, 1)[0]), keep_forces=True)
        np.testing.assert_allclose(traj.times[::gap], np.arange(N_t + 1) * ds.meta.delta)
        np.testing.assert_allclose(ds.u[0], traj.modes[::gap, :4], rtol=1e-13, atol=1e-13)
        fine = traj.force_modes[:, :4].reshape(N_t, gap, 4)
        np.testing.assert_allclose(ds.f[0], fine.mean(axis=1), rtol=1e-12, atol=1e-12)
        self.assertFalse(np.allclose(ds.f[0, 1:], fine[:-1].mean(axis=1)))

    def test_coarsen_matches_generate(self):
        fine = dataset.generate(self.cfg, 4, 1, 1, 6, self.ensemble, seed=5)
        coarse = dataset.generate(self.cfg, 4, 3, 1, 2, self.ensemble, seed=5)
        derived = dataset.coarsen(fine, 3)
        np.testing.assert_allclose(derived.u, coarse.u, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(derived.f, coarse.f, rtol=1e-12, atol=1e-12)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            dataset.generate(self.cfg, 17, 1, 1, 2, self.ensemble)
        with self.assertRaises(ConfigError):
            dataset.generate(self.cfg, 4, 0, 1, 2, self.ensemble)
        with self.assertRaises(ConfigError):
            dataset.generate(self.cfg, 4, 1, 4, 2, self.ensemble)
