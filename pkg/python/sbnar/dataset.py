"""Training and validation data for the reduced models.

A `TrajectoryDataset` holds M trajectories observed every δ = gap·dt time
units: the resolved modes u[m][n][k] = û_{k+1}(t_n) for n = 0..N_t, and the
matched forces f[m][n][k], each the mean of the full model's per-step force
over (t_n, t_{n+1}]. High modes are never stored.

On disk, a dataset is the magic `b"BNAR1"`, the byte length of the header as
a little-endian unsigned 64-bit integer, the header itself as UTF-8 JSON, and
then the payload: u followed by f, both as little-endian 64-bit floats with
real and imaginary parts interleaved, in [m][n][k] order.
"""

__all__ = [ #@
    'FORMAT_VERSION',
    'MAGIC',
    'DatasetMeta',
    'TrajectoryDataset',
    'generate',
    'save',
    'load',
    'subset',
    'truncate',
    'split',
    'export_csv',
    'coarsen',
    'restrict',
]

import csv
import json
import math
import struct

import numpy as np

from sbnar.common.error import (
    ConfigError, DataError, CorruptHeaderError, UnsupportedVersionError,
    DimensionMismatchError, TruncatedPayloadError, GenerationError)
from sbnar.common.log import get_logger
from sbnar.common.rng import split_seeds
from sbnar.full_model import IntegratorConfig, integrate_ensemble

logger = get_logger('dataset')

FORMAT_VERSION = 1
MAGIC = b"BNAR1"
_LENGTH = struct.Struct('<Q')
_DTYPE = np.dtype('<c16')

class DatasetMeta(object):
    """Dimensions and provenance of a dataset."""

    def __init__(self, K, gap, dt, n_traj, n_steps, full_model_config=None, seed=0,
                 format_version=FORMAT_VERSION):
        super().__init__()
        for name, value in (('K', K), ('gap', gap), ('n_traj', n_traj), ('n_steps', n_steps)):
            if int(value) != value or value < 1:
                raise ConfigError("{} must be a positive integer, not {!r}".format(name, value))
        dt = float(dt)
        if not dt > 0.0 or not math.isfinite(dt):
            raise ConfigError("dt must be positive, not {!r}".format(dt))
        if full_model_config is not None and not isinstance(full_model_config, IntegratorConfig):
            full_model_config = IntegratorConfig.from_object(full_model_config)
        self._K = int(K)
        self._gap = int(gap)
        self._dt = dt
        self._n_traj = int(n_traj)
        self._n_steps = int(n_steps)
        self._full_model_config = full_model_config
        self._seed = int(seed)
        self._format_version = int(format_version)

    @property
    def K(self): #@
        return self._K

    @property
    def gap(self): #@
        return self._gap

    @property
    def dt(self): #@
        return self._dt

    @property
    def delta(self): #@
        """The observation interval δ = gap·dt."""
        return self._gap * self._dt

    @property
    def n_traj(self): #@
        return self._n_traj

    @property
    def n_steps(self): #@
        return self._n_steps

    @property
    def full_model_config(self): #@
        return self._full_model_config

    @property
    def seed(self): #@
        return self._seed

    @property
    def format_version(self): #@
        return self._format_version

    @property
    def u_shape(self): #@
        return (self._n_traj, self._n_steps + 1, self._K)

    @property
    def f_shape(self): #@
        return (self._n_traj, self._n_steps, self._K)

    def replace(self, **kwargs):
        """Returns a copy with some fields replaced."""
        ob = {
            'K': self._K, 'gap': self._gap, 'dt': self._dt, 'n_traj': self._n_traj,
            'n_steps': self._n_steps, 'full_model_config': self._full_model_config,
            'seed': self._seed, 'format_version': self._format_version,
        }
        ob.update(kwargs)
        return DatasetMeta(**ob)

    def to_object(self):
        return {
            'K': self._K,
            'gap': self._gap,
            'dt': self._dt,
            'delta': self.delta,
            'n_traj': self._n_traj,
            'n_steps': self._n_steps,
            'full_model_config': (
                None if self._full_model_config is None else self._full_model_config.to_object()),
            'seed': self._seed,
            'format_version': self._format_version,
        }

    @classmethod
    def from_object(cls, ob):
        try:
            meta = DatasetMeta(
                ob['K'], ob['gap'], ob['dt'], ob['n_traj'], ob['n_steps'],
                ob.get('full_model_config'), ob.get('seed', 0),
                ob.get('format_version', FORMAT_VERSION))
        except (KeyError, TypeError, ConfigError) as e:
            raise CorruptHeaderError("invalid dataset header: {}".format(e))
        if 'delta' in ob and ob['delta'] != meta.delta:
            raise DimensionMismatchError("header delta {} differs from gap·dt = {}".format(
                ob['delta'], meta.delta))
        return meta

    def __eq__(self, other):
        if isinstance(other, DatasetMeta):
            return self.to_object() == other.to_object()
        return False

    __hash__ = None

    def __repr__(self):
        return "DatasetMeta(K={}, gap={}, dt={!r}, n_traj={}, n_steps={})".format(
            self._K, self._gap, self._dt, self._n_traj, self._n_steps)

    __str__ = __repr__

class TrajectoryDataset(object):
    """Resolved modes u (shape M × (N_t + 1) × K) and matched forces f
    (shape M × N_t × K) with their metadata. The arrays are read-only."""

    def __init__(self, meta, u, f):
        super().__init__()
        u = np.array(u, dtype=np.complex128, copy=True)
        f = np.array(f, dtype=np.complex128, copy=True)
        if u.shape != meta.u_shape:
            raise DimensionMismatchError("u has shape {}, expected {}".format(u.shape, meta.u_shape))
        if f.shape != meta.f_shape:
            raise DimensionMismatchError("f has shape {}, expected {}".format(f.shape, meta.f_shape))
        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(f)):
            raise DataError("dataset entries must be finite")
        u.flags.writeable = False
        f.flags.writeable = False
        self._meta = meta
        self._u = u
        self._f = f

    @property
    def meta(self): #@
        return self._meta

    @property
    def u(self): #@
        return self._u

    @property
    def f(self): #@
        return self._f

    @property
    def times(self): #@
        """Observation times t_n = nδ, n = 0..N_t."""
        return np.arange(self._meta.n_steps + 1) * self._meta.delta

    def __eq__(self, other):
        if isinstance(other, TrajectoryDataset):
            return (self._meta == other._meta and np.array_equal(self._u, other._u)
                    and np.array_equal(self._f, other._f))
        return False

    __hash__ = None

    def __repr__(self):
        return "TrajectoryDataset({!r})".format(self._meta)

    __str__ = __repr__

def generate(full_cfg, K, gap, M, N_t, initial_ensemble, seed=None, workers=None):
    """Runs M full-model trajectories of N_t·gap steps, one from each of the
    first M states of initial_ensemble, and keeps modes k <= K every gap
    steps together with the matched force.

    The force of trajectory m is drawn from child m of seed (default
    full_cfg.force.seed). Raises `GenerationError` naming the first
    trajectory that blew up."""
    N = full_cfg.grid.n_modes
    if int(K) != K or not 1 <= K <= N:
        raise ConfigError("K must be in 1..{}, not {!r}".format(N, K))
    if int(gap) != gap or gap < 1:
        raise ConfigError("gap must be a positive integer, not {!r}".format(gap))
    meta = DatasetMeta(K, gap, full_cfg.dt, M, N_t, full_cfg,
                       full_cfg.force.seed if seed is None else seed)
    initials = list(initial_ensemble)
    if len(initials) < meta.n_traj:
        raise ConfigError("need {} initial states, got {}".format(meta.n_traj, len(initials)))
    initials = initials[:meta.n_traj]
    seeds = split_seeds(meta.seed, meta.n_traj)
    logger.info("generating {} trajectories of {} observations (gap {}, K {})",
                meta.n_traj, meta.n_steps, meta.gap, meta.K)
    trajs = integrate_ensemble(
        initials, meta.n_steps * meta.gap, full_cfg, None, meta.gap, seeds,
        keep_forces=True, workers=workers)
    u = np.empty(meta.u_shape, dtype=np.complex128)
    f = np.empty(meta.f_shape, dtype=np.complex128)
    for m, traj in enumerate(trajs):
        if traj.blown_up:
            raise GenerationError(m, traj.blow_up_step)
        u[m] = traj.modes[:, :meta.K]
        f[m] = traj.force_modes[:, :meta.K]
    return TrajectoryDataset(meta, u, f)

def _encode(ds):
    header = ds.meta.to_object()
    header['payload_bytes'] = (ds.u.size + ds.f.size) * _DTYPE.itemsize
    header = json.dumps(header, sort_keys=True).encode('utf-8')
    return b''.join([
        MAGIC, _LENGTH.pack(len(header)), header,
        ds.u.astype(_DTYPE).tobytes(), ds.f.astype(_DTYPE).tobytes()])

def _decode(data):
    prefix = len(MAGIC) + _LENGTH.size
    if len(data) < prefix or data[:len(MAGIC)] != MAGIC:
        raise CorruptHeaderError("not a dataset file (bad magic)")
    (length,) = _LENGTH.unpack_from(data, len(MAGIC))
    if prefix + length > len(data):
        raise CorruptHeaderError("header length {} exceeds the file size".format(length))
    try:
        header = json.loads(data[prefix:prefix + length].decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as e:
        raise CorruptHeaderError("cannot parse dataset header: {}".format(e))
    if not isinstance(header, dict):
        raise CorruptHeaderError("dataset header must be a JSON object")
    version = header.get('format_version')
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError("unsupported dataset format version {!r}".format(version))
    meta = DatasetMeta.from_object(header)
    n_u = int(np.prod(meta.u_shape))
    n_f = int(np.prod(meta.f_shape))
    expected = (n_u + n_f) * _DTYPE.itemsize
    if header.get('payload_bytes', expected) != expected:
        raise DimensionMismatchError("header declares {} payload bytes but its dimensions need {}".format(
            header['payload_bytes'], expected))
    payload = data[prefix + length:]
    if len(payload) < expected:
        raise TruncatedPayloadError("truncated payload: {} of {} bytes".format(len(payload), expected))
    if len(payload) > expected:
        raise DimensionMismatchError("{} bytes of trailing data after the payload".format(
            len(payload) - expected))
    values = np.frombuffer(payload, dtype=_DTYPE)
    u = values[:n_u].reshape(meta.u_shape).astype(np.complex128)
    f = values[n_u:].reshape(meta.f_shape).astype(np.complex128)
    return TrajectoryDataset(meta, u, f)

def save(ds, path):
    """Writes ds to path in the dataset file format."""
    with open(str(path), 'wb') as fil:
        fil.write(_encode(ds))
    logger.debug("wrote dataset {} to {}", ds.meta, path)

def load(path):
    """Reads a dataset written by `save()`. Raises `CorruptHeaderError`,
    `UnsupportedVersionError`, `DimensionMismatchError` or
    `TruncatedPayloadError` for malformed files, and `DataError` if the file
    cannot be read."""
    try:
        with open(str(path), 'rb') as fil:
            data = fil.read()
    except OSError as e:
        raise DataError("cannot read dataset {}: {}".format(path, e))
    return _decode(data)

def subset(ds, trajectories):
    """Returns the dataset restricted to the given trajectory indices."""
    idx = [int(m) for m in trajectories]
    if not idx:
        raise DataError("a dataset needs at least one trajectory")
    for m in idx:
        if not 0 <= m < ds.meta.n_traj:
            raise DataError("trajectory {} out of range 0..{}".format(m, ds.meta.n_traj - 1))
    return TrajectoryDataset(ds.meta.replace(n_traj=len(idx)), ds.u[idx], ds.f[idx])

def truncate(ds, n_steps):
    """Returns the first n_steps observation intervals of every trajectory."""
    if int(n_steps) != n_steps or not 1 <= n_steps <= ds.meta.n_steps:
        raise DataError("cannot truncate {} steps to {!r}".format(ds.meta.n_steps, n_steps))
    n_steps = int(n_steps)
    return TrajectoryDataset(
        ds.meta.replace(n_steps=n_steps), ds.u[:, :n_steps + 1], ds.f[:, :n_steps])

def split(ds, n_train):
    """Splits by whole trajectories: the first n_train form the training set,
    the rest the validation set."""
    if int(n_train) != n_train or not 1 <= n_train < ds.meta.n_traj:
        raise DataError("cannot split {} trajectories at {!r}".format(ds.meta.n_traj, n_train))
    return (subset(ds, range(int(n_train))),
            subset(ds, range(int(n_train), ds.meta.n_traj)))

def export_csv(ds, m, path):
    """Writes trajectory m as CSV with columns t, Re/Im u_k, Re/Im f_k. The
    force columns of the last row are empty."""
    if not 0 <= m < ds.meta.n_traj:
        raise DataError("trajectory {} out of range 0..{}".format(m, ds.meta.n_traj - 1))
    K = ds.meta.K
    columns = ['t']
    for prefix in ('u', 'f'):
        for k in range(1, K + 1):
            columns.append('re_{}{}'.format(prefix, k))
            columns.append('im_{}{}'.format(prefix, k))
    with open(str(path), 'w', newline='') as fil:
        writer = csv.writer(fil)
        writer.writerow(columns)
        for n, t in enumerate(ds.times):
            row = [repr(float(t))]
            for value in ds.u[m, n]:
                row += [repr(float(value.real)), repr(float(value.imag))]
            if n < ds.meta.n_steps:
                for value in ds.f[m, n]:
                    row += [repr(float(value.real)), repr(float(value.imag))]
            else:
                row += [''] * (2 * K)
            writer.writerow(row)

def coarsen(ds, factor):
    """Returns the dataset observed every factor·gap steps: every factor-th
    state, and the mean of each run of factor consecutive forces. Trailing
    steps that don't fill a whole coarse interval are dropped."""
    if int(factor) != factor or factor < 1:
        raise ConfigError("factor must be a positive integer, not {!r}".format(factor))
    factor = int(factor)
    n_steps = ds.meta.n_steps // factor
    if n_steps < 1:
        raise DataError("{} steps are too few to coarsen by {}".format(ds.meta.n_steps, factor))
    M, K = ds.meta.n_traj, ds.meta.K
    u = ds.u[:, :n_steps * factor + 1:factor]
    f = ds.f[:, :n_steps * factor].reshape(M, n_steps, factor, K).mean(axis=2)
    return TrajectoryDataset(ds.meta.replace(gap=ds.meta.gap * factor, n_steps=n_steps), u, f)

def restrict(ds, K):
    """Returns the dataset of the first K resolved modes."""
    if int(K) != K or not 1 <= K <= ds.meta.K:
        raise DataError("cannot restrict {} modes to {!r}".format(ds.meta.K, K))
    K = int(K)
    return TrajectoryDataset(ds.meta.replace(K=K), ds.u[..., :K], ds.f[..., :K])
