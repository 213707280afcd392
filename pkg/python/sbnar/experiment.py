"""Experiment configuration and the pipelines behind the command-line
subcommands.

An `ExperimentConfig` is built from five JSON blocks:

    {
        "full":       {"viscosity": 0.02, "n_modes": 128, "dt": 0.001,
                       "k0": 4, "sigma": 1.0, "etd_contour_points": 32,
                       "sweep_sigmas": []},
        "reduction":  {"K": 8, "gaps": [5, 10, 20, 30, 40, 50, 80, 160],
                       "ps": [1], "ridge": 0.0, "full_mask": false,
                       "sweep_Ks": [],
                       "consistency_fractions": [0.125, 0.25, 0.5, 1.0]},
        "data":       {"n_traj": 1, "train_time": 500.0, "validation_time": 500.0,
                       "burn_in_time": 100.0, "n_initial": 10, "seed": 0},
        "validation": {"sim_time": 500.0, "tau_max": 3.0, "galerkin_baseline": true,
                       "simulate_time": 10.0, "cfl_save_every": 10,
                       "cfl_steps": 10000},
        "output":     {"directory": "sbnar-out"}
    }

Missing entries take the defaults above. A scale preset (`quick` or
`paper`) replaces the data-size entries before the file is applied; single
entries can then be overridden as `block.key=value`.

`sweep` runs over every combination of `full.sweep_sigmas` and
`reduction.sweep_Ks`; an empty list stands for the single configured value.
`consistency_fractions` are the nested shares of the training length that
`fit` and `sweep` refit on, to show how the coefficients settle with data.

Every pipeline writes a `manifest.json` into its output directory, holding
the command, the canonical configuration and its SHA-256, the seeds, and the
versions of sbnar and its dependencies. Outputs are pure functions of the
configuration, so reruns are bit-identical.
"""

__all__ = [ #@
    'DEFAULTS',
    'SCALES',
    'ExperimentConfig',
    'write_manifest',
    'run_simulate',
    'run_gen_data',
    'run_fit',
    'run_validate',
    'run_sweep',
]

import concurrent.futures
import copy
import csv
import functools
import hashlib
import importlib.metadata
import json
import math
import os
import platform

import numpy as np

from sbnar.common.error import ConfigError, DataError, IntegrationError
from sbnar.common.log import get_logger
from sbnar.common.record import Record
from sbnar.common.rng import derive_seed, make_rng
from sbnar import dataset as ds_mod
from sbnar.estimate import fit, consistency_study, lag_study
from sbnar.forcing import ForceConfig
from sbnar.full_model import (
    IntegratorConfig, galerkin_cfl, integrate,
    make_initial_ensemble, mean_cfl, worker_count)
from sbnar.nar import NarModel, NarSpec, TermMask, simulate_nar, window_from_dataset
from sbnar.spectral import GridConfig
from sbnar.stats import compare, invariant_density, acf
from sbnar.version import __version__

logger = get_logger('experiment')

DEFAULTS = {
    'full': {
        'viscosity': 0.02,
        'n_modes': 128,
        'dt': 0.001,
        'k0': 4,
        'sigma': 1.0,
        'etd_contour_points': 32,
        'sweep_sigmas': [],
    },
    'reduction': {
        'K': 8,
        'gaps': [5, 10, 20, 30, 40, 50, 80, 160],
        'ps': [1],
        'ridge': 0.0,
        'full_mask': False,
        'sweep_Ks': [],
        'consistency_fractions': [0.125, 0.25, 0.5, 1.0],
    },
    'data': {
        'n_traj': 1,
        'train_time': 500.0,
        'validation_time': 500.0,
        'burn_in_time': 100.0,
        'n_initial': 10,
        'seed': 0,
    },
    'validation': {
        'sim_time': 500.0,
        'tau_max': 3.0,
        'galerkin_baseline': True,
        'simulate_time': 10.0,
        'cfl_save_every': 10,
        'cfl_steps': 10000,
    },
    'output': {
        'directory': 'sbnar-out',
    },
}

SCALES = {
    'quick': {
        'data': {'n_traj': 1, 'train_time': 500.0, 'validation_time': 500.0,
                 'burn_in_time': 100.0, 'n_initial': 10},
        'validation': {'sim_time': 500.0, 'simulate_time': 10.0, 'cfl_steps': 10000},
    },
    'paper': {
        'data': {'n_traj': 1, 'train_time': 2000.0, 'validation_time': 2000.0,
                 'burn_in_time': 10000.0, 'n_initial': 1000},
        'validation': {'sim_time': 2000.0, 'simulate_time': 100.0, 'cfl_steps': 100000},
    },
}

_POSITIVE = {
    ('full', 'viscosity'), ('full', 'dt'), ('full', 'n_modes'), ('full', 'k0'),
    ('reduction', 'K'), ('data', 'n_traj'), ('data', 'train_time'),
    ('data', 'validation_time'), ('data', 'burn_in_time'), ('data', 'n_initial'),
    ('validation', 'sim_time'), ('validation', 'tau_max'), ('validation', 'simulate_time'),
    ('validation', 'cfl_save_every'), ('validation', 'cfl_steps'),
}

def _merge(base, update, where=''):
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in out:
            raise ConfigError("unknown configuration entry {}{}".format(where, key))
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError("configuration entry {}{} must be an object".format(where, key))
            out[key] = _merge(out[key], value, where + key + '.')
        else:
            out[key] = copy.deepcopy(value)
    return out

def _list(ob, block, key):
    value = ob[block][key]
    if not isinstance(value, list):
        raise ConfigError("{}.{} must be a list, not {!r}".format(block, key, value))
    return value

def _is_number(value):
    return not isinstance(value, bool) and isinstance(value, (int, float))

def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text

class ExperimentConfig(object):
    """An immutable, validated experiment configuration."""

    def __init__(self, ob=None):
        super().__init__()
        self._ob = _merge(DEFAULTS, ob or {})
        self._validate()

    @classmethod
    def build(cls, path=None, scale=None, overrides=()):
        """Applies, in order: the defaults, the scale preset, the JSON file
        at path, and the `block.key=value` overrides."""
        ob = copy.deepcopy(DEFAULTS)
        if scale is not None:
            if scale not in SCALES:
                raise ConfigError("unknown scale {!r}, expected one of {}".format(
                    scale, ', '.join(sorted(SCALES))))
            ob = _merge(ob, SCALES[scale])
        if path is not None:
            try:
                with open(str(path), 'r', encoding='utf-8') as fil:
                    loaded = json.load(fil)
            except (OSError, ValueError) as e:
                raise ConfigError("cannot read configuration {}: {}".format(path, e))
            if not isinstance(loaded, dict):
                raise ConfigError("configuration must be a JSON object")
            ob = _merge(ob, loaded)
        for override in overrides:
            key, sep, value = override.partition('=')
            block, dot, name = key.partition('.')
            if not sep or not dot:
                raise ConfigError("override must look like block.key=value, not {!r}".format(override))
            ob = _merge(ob, {block: {name: _parse_value(value)}})
        return ExperimentConfig(ob)

    def _validate(self):
        ob = self._ob
        for block, key in _POSITIVE:
            value = ob[block][key]
            if not _is_number(value) or not value > 0:
                raise ConfigError("{}.{} must be a positive number, not {!r}".format(block, key, value))
        if not _is_number(ob['full']['sigma']) or ob['full']['sigma'] < 0:
            raise ConfigError("full.sigma must be non-negative")
        for key in ('gaps', 'ps'):
            values = _list(ob, 'reduction', key)
            if not values:
                raise ConfigError("reduction.{} must be a non-empty list".format(key))
            for value in values:
                if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                    raise ConfigError("reduction.{} entries must be positive integers, not {!r}".format(
                        key, value))
        if ob['reduction']['K'] > ob['full']['n_modes']:
            raise ConfigError("reduction.K cannot exceed full.n_modes")
        for K in _list(ob, 'reduction', 'sweep_Ks'):
            if isinstance(K, bool) or not isinstance(K, int) or not 1 <= K <= ob['full']['n_modes']:
                raise ConfigError("reduction.sweep_Ks entries must be integers in 1..full.n_modes, not {!r}".format(K))
        for sigma in _list(ob, 'full', 'sweep_sigmas'):
            if not _is_number(sigma) or not sigma >= 0:
                raise ConfigError("full.sweep_sigmas entries must be non-negative, not {!r}".format(sigma))
        fractions = _list(ob, 'reduction', 'consistency_fractions')
        if not fractions:
            raise ConfigError("reduction.consistency_fractions must not be empty")
        for fraction in fractions:
            if not _is_number(fraction) or not 0 < fraction <= 1:
                raise ConfigError("reduction.consistency_fractions entries must lie in (0, 1], not {!r}".format(
                    fraction))
        if any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise ConfigError("reduction.consistency_fractions must be ascending")
        if ob['data']['n_initial'] < ob['data']['n_traj'] + 1:
            raise ConfigError("data.n_initial must exceed data.n_traj (one state is kept for validation)")
        # Constructing the library objects validates the rest.
        self.integrator_config()

    def __getitem__(self, block):
        return copy.deepcopy(self._ob[block])

    def get(self, block, key):
        return self._ob[block][key]

    def replace(self, **blocks):
        """Returns a copy with some block entries updated, e.g.
        `replace(full={'sigma': 0.2})`."""
        return ExperimentConfig(_merge(self._ob, blocks))

    @property
    def seed(self): #@
        return int(self._ob['data']['seed'])

    @property
    def directory(self): #@
        return self._ob['output']['directory']

    @property
    def sweep_Ks(self): #@
        """The K values swept over, ascending."""
        return sorted(set(self._ob['reduction']['sweep_Ks'] or [self._ob['reduction']['K']]))

    @property
    def sweep_sigmas(self): #@
        """The force scales swept over, ascending."""
        return sorted(set(self._ob['full']['sweep_sigmas'] or [self._ob['full']['sigma']]))

    def integrator_config(self, seed_path=(0,)):
        """The full model configuration; its force seed is derived from the
        data seed and seed_path."""
        full = self._ob['full']
        return IntegratorConfig(
            GridConfig(full['n_modes'], full['viscosity']),
            ForceConfig(full['sigma'], full['k0'], derive_seed(self.seed, *seed_path)),
            full['dt'], full['etd_contour_points'])

    def force_config(self, seed_path):
        full = self._ob['full']
        return ForceConfig(full['sigma'], full['k0'], derive_seed(self.seed, *seed_path))

    def nar_spec(self, gap, p):
        red = self._ob['reduction']
        mask = TermMask.full(p) if red['full_mask'] else TermMask.default(p)
        return NarSpec(red['K'], p, gap * self._ob['full']['dt'], self._ob['full']['viscosity'], mask,
                       self._ob['full']['etd_contour_points'])

    def to_object(self):
        return copy.deepcopy(self._ob)

    def canonical(self):
        """Canonical JSON text of the configuration."""
        return json.dumps(self._ob, sort_keys=True, separators=(',', ':'))

    def sha256(self):
        return hashlib.sha256(self.canonical().encode('utf-8')).hexdigest()

    def __eq__(self, other):
        if isinstance(other, ExperimentConfig):
            return self.canonical() == other.canonical()
        return False

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return "ExperimentConfig({})".format(self.canonical())

# Seed paths of the independent random streams of an experiment.
_SEED_ENSEMBLE = (0,)
_SEED_TRAIN = (1,)
_SEED_VALIDATION = (2,)
_SEED_SIMULATE = (3,)
_SEED_NAR = (4,)
_SEED_GALERKIN = (5,)

def _versions():
    versions = {'sbnar': __version__, 'python': platform.python_version()}
    for package in ('numpy', 'scipy', 'cbor', 'plumbum'):
        try:
            versions[package] = importlib.metadata.version(package)
        except importlib.metadata.PackageNotFoundError:
            versions[package] = None
    return versions

def write_manifest(directory, command, cfg, files=()):
    """Writes manifest.json into directory."""
    os.makedirs(directory, exist_ok=True)
    seeds = {name: derive_seed(cfg.seed, *path) for name, path in (
        ('ensemble', _SEED_ENSEMBLE), ('train', _SEED_TRAIN), ('validation', _SEED_VALIDATION),
        ('simulate', _SEED_SIMULATE), ('nar', _SEED_NAR), ('galerkin', _SEED_GALERKIN))}
    seeds['root'] = cfg.seed
    Record(
        'manifest',
        command=command,
        config=cfg.to_object(),
        config_sha256=cfg.sha256(),
        seeds=seeds,
        versions=_versions(),
        files=sorted(files)).save(os.path.join(directory, 'manifest.json'))

def _steps(time, step):
    return max(1, int(round(time / step)))

def _ensemble(cfg):
    full = cfg.integrator_config(_SEED_ENSEMBLE)
    return make_initial_ensemble(full, cfg.get('data', 'burn_in_time'), cfg.get('data', 'n_initial'))

def run_simulate(cfg, directory=None, n_steps=None):
    """Runs the full model from a burned-in state and writes the saved
    trajectory (as a one-trajectory dataset holding all N modes) and the
    mean CFL number. Raises `IntegrationError` after writing the CFL report
    if the run blew up."""
    directory = directory or os.path.join(cfg.directory, 'simulate')
    os.makedirs(directory, exist_ok=True)
    full = cfg.integrator_config(_SEED_SIMULATE)
    if n_steps is None:
        n_steps = _steps(cfg.get('validation', 'simulate_time'), full.dt)
    save_every = cfg.get('validation', 'cfl_save_every')
    initial = _ensemble(cfg)[0]
    traj = integrate(initial, n_steps, full, save_every=save_every, keep_forces=True)
    cfl = mean_cfl(traj, full.grid, full.dt)
    files = ['cfl.json']
    Record(
        'cfl-report', mean_cfl=cfl, dt=full.dt, n_steps=int(n_steps), save_every=save_every,
        n_saved=len(traj), blow_up_step=traj.blow_up_step).save(os.path.join(directory, 'cfl.json'))
    if len(traj) > 1:
        meta = ds_mod.DatasetMeta(
            full.grid.n_modes, save_every, full.dt, 1, len(traj) - 1, full, full.force.seed)
        ds_mod.save(ds_mod.TrajectoryDataset(meta, traj.modes[None], traj.force_modes[None]),
                    os.path.join(directory, 'trajectory.bnar'))
        files.append('trajectory.bnar')
    write_manifest(directory, 'simulate', cfg, files)
    logger.note("full model: {} steps, mean CFL {:.4f}", n_steps, cfl)
    if traj.blown_up:
        raise IntegrationError("full model blew up at step {}".format(traj.blow_up_step))
    return cfl

def _gcd(values):
    return functools.reduce(math.gcd, values)

def train_path(directory, gap):
    return os.path.join(directory, 'train-gap{}.bnar'.format(gap))

def validation_path(directory, gap):
    return os.path.join(directory, 'valid-gap{}.bnar'.format(gap))

def run_gen_data(cfg, directory=None, workers=None):
    """Generates the training and validation datasets for every gap.

    The full model runs once for training (M trajectories) and once for
    validation (one trajectory from an initial state not used for
    training), saving at the greatest common divisor of the gaps; the
    datasets of the individual gaps are coarsened from those runs."""
    directory = directory or os.path.join(cfg.directory, 'data')
    os.makedirs(directory, exist_ok=True)
    K = cfg.get('reduction', 'K')
    gaps = sorted(set(cfg.get('reduction', 'gaps')))
    base = _gcd(gaps)
    dt = cfg.get('full', 'dt')
    M = cfg.get('data', 'n_traj')
    ensemble = _ensemble(cfg)
    runs = {
        'train': (cfg.integrator_config(_SEED_TRAIN), M, cfg.get('data', 'train_time'),
                  ensemble[:M], train_path),
        'validation': (cfg.integrator_config(_SEED_VALIDATION), 1,
                       cfg.get('data', 'validation_time'), ensemble[M:M + 1], validation_path),
    }
    files = []
    for name, (full, n_traj, time, initials, path) in sorted(runs.items()):
        n_steps = _steps(time, base * dt)
        data = ds_mod.generate(full, K, base, n_traj, n_steps, initials, full.force.seed, workers)
        for gap in gaps:
            coarse = ds_mod.coarsen(data, gap // base)
            ds_mod.save(coarse, path(directory, gap))
            files.append(os.path.basename(path(directory, gap)))
        logger.note("{} data: {} trajectories of {} time units, gaps {}", name, n_traj, time, gaps)
    write_manifest(directory, 'gen-data', cfg, files)
    return directory

def model_path(directory, gap, p):
    return os.path.join(directory, 'model-gap{}-p{}.json'.format(gap, p))

def report_path(directory, gap, p):
    return os.path.join(directory, 'fit-gap{}-p{}.json'.format(gap, p))

def consistency_path(directory, gap, p):
    return os.path.join(directory, 'consistency-gap{}-p{}.csv'.format(gap, p))

def _load_modes(path, K):
    """Loads a dataset and keeps its first K modes."""
    data = ds_mod.load(path)
    return data if data.meta.K == K else ds_mod.restrict(data, K)

def consistency_sizes(cfg, n_traj, n_steps, p):
    """Nested (M, N_t) sizes for the consistency study: all trajectories,
    and the configured shares of the training length (at least p + 1
    steps each, duplicates removed)."""
    sizes = []
    for fraction in cfg.get('reduction', 'consistency_fractions'):
        T = min(n_steps, max(p + 1, int(round(fraction * n_steps))))
        if not sizes or T > sizes[-1][1]:
            sizes.append((n_traj, T))
    return sizes

def _write_consistency(cfg, data, spec, path):
    table = consistency_study(
        data, spec, consistency_sizes(cfg, data.meta.n_traj, data.meta.n_steps, spec.p),
        cfg.get('reduction', 'ridge'))
    table.write_csv(path)
    if len(table.sizes) > 1:
        logger.info("K {}, δ {}, p {}: coefficients change by {:.3e} (rms) over the last doubling",
                    spec.K, spec.delta, spec.p, table.rms_relative_change())
    return table

def run_fit(cfg, data_directory=None, directory=None):
    """Fits a model for every (gap, p) combination from the training
    datasets in data_directory, and writes the consistency table of each:
    the coefficients refitted on growing shares of the data."""
    data_directory = data_directory or os.path.join(cfg.directory, 'data')
    directory = directory or os.path.join(cfg.directory, 'models')
    os.makedirs(directory, exist_ok=True)
    red = cfg['reduction']
    files = []
    for gap in sorted(set(red['gaps'])):
        data = _load_modes(train_path(data_directory, gap), red['K'])
        reports = lag_study(data, red['ps'], cfg.get('full', 'viscosity'), red['ridge'],
                            red['full_mask'], cfg.get('full', 'etd_contour_points'))
        for p, report in reports.items():
            report.model().save(model_path(directory, gap, p))
            report.save(report_path(directory, gap, p))
            _write_consistency(cfg, data, report.spec, consistency_path(directory, gap, p))
            files += [os.path.basename(path(directory, gap, p))
                      for path in (model_path, report_path, consistency_path)]
            if np.any(report.dropped):
                logger.warn("gap {}, p {}: some columns were dropped", gap, p)
            logger.note("fitted gap {}, p {}: sigma_g = {}", gap, p, report.sigma_g.tolist())
    write_manifest(directory, 'fit', cfg, files)
    return directory

def validate_model(cfg, model, reference, directory=None):
    """Simulates model with fresh forces and compares it with the reference
    dataset (and with the K-mode Galerkin system, if enabled). Writes the
    report and the statistics tables to directory when given."""
    spec = model.spec
    if reference.meta.K != spec.K:
        raise DataError("reference has K = {} but the model has K = {}".format(
            reference.meta.K, spec.K))
    n_steps = _steps(cfg.get('validation', 'sim_time'), spec.delta)
    tau_max = cfg.get('validation', 'tau_max')
    window = window_from_dataset(reference, 0, spec.p + 1, spec.p)
    run = simulate_nar(model, window, n_steps, cfg.force_config(_SEED_NAR))
    baseline = None
    if cfg.get('validation', 'galerkin_baseline'):
        galerkin = simulate_nar(NarModel.zero(spec), window, n_steps, cfg.force_config(_SEED_GALERKIN))
        baseline = compare(galerkin, reference, spec.delta, spec.K, tau_max)
    report = compare(run, reference, spec.delta, spec.K, tau_max, baseline=baseline)
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
        report.save(os.path.join(directory, 'validation.json'))
        report.spectrum.write_csv(os.path.join(directory, 'spectrum.csv'))
        report.truth_spectrum.write_csv(os.path.join(directory, 'truth-spectrum.csv'))
        if report.ks is not None:
            invariant_density(run, spec.K).write_csv(os.path.join(directory, 'pdf.csv'))
            invariant_density(reference, spec.K).write_csv(os.path.join(directory, 'truth-pdf.csv'))
            acf(run, spec.delta, tau_max, spec.K).write_csv(os.path.join(directory, 'acf.csv'))
            acf(reference, spec.delta, tau_max, spec.K).write_csv(
                os.path.join(directory, 'truth-acf.csv'))
    logger.note("validated gap {}, p {}: {}", int(round(spec.delta / cfg.get('full', 'dt'))),
                spec.p, report.summary())
    return report

def run_validate(cfg, model_file=None, reference_file=None, directory=None):
    """Validates one model against one reference dataset, or every fitted
    (gap, p) model against the matching validation dataset if no files are
    given."""
    directory = directory or os.path.join(cfg.directory, 'validation')
    os.makedirs(directory, exist_ok=True)
    if model_file is not None or reference_file is not None:
        if model_file is None or reference_file is None:
            raise ConfigError("give both a model and a reference dataset, or neither")
        jobs = [(model_file, reference_file, directory)]
    else:
        models = os.path.join(cfg.directory, 'models')
        data = os.path.join(cfg.directory, 'data')
        jobs = [
            (model_path(models, gap, p), validation_path(data, gap),
             os.path.join(directory, 'gap{}-p{}'.format(gap, p)))
            for gap in sorted(set(cfg.get('reduction', 'gaps')))
            for p in sorted(set(cfg.get('reduction', 'ps')))]
    reports = []
    for model_file, reference_file, out in jobs:
        reports.append(validate_model(
            cfg, NarModel.load(model_file), ds_mod.load(reference_file), out))
    write_manifest(directory, 'validate', cfg, [
        os.path.relpath(os.path.join(out, 'validation.json'), directory) for _, _, out in jobs])
    return reports

def group_name(K, sigma):
    """Subdirectory of a sweep holding the runs of one (K, σ) pair."""
    return 'K{}-sigma{:g}'.format(K, sigma)

def _sweep_one(args):
    cfg_ob, gap, p, data_directory, directory = args
    cfg = ExperimentConfig(cfg_ob)
    K = cfg.get('reduction', 'K')
    train = _load_modes(train_path(data_directory, gap), K)
    reference = _load_modes(validation_path(data_directory, gap), K)
    spec = cfg.nar_spec(gap, p)
    report = fit(train, spec, cfg.get('reduction', 'ridge'))
    out = os.path.join(directory, 'gap{}-p{}'.format(gap, p))
    os.makedirs(out, exist_ok=True)
    report.model().save(os.path.join(out, 'model.json'))
    report.save(os.path.join(out, 'fit.json'))
    _write_consistency(cfg, train, spec, os.path.join(out, 'consistency.csv'))
    return K, cfg.get('full', 'sigma'), gap, p, validate_model(cfg, report.model(), reference, out)

def _group_summary(K, sigma, rows, cfl_rows, full_cfl):
    stable = [row for row in rows if row['verdict'] == 'stable']
    best = min(stable, key=lambda row: row['max_spectrum_error']) if stable else None
    finite = [row for row in cfl_rows if row['galerkin_cfl'] is not None]
    matching = min(finite, key=lambda row: abs(row['galerkin_cfl'] - full_cfl)) if finite else None
    return {
        'K': K,
        'sigma': sigma,
        'full_cfl': full_cfl,
        'galerkin_cfl': {str(row['gap']): row['galerkin_cfl'] for row in cfl_rows},
        'best_gap': None if best is None else best['gap'],
        'best_p': None if best is None else best['p'],
        'cfl_matching_gap': None if matching is None else matching['gap'],
        'max_stable_gap': max((row['gap'] for row in stable), default=None),
    }

def run_sweep(cfg, directory=None, workers=None):
    """Fits and validates every (K, σ, gap, p) combination, and compares the
    mean CFL numbers of the K-mode Galerkin system at each gap with that of
    the full model.

    Data is generated once per σ, for the largest K, into `data-sigma<σ>`;
    the runs of one (K, σ) pair go to `K<K>-sigma<σ>/gap<gap>-p<p>`. Writes
    sweep.csv (one row per combination), lags.csv (spectrum error against p
    for every mode), cfl.csv, and summary.json, which names for every
    (K, σ) the stable gap of least spectrum error and the gap whose
    Galerkin CFL number is closest to the full model's."""
    directory = directory or os.path.join(cfg.directory, 'sweep')
    Ks, sigmas = cfg.sweep_Ks, cfg.sweep_sigmas
    gaps = sorted(set(cfg.get('reduction', 'gaps')))
    ps = sorted(set(cfg.get('reduction', 'ps')))
    jobs = []
    for sigma in sigmas:
        data_directory = os.path.join(directory, 'data-sigma{:g}'.format(sigma))
        run_gen_data(cfg.replace(full={'sigma': sigma}, reduction={'K': max(Ks)}),
                     data_directory, workers)
        for K in Ks:
            sub = cfg.replace(full={'sigma': sigma}, reduction={'K': K})
            out = os.path.join(directory, group_name(K, sigma))
            jobs += [(sub.to_object(), gap, p, data_directory, out) for gap in gaps for p in ps]
    n_workers = min(worker_count(workers), len(jobs))
    if n_workers == 1:
        results = [_sweep_one(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_sweep_one, jobs))

    rows = []
    for K, sigma, gap, p, report in results:
        summary = report.summary()
        rows.append({
            'K': K, 'sigma': sigma, 'gap': gap, 'p': p,
            'verdict': report.verdict, 'blow_up_time': report.blow_up_time,
            'max_spectrum_error': summary['max_spectrum_error'],
            'max_ks': summary['max_ks'], 'max_acf_error': summary['max_acf_error'],
        })
    _write_rows(os.path.join(directory, 'sweep.csv'), rows)
    _write_rows(os.path.join(directory, 'lags.csv'), [
        {'K': K, 'sigma': sigma, 'gap': gap, 'p': p, 'k': k + 1, 'spectrum_error': float(err)}
        for K, sigma, gap, p, report in results for k, err in enumerate(report.spectrum_error)])

    # CFL comparison: per σ, the full model and every Galerkin system start
    # from the same burned-in state and take the same number of steps.
    n_cfl = cfg.get('validation', 'cfl_steps')
    cfl_rows = []
    groups = []
    for sigma in sigmas:
        sub = cfg.replace(full={'sigma': sigma})
        full = sub.integrator_config(_SEED_SIMULATE)
        initial = _ensemble(sub)[0]
        traj = integrate(initial, n_cfl, full, save_every=cfg.get('validation', 'cfl_save_every'))
        full_cfl = mean_cfl(traj, full.grid, full.dt)
        for K in Ks:
            group_cfl = []
            for gap in gaps:
                value, _ = galerkin_cfl(initial, K, full, gap, n_cfl, make_rng(
                    derive_seed(cfg.seed, *_SEED_GALERKIN, gap)))
                group_cfl.append({'K': K, 'sigma': sigma, 'gap': gap,
                                  'galerkin_cfl': value, 'full_cfl': full_cfl})
            cfl_rows += group_cfl
            groups.append(_group_summary(
                K, sigma, [row for row in rows if row['K'] == K and row['sigma'] == sigma],
                group_cfl, full_cfl))
    _write_rows(os.path.join(directory, 'cfl.csv'), cfl_rows)

    summary = Record('sweep-summary', rows=rows, cfl=cfl_rows, groups=groups)
    summary.save(os.path.join(directory, 'summary.json'))
    write_manifest(directory, 'sweep', cfg, ['sweep.csv', 'lags.csv', 'cfl.csv', 'summary.json'])
    for group in groups:
        logger.note("sweep K {}, sigma {}: best gap {}, CFL-matching gap {}", group['K'],
                    group['sigma'], group['best_gap'], group['cfl_matching_gap'])
    return summary

def _write_rows(path, rows):
    with open(path, 'w', newline='') as fil:
        if not rows:
            return
        writer = csv.DictWriter(fil, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({key: ('' if value is None else value) for key, value in row.items()})
