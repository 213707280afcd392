"""The stochastic force

    f(x, t) = σ Σ_{m=1}^{K_0} sin(mx) Ẇ_m(t) + cos(mx) Ẇ'_m(t)

in Fourier form. Under the convention of `sbnar.spectral`, mode m of this
force is (σ/2)(Ẇ'_m - i Ẇ_m). Over a step dt the white noise is replaced by
Brownian increments divided by dt and held constant for the whole step:

    f̂_m = (σ/2)(ΔW'_m - i ΔW_m) / dt,    ΔW_m, ΔW'_m ~ Normal(0, dt).

For every step, the generator draws the pair (ΔW_m, ΔW'_m) for m = 1..K_0,
in that order, as standard normal variates scaled by √dt.
"""

__all__ = [ #@
    'ForceConfig',
    'ForceIncrement',
    'ForceSource',
    'sample_increment',
    'aggregate_over_gap',
    'white_force',
]

import math

import numpy as np

from sbnar.common.error import ConfigError, DataError
from sbnar.common.rng import make_rng

class ForceConfig(object):
    """Scale σ, number of forced modes K_0, and seed of the force."""

    def __init__(self, sigma, k0, seed=0):
        super().__init__()
        sigma = float(sigma)
        # σ = 0 is accepted for deterministic runs.
        if not sigma >= 0.0 or not math.isfinite(sigma):
            raise ConfigError("sigma must be non-negative, not {!r}".format(sigma))
        if int(k0) != k0 or int(k0) < 1:
            raise ConfigError("k0 must be an integer >= 1, not {!r}".format(k0))
        seed = int(seed)
        if seed < 0 or seed >= 1 << 64:
            raise ConfigError("seed must fit in 64 unsigned bits: {}".format(seed))
        self._sigma = sigma
        self._k0 = int(k0)
        self._seed = seed

    @property
    def sigma(self): #@
        return self._sigma

    @property
    def k0(self): #@
        return self._k0

    @property
    def seed(self): #@
        return self._seed

    def with_seed(self, seed):
        """Returns a copy of this configuration using a different seed."""
        return ForceConfig(self._sigma, self._k0, seed)

    def to_object(self):
        return {'sigma': self._sigma, 'k0': self._k0, 'seed': self._seed}

    @classmethod
    def from_object(cls, ob):
        return ForceConfig(ob['sigma'], ob['k0'], ob.get('seed', 0))

    def _key(self):
        return (self._sigma, self._k0, self._seed)

    def __eq__(self, other):
        if isinstance(other, ForceConfig):
            return self._key() == other._key()
        return False

    def __hash__(self):
        return hash(('ForceConfig',) + self._key())

    def __repr__(self):
        return "ForceConfig(sigma={!r}, k0={!r}, seed={!r})".format(*self._key())

    __str__ = __repr__

class ForceIncrement(object):
    """The constant force f̂_1..f̂_{K_0} applied during one step of size dt."""

    def __init__(self, step_index, modes, dt):
        super().__init__()
        modes = np.array(modes, dtype=np.complex128, copy=True)
        if modes.ndim != 1:
            raise DataError("force modes must be a vector, got shape {}".format(modes.shape))
        if not np.all(np.isfinite(modes)):
            raise DataError("force modes must be finite")
        dt = float(dt)
        if not dt > 0.0:
            raise ConfigError("dt must be positive, not {!r}".format(dt))
        modes.flags.writeable = False
        self._step_index = int(step_index)
        self._modes = modes
        self._dt = dt

    @property
    def step_index(self): #@
        return self._step_index

    @property
    def modes(self): #@
        """Read-only complex array f̂_1..f̂_{K_0}."""
        return self._modes

    @property
    def dt(self): #@
        return self._dt

    def padded(self, n_modes):
        """Returns the force as a length-n_modes vector, zero beyond K_0 (or
        cut off at n_modes if that is smaller)."""
        return _fit_modes(self._modes, n_modes)

    def __eq__(self, other):
        if isinstance(other, ForceIncrement):
            return (self._step_index == other._step_index and self._dt == other._dt
                    and np.array_equal(self._modes, other._modes))
        return False

    __hash__ = None

    def __repr__(self):
        return "ForceIncrement({!r}, {!r}, dt={!r})".format(
            self._step_index, self._modes.tolist(), self._dt)

    __str__ = __repr__

def _fit_modes(modes, n_modes):
    """Zero-pads or cuts the last axis of modes to n_modes entries."""
    out = np.zeros(modes.shape[:-1] + (int(n_modes),), dtype=np.complex128)
    n = min(modes.shape[-1], int(n_modes))
    out[..., :n] = modes[..., :n]
    return out

def _draw_modes(rng, sigma, k0, dt, n):
    """Draws n consecutive per-step force vectors, shape (n, k0)."""
    w = rng.standard_normal((int(n), k0, 2)) * math.sqrt(dt)
    return (0.5 * sigma) * (w[..., 1] - 1j * w[..., 0]) / dt

def _check_dt(dt):
    dt = float(dt)
    if not dt > 0.0 or not math.isfinite(dt):
        raise ConfigError("dt must be positive, not {!r}".format(dt))
    return dt

def sample_increment(cfg, rng, dt, step_index=0):
    """Draws the force for one step of size dt from the generator rng."""
    dt = _check_dt(dt)
    modes = _draw_modes(rng, cfg.sigma, cfg.k0, dt, 1)[0]
    return ForceIncrement(step_index, modes, dt)

def aggregate_over_gap(increments, gap, delta):
    """Returns f^n_k = (Σ_j f̂_k^(j) dt) / δ: the Brownian increment of the
    force over one observation interval, rescaled by 1/δ."""
    increments = list(increments)
    if len(increments) != gap:
        raise DataError("expected {} increments, got {}".format(gap, len(increments)))
    if not increments:
        raise DataError("cannot aggregate an empty list of increments")
    total = sum(inc.dt for inc in increments)
    if not math.isclose(total, delta, rel_tol=1e-9):
        raise DataError("increments span {} time units, not delta = {}".format(total, delta))
    acc = np.zeros_like(increments[0].modes)
    for inc in increments:
        if inc.modes.shape != acc.shape:
            raise DataError("increments have inconsistent mode counts")
        acc = acc + inc.modes * inc.dt
    return acc / delta

class ForceSource(object):
    """Stateful generator of successive per-step forces for one trajectory.

    `draw(n)` consumes the underlying generator exactly like n calls to
    `next()`, so trajectories don't depend on how steps are blocked."""

    def __init__(self, cfg, dt, rng=None):
        super().__init__()
        self._cfg = cfg
        self._dt = _check_dt(dt)
        self._rng = make_rng(cfg.seed) if rng is None else rng
        self._step = 0

    @property
    def config(self): #@
        return self._cfg

    @property
    def dt(self): #@
        return self._dt

    @property
    def rng(self): #@
        return self._rng

    @property
    def steps_drawn(self): #@
        return self._step

    def next(self):
        """Returns the `ForceIncrement` for the next step."""
        inc = sample_increment(self._cfg, self._rng, self._dt, self._step)
        self._step += 1
        return inc

    def draw(self, n):
        """Returns the raw force vectors of the next n steps, shape
        (n, K_0)."""
        modes = _draw_modes(self._rng, self._cfg.sigma, self._cfg.k0, self._dt, n)
        self._step += int(n)
        return modes

def white_force(cfg, n_modes, delta, rng, n):
    """Draws n fresh δ-scaled forces for a standalone reduced model run,
    returned as an array of shape (n, n_modes)."""
    delta = _check_dt(delta)
    return _fit_modes(_draw_modes(rng, cfg.sigma, cfg.k0, delta, n), n_modes)
