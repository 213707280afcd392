"""The nonlinear autoregressive (NAR) reduced model for the first K modes.

With u^n the resolved modes at t_n = nδ, the model reads

    u^n_k = u^{n-1}_k + δ [R^δ(u^{n-1})_k + f^n_k + Φ^n_k] + g^n_k,

where R^δ is one deterministic ETDRK4 step of size δ of the K-mode Galerkin
system written as a rate, f^n is the force over (t_{n-1}, t_n], g^n is
complex Gaussian noise with E|g^n_k|² = σ^g_k, and the closure

    Φ^n_k = Σ_j c^v_{k,j} u^{n-j}_k + c^R_{k,j} R^δ(u^{n-j})_k
                + c^f_{k,j} f^{n-j}_k + c^w_{k,j} Q_{k,j}

sums over lags j = 1..p. The quadratic term

    Q_{k,j} = Σ ũ^{n-1}_l ũ^{n-j}_{k-l}

runs over the pairs where exactly one index lies in the unresolved band
K < |·| <= 2K; ũ^{n-j} is u^{n-j} on the resolved band and the high-mode
reconstruction

    ũ^{n-j}_k = (ik/2) e^{-νk²jδ} Σ_{|l|<=K, |k-l|<=K} u^{n-j}_{k-l} u^{n-j}_l

above it. Which (family, lag) terms take part is set by a `TermMask`. The
coefficients are complex.

Functions prefixed with an underscore work on raw arrays with leading batch
axes; the estimator builds its design matrices through them.
"""

__all__ = [ #@
    'FAMILIES',
    'TermMask',
    'NarSpec',
    'NarModel',
    'LagWindow',
    'NarRun',
    'r_delta',
    'reconstruct_high_modes',
    'phi_features',
    'nar_step',
    'simulate_nar',
    'window_from_dataset',
    'galerkin_warm_start',
    'design_rows',
]

import functools
import math

import numpy as np

from sbnar.common.error import ConfigError, DataError, EvaluationError
from sbnar.common.log import get_logger
from sbnar.common.record import Record, complex_to_json, complex_from_json
from sbnar.common.rng import make_rng
from sbnar.forcing import ForceConfig, white_force
from sbnar.full_model import (
    BLOW_UP_THRESHOLD, IntegratorConfig, Trajectory, _integrator)
from sbnar.spectral import SpectralField, galerkin_grid, _square

logger = get_logger('nar')

_CHUNK = 4096

FAMILIES = ('v', 'R', 'f', 'w')
"""The closure term families, in column order: resolved state, Galerkin
drift, force, and quadratic high-mode interaction."""

class TermMask(object):
    """Selects the active closure terms: for each family in `FAMILIES`, the
    sorted tuple of active lags (1..p)."""

    def __init__(self, p, **lags):
        super().__init__()
        if int(p) != p or p < 1:
            raise ConfigError("p must be a positive integer, not {!r}".format(p))
        self._p = int(p)
        self._lags = {}
        for family in FAMILIES:
            active = tuple(sorted(set(int(j) for j in lags.pop(family, ()))))
            for j in active:
                if not 1 <= j <= self._p:
                    raise ConfigError("lag {} of family {} out of range 1..{}".format(j, family, self._p))
            self._lags[family] = active
        if lags:
            raise ConfigError("unknown term families: {}".format(', '.join(sorted(lags))))
        if not self.columns:
            raise ConfigError("a term mask needs at least one active term")

    @classmethod
    def default(cls, p):
        """The reduced parameterization: c^v and c^R at lag 1 only, c^w at
        all lags, no force terms."""
        return TermMask(p, v=(1,), R=(1,), w=range(1, int(p) + 1))

    @classmethod
    def full(cls, p):
        """All four families at all lags 1..p."""
        lags = range(1, int(p) + 1)
        return TermMask(p, v=lags, R=lags, f=lags, w=lags)

    @property
    def p(self): #@
        return self._p

    def lags(self, family):
        """Returns the active lags of family."""
        return self._lags[family]

    @property
    def columns(self): #@
        """The active (family, lag) pairs in column order."""
        return [(family, j) for family in FAMILIES for j in self._lags[family]]

    @property
    def n_terms(self): #@
        return sum(len(lags) for lags in self._lags.values())

    def to_object(self):
        ob = {family: list(self._lags[family]) for family in FAMILIES}
        ob['p'] = self._p
        return ob

    @classmethod
    def from_object(cls, ob):
        ob = dict(ob)
        p = ob.pop('p')
        return TermMask(p, **ob)

    def _key(self):
        return (self._p,) + tuple(self._lags[family] for family in FAMILIES)

    def __eq__(self, other):
        if isinstance(other, TermMask):
            return self._key() == other._key()
        return False

    def __hash__(self):
        return hash(('TermMask',) + self._key())

    def __repr__(self):
        return "TermMask({}, {})".format(self._p, ', '.join(
            "{}={!r}".format(family, self._lags[family]) for family in FAMILIES))

    __str__ = __repr__

class NarSpec(object):
    """Structure of a NAR model: K resolved modes, lag p, step δ, viscosity
    ν of the underlying equation, and the active terms."""

    def __init__(self, K, p, delta, viscosity, term_mask=None, etd_contour_points=32):
        super().__init__()
        if int(K) != K or K < 1:
            raise ConfigError("K must be a positive integer, not {!r}".format(K))
        delta = float(delta)
        if not delta > 0.0 or not math.isfinite(delta):
            raise ConfigError("delta must be positive, not {!r}".format(delta))
        if term_mask is None:
            term_mask = TermMask.default(p)
        if term_mask.p != p:
            raise ConfigError("term mask is for p = {}, not {}".format(term_mask.p, p))
        self._K = int(K)
        self._p = int(p)
        self._delta = delta
        self._grid = galerkin_grid(self._K, viscosity)
        self._term_mask = term_mask
        self._galerkin = IntegratorConfig(
            self._grid, ForceConfig(0.0, 1), delta, etd_contour_points)

    @property
    def K(self): #@
        return self._K

    @property
    def p(self): #@
        return self._p

    @property
    def delta(self): #@
        return self._delta

    @property
    def viscosity(self): #@
        return self._grid.viscosity

    @property
    def grid(self): #@
        """The grid on which the Galerkin drift and the high modes live."""
        return self._grid

    @property
    def term_mask(self): #@
        return self._term_mask

    @property
    def galerkin_config(self): #@
        """Integrator configuration of the deterministic K-mode Galerkin
        system at step δ."""
        return self._galerkin

    @property
    def n_terms(self): #@
        return self._term_mask.n_terms

    def with_mask(self, term_mask):
        return NarSpec(self._K, term_mask.p, self._delta, self.viscosity, term_mask,
                       self._galerkin.etd_contour_points)

    def to_object(self):
        return {
            'K': self._K,
            'p': self._p,
            'delta': self._delta,
            'viscosity': self.viscosity,
            'term_mask': self._term_mask.to_object(),
            'etd_contour_points': self._galerkin.etd_contour_points,
        }

    @classmethod
    def from_object(cls, ob):
        try:
            return NarSpec(
                ob['K'], ob['p'], ob['delta'], ob['viscosity'],
                TermMask.from_object(ob['term_mask']) if 'term_mask' in ob else None,
                ob.get('etd_contour_points', 32))
        except (KeyError, TypeError) as e:
            raise ConfigError("invalid NAR specification: {}".format(e))

    def _key(self):
        return (self._K, self._p, self._delta, self.viscosity, self._term_mask,
                self._galerkin.etd_contour_points)

    def __eq__(self, other):
        if isinstance(other, NarSpec):
            return self._key() == other._key()
        return False

    def __hash__(self):
        return hash(('NarSpec',) + self._key())

    def __repr__(self):
        return "NarSpec(K={!r}, p={!r}, delta={!r}, viscosity={!r}, term_mask={!r})".format(
            *self._key()[:5])

    __str__ = __repr__

class NarModel(object):
    """A NAR model: its structure, the complex coefficients theta (shape
    K × n_terms, columns ordered like `TermMask.columns`), and the noise
    variances σ^g_k."""

    def __init__(self, spec, theta, sigma_g):
        super().__init__()
        theta = np.array(theta, dtype=np.complex128, copy=True)
        sigma_g = np.array(sigma_g, dtype=float, copy=True)
        if theta.shape != (spec.K, spec.n_terms):
            raise DataError("theta has shape {}, expected {}".format(
                theta.shape, (spec.K, spec.n_terms)))
        if sigma_g.shape != (spec.K,):
            raise DataError("sigma_g has shape {}, expected {}".format(sigma_g.shape, (spec.K,)))
        if not np.all(np.isfinite(theta)):
            raise DataError("theta must be finite")
        if not np.all(np.isfinite(sigma_g)) or np.any(sigma_g < 0):
            raise DataError("sigma_g must be finite and non-negative")
        theta.flags.writeable = False
        sigma_g.flags.writeable = False
        self._spec = spec
        self._theta = theta
        self._sigma_g = sigma_g

    @classmethod
    def zero(cls, spec):
        """The model with θ = 0 and σ^g = 0, i.e. the K-mode Galerkin system
        stepped at δ with the force held constant."""
        return NarModel(spec, np.zeros((spec.K, spec.n_terms)), np.zeros(spec.K))

    @property
    def spec(self): #@
        return self._spec

    @property
    def theta(self): #@
        return self._theta

    @property
    def sigma_g(self): #@
        return self._sigma_g

    def coefficient(self, family, lag):
        """Returns the coefficient vector (over k) of the given term."""
        try:
            col = self._spec.term_mask.columns.index((family, lag))
        except ValueError:
            raise ConfigError("term ({}, {}) is not active".format(family, lag))
        return self._theta[:, col]

    def to_record(self):
        return Record(
            'nar-model',
            spec=self._spec.to_object(),
            columns=[[family, j] for family, j in self._spec.term_mask.columns],
            theta=complex_to_json(self._theta),
            sigma_g=self._sigma_g.tolist())

    @classmethod
    def from_record(cls, record):
        if record.kind != 'nar-model':
            raise DataError("expected a nar-model record, not {!r}".format(record.kind))
        try:
            spec = NarSpec.from_object(record['spec'])
            theta = np.array(complex_from_json(record['theta']), dtype=np.complex128)
            return NarModel(spec, theta.reshape(spec.K, spec.n_terms), record['sigma_g'])
        except (KeyError, ValueError, TypeError) as e:
            if isinstance(e, DataError):
                raise
            raise DataError("invalid nar-model record: {}".format(e))

    def save(self, path):
        """Writes the model as JSON, or as CBOR if path ends in `.cbor`."""
        self.to_record().save(path)

    @classmethod
    def load(cls, path):
        return cls.from_record(Record.load(path))

    def __eq__(self, other):
        if isinstance(other, NarModel):
            return (self._spec == other._spec and np.array_equal(self._theta, other._theta)
                    and np.array_equal(self._sigma_g, other._sigma_g))
        return False

    __hash__ = None

    def __repr__(self):
        return "NarModel({!r})".format(self._spec)

    __str__ = __repr__

def _as_modes(u):
    if isinstance(u, SpectralField):
        return u.modes
    return np.asarray(u, dtype=np.complex128)

class LagWindow(object):
    """The last p resolved states u^{n-p}..u^{n-1} and forces
    f^{n-p}..f^{n-1}, oldest first."""

    def __init__(self, u, f):
        super().__init__()
        u = np.array(u, dtype=np.complex128, copy=True)
        f = np.array(f, dtype=np.complex128, copy=True)
        if u.ndim != 2 or u.shape[0] < 1:
            raise DataError("window states must have shape (p, K), got {}".format(u.shape))
        if f.shape != u.shape:
            raise DataError("window forces have shape {}, expected {}".format(f.shape, u.shape))
        u.flags.writeable = False
        f.flags.writeable = False
        self._u = u
        self._f = f

    @property
    def u(self): #@
        return self._u

    @property
    def f(self): #@
        return self._f

    @property
    def p(self): #@
        return self._u.shape[0]

    @property
    def K(self): #@
        return self._u.shape[1]

    def state(self, j):
        """Returns u^{n-j}."""
        return self._u[self.p - j]

    def force(self, j):
        """Returns f^{n-j}."""
        return self._f[self.p - j]

    def advance(self, u_new, f_new):
        """Returns the window for the next step, after u^n = u_new was
        produced under force f^n = f_new."""
        u = np.concatenate([self._u[1:], _as_modes(u_new)[None, :]])
        f = np.concatenate([self._f[1:], np.asarray(f_new, dtype=np.complex128)[None, :]])
        return LagWindow(u, f)

    def check(self, spec):
        if self.p != spec.p or self.K != spec.K:
            raise EvaluationError("window has p = {}, K = {} but the model needs p = {}, K = {}".format(
                self.p, self.K, spec.p, spec.K))

    def __repr__(self):
        return "LagWindow(p={}, K={})".format(self.p, self.K)

    __str__ = __repr__

def _galerkin(spec):
    return _integrator(spec.galerkin_config, spec.K)

def _r_delta(u, spec):
    """R^δ for arrays of K-vectors."""
    return (_galerkin(spec).step(u, 0.0) - u) / spec.delta

@functools.lru_cache(maxsize=64)
def _high_factor(K, viscosity, delta, j):
    k = np.arange(K + 1, 2 * K + 1, dtype=float)
    return 0.5j * k * np.exp(-viscosity * k * k * j * delta)

def _squares(u):
    """(u²)^_k for k = 1..2K of arrays of K-vectors u."""
    K = u.shape[-1]
    pad = np.zeros(u.shape[:-1] + (2 * K + 1,), dtype=np.complex128)
    pad[..., :K] = u
    return _square(pad)[..., :2 * K]

def _extend(u, squares, spec, j):
    """Concatenates u with its lag-j high-mode reconstruction, giving ũ_k
    for k = 1..2K."""
    K = spec.K
    high = _high_factor(K, spec.viscosity, spec.delta, int(j)) * squares[..., K:]
    return np.concatenate([u, high], axis=-1)

@functools.lru_cache(maxsize=64)
def _pair_indices(K):
    """Index arrays over (k, r), r = 1..K, for the two halves of the
    quadratic feature, with a mask for r <= k."""
    k = np.arange(1, K + 1)[:, None]
    r = np.arange(1, K + 1)[None, :]
    mask = r <= k
    # l = K + r, k - l = r - k < 0: high ũ^{n-1}_l times conj of low ũ^{n-j}_{l-k}.
    a1 = np.broadcast_to(K + r - 1, (K, K))
    b1 = np.where(mask, K + r - k - 1, 0)
    # l = -(K - r + 1): conj of low ũ^{n-1}_{K-r+1} times high ũ^{n-j}_{k+K-r+1}.
    a2 = np.broadcast_to(K - r, (K, K))
    b2 = np.where(mask, k + K - r, 0)
    return a1, b1, a2, b2, mask

def _quadratic(ext1, extj):
    """Q_k = Σ ũ^{n-1}_l ũ^{n-j}_{k-l} over the mixed resolved/unresolved
    pairs, for arrays of extended 2K-vectors."""
    K = ext1.shape[-1] // 2
    a1, b1, a2, b2, mask = _pair_indices(K)
    terms = (ext1[..., a1] * np.conj(extj[..., b1])
             + np.conj(ext1[..., a2]) * extj[..., b2])
    return np.sum(np.where(mask, terms, 0.0), axis=-1)

def _features(u_hist, f_hist, spec, r_hist=None, sq_hist=None):
    """Feature tensor for windows u_hist, f_hist of shape (..., p, K), oldest
    first. Returns shape (..., K, n_terms). The R^δ and squared values of
    the window states can be passed in when already known."""
    p = spec.p
    mask = spec.term_mask
    if r_hist is None and mask.lags('R'):
        r_hist = _r_delta(u_hist, spec)
    if sq_hist is None and mask.lags('w'):
        sq_hist = _squares(u_hist)
    ext1 = None
    if mask.lags('w'):
        ext1 = _extend(u_hist[..., p - 1, :], sq_hist[..., p - 1, :], spec, 1)
    cols = []
    for family, j in mask.columns:
        idx = p - j
        if family == 'v':
            cols.append(u_hist[..., idx, :])
        elif family == 'R':
            cols.append(r_hist[..., idx, :])
        elif family == 'f':
            cols.append(f_hist[..., idx, :])
        else:
            extj = ext1 if j == 1 else _extend(u_hist[..., idx, :], sq_hist[..., idx, :], spec, j)
            cols.append(_quadratic(ext1, extj))
    return np.stack(cols, axis=-1)

def design_rows(u, f, spec):
    """Regression rows for one trajectory of resolved states u (shape
    (N_t + 1) × K) and forces f (shape N_t × K, entry n the force over
    (t_n, t_{n+1}]).

    For n = p + 1..N_t, returns `(features, response)`, where features has
    shape (N_t - p) × K × n_terms and response is
    u^n - u^{n-1} - δ(R^δ(u^{n-1}) + f^n)."""
    p = spec.p
    n_steps = u.shape[0] - 1
    if n_steps <= p:
        raise DataError("a trajectory of {} steps has no rows for lag {}".format(n_steps, p))
    mask = spec.term_mask
    r_all = _r_delta(u, spec)
    sq_all = _squares(u) if mask.lags('w') else None
    rows = np.arange(p + 1, n_steps + 1)
    hist = rows[:, None] + np.arange(-p, 0)[None, :]
    features = np.empty((rows.shape[0], spec.K, spec.n_terms), dtype=np.complex128)
    for start in range(0, rows.shape[0], _CHUNK):
        h = hist[start:start + _CHUNK]
        features[start:start + _CHUNK] = _features(
            u[h], f[h - 1], spec, r_all[h], None if sq_all is None else sq_all[h])
    response = u[rows] - u[rows - 1] - spec.delta * (r_all[rows - 1] + f[rows - 1])
    return features, response

def r_delta(u, spec):
    """Returns R^δ(u) = (ETDRK4_δ(u) - u)/δ for the deterministic K-mode
    Galerkin system, so that u + δR^δ(u) is exactly one ETDRK4 step."""
    u = _as_modes(u)
    if u.shape != (spec.K,):
        raise EvaluationError("expected {} modes, got shape {}".format(spec.K, u.shape))
    if not np.all(np.isfinite(u)):
        raise EvaluationError("cannot evaluate the Galerkin drift of a non-finite state")
    return _r_delta(u, spec)

def reconstruct_high_modes(window, j, spec):
    """Returns ũ^{n-j}_k for k = 1..2K: the resolved modes below K and the
    quadratic reconstruction of the unresolved ones above."""
    window.check(spec)
    if int(j) != j or not 1 <= j <= spec.p:
        raise EvaluationError("lag {!r} out of range 1..{}".format(j, spec.p))
    u = window.state(int(j))
    return _extend(u, _squares(u), spec, int(j))

def phi_features(window, spec):
    """Returns the K × n_terms matrix of closure features for the step
    following window."""
    window.check(spec)
    return _features(window.u, window.f, spec)

def nar_step(window, force, noise, model):
    """Returns u^n given the window, the force f^n and the noise g^n. The
    result is not checked for blow-up."""
    spec = model.spec
    window.check(spec)
    force = np.asarray(force, dtype=np.complex128)
    noise = np.asarray(noise, dtype=np.complex128)
    prev = window.state(1)
    phi = np.sum(model.theta * phi_features(window, spec), axis=-1)
    return prev + spec.delta * (_r_delta(prev, spec) + force + phi) + noise

class NarRun(Trajectory):
    """A `Trajectory` of K-vectors produced by `simulate_nar()`, with a
    stability verdict and optionally the noise drawn at every step."""

    def __init__(self, times, modes, forces=None, blow_up_step=None, save_interval=None,
                 noise=None, n_steps=None, step_size=None):
        super().__init__(times, modes, forces, blow_up_step, save_interval)
        if noise is not None:
            noise = np.array(noise, dtype=np.complex128, copy=True)
            noise.flags.writeable = False
        self._noise = noise
        self._n_steps = n_steps
        self._step_size = step_size

    @property
    def states(self): #@
        """The saved K-vectors u^n. These are resolved modes, not fields on
        a grid, so their last entry need not vanish."""
        return list(self.modes)

    @property
    def final(self): #@
        return self.modes[-1]

    @property
    def noise(self): #@
        """Per-step noise g^n, shape n_taken × K, or None if not kept."""
        return self._noise

    @property
    def n_steps(self): #@
        """Number of steps requested."""
        return self._n_steps

    @property
    def stable(self): #@
        return not self.blown_up

    @property
    def verdict(self): #@
        """`"stable"` or `"blow-up"`."""
        return 'stable' if self.stable else 'blow-up'

    @property
    def blow_up_time(self): #@
        if self.blow_up_step is None or self._step_size is None:
            return None
        return self.blow_up_step * self._step_size

    def __repr__(self):
        return "NarRun(n_saved={}, K={}, verdict={!r}, blow_up_step={!r})".format(
            len(self), self.modes.shape[1], self.verdict, self.blow_up_step)

    __str__ = __repr__


def simulate_nar(model, initial_window, n_steps, force=None, rng=None, keep_noise=False,
                 save_every=1):
    """Runs the model for n_steps steps after initial_window.

    force is either an array of shape n_steps × K holding f^n for the steps
    taken (the matched path), a `ForceConfig` from which fresh δ-scaled
    forces are drawn, or None for no force. Noise and fresh forces are drawn
    from rng (default: seeded from the `ForceConfig`, or seed 0) in blocks of
    forces followed by noise. The run stops as soon as any |u^n_k| exceeds
    the blow-up threshold or turns non-finite; this is recorded in the
    returned `NarRun`, not raised."""
    spec = model.spec
    initial_window.check(spec)
    if int(n_steps) != n_steps or n_steps < 0:
        raise ConfigError("n_steps must be a non-negative integer, not {!r}".format(n_steps))
    if int(save_every) != save_every or save_every < 1:
        raise ConfigError("save_every must be a positive integer, not {!r}".format(save_every))
    n_steps, save_every = int(n_steps), int(save_every)
    K, delta = spec.K, spec.delta
    if isinstance(force, ForceConfig):
        fresh, recorded = force, None
        if rng is None:
            rng = make_rng(force.seed)
    else:
        fresh = None
        if force is None:
            recorded = np.zeros((n_steps, K), dtype=np.complex128)
        else:
            recorded = np.asarray(force, dtype=np.complex128)
            if recorded.ndim != 2 or recorded.shape[0] < n_steps or recorded.shape[1] != K:
                raise DataError("recorded force has shape {}, need at least ({}, {})".format(
                    recorded.shape, n_steps, K))
        if rng is None:
            rng = make_rng(0)
    scale = np.sqrt(model.sigma_g / 2.0)
    draw_noise = bool(np.any(scale > 0))
    theta = model.theta
    use_squares = bool(spec.term_mask.lags('w'))

    # Rolling window, oldest first, with the drift and squares of its states.
    u_hist = np.array(initial_window.u)
    f_hist = np.array(initial_window.f)
    r_hist = _r_delta(u_hist, spec)
    sq_hist = _squares(u_hist) if use_squares else None

    saved = [u_hist[-1]]
    forces = []
    acc = np.zeros(K, dtype=np.complex128)
    noise_kept = [] if keep_noise else None
    blow_up_step = None
    step = 0
    while step < n_steps and blow_up_step is None:
        chunk = min(_CHUNK, n_steps - step)
        if fresh is not None:
            f_chunk = white_force(fresh, K, delta, rng, chunk)
        else:
            f_chunk = recorded[step:step + chunk]
        if draw_noise:
            z = rng.standard_normal((chunk, K, 2))
            g_chunk = scale * (z[..., 0] + 1j * z[..., 1])
        else:
            g_chunk = np.zeros((chunk, K), dtype=np.complex128)
        for i in range(chunk):
            phi = np.sum(theta * _features(u_hist, f_hist, spec, r_hist, sq_hist), axis=-1)
            u_new = u_hist[-1] + delta * (r_hist[-1] + f_chunk[i] + phi) + g_chunk[i]
            step += 1
            if keep_noise:
                noise_kept.append(g_chunk[i])
            if not np.all(np.isfinite(u_new)) or np.max(np.abs(u_new)) > BLOW_UP_THRESHOLD:
                blow_up_step = step
                break
            u_hist = np.roll(u_hist, -1, axis=0)
            u_hist[-1] = u_new
            f_hist = np.roll(f_hist, -1, axis=0)
            f_hist[-1] = f_chunk[i]
            r_hist = np.roll(r_hist, -1, axis=0)
            r_hist[-1] = _r_delta(u_new, spec)
            if use_squares:
                sq_hist = np.roll(sq_hist, -1, axis=0)
                sq_hist[-1] = _squares(u_new)
            acc += f_chunk[i]
            if step % save_every == 0:
                saved.append(u_new)
                forces.append(acc / save_every)
                acc = np.zeros(K, dtype=np.complex128)

    if blow_up_step is not None:
        logger.warn("NAR model blew up at step {} (t = {})", blow_up_step, blow_up_step * delta)
    else:
        logger.debug("NAR model ran {} steps without blowing up", n_steps)
    return NarRun(
        np.arange(len(saved)) * (save_every * delta),
        np.array(saved).reshape(len(saved), K),
        np.array(forces).reshape(len(forces), K),
        blow_up_step,
        save_every * delta,
        None if noise_kept is None else np.array(noise_kept).reshape(len(noise_kept), K),
        n_steps,
        delta)

def window_from_dataset(ds, m, n, p):
    """Returns the window preceding step n of trajectory m: u^{n-p}..u^{n-1}
    and f^{n-p}..f^{n-1}. Requires p + 1 <= n <= N_t + 1."""
    if not 0 <= m < ds.meta.n_traj:
        raise DataError("trajectory {} out of range 0..{}".format(m, ds.meta.n_traj - 1))
    if not p + 1 <= n <= ds.meta.n_steps + 1:
        raise DataError("window before step {} with lag {} doesn't fit in {} steps".format(
            n, p, ds.meta.n_steps))
    return LagWindow(ds.u[m, n - p:n], ds.f[m, n - p - 1:n - 1])

def galerkin_warm_start(spec, u0, force=None, rng=None):
    """Builds an initial window without data: starts from u0 (K modes, or a
    longer field which is cut off) and takes p - 1 stochastic Galerkin steps
    of size δ, drawing fresh forces from the `ForceConfig` force (or using no
    force if None)."""
    u0 = _as_modes(u0)
    if u0.ndim != 1 or u0.shape[0] < spec.K:
        raise DataError("initial state needs at least {} modes".format(spec.K))
    u0 = np.array(u0[:spec.K])
    if force is not None:
        if rng is None:
            rng = make_rng(force.seed)
        f = white_force(force, spec.K, spec.delta, rng, spec.p)
    else:
        f = np.zeros((spec.p, spec.K), dtype=np.complex128)
    u = [u0]
    for i in range(1, spec.p):
        u.append(u[-1] + spec.delta * (_r_delta(u[-1], spec) + f[i]))
    return LagWindow(np.array(u), f)
