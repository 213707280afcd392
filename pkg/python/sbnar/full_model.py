"""Time integration of the truncated stochastic Burgers system

    dû_k/dt = -ν k² û_k + B̂_k(û) + f̂_k,       k = 1..K_active,

by the fourth-order exponential time differencing Runge-Kutta scheme
(ETDRK4), with the stochastic force held constant during each step. With
K_active = N this is the full model; with K_active = K < N it is the K-mode
Galerkin system, which the reduced model also uses to evaluate its drift.

The φ-function coefficients of ETDRK4 are evaluated by averaging over points
on a circle of radius 1 around each L_k dt in the complex plane, which keeps
them accurate where the closed-form expressions cancel.
"""

__all__ = [ #@
    'IntegratorConfig',
    'Integrator',
    'Trajectory',
    'etdrk4_step',
    'integrate',
    'integrate_ensemble',
    'cfl_number',
    'mean_cfl',
    'make_initial_ensemble',
    'initial_condition',
    'galerkin_cfl',
    'BLOW_UP_THRESHOLD',
]

import concurrent.futures
import functools
import math
import os

import numpy as np

from sbnar.common.error import ConfigError, DataError, IntegrationError
from sbnar.common.log import get_logger
from sbnar.common.rng import make_rng, split_seeds
from sbnar.forcing import ForceConfig, ForceIncrement, ForceSource, _fit_modes
from sbnar.spectral import (
    GridConfig, SpectralField, galerkin_grid, _nonlinearity, _physical)

logger = get_logger('full_model')

BLOW_UP_THRESHOLD = 1.0e5
"""A run is considered blown up as soon as any |û_k| exceeds this value."""

class IntegratorConfig(object):
    """Grid, force, step size, and number of contour points used for the
    ETDRK4 coefficients."""

    def __init__(self, grid, force, dt, etd_contour_points=32):
        super().__init__()
        if not isinstance(grid, GridConfig):
            raise ConfigError("grid must be a GridConfig, not {}".format(type(grid).__name__))
        if not isinstance(force, ForceConfig):
            raise ConfigError("force must be a ForceConfig, not {}".format(type(force).__name__))
        dt = float(dt)
        if not dt > 0.0 or not math.isfinite(dt):
            raise ConfigError("dt must be positive, not {!r}".format(dt))
        if int(etd_contour_points) != etd_contour_points or etd_contour_points < 16:
            raise ConfigError("etd_contour_points must be an integer >= 16, not {!r}".format(
                etd_contour_points))
        self._grid = grid
        self._force = force
        self._dt = dt
        self._etd_contour_points = int(etd_contour_points)

    @property
    def grid(self): #@
        return self._grid

    @property
    def force(self): #@
        return self._force

    @property
    def dt(self): #@
        return self._dt

    @property
    def etd_contour_points(self): #@
        return self._etd_contour_points

    def replace(self, **kwargs):
        """Returns a copy with some of the constructor arguments replaced."""
        args = {
            'grid': self._grid,
            'force': self._force,
            'dt': self._dt,
            'etd_contour_points': self._etd_contour_points,
        }
        for key, value in kwargs.items():
            if key not in args:
                raise TypeError("unexpected keyword argument {!r}".format(key))
            args[key] = value
        return IntegratorConfig(**args)

    def to_object(self):
        return {
            'grid': self._grid.to_object(),
            'force': self._force.to_object(),
            'dt': self._dt,
            'etd_contour_points': self._etd_contour_points,
        }

    @classmethod
    def from_object(cls, ob):
        try:
            return IntegratorConfig(
                GridConfig.from_object(ob['grid']),
                ForceConfig.from_object(ob['force']),
                ob['dt'],
                ob.get('etd_contour_points', 32))
        except (KeyError, TypeError) as e:
            raise ConfigError("invalid integrator configuration: {}".format(e))

    def _key(self):
        return (self._grid, self._force, self._dt, self._etd_contour_points)

    def __eq__(self, other):
        if isinstance(other, IntegratorConfig):
            return self._key() == other._key()
        return False

    def __hash__(self):
        return hash(('IntegratorConfig',) + self._key())

    def __repr__(self):
        return "IntegratorConfig(grid={!r}, force={!r}, dt={!r}, etd_contour_points={!r})".format(
            *self._key())

    __str__ = __repr__

def _etd_coefficients(lin, dt, n_points):
    """Returns (E, E2, Q, f1, f2, f3) for the diagonal linear operator lin."""
    lin = np.asarray(lin, dtype=float)
    roots = np.exp(2j * math.pi * (np.arange(n_points) + 0.5) / n_points)
    z = lin[:, None] * dt + roots[None, :]
    ez = np.exp(z)
    z3 = z ** 3
    q = dt * np.mean((np.exp(z / 2) - 1.0) / z, axis=1).real
    f1 = dt * np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3, axis=1).real
    f2 = dt * np.mean((2.0 + z + ez * (z - 2.0)) / z3, axis=1).real
    f3 = dt * np.mean((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3, axis=1).real
    return np.exp(lin * dt), np.exp(lin * dt / 2), q, f1, f2, f3

class Integrator(object):
    """ETDRK4 stepper for one (grid, dt, K_active) combination.

    The stepper works on raw coefficient arrays holding the active modes
    k = 1..n_active, where n_active is K_active, or N - 1 when K_active = N
    because the Nyquist mode of the 2N-point grid is never evolved. Arrays may
    carry leading batch axes. Modes above n_active are identically zero.

    The reduced model evolves its K modes on the grid N = 2K, where k = K is
    well below Nyquist. A full model run with K_active = N therefore matches
    the K-mode Galerkin step only in the modes k < N; the slot k = N stays
    at zero here while the Galerkin system evolves it."""

    def __init__(self, cfg, K_active=None, nonlinear=True):
        super().__init__()
        grid = cfg.grid
        if K_active is None:
            K_active = grid.n_modes
        if int(K_active) != K_active or not 1 <= K_active <= grid.n_modes:
            raise ConfigError("K_active must be in 1..{}, not {!r}".format(grid.n_modes, K_active))
        self._cfg = cfg
        self._K_active = int(K_active)
        self._n_active = min(self._K_active, grid.n_modes - 1)
        self._nonlinear = bool(nonlinear)
        k = np.arange(1, self._n_active + 1, dtype=float)
        lin = -grid.viscosity * k * k
        self._E, self._E2, self._Q, self._f1, self._f2, self._f3 = _etd_coefficients(
            lin, cfg.dt, cfg.etd_contour_points)
        logger.trace("ETDRK4 coefficients ready for K_active={}, dt={}", self._K_active, cfg.dt)

    @property
    def config(self): #@
        return self._cfg

    @property
    def K_active(self): #@
        return self._K_active

    @property
    def n_active(self): #@
        """Number of modes actually evolved."""
        return self._n_active

    @property
    def nonlinear(self): #@
        return self._nonlinear

    def nonlinearity(self, v):
        """Dealiased B̂ for active-mode arrays. One extra zero slot is padded
        so that every active mode stays below the Nyquist slot of the
        transform."""
        if not self._nonlinear:
            return np.zeros_like(v)
        pad = np.zeros(v.shape[:-1] + (self._n_active + 1,), dtype=np.complex128)
        pad[..., :self._n_active] = v
        return _nonlinearity(pad)[..., :self._n_active]

    def step(self, v, force):
        """Advances active-mode arrays v by one step of size dt under the
        constant force (same shape as v, or broadcastable to it)."""
        E2, Q = self._E2, self._Q
        nv = self.nonlinearity(v) + force
        a = E2 * v + Q * nv
        na = self.nonlinearity(a) + force
        b = E2 * v + Q * na
        nb = self.nonlinearity(b) + force
        c = E2 * a + Q * (2.0 * nb - nv)
        nc = self.nonlinearity(c) + force
        return self._E * v + self._f1 * nv + 2.0 * self._f2 * (na + nb) + self._f3 * nc

    def restrict(self, modes):
        """Returns the active part of (batches of) full-length coefficient
        arrays."""
        return np.array(modes[..., :self._n_active], dtype=np.complex128)

    def extend(self, v, n_modes=None):
        """Pads active-mode arrays with zeros back to n_modes (default N)."""
        if n_modes is None:
            n_modes = self._cfg.grid.n_modes
        return _fit_modes(v, n_modes)

@functools.lru_cache(maxsize=32)
def _integrator(cfg, K_active, nonlinear=True):
    return Integrator(cfg, K_active, nonlinear)

def _blown_up(v):
    return not np.all(np.isfinite(v)) or np.max(np.abs(v), initial=0.0) > BLOW_UP_THRESHOLD

def etdrk4_step(state, force, cfg, K_active=None, nonlinear=True):
    """Performs a single ETDRK4 step of size cfg.dt.

    force is a `ForceIncrement` (or None for no force); it is held constant
    during the four internal stages. Returns a new `SpectralField` with N
    modes, of which those above the active set are zero."""
    cfg.grid.check(state)
    if not state.is_finite():
        raise IntegrationError("cannot step a non-finite state")
    if K_active is None:
        K_active = cfg.grid.n_modes
    integ = _integrator(cfg, int(K_active), bool(nonlinear))
    if force is None:
        f = 0.0
    else:
        f = force.padded(integ.n_active)
    v = integ.step(integ.restrict(state.modes), f)
    return SpectralField(integ.extend(v))

class Trajectory(object):
    """Saved states of a run, optionally with the force applied between
    consecutive saves.

    The forces are stored in aggregated form: entry i is the mean of the
    per-step forces between saves i and i + 1, so that it can be treated as a
    single constant force over the save interval. If the run blew up,
    `blow_up_step` holds the (fine) step at which it happened; the offending
    state is not saved."""

    def __init__(self, times, modes, forces=None, blow_up_step=None, save_interval=None):
        super().__init__()
        times = np.array(times, dtype=float, copy=True)
        modes = np.array(modes, dtype=np.complex128, copy=True)
        if times.ndim != 1 or modes.ndim != 2 or modes.shape[0] != times.shape[0]:
            raise DataError("trajectory needs matching times {} and states {}".format(
                times.shape, modes.shape))
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise DataError("trajectory times must be strictly increasing")
        if forces is not None:
            forces = np.array(forces, dtype=np.complex128, copy=True)
            if forces.ndim != 2 or forces.shape[0] != max(0, times.shape[0] - 1):
                raise DataError("expected one force per save interval, got shape {}".format(
                    forces.shape))
            forces.flags.writeable = False
        if save_interval is None and times.shape[0] > 1:
            save_interval = float(times[1] - times[0])
        times.flags.writeable = False
        modes.flags.writeable = False
        self._times = times
        self._modes = modes
        self._forces = forces
        self._blow_up_step = None if blow_up_step is None else int(blow_up_step)
        self._save_interval = save_interval

    @property
    def times(self): #@
        return self._times

    @property
    def modes(self): #@
        """Read-only array of saved coefficients, shape (n_saved, N)."""
        return self._modes

    @property
    def states(self): #@
        """The saved states as a list of `SpectralField`s."""
        return [SpectralField(m) for m in self._modes]

    @property
    def force_modes(self): #@
        """Read-only array of aggregated forces, shape (n_saved - 1, N), or
        None if forces weren't retained."""
        return self._forces

    @property
    def forces(self): #@
        """The aggregated forces as `ForceIncrement`s spanning one save
        interval each, or None if forces weren't retained."""
        if self._forces is None:
            return None
        return [ForceIncrement(i, f, self._save_interval) for i, f in enumerate(self._forces)]

    @property
    def blow_up_step(self): #@
        return self._blow_up_step

    @property
    def blown_up(self): #@
        return self._blow_up_step is not None

    @property
    def final(self): #@
        """The last saved state."""
        return SpectralField(self._modes[-1])

    def __len__(self):
        return self._modes.shape[0]

    def __repr__(self):
        return "Trajectory(n_saved={}, n_modes={}, blow_up_step={!r})".format(
            self._modes.shape[0], self._modes.shape[1], self._blow_up_step)

    __str__ = __repr__

def integrate(initial, n_steps, cfg, K_active=None, save_every=1, rng=None,
              keep_forces=False, nonlinear=True, t0=0.0):
    """Integrates from initial for n_steps steps of size cfg.dt.

    Every step draws a fresh force from rng (default: a generator seeded from
    cfg.force.seed). The state is saved initially and after every save_every
    steps; steps past the last multiple of save_every are integrated but not
    saved. Integration stops as soon as any mode exceeds
    `BLOW_UP_THRESHOLD` in magnitude or turns non-finite, in which case
    `Trajectory.blow_up_step` is set; this is not an error."""
    cfg.grid.check(initial)
    if int(n_steps) != n_steps or n_steps < 0:
        raise ConfigError("n_steps must be a non-negative integer, not {!r}".format(n_steps))
    if int(save_every) != save_every or save_every < 1:
        raise ConfigError("save_every must be a positive integer, not {!r}".format(save_every))
    n_steps, save_every = int(n_steps), int(save_every)
    if K_active is None:
        K_active = cfg.grid.n_modes
    integ = _integrator(cfg, int(K_active), bool(nonlinear))
    source = ForceSource(cfg.force, cfg.dt, rng)
    n_modes = cfg.grid.n_modes

    v = integ.restrict(initial.modes)
    saved = [integ.extend(v)]
    forces = [] if keep_forces else None
    blow_up_step = None
    if _blown_up(v):
        blow_up_step = 0
    step = 0
    while step < n_steps and blow_up_step is None:
        block = min(save_every, n_steps - step)
        raw = source.draw(block)
        active = _fit_modes(raw, integ.n_active)
        for j in range(block):
            v = integ.step(v, active[j])
            step += 1
            if _blown_up(v):
                blow_up_step = step
                break
        if blow_up_step is not None or block < save_every:
            break
        saved.append(integ.extend(v))
        if keep_forces:
            forces.append(_fit_modes(raw.mean(axis=0), n_modes))
        logger.trace("saved state {} at step {}", len(saved) - 1, step)

    if blow_up_step is not None:
        logger.warn("integration blew up at step {} (t = {})", blow_up_step,
                    t0 + blow_up_step * cfg.dt)
    times = t0 + np.arange(len(saved)) * (save_every * cfg.dt)
    if keep_forces:
        forces = np.array(forces).reshape(len(saved) - 1, n_modes)
    return Trajectory(times, np.array(saved), forces, blow_up_step, save_every * cfg.dt)

def _integrate_one(args):
    initial_modes, n_steps, cfg, K_active, save_every, seed, keep_forces, nonlinear = args
    return integrate(
        SpectralField(initial_modes), n_steps, cfg, K_active, save_every,
        make_rng(seed), keep_forces, nonlinear)

def worker_count(workers=None):
    """Returns the worker pool size: workers if given, otherwise the
    SBNAR_WORKERS environment variable, otherwise 1."""
    if workers is None:
        value = os.environ.get('SBNAR_WORKERS', '1')
        try:
            workers = int(value)
        except ValueError:
            raise ConfigError("SBNAR_WORKERS must be an integer, not {!r}".format(value))
    if workers < 1:
        raise ConfigError("worker count must be at least 1, not {}".format(workers))
    return int(workers)

def integrate_ensemble(initials, n_steps, cfg, K_active=None, save_every=1, seeds=None,
                       keep_forces=False, nonlinear=True, workers=None):
    """Integrates one trajectory per initial state.

    Trajectory i draws its force from seeds[i]; by default the seeds are
    split from cfg.force.seed. Trajectories run in a process pool of
    `worker_count(workers)` processes; the results don't depend on the pool
    size."""
    initials = list(initials)
    if seeds is None:
        seeds = split_seeds(cfg.force.seed, len(initials))
    seeds = list(seeds)
    if len(seeds) != len(initials):
        raise ConfigError("need one seed per initial state, got {} for {}".format(
            len(seeds), len(initials)))
    jobs = [
        (np.asarray(init.modes), n_steps, cfg, K_active, save_every, seed, keep_forces, nonlinear)
        for init, seed in zip(initials, seeds)]
    workers = min(worker_count(workers), max(1, len(jobs)))
    logger.debug("integrating {} trajectories on {} worker(s)", len(jobs), workers)
    if workers == 1:
        return [_integrate_one(job) for job in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_integrate_one, jobs))

def cfl_number(samples, dt, dx):
    """Returns sup_x |u(x)| dt/dx for physical samples (last axis x); works
    on batches."""
    samples = np.asarray(samples, dtype=float)
    return np.max(np.abs(samples), axis=-1) * (dt / dx)

def _mean_cfl(modes, n_points, dt, dx):
    if modes.shape[0] == 0:
        raise DataError("cannot compute the mean CFL number of an empty trajectory")
    return float(np.mean(cfl_number(_physical(modes, n_points), dt, dx)))

def mean_cfl(traj, grid, dt_eval):
    """Averages sup_x |u(x, t_n)| dt_eval/Δx over the saved states of traj,
    taking the supremum over the 2N-point grid."""
    modes = traj.modes if isinstance(traj, Trajectory) else np.asarray(traj)
    if modes.ndim != 2 or modes.shape[0] == 0:
        raise DataError("cannot compute the mean CFL number of an empty trajectory")
    if modes.shape[1] != grid.n_modes:
        raise DataError("trajectory has {} modes but the grid has {}".format(
            modes.shape[1], grid.n_modes))
    return _mean_cfl(modes, grid.grid_points, dt_eval, grid.dx)

def initial_condition(n_modes):
    """Returns u_0(x) = sin(x) + 2cos(x), for which û_1 = 1 - i/2."""
    return SpectralField.from_modes(n_modes, k1=1.0 - 0.5j)

def make_initial_ensemble(cfg, burn_in_time, n_samples, save_every=None, K_active=None):
    """Integrates from `initial_condition()` for burn_in_time time units and
    returns n_samples states drawn uniformly from the saved states.

    States are saved every save_every steps (default: such that about ten
    candidates exist per requested sample, but at most one per step). The
    burn-in force and the sample selection use two streams split from
    cfg.force.seed."""
    burn_in_time = float(burn_in_time)
    if not burn_in_time > 0.0:
        raise ConfigError("burn_in_time must be positive, not {!r}".format(burn_in_time))
    if int(n_samples) != n_samples or n_samples < 1:
        raise ConfigError("n_samples must be a positive integer, not {!r}".format(n_samples))
    n_steps = int(round(burn_in_time / cfg.dt))
    if n_steps < 1:
        raise ConfigError("burn_in_time {} is shorter than one step".format(burn_in_time))
    if save_every is None:
        save_every = max(1, n_steps // (10 * int(n_samples)))
    force_seed, pick_seed = split_seeds(cfg.force.seed, 2)
    traj = integrate(initial_condition(cfg.grid.n_modes), n_steps, cfg, K_active,
                     save_every, make_rng(force_seed))
    if traj.blown_up:
        raise IntegrationError("burn-in blew up at step {}".format(traj.blow_up_step))
    candidates = traj.modes[1:] if len(traj) > 1 else traj.modes
    pick = make_rng(pick_seed).choice(
        candidates.shape[0], size=int(n_samples), replace=n_samples > candidates.shape[0])
    logger.debug("drew {} initial states from {} candidates", n_samples, candidates.shape[0])
    return [SpectralField(candidates[i]) for i in pick]

def galerkin_cfl(initial, K, cfg, gap, n_steps, rng=None):
    """Mean CFL number of the K-mode Galerkin system stepped at δ = gap·dt.

    The supremum is taken over a grid that resolves all K modes, and Δx is
    the resolution π/K of the K-mode system. Returns `(cfl, traj)`; cfl is
    None if the Galerkin run blew up."""
    if int(gap) != gap or gap < 1:
        raise ConfigError("gap must be a positive integer, not {!r}".format(gap))
    K = int(K)
    grid = galerkin_grid(K, cfg.grid.viscosity)
    gcfg = cfg.replace(grid=grid, dt=gap * cfg.dt)
    start = np.zeros(grid.n_modes, dtype=np.complex128)
    n = min(K, len(initial))
    start[:n] = initial.modes[:n]
    traj = integrate(SpectralField(start), n_steps, gcfg, K, 1, rng)
    if traj.blown_up:
        return None, traj
    return _mean_cfl(traj.modes[1:] if len(traj) > 1 else traj.modes,
                     grid.grid_points, gcfg.dt, math.pi / K), traj
