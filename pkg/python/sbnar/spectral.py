"""Fourier representation of real, zero-mean, 2π-periodic fields.

A field u(x) is stored by its coefficients û_k for k = 1..N, using the
continuum convention

    û_k = (1/2π) ∫ u(x) e^{-ikx} dx,      u(x) = Σ_{|k|≤N} û_k e^{ikx},

so sin(x) has û_1 = -i/2. The mean û_0 is never stored (it is identically
zero), negative modes follow from û_{-k} = conj(û_k), and the last stored
slot k = N is the Nyquist mode, which is not representable on the 2N-point
grid. A `SpectralField` keeps it at zero: constructing one with a nonzero
Nyquist slot is a `ConfigError`, and `burgers_nonlinearity()` drops the part
of B̂ that lands there.

Functions prefixed with an underscore operate on raw coefficient arrays whose
last axis holds the modes, so they also work on batches of fields; the
integrators and the reduced model call them directly.
"""

__all__ = [ #@
    'GridConfig',
    'SpectralField',
    'to_physical',
    'to_spectral',
    'burgers_nonlinearity',
    'project_low',
    'energy',
    'galerkin_grid',
]

import math

import numpy as np

from sbnar.common.error import ConfigError

TWO_PI = 2.0 * math.pi

class GridConfig(object):
    """Describes the spatial discretization: N retained modes on [0, 2π]
    sampled at 2N equispaced points, and the viscosity ν of the equation."""

    def __init__(self, n_modes, viscosity, domain_length=TWO_PI):
        super().__init__()
        try:
            n_modes_int = int(n_modes)
        except (TypeError, ValueError):
            raise ConfigError("n_modes must be an integer, not {!r}".format(n_modes))
        if n_modes_int != n_modes or n_modes_int < 2:
            raise ConfigError("n_modes must be an integer >= 2, not {!r}".format(n_modes))
        viscosity = float(viscosity)
        if not viscosity > 0.0 or not math.isfinite(viscosity):
            raise ConfigError("viscosity must be positive, not {!r}".format(viscosity))
        domain_length = float(domain_length)
        if not math.isclose(domain_length, TWO_PI, rel_tol=1e-12):
            raise ConfigError("only the [0, 2π] domain is supported, not length {!r}".format(domain_length))
        self._n_modes = n_modes_int
        self._viscosity = viscosity
        self._domain_length = TWO_PI

    @property
    def n_modes(self): #@
        """N, the largest retained wavenumber."""
        return self._n_modes

    @property
    def viscosity(self): #@
        """The viscosity ν."""
        return self._viscosity

    @property
    def domain_length(self): #@
        """Length of the periodic domain; always 2π."""
        return self._domain_length

    @property
    def grid_points(self): #@
        """Number of physical grid points, 2N."""
        return 2 * self._n_modes

    @property
    def padded_points(self): #@
        """Number of physical points used for dealiased products, 3N."""
        return 3 * self._n_modes

    @property
    def dx(self): #@
        """The grid spacing Δx = 2π / 2N."""
        return self._domain_length / self.grid_points

    @property
    def wavenumbers(self): #@
        """q_k = k for the stored modes k = 1..N, as floats."""
        return np.arange(1, self._n_modes + 1, dtype=float)

    @property
    def x(self): #@
        """The physical grid points x_i = iΔx, i = 0..2N-1."""
        return np.arange(self.grid_points) * self.dx

    def check(self, field):
        """Raises `ConfigError` if field doesn't belong on this grid."""
        if len(field) != self._n_modes:
            raise ConfigError(
                "field has {} modes but the grid has {}".format(len(field), self._n_modes))

    def to_object(self):
        return {'n_modes': self._n_modes, 'viscosity': self._viscosity}

    @classmethod
    def from_object(cls, ob):
        return GridConfig(ob['n_modes'], ob['viscosity'])

    def _key(self):
        return (self._n_modes, self._viscosity)

    def __eq__(self, other):
        if isinstance(other, GridConfig):
            return self._key() == other._key()
        return False

    def __hash__(self):
        return hash(('GridConfig',) + self._key())

    def __repr__(self):
        return "GridConfig(n_modes={!r}, viscosity={!r})".format(self._n_modes, self._viscosity)

    __str__ = __repr__

def galerkin_grid(K, viscosity):
    """Returns the grid used to evaluate a K-mode Galerkin system and the
    reconstructed high modes K < k <= 2K: N = 2K, so every mode up to 2K is
    stored and products of the first K modes are exact."""
    return GridConfig(2 * int(K), viscosity)

class SpectralField(object):
    """An immutable vector of Fourier coefficients û_1..û_N of a real,
    zero-mean periodic field. The Nyquist coefficient û_N must be zero."""

    def __init__(self, modes):
        super().__init__()
        if isinstance(modes, SpectralField):
            modes = modes._modes
        modes = np.array(modes, dtype=np.complex128, copy=True)
        if modes.ndim != 1 or modes.shape[0] < 1:
            raise ConfigError("a field needs a non-empty vector of modes, got shape {}".format(modes.shape))
        if modes[-1] != 0.0:
            raise ConfigError("the Nyquist mode k = {} must be zero, not {!r}".format(
                modes.shape[0], complex(modes[-1])))
        modes.flags.writeable = False
        self._modes = modes

    @classmethod
    def zeros(cls, n_modes):
        """Returns the zero field with n_modes stored modes."""
        return SpectralField(np.zeros(int(n_modes), dtype=np.complex128))

    @classmethod
    def from_modes(cls, n_modes, **coefficients):
        """Constructs a field from keyword arguments of the form `k1=...`,
        `k5=...`; unspecified modes are zero."""
        modes = np.zeros(int(n_modes), dtype=np.complex128)
        for key, value in coefficients.items():
            if not key.startswith('k'):
                raise TypeError("unexpected keyword argument {!r}".format(key))
            k = int(key[1:])
            if k < 1 or k > n_modes:
                raise ConfigError("mode {} out of range 1..{}".format(k, n_modes))
            modes[k - 1] = value
        return SpectralField(modes)

    @property
    def modes(self): #@
        """Read-only complex array of û_1..û_N."""
        return self._modes

    @property
    def n_modes(self): #@
        return self._modes.shape[0]

    def __len__(self):
        return self._modes.shape[0]

    def __getitem__(self, k):
        """Returns û_k for 1 <= k <= N, 0 for k = 0, and the conjugate of
        û_{|k|} for negative k."""
        k = int(k)
        if k == 0:
            return 0j
        if abs(k) > len(self):
            raise IndexError("mode {} out of range".format(k))
        value = complex(self._modes[abs(k) - 1])
        return value if k > 0 else value.conjugate()

    def is_finite(self):
        return bool(np.all(np.isfinite(self._modes)))

    def __eq__(self, other):
        if isinstance(other, SpectralField):
            return np.array_equal(self._modes, other._modes)
        return False

    __hash__ = None

    def __repr__(self):
        return "SpectralField({!r})".format(self._modes.tolist())

    __str__ = __repr__

def _physical(modes, n_points):
    """Samples fields given by raw coefficients (last axis k = 1..n) on
    n_points equispaced points. Modes at or above the Nyquist frequency of
    the sample grid are ignored, which on the 2n-point grid is the slot k = n
    only."""
    n = modes.shape[-1]
    if n_points // 2 < n - 1:
        raise ConfigError("{} points cannot represent {} modes".format(n_points, n))
    m = min(n, (n_points - 1) // 2)
    c = np.zeros(modes.shape[:-1] + (n_points // 2 + 1,), dtype=np.complex128)
    c[..., 1:m + 1] = modes[..., :m]
    return np.fft.irfft(c, n=n_points, axis=-1) * n_points

def _spectral(samples, n_modes, keep_nyquist=False):
    """Inverse of `_physical()`. Returns coefficients k = 1..n_modes; the
    Nyquist slot is zeroed unless keep_nyquist is set."""
    n_points = samples.shape[-1]
    c = np.fft.rfft(samples, axis=-1) / n_points
    out = np.zeros(samples.shape[:-1] + (n_modes,), dtype=np.complex128)
    if keep_nyquist:
        out[...] = c[..., 1:n_modes + 1]
    else:
        out[..., :n_modes - 1] = c[..., 1:n_modes]
    return out

def _square(modes):
    """Dealiased (u²)^_k = Σ_l û_l û_{k-l}, k = 1..n, for raw coefficient
    arrays, evaluated on 3n padded points."""
    n = modes.shape[-1]
    u = _physical(modes, 3 * n)
    return _spectral(u * u, n, keep_nyquist=True)

def _nonlinearity(modes):
    """Dealiased B̂_k = -(ik/2) Σ_l û_l û_{k-l} for raw coefficient arrays."""
    n = modes.shape[-1]
    return (-0.5j * np.arange(1, n + 1)) * _square(modes)

def to_physical(field, grid):
    """Returns u(x_i) on the 2N-point grid of the given configuration."""
    grid.check(field)
    return _physical(field.modes, grid.grid_points)

def to_spectral(samples, grid):
    """Returns the field whose grid samples are given. The mean of the samples
    lives in the discarded û_0."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.shape[0] != grid.grid_points:
        raise ConfigError("expected {} samples, got shape {}".format(grid.grid_points, samples.shape))
    return SpectralField(_spectral(samples, grid.n_modes))

def burgers_nonlinearity(field, grid):
    """Returns B̂(u)_k = -(i q_k/2) Σ_l û_l û_{k-l} for k = 1..N, computed by
    3/2 zero padding. Equals the truncated convolution exactly for k < N;
    the Nyquist entry k = N is set to zero so the result is again a field."""
    grid.check(field)
    b = _nonlinearity(field.modes)
    b[..., -1] = 0.0
    return SpectralField(b)

def project_low(field, K):
    """Keeps the modes k <= K and zeroes the rest."""
    K = int(K)
    if K < 1 or K > len(field):
        raise ConfigError("projection size {} out of range 1..{}".format(K, len(field)))
    modes = np.zeros(len(field), dtype=np.complex128)
    modes[:K] = field.modes[:K]
    return SpectralField(modes)

def energy(field):
    """Returns Σ_{k>=1} |û_k|², half of the energy (1/2π)∫u² dx."""
    modes = field.modes if isinstance(field, SpectralField) else np.asarray(field)
    return float(np.sum(np.abs(modes) ** 2))
