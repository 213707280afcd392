"""Statistics used to compare a reduced model with the full model.

All functions accept mode data in any of these forms: a `Trajectory` (or
`NarRun`), a `TrajectoryDataset`, a complex array of shape n × K (one
series) or M × n × K (M series), or a list of those. Time averages run over
every sample of every series; the autocorrelation only pairs samples within
the same series.

The statistics are

  - the energy spectrum E|û_k|²,
  - the invariant density of Re û_k, as a histogram plus the raw samples,
  - the uncentered autocorrelation E[Re û_k(t + τ) Re û_k(t)] for τ on the
    grid 0, δ, 2δ, ... up to τ_max,

and the comparison metrics built on them: per-mode relative spectrum error,
the two-sample Kolmogorov-Smirnov statistic, and the L²([0, τ_max])
relative error of the autocorrelation.
"""

__all__ = [ #@
    'SpectrumEstimate',
    'PdfEstimate',
    'AcfEstimate',
    'ValidationReport',
    'energy_spectrum',
    'relative_spectrum_error',
    'invariant_density',
    'ks_statistic',
    'acf',
    'acf_relative_error',
    'compare',
]

import csv
import math

import numpy as np
import scipy.integrate
import scipy.stats

from sbnar.common.error import DataError
from sbnar.common.log import get_logger
from sbnar.common.record import Record

logger = get_logger('stats')

MIN_BINS = 50
MAX_BINS = 10000

def _series(data, K=None):
    """Normalizes data into a list of complex arrays of shape n_i × K."""
    if hasattr(data, 'modes') and not isinstance(data, np.ndarray):
        out = [np.asarray(data.modes)]
    elif hasattr(data, 'u') and hasattr(data, 'meta'):
        out = list(np.asarray(data.u))
    elif isinstance(data, (list, tuple)):
        out = []
        for item in data:
            out.extend(_series(item))
    else:
        arr = np.asarray(data, dtype=np.complex128)
        if arr.ndim == 2:
            out = [arr]
        elif arr.ndim == 3:
            out = list(arr)
        else:
            raise DataError("mode data must have 2 or 3 axes, got shape {}".format(arr.shape))
    out = [s for s in out if s.shape[0] > 0]
    if not out:
        raise DataError("no samples")
    width = min(s.shape[1] for s in out)
    if K is None:
        K = width
    if K > width:
        raise DataError("requested {} modes but the data has only {}".format(K, width))
    return [np.asarray(s[:, :K], dtype=np.complex128) for s in out]

def _pooled(data, K=None):
    return np.concatenate(_series(data, K))

class SpectrumEstimate(object):
    """Per-mode mean of |û_k|² with its standard error."""

    def __init__(self, mean, stderr, n_samples):
        super().__init__()
        self.mean = np.asarray(mean, dtype=float)
        self.stderr = np.asarray(stderr, dtype=float)
        self.n_samples = int(n_samples)

    @property
    def K(self): #@
        return self.mean.shape[0]

    def to_object(self):
        return {'mean': self.mean.tolist(), 'stderr': self.stderr.tolist(),
                'n_samples': self.n_samples}

    def write_csv(self, path):
        """Columns k, value, stderr."""
        with open(str(path), 'w', newline='') as fil:
            writer = csv.writer(fil)
            writer.writerow(['k', 'value', 'stderr'])
            for k, (value, err) in enumerate(zip(self.mean, self.stderr), start=1):
                writer.writerow([k, repr(float(value)), repr(float(err))])

    def __repr__(self):
        return "SpectrumEstimate({!r}, n_samples={})".format(self.mean.tolist(), self.n_samples)

def energy_spectrum(data, K=None):
    """Time and ensemble average of |û_k|² for k = 1..K."""
    power = np.abs(_pooled(data, K)) ** 2
    n = power.shape[0]
    stderr = power.std(axis=0) / math.sqrt(n) if n > 1 else np.zeros(power.shape[1])
    return SpectrumEstimate(power.mean(axis=0), stderr, n)

def relative_spectrum_error(model, truth):
    """Returns |E_model(k) - E_true(k)| / E_true(k) per mode."""
    if model.K != truth.K:
        raise DataError("spectra have {} and {} modes".format(model.K, truth.K))
    return np.abs(model.mean - truth.mean) / truth.mean

class PdfEstimate(object):
    """Histogram of Re û_k per mode, and the sorted samples that define the
    empirical distribution function."""

    def __init__(self, samples, edges, masses):
        super().__init__()
        self.samples = [np.sort(np.asarray(s, dtype=float)) for s in samples]
        self.edges = [np.asarray(e, dtype=float) for e in edges]
        self.masses = [np.asarray(m, dtype=float) for m in masses]

    @property
    def K(self): #@
        return len(self.samples)

    def density(self, k):
        """Returns (bin centers, density values) of mode k (1-based)."""
        edges, masses = self.edges[k - 1], self.masses[k - 1]
        return 0.5 * (edges[1:] + edges[:-1]), masses / np.diff(edges)

    def cdf(self, k, x):
        """Evaluates the empirical distribution function of mode k at x."""
        s = self.samples[k - 1]
        return np.searchsorted(s, np.asarray(x, dtype=float), side='right') / s.shape[0]

    def write_csv(self, path):
        """Columns k, left, right, mass."""
        with open(str(path), 'w', newline='') as fil:
            writer = csv.writer(fil)
            writer.writerow(['k', 'left', 'right', 'mass'])
            for k in range(self.K):
                edges, masses = self.edges[k], self.masses[k]
                for left, right, mass in zip(edges[:-1], edges[1:], masses):
                    writer.writerow([k + 1, repr(float(left)), repr(float(right)), repr(float(mass))])

def _bin_count(x):
    """Freedman-Diaconis bin count, clamped to MIN_BINS..MAX_BINS."""
    width = 2.0 * scipy.stats.iqr(x) / x.shape[0] ** (1.0 / 3.0)
    span = float(np.ptp(x))
    if not width > 0.0 or not math.isfinite(span):
        return MIN_BINS
    return int(min(max(math.ceil(span / width), MIN_BINS), MAX_BINS))

def _bin_edges(x):
    return np.histogram_bin_edges(x, bins=_bin_count(x))

def invariant_density(data, K=None):
    """Histogram (Freedman-Diaconis bins, between 50 and 10^4) and empirical
    distribution of Re û_k for every mode."""
    x = _pooled(data, K).real
    samples, edges, masses = [], [], []
    for k in range(x.shape[1]):
        e = _bin_edges(x[:, k])
        counts, e = np.histogram(x[:, k], bins=e)
        samples.append(x[:, k])
        edges.append(e)
        masses.append(counts / counts.sum())
    return PdfEstimate(samples, edges, masses)

def ks_statistic(a, b, k=None):
    """Two-sample K-S statistic between the raw samples of mode k (1-based)
    of a and b, or an array over all shared modes if k is None."""
    if k is not None:
        return float(scipy.stats.ks_2samp(a.samples[k - 1], b.samples[k - 1]).statistic)
    K = min(a.K, b.K)
    return np.array([ks_statistic(a, b, k) for k in range(1, K + 1)])

class AcfEstimate(object):
    """Uncentered autocorrelation of Re û_k; values has shape K × len(lags)."""

    def __init__(self, lags, values):
        super().__init__()
        self.lags = np.asarray(lags, dtype=float)
        self.values = np.asarray(values, dtype=float)

    @property
    def K(self): #@
        return self.values.shape[0]

    def write_csv(self, path):
        """Columns tau, then one per mode."""
        with open(str(path), 'w', newline='') as fil:
            writer = csv.writer(fil)
            writer.writerow(['tau'] + ['k{}'.format(k) for k in range(1, self.K + 1)])
            for i, tau in enumerate(self.lags):
                writer.writerow([repr(float(tau))] + [repr(float(v)) for v in self.values[:, i]])

def _lag_sums(x, n_lags):
    """Σ_n x[n + j] x[n] for j < n_lags along axis 0, via zero-padded FFT."""
    n = x.shape[0]
    size = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(x, n=size, axis=0)
    return np.fft.irfft(spec * np.conj(spec), n=size, axis=0)[:n_lags]

def acf(data, delta, tau_max=3.0, K=None):
    """Uncentered autocorrelation on the lag grid 0, δ, .., with the largest
    multiple of δ not exceeding tau_max, averaged over all valid pairs."""
    delta = float(delta)
    if not delta > 0.0:
        raise DataError("delta must be positive, not {!r}".format(delta))
    n_lags = int(math.floor(tau_max / delta + 1e-9)) + 1
    series = _series(data, K)
    if max(s.shape[0] for s in series) < n_lags:
        raise DataError("series of {} samples are too short for lags up to {}".format(
            max(s.shape[0] for s in series), tau_max))
    sums = np.zeros((n_lags, series[0].shape[1]))
    counts = np.zeros(n_lags)
    for s in series:
        usable = min(n_lags, s.shape[0])
        sums[:usable] += _lag_sums(s.real, usable)
        counts[:usable] += s.shape[0] - np.arange(usable)
    return AcfEstimate(np.arange(n_lags) * delta, (sums / counts[:, None]).T)

def acf_relative_error(a, b):
    """Returns ‖a - b‖ / ‖b‖ per mode in L² over the lag interval, using the
    trapezoidal rule on the lag grid."""
    if a.lags.shape != b.lags.shape or not np.allclose(a.lags, b.lags):
        raise DataError("autocorrelations use different lag grids")
    K = min(a.K, b.K)
    diff = scipy.integrate.trapezoid((a.values[:K] - b.values[:K]) ** 2, a.lags, axis=-1)
    norm = scipy.integrate.trapezoid(b.values[:K] ** 2, b.lags, axis=-1)
    return np.sqrt(diff / norm)

class ValidationReport(object):
    """Statistics of a reduced model run next to those of the reference data,
    with the comparison metrics, the stability verdict, and CFL numbers."""

    def __init__(self, spectrum, truth_spectrum, spectrum_error, ks, acf_error,
                 verdict='stable', blow_up_step=None, blow_up_time=None, cfl=None,
                 baseline=None):
        super().__init__()
        self.spectrum = spectrum
        self.truth_spectrum = truth_spectrum
        self.spectrum_error = np.asarray(spectrum_error, dtype=float)
        self.ks = None if ks is None else np.asarray(ks, dtype=float)
        self.acf_error = None if acf_error is None else np.asarray(acf_error, dtype=float)
        self.verdict = verdict
        self.blow_up_step = blow_up_step
        self.blow_up_time = blow_up_time
        self.cfl = dict(cfl or {})
        self.baseline = baseline

    @property
    def stable(self): #@
        return self.verdict == 'stable'

    def summary(self):
        """Returns the headline numbers as a dict."""
        return {
            'verdict': self.verdict,
            'max_spectrum_error': float(np.max(self.spectrum_error)),
            'max_ks': None if self.ks is None else float(np.max(self.ks)),
            'max_acf_error': None if self.acf_error is None else float(np.max(self.acf_error)),
        }

    def to_record(self):
        ob = {
            'verdict': self.verdict,
            'blow_up_step': self.blow_up_step,
            'blow_up_time': self.blow_up_time,
            'spectrum': self.spectrum.to_object(),
            'truth_spectrum': self.truth_spectrum.to_object(),
            'spectrum_error': self.spectrum_error.tolist(),
            'ks': None if self.ks is None else self.ks.tolist(),
            'acf_error': None if self.acf_error is None else self.acf_error.tolist(),
            'cfl': self.cfl,
            'summary': self.summary(),
        }
        if self.baseline is not None:
            ob['galerkin_baseline'] = self.baseline.to_record().to_object()
        return Record('validation-report', **ob)

    def save(self, path):
        self.to_record().save(path)

    def __repr__(self):
        return "ValidationReport({!r})".format(self.summary())

def compare(run, truth, delta, K=None, tau_max=3.0, cfl=None, baseline=None):
    """Builds a `ValidationReport` of run (typically a `NarRun`) against the
    reference data truth.

    A run that blew up before producing enough samples for an
    autocorrelation still gets a spectrum; K-S and ACF errors are then
    omitted."""
    if K is None:
        K = _series(run)[0].shape[1]
    truth_spectrum = energy_spectrum(truth, K)
    spectrum = energy_spectrum(run, K)
    error = relative_spectrum_error(spectrum, truth_spectrum)
    ks = acf_error = None
    run_len = max(s.shape[0] for s in _series(run, K))
    if run_len > int(math.floor(tau_max / delta + 1e-9)):
        ks = ks_statistic(invariant_density(run, K), invariant_density(truth, K))
        acf_error = acf_relative_error(acf(run, delta, tau_max, K), acf(truth, delta, tau_max, K))
    verdict = getattr(run, 'verdict', 'stable')
    report = ValidationReport(
        spectrum, truth_spectrum, error, ks, acf_error, verdict,
        getattr(run, 'blow_up_step', None), getattr(run, 'blow_up_time', None), cfl, baseline)
    logger.debug("validation: {}", report.summary())
    return report
