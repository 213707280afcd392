"""Least-squares estimation of NAR models from a `TrajectoryDataset`.

Every wavenumber is fitted independently. For trajectory m and step
n = p + 1..N_t the response is the one-step misfit of the Galerkin drift,

    r^n_k = u^n_k - u^{n-1}_k - δ [R^δ(u^{n-1})_k + f^n_k],

and the design row holds δ times the active closure features, so the fit
solves r ≈ δΦθ in the least-squares sense over complex θ. The noise
variance estimate is the mean squared residual, σ̂^g_k = RSS_k / S, with S
the number of rows.

The complex problem is handed to `scipy.linalg.lstsq` as is; LAPACK's
complex SVD-based solver is the same computation as a real regression on
stacked real and imaginary parts with two unknowns per coefficient.
Singular values below `rcond` times the largest are cut off, which gives
the pseudo-inverse solution for rank-deficient designs. A ridge penalty is
applied by appending √ridge·I rows. Columns that are identically zero are
dropped before solving and reported.
"""

__all__ = [ #@
    'RegressionProblem',
    'FitReport',
    'ConsistencyTable',
    'build_problem',
    'solve',
    'fit',
    'consistency_study',
    'lag_study',
]

import csv
import math

import numpy as np
import scipy.linalg

from sbnar.common.error import ConfigError, DataError, DimensionMismatchError
from sbnar.common.log import get_logger
from sbnar.common.record import Record, complex_to_json, complex_from_json
from sbnar.dataset import subset, truncate
from sbnar.nar import NarModel, NarSpec, TermMask, design_rows

logger = get_logger('estimate')

DEFAULT_RCOND = 1e-10

class RegressionProblem(object):
    """Design matrices (shape K × S × n_terms, already scaled by δ) and
    responses (shape K × S) for S samples."""

    def __init__(self, spec, design, response):
        super().__init__()
        design = np.asarray(design, dtype=np.complex128)
        response = np.asarray(response, dtype=np.complex128)
        if design.ndim != 3 or design.shape[0] != spec.K or design.shape[2] != spec.n_terms:
            raise DataError("design has shape {}, expected ({}, S, {})".format(
                design.shape, spec.K, spec.n_terms))
        if response.shape != design.shape[:2]:
            raise DataError("response has shape {}, expected {}".format(
                response.shape, design.shape[:2]))
        if not np.all(np.isfinite(design)) or not np.all(np.isfinite(response)):
            raise DataError("regression problem has non-finite entries")
        self._spec = spec
        self._design = design
        self._response = response

    @property
    def spec(self): #@
        return self._spec

    @property
    def design(self): #@
        return self._design

    @property
    def response(self): #@
        return self._response

    @property
    def n_samples(self): #@
        return self._design.shape[1]

    def condition_numbers(self):
        """Returns the 2-norm condition number of each design matrix."""
        out = np.empty(self._spec.K)
        for k in range(self._spec.K):
            sv = scipy.linalg.svdvals(self._design[k])
            out[k] = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
        return out

    def __repr__(self):
        return "RegressionProblem({!r}, n_samples={})".format(self._spec, self.n_samples)

    __str__ = __repr__

def build_problem(ds, spec):
    """Assembles the regression problem for spec from all trajectories of
    ds, skipping the first p steps of each."""
    if ds.meta.K != spec.K:
        raise DimensionMismatchError("dataset has K = {} but the model needs K = {}".format(
            ds.meta.K, spec.K))
    if not math.isclose(ds.meta.delta, spec.delta, rel_tol=1e-12):
        raise DimensionMismatchError("dataset has delta = {} but the model needs {}".format(
            ds.meta.delta, spec.delta))
    if ds.meta.n_steps <= spec.p:
        raise DataError("trajectories of {} steps are too short for lag {}".format(
            ds.meta.n_steps, spec.p))
    designs = []
    responses = []
    for m in range(ds.meta.n_traj):
        features, response = design_rows(ds.u[m], ds.f[m], spec)
        if not np.all(np.isfinite(features)):
            raise DataError("non-finite features in trajectory {}".format(m))
        designs.append(spec.delta * features)
        responses.append(response)
    design = np.concatenate(designs).transpose(1, 0, 2)
    response = np.concatenate(responses).T
    logger.debug("built regression problem: {} samples, {} terms per mode",
                 design.shape[1], spec.n_terms)
    return RegressionProblem(spec, design, response)

class FitReport(object):
    """Result of `solve()`: estimated coefficients and noise variances, plus
    the residual sums of squares, condition numbers, numerical ranks, and
    the mask of dropped (all-zero) columns, all per wavenumber."""

    def __init__(self, spec, theta, sigma_g, rss, condition, rank, dropped, n_samples, ridge=0.0):
        super().__init__()
        self._spec = spec
        self._theta = np.asarray(theta, dtype=np.complex128)
        self._sigma_g = np.asarray(sigma_g, dtype=float)
        self._rss = np.asarray(rss, dtype=float)
        self._condition = np.asarray(condition, dtype=float)
        self._rank = np.asarray(rank, dtype=int)
        self._dropped = np.asarray(dropped, dtype=bool)
        self._n_samples = int(n_samples)
        self._ridge = float(ridge)

    @property
    def spec(self): #@
        return self._spec

    @property
    def theta(self): #@
        return self._theta

    @property
    def sigma_g(self): #@
        return self._sigma_g

    @property
    def rss(self): #@
        return self._rss

    @property
    def condition(self): #@
        return self._condition

    @property
    def rank(self): #@
        return self._rank

    @property
    def dropped(self): #@
        return self._dropped

    @property
    def n_samples(self): #@
        return self._n_samples

    @property
    def ridge(self): #@
        return self._ridge

    def model(self):
        """Returns the fitted `NarModel`."""
        return NarModel(self._spec, self._theta, self._sigma_g)

    def to_record(self):
        columns = self._spec.term_mask.columns
        return Record(
            'fit-report',
            spec=self._spec.to_object(),
            columns=[[family, j] for family, j in columns],
            theta=complex_to_json(self._theta),
            sigma_g=self._sigma_g.tolist(),
            rss=self._rss.tolist(),
            condition=[c if math.isfinite(c) else None for c in self._condition.tolist()],
            rank=self._rank.tolist(),
            dropped=[[family + str(j) for (family, j), d in zip(columns, row) if d]
                     for row in self._dropped.tolist()],
            n_samples=self._n_samples,
            ridge=self._ridge)

    @classmethod
    def from_record(cls, record):
        if record.kind != 'fit-report':
            raise DataError("expected a fit-report record, not {!r}".format(record.kind))
        spec = NarSpec.from_object(record['spec'])
        labels = [family + str(j) for family, j in spec.term_mask.columns]
        dropped = [[label in row for label in labels] for row in record['dropped']]
        condition = [math.inf if c is None else c for c in record['condition']]
        return FitReport(
            spec, np.array(complex_from_json(record['theta'])).reshape(spec.K, spec.n_terms),
            record['sigma_g'], record['rss'], condition, record['rank'], dropped,
            record['n_samples'], record.get('ridge', 0.0))

    def save(self, path):
        self.to_record().save(path)

    def __repr__(self):
        return "FitReport({!r}, n_samples={})".format(self._spec, self._n_samples)

    __str__ = __repr__

def solve(problem, ridge=0.0, rcond=DEFAULT_RCOND):
    """Fits every wavenumber of problem. ridge >= 0 is the Tikhonov penalty
    on the coefficients."""
    ridge = float(ridge)
    if not ridge >= 0.0 or not math.isfinite(ridge):
        raise ConfigError("ridge must be non-negative, not {!r}".format(ridge))
    spec = problem.spec
    K, S, n_terms = problem.design.shape
    theta = np.zeros((K, n_terms), dtype=np.complex128)
    sigma_g = np.zeros(K)
    rss = np.zeros(K)
    condition = np.full(K, math.inf)
    rank = np.zeros(K, dtype=int)
    dropped = np.zeros((K, n_terms), dtype=bool)
    for k in range(K):
        x = problem.design[k]
        y = problem.response[k]
        dropped[k] = ~np.any(x != 0, axis=0)
        keep = ~dropped[k]
        if np.any(dropped[k]):
            logger.warn("mode {}: dropping all-zero columns {}", k + 1, [
                family + str(j) for (family, j), d in zip(spec.term_mask.columns, dropped[k]) if d])
        residual = y
        if np.any(keep):
            xk = x[:, keep]
            if ridge > 0.0:
                xa = np.concatenate([xk, math.sqrt(ridge) * np.eye(xk.shape[1])])
                ya = np.concatenate([y, np.zeros(xk.shape[1])])
            else:
                xa, ya = xk, y
            coef, _, rank[k], sv = scipy.linalg.lstsq(xa, ya, cond=rcond)
            theta[k, keep] = coef
            residual = y - xk @ coef
            sv = scipy.linalg.svdvals(xk)
            condition[k] = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
        rss[k] = float(np.sum(np.abs(residual) ** 2))
        sigma_g[k] = rss[k] / S
        logger.debug("mode {}: rank {}, condition {:.3e}, sigma_g {:.3e}",
                     k + 1, rank[k], condition[k], sigma_g[k])
    return FitReport(spec, theta, sigma_g, rss, condition, rank, dropped, S, ridge)

def fit(ds, spec, ridge=0.0, rcond=DEFAULT_RCOND):
    """Shorthand for `solve(build_problem(ds, spec), ridge)`."""
    return solve(build_problem(ds, spec), ridge, rcond)

class ConsistencyTable(object):
    """Estimated coefficients as a function of the amount of data used."""

    def __init__(self, spec, sizes, n_samples, thetas):
        super().__init__()
        self._spec = spec
        self._sizes = [tuple(size) for size in sizes]
        self._n_samples = list(n_samples)
        self._thetas = np.asarray(thetas, dtype=np.complex128)

    @property
    def spec(self): #@
        return self._spec

    @property
    def sizes(self): #@
        """The (M, N_t) pairs fitted."""
        return self._sizes

    @property
    def n_samples(self): #@
        return self._n_samples

    @property
    def thetas(self): #@
        """Array of shape n_sizes × K × n_terms."""
        return self._thetas

    def max_relative_change(self):
        """Largest change of any coefficient between the last two sizes,
        relative to its final magnitude."""
        if len(self._sizes) < 2:
            raise DataError("need at least two sizes to measure a change")
        last, prev = self._thetas[-1], self._thetas[-2]
        scale = np.maximum(np.abs(last), np.finfo(float).tiny)
        return float(np.max(np.abs(last - prev) / scale))

    def rms_relative_change(self):
        """RMS change over all coefficients between the last two sizes,
        relative to the RMS of the final coefficients."""
        if len(self._sizes) < 2:
            raise DataError("need at least two sizes to measure a change")
        last, prev = self._thetas[-1], self._thetas[-2]
        return float(np.sqrt(np.mean(np.abs(last - prev) ** 2) / np.mean(np.abs(last) ** 2)))

    def write_csv(self, path):
        """One row per size: M, N_t, samples, then Re/Im of each
        coefficient."""
        header = ['M', 'N_t', 'samples']
        for k in range(1, self._spec.K + 1):
            for family, j in self._spec.term_mask.columns:
                header.append('re_c{}{}_k{}'.format(family, j, k))
                header.append('im_c{}{}_k{}'.format(family, j, k))
        with open(str(path), 'w', newline='') as fil:
            writer = csv.writer(fil)
            writer.writerow(header)
            for (M, T), S, theta in zip(self._sizes, self._n_samples, self._thetas):
                row = [M, T, S]
                for value in theta.reshape(-1):
                    row += [repr(float(value.real)), repr(float(value.imag))]
                writer.writerow(row)

def consistency_study(ds, spec, sizes, ridge=0.0):
    """Refits on nested sub-datasets made of the first M trajectories and
    the first N_t steps, for every (M, N_t) in sizes (ascending)."""
    sizes = [(int(M), int(T)) for M, T in sizes]
    if not sizes:
        raise ConfigError("consistency study needs at least one size")
    for (m0, t0), (m1, t1) in zip(sizes, sizes[1:]):
        if m1 < m0 or t1 < t0:
            raise ConfigError("sizes must be ascending, got {} after {}".format((m1, t1), (m0, t0)))
    thetas = []
    samples = []
    for M, T in sizes:
        report = fit(truncate(subset(ds, range(M)), T), spec, ridge)
        logger.info("consistency: M = {}, N_t = {}, {} samples", M, T, report.n_samples)
        thetas.append(report.theta)
        samples.append(report.n_samples)
    return ConsistencyTable(spec, sizes, samples, thetas)

def lag_study(ds, ps, viscosity=None, ridge=0.0, full_mask=False, etd_contour_points=32):
    """Fits one model per lag p in ps on ds, using the default term mask (or
    the full one). Returns a dict from p to `FitReport`, in ascending p."""
    if viscosity is None:
        cfg = ds.meta.full_model_config
        if cfg is None:
            raise ConfigError("dataset doesn't record the viscosity; pass it explicitly")
        viscosity = cfg.grid.viscosity
    reports = {}
    for p in sorted(set(ps)):
        mask = TermMask.full(p) if full_mask else TermMask.default(p)
        spec = NarSpec(ds.meta.K, p, ds.meta.delta, viscosity, mask, etd_contour_points)
        reports[int(p)] = fit(ds, spec, ridge)
        logger.info("lag study: p = {} fitted, sigma_g = {}", p, reports[int(p)].sigma_g.tolist())
    return reports
