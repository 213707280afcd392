"""Contains the infrastructure shared by all sbnar modules: errors, logging,
records, and seeded random number generation."""

__all__ = [ #@
    'SbnarError',
    'ConfigError',
    'DataError',
    'CorruptHeaderError',
    'UnsupportedVersionError',
    'DimensionMismatchError',
    'TruncatedPayloadError',
    'IntegrationError',
    'GenerationError',
    'EvaluationError',
    'Loglevel',
    'get_logger',
    'configure',
    'Record',
    'make_rng',
    'split_seeds',
    'derive_seed',
]

__pdoc__ = { #@
    # Override documentation for the re-exports.
    'Record': "Re-export of `sbnar.common.record.Record`.",
    'Loglevel': "Re-export of `sbnar.common.log.Loglevel`.",
}

from sbnar.common.error import *
from sbnar.common.log import Loglevel, get_logger, configure
from sbnar.common.record import Record
from sbnar.common.rng import make_rng, split_seeds, derive_seed
