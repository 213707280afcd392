"""Logging setup for sbnar.

sbnar logs through Python's `logging` module under the `sbnar` logger. Two
extra levels are registered, trace (5) and note (25), so the loglevel set
matches `Loglevel`. Library code obtains its logger through `get_logger()`;
the command-line interface calls `configure()` once to attach handlers.
"""

__all__ = [ #@
    'Loglevel',
    'Logger',
    'get_logger',
    'configure',
    'parse_loglevel',
]

from enum import IntEnum
import logging
import sys

from sbnar.common.error import ConfigError

logging.addLevelName(25, "NOTE")
logging.addLevelName(5, "TRACE")

class Loglevel(IntEnum):
    """Enumeration of the loglevels available in sbnar. The values are the
    corresponding `logging` severities."""

    TRACE = 5
    DEBUG = logging.DEBUG
    INFO = logging.INFO
    NOTE = 25
    WARN = logging.WARNING
    ERROR = logging.ERROR
    FATAL = logging.CRITICAL
    OFF = logging.CRITICAL + 10

def parse_loglevel(value):
    """Converts a loglevel name (case-insensitive) or a `Loglevel` into a
    `Loglevel`."""
    if isinstance(value, Loglevel):
        return value
    try:
        return Loglevel[str(value).upper()]
    except KeyError:
        raise ConfigError("unknown loglevel {!r}".format(value))

class Logger(logging.LoggerAdapter):
    """Logger adapter with the sbnar convenience functions.

    If any additional positional or keyword arguments are passed to a logging
    function, the message is formatted using `str.format()`. Otherwise, `str()`
    is applied to the message."""

    def __init__(self, logger):
        super().__init__(logger, {})

    def log(self, level, msg, *args, **kwargs):
        if not isinstance(level, Loglevel):
            raise TypeError('level must be a Loglevel')
        if not self.isEnabledFor(int(level)):
            return
        exc_info = kwargs.pop('exc_info', None)
        msg = str(msg)
        if args or kwargs:
            msg = msg.format(*args, **kwargs)
        # stacklevel 3 points the record at the caller of trace()/info()/...
        self.logger.log(int(level), msg, exc_info=exc_info, stacklevel=3)

    def trace(self, msg, *args, **kwargs):
        """Convenience function for logging trace messages. See `log()`."""
        self.log(Loglevel.TRACE, msg, *args, **kwargs)

    def debug(self, msg, *args, **kwargs):
        """Convenience function for logging debug messages. See `log()`."""
        self.log(Loglevel.DEBUG, msg, *args, **kwargs)

    def info(self, msg, *args, **kwargs):
        """Convenience function for logging info messages. See `log()`."""
        self.log(Loglevel.INFO, msg, *args, **kwargs)

    def note(self, msg, *args, **kwargs):
        """Convenience function for logging note messages. See `log()`."""
        self.log(Loglevel.NOTE, msg, *args, **kwargs)

    def warn(self, msg, *args, **kwargs):
        """Convenience function for logging warning messages. See `log()`."""
        self.log(Loglevel.WARN, msg, *args, **kwargs)

    def error(self, msg, *args, **kwargs):
        """Convenience function for logging error messages. See `log()`."""
        self.log(Loglevel.ERROR, msg, *args, **kwargs)

    def fatal(self, msg, *args, **kwargs):
        """Convenience function for logging fatal messages. See `log()`."""
        self.log(Loglevel.FATAL, msg, *args, **kwargs)

    warning = warn
    critical = fatal

def get_logger(name):
    """Returns the `Logger` for the given sbnar module name."""
    if not name.startswith('sbnar'):
        name = 'sbnar.' + name
    return Logger(logging.getLogger(name))

_FORMAT = '%(asctime)s %(levelname)-5s %(name)s: %(message)s'

def configure(stderr_verbosity=Loglevel.INFO, tee=None):
    """Attaches handlers to the `sbnar` logger.

    `stderr_verbosity` sets the minimum loglevel needed for a message to be
    written to `stderr`. `tee` maps log output filenames to loglevel filters;
    each entry causes messages that pass the filter to be appended to that
    file as well. Calling this again replaces the handlers installed by the
    previous call."""
    stderr_verbosity = parse_loglevel(stderr_verbosity)
    tee = dict(tee or {})
    for key, value in tee.items():
        if not isinstance(key, str):
            raise TypeError("tee file key must be a string")
        tee[key] = parse_loglevel(value)

    root = logging.getLogger('sbnar')
    for handler in list(root.handlers):
        if getattr(handler, '_sbnar', False):
            root.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(_FORMAT)
    handlers = [(logging.StreamHandler(sys.stderr), stderr_verbosity)]
    for filename, level in sorted(tee.items()):
        handlers.append((logging.FileHandler(filename), level))
    for handler, level in handlers:
        handler.setLevel(int(level))
        handler.setFormatter(formatter)
        handler._sbnar = True
        root.addHandler(handler)

    levels = [int(level) for _, level in handlers]
    root.setLevel(min(levels))
    root.propagate = False
