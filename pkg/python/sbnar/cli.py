"""The `sbnar` command-line interface.

    sbnar [switches] simulate
    sbnar [switches] gen-data
    sbnar [switches] fit
    sbnar [switches] validate [--model FILE --reference FILE]
    sbnar [switches] sweep

The toplevel switches select the configuration (see `sbnar.experiment`) and
the logging setup. Errors raised by sbnar are logged and turned into the
exit code of their class: 2 for configuration errors, 3 for data errors, 4
for numerical failures.
"""

import traceback

from plumbum import cli

from sbnar.common.error import SbnarError, ConfigError
from sbnar.common.log import configure, get_logger, parse_loglevel
from sbnar import experiment
from sbnar.version import __version__

logger = get_logger('cli')

def _parse_tee(value):
    filename, sep, level = value.rpartition(':')
    if not sep or not filename:
        raise ConfigError("--tee expects FILE:LEVEL, not {!r}".format(value))
    return filename, parse_loglevel(level)

class SbnarApp(cli.Application):
    """Reduced models of the stochastic Burgers equation."""

    PROGNAME = 'sbnar'
    VERSION = __version__

    verbosity = cli.SwitchAttr(
        ['-v', '--verbosity'], str, default='info',
        help="minimum loglevel written to stderr (trace, debug, info, note, warn, error, fatal, off)")

    tee = cli.SwitchAttr(
        '--tee', str, list=True,
        help="also append log messages of at least LEVEL to FILE; given as FILE:LEVEL")

    config_file = cli.SwitchAttr(
        ['-c', '--config'], cli.ExistingFile, default=None,
        help="JSON experiment configuration")

    scale = cli.SwitchAttr(
        '--scale', cli.Set('quick', 'paper'), default=None,
        help="data size preset, applied before the configuration file")

    seed = cli.SwitchAttr(
        '--seed', int, default=None,
        help="root seed; shorthand for --set data.seed=SEED")

    out = cli.SwitchAttr(
        ['-o', '--out'], str, default=None,
        help="output directory; shorthand for --set output.directory=DIR")

    workers = cli.SwitchAttr(
        ['-j', '--workers'], cli.Range(1, 1024), default=None,
        help="worker processes (default: $SBNAR_WORKERS or 1); results don't depend on it")

    overrides = cli.SwitchAttr(
        '--set', str, list=True,
        help="override a configuration entry, as block.key=value (value parsed as JSON)")

    def config(self):
        cfg = experiment.ExperimentConfig.build(
            None if self.config_file is None else str(self.config_file), self.scale, self.overrides)
        if self.seed is not None:
            cfg = cfg.replace(data={'seed': self.seed})
        if self.out is not None:
            cfg = cfg.replace(output={'directory': self.out})
        return cfg

    def execute(self, fn):
        """Configures logging, builds the configuration, runs fn on it, and
        maps errors to exit codes."""
        try:
            configure(self.verbosity, dict(_parse_tee(t) for t in self.tee))
        except SbnarError as e:
            print("sbnar: {}".format(e))
            return e.exit_code
        try:
            fn(self.config())
        except SbnarError as e:
            logger.error("{}: {}", type(e).__name__, e)
            logger.trace("{}", traceback.format_exc())
            return e.exit_code
        except KeyboardInterrupt:
            logger.error("interrupted")
            return 130
        return 0

    def main(self, *args):
        if args:
            print("sbnar: unknown command {!r}".format(args[0]))
            return 1
        if not self.nested_command:
            self.help()
            return 1

@SbnarApp.subcommand('simulate')
class Simulate(cli.Application):
    """Runs the full model and reports its mean CFL number."""

    def main(self):
        return self.parent.execute(experiment.run_simulate)

@SbnarApp.subcommand('gen-data')
class GenData(cli.Application):
    """Generates the training and validation datasets for every gap."""

    def main(self):
        workers = self.parent.workers
        return self.parent.execute(lambda cfg: experiment.run_gen_data(cfg, workers=workers))

@SbnarApp.subcommand('fit')
class Fit(cli.Application):
    """Fits a model for every gap and lag order from the generated data."""

    data = cli.SwitchAttr(
        '--data', cli.ExistingDirectory, default=None,
        help="directory holding the training datasets (default: OUT/data)")

    def main(self):
        data = None if self.data is None else str(self.data)
        return self.parent.execute(lambda cfg: experiment.run_fit(cfg, data))

@SbnarApp.subcommand('validate')
class Validate(cli.Application):
    """Simulates fitted models and compares their statistics with the data."""

    model = cli.SwitchAttr(
        '--model', cli.ExistingFile, default=None, help="a fitted model file")

    reference = cli.SwitchAttr(
        '--reference', cli.ExistingFile, default=None, help="the reference dataset")

    def main(self):
        model = None if self.model is None else str(self.model)
        reference = None if self.reference is None else str(self.reference)
        return self.parent.execute(lambda cfg: experiment.run_validate(cfg, model, reference))

@SbnarApp.subcommand('sweep')
class Sweep(cli.Application):
    """Generates data, fits, and validates every combination of K, forcing
    scale, gap and lag order, and compares CFL numbers."""

    def main(self):
        workers = self.parent.workers
        return self.parent.execute(lambda cfg: experiment.run_sweep(cfg, workers=workers))

def main():
    SbnarApp.run()

if __name__ == '__main__':
    main()
