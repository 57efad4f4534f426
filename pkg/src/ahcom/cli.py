"""Command-line front end: ``ahcom <pipeline> [--config PATH] [--out DIR] ...``.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures, 4 when the report files cannot be written.  On failure a JSON error record goes to stderr and, when the
output directory is known, to ``error.json`` inside it.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import pipelines, report
from .charges import ChargeConvergenceError, IntegrabilityWarning
from .cmc import CmcSolverError
from .config import ENV_PREFIX, PIPELINES, ConfigError, load_config
from .minkowski import NotFutureTimelikeError
from .models import DecayError, DecayWarning, DomainError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
NUMERIC_ERRORS = (CmcSolverError, NotFutureTimelikeError, DomainError, DecayError,
                  ChargeConvergenceError, ArithmeticError, np.linalg.LinAlgError)


def _ladder(text):
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}") from None


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so usage errors get the config exit code."""

    def error(self, message):
        raise _ArgError(message)


def build_parser():
    p = _Parser(
        prog="ahcom",
        description="Asymptotic charges, center of mass and CMC foliations of "
                    "asymptotically hyperbolic initial data.",
        epilog=f"Every config key can be overridden by an environment variable "
               f"{ENV_PREFIX}<KEY> (upper case).")
    p.add_argument("pipeline", choices=PIPELINES, help="what to compute")
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--out", metavar="DIR", help="output directory (config key 'out')")
    p.add_argument("--strict-decay", action="store_true", default=None,
                   help="fail when a decay ladder check is violated")
    p.add_argument("--bandlimit", type=int, metavar="L", help="spherical harmonic bandlimit")
    p.add_argument("--ladder", type=_ladder, metavar="R1,R2,...", help="charge radius ladder")
    return p


def _fail(exc, code, out_dir):
    record = report.write_error(out_dir, exc, code)
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    out_dir = None
    try:
        args = parser.parse_args(argv)
        overrides = {"pipeline": args.pipeline}
        for key in ("out", "bandlimit", "ladder", "strict_decay"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        cfg = load_config(args.config, overrides=overrides)
        out_dir = cfg["out"]
        if cfg["bandlimit"] < 4:
            raise ConfigError("bandlimit must be >= 4")
    except _ArgError as exc:
        return _fail(ConfigError(str(exc)), EXIT_CONFIG, None)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG, out_dir)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", DecayWarning)
            warnings.simplefilter("always", IntegrabilityWarning)
            data, results = pipelines.run_pipeline(cfg)
        written = report.render(results, cfg, out_dir, data.label)
    except report.ReportError as exc:
        return _fail(exc, EXIT_IO, None)
    except NUMERIC_ERRORS as exc:
        return _fail(exc, EXIT_NUMERIC, out_dir)
    except ValueError as exc:
        # invalid model parameters surface as ValueError from the constructors
        return _fail(ConfigError(str(exc)), EXIT_CONFIG, out_dir)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
