"""Command-line front end.

    duffing-qdyn <scenario> [--lambda --beta --kappa --nbar --eta-ph --dim
                             --order --sweep VAR:START:STOP:N --out PREFIX
                             --config FILE ...]
    duffing-qdyn reproduce figN [--out PREFIX]

Parameters are dimensionless: --kappa and --eta-ph are rates in units of the
Hamiltonian's linear coefficient.  A config file holds flat key=value lines
(same keys as the long flags, '#' comments allowed); explicit flags override
it.  Failures emit machine-readable JSON at <prefix>-error.json and a
nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from duffing_qdyn.errors import ConfigError, DuffingError
from duffing_qdyn.scenarios import (
    PRESETS,
    SCENARIOS,
    ScenarioConfig,
    reproduce,
    run_scenario,
    write_outputs,
)

_FLOAT_KEYS = ("lam", "beta", "kappa", "nbar", "eta_ph")
_INT_KEYS = ("dim", "exact_dim", "order", "n_max")


def parse_sweep(text: str) -> tuple[str, float, float, int]:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"sweep must be VAR:START:STOP:N, got {text!r}")
    var, start, stop, points = parts
    try:
        return var, float(start), float(stop), int(points)
    except ValueError as exc:
        raise ConfigError(f"bad sweep specification {text!r}: {exc}") from None


def read_config_file(path: str) -> dict:
    """Flat key=value file; '#' starts a comment."""
    values: dict[str, object] = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key == "sweep":
            values[key] = parse_sweep(value)
        elif key in ("out", "branch", "scenario"):
            values[key] = value
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duffing-qdyn",
        description="Driven Duffing oscillator: attractors, level structure, "
        "stationary distributions, spectra, dephasing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--lambda", dest="lam", type=float, help="quantumness parameter")
        sp.add_argument("--beta", type=float, help="scaled drive strength")
        sp.add_argument("--kappa", type=float, help="damping rate / unit")
        sp.add_argument("--nbar", type=float, help="bath Bose occupation")
        sp.add_argument("--eta-ph", dest="eta_ph", type=float, help="dephasing rate / unit")
        sp.add_argument("--dim", type=int, help="frame Fock dimension for Liouvillians")
        sp.add_argument("--exact-dim", dest="exact_dim", type=int,
                        help="bare-frame dimension for exact diagonalization")
        sp.add_argument("--order", type=int, help="perturbation order (0..4)")
        sp.add_argument("--n-max", dest="n_max", type=int, help="highest level index")
        sp.add_argument("--branch", choices=("las", "has", "both"))
        sp.add_argument("--sweep", type=str, help="VAR:START:STOP:N")
        sp.add_argument("--out", type=str, help="output path prefix")
        sp.add_argument("--config", type=str, help="flat key=value config file")

    rp = sub.add_parser("reproduce", help="run a figure preset")
    rp.add_argument("figure", choices=sorted(PRESETS))
    rp.add_argument("--out", type=str, help="output path prefix")
    return parser


def _error_json(prefix: str, exc: Exception, kind: str) -> None:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    try:
        directory = os.path.dirname(prefix)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(f"{prefix}-error.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        pass
    print(json.dumps(payload), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    prefix = getattr(args, "out", None) or "out/run"
    try:
        if args.command == "reproduce":
            result = reproduce(args.figure, out=args.out)
        else:
            values: dict[str, object] = {"scenario": args.command}
            if args.config:
                file_values = read_config_file(args.config)
                file_values.pop("scenario", None)
                values.update(file_values)
            for key in (*_FLOAT_KEYS, *_INT_KEYS, "branch", "out"):
                flag = getattr(args, key, None)
                if flag is not None:
                    values[key] = flag
            if args.sweep is not None:
                values["sweep"] = parse_sweep(args.sweep)
            config = ScenarioConfig(**values)
            result = run_scenario(config)
        paths = write_outputs(result)
    except ConfigError as exc:
        _error_json(prefix, exc, "config")
        return 2
    except DuffingError as exc:
        _error_json(prefix, exc, "solver")
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
