"""Command line entry point: ``tailbound run`` and ``tailbound curve``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from .max_tail import MaxTailInputs, max_tail_lower, max_tail_upper_full, max_tail_upper_two_term
from .min_tail import min_tail_combined_bivariate, min_tail_upper, zeta_bivariate
from .oracle import _zeta_label, resolve_betas, validate_bounds
from .phi import build_phi
from .scenario import ConfigError, ScenarioConfig, format_float

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATED, EXIT_HYPOTHESIS = 0, 2, 3, 4


class CliError(Exception):
    """Configuration problem already formatted with a file/line anchor."""


def _line_of(text: str, key: Optional[str]) -> int:
    if key:
        needle = f'"{key}"'
        for i, line in enumerate(text.splitlines(), start=1):
            if needle in line:
                return i
    return 1


def load_config(path, overrides: Optional[dict] = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(f"{path}: cannot read config: {exc.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if isinstance(data, dict) and overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ScenarioConfig.from_dict(data)
    except ConfigError as exc:
        raise CliError(f"{path}:{_line_of(text, exc.key)}: {exc}")


def atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else format_float(v) for v in row])
    return buf.getvalue()


def run_scenario(config_path, out_dir=None, samples=None, seed=None, allow_small_u=False,
                 workers=None):
    """Run a scenario; returns ``(report_path, report)``."""
    overrides = {"samples": samples, "seed": seed, "allow_small_u": True if allow_small_u else None}
    config = load_config(config_path, overrides)
    out = Path(out_dir) if out_dir else Path(config_path).parent
    try:
        report = validate_bounds(config, workers=workers)
    except ConfigError as exc:
        raise CliError(f"{config_path}: {exc}")
    report_path = out / f"{config.name}.report.json"
    atomic_write(report_path, report.to_json())
    atomic_write(out / f"{config.name}.curve.csv",
                 _csv(("u", "bound_name", "bound", "empirical", "stderr"), report.curve_rows()))
    return report_path, report


def curve_rows(config: ScenarioConfig) -> list:
    """Bound values only (no Monte Carlo), grouped by bound then by u."""
    phi = build_phi(config.phi)
    allow = config.allow_small_u
    rows = []
    inputs = None
    if any(b.startswith("max_") for b in config.bounds):
        betas, _ = resolve_betas(config, phi)
        deltas = config.deltas
        if "max_lower" in config.bounds and not isinstance(deltas, tuple):
            raise ConfigError("curves of max_lower need explicit numeric deltas", "deltas")
        inputs = MaxTailInputs(betas, phi, deltas if isinstance(deltas, tuple) else None)
    zparams = config.zeta_params
    if zparams is None and config.distribution is not None:
        p = config.distribution.subgaussian_params()
        zparams = (p,) if p is not None else None
    if any(b in config.bounds for b in ("zeta", "combined")) and zparams is None:
        raise ConfigError("no subgaussian parameters known; give zeta_params", "zeta_params")
    joint = config.distribution.joint_mgf() if config.distribution is not None else None

    for b in config.bounds:
        if b in ("zeta", "combined"):
            for p in zparams:
                name = b if len(zparams) == 1 else _zeta_label(p, b)
                for u in config.u_grid:
                    v = (zeta_bivariate(p, u, allow) if b == "zeta"
                         else min_tail_combined_bivariate(p, joint, u, allow))
                    rows.append((u, name, v))
            continue
        for u in config.u_grid:
            if b == "max_upper_full":
                v = max_tail_upper_full(inputs, u, allow)
            elif b == "max_upper_two_term":
                v = max_tail_upper_two_term(inputs, u, allow)
            elif b == "max_lower":
                v = max_tail_lower(inputs, u, config.pair_sum, allow)
            else:
                v = min_tail_upper(joint, u, allow)
            rows.append((u, b, v))
    return rows


def emit_curve(config_path, bounds: Optional[Sequence[str]] = None, out_dir=None,
               allow_small_u: bool = False) -> Path:
    overrides = {"allow_small_u": True if allow_small_u else None}
    if bounds is not None:
        overrides["bounds"] = list(bounds)
    config = load_config(config_path, overrides)
    try:
        rows = curve_rows(config)
    except ConfigError as exc:
        raise CliError(f"{config_path}: {exc}")
    out = Path(out_dir) if out_dir else Path(config_path).parent
    path = out / f"{config.name}.bounds.csv"
    atomic_write(path, _csv(("u", "bound_name", "bound"), rows))
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tailbound", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate bounds and Monte Carlo verdicts for a scenario")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: next to the config)")
    r.add_argument("--samples", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--allow-small-u", action="store_true")

    c = sub.add_parser("curve", help="write bound curves (no Monte Carlo) to CSV")
    c.add_argument("config")
    c.add_argument("--bounds", default=None, help="comma-separated bound names")
    c.add_argument("--out", default=None)
    c.add_argument("--allow-small-u", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            path, report = run_scenario(args.config, args.out, args.samples, args.seed,
                                        args.allow_small_u)
            print(path)
            return report.exit_code
        bounds = None
        if args.bounds is not None:
            bounds = [b.strip() for b in args.bounds.split(",") if b.strip()]
        print(emit_curve(args.config, bounds, args.out, args.allow_small_u))
        return EXIT_OK
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
