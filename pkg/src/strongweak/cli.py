"""Command line front end.

    strongweak run CONFIG
    strongweak verify CONFIG
    strongweak scan CONFIG --param protocol.alpha.stop=1:2:3 [--param ...]

Configs are YAML files with a ``scenario`` key (``finite_dim``, ``tof``,
``bohmian`` or ``spin``) and nested sections for the physics, grid,
potential, initial state, propagation and protocol.  Relative output
directories are resolved against ``$STRONGWEAK_OUTPUT_ROOT`` (default: the
working directory).

Exit status: 0 when every check passes, 1 on a failed check or a module
error, 2 on a bad config.
"""
from __future__ import annotations

import argparse
import copy
import datetime
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import yaml

from . import __version__
from .errors import ConfigError, ScenarioError
from .scenarios import RUNNERS, Emitter, validate

log = logging.getLogger("strongweak")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
OUTPUT_ROOT_ENV = "STRONGWEAK_OUTPUT_ROOT"


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path!r} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path!r} must be a mapping at top level")
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form, ignoring where output goes."""
    body = {k: v for k, v in cfg.items() if k != "output_dir"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def output_dir_for(cfg: dict, override=None) -> str:
    out = override or cfg.get("output_dir") or os.path.join("results", str(cfg.get("scenario")))
    if not os.path.isabs(out):
        out = os.path.join(os.environ.get(OUTPUT_ROOT_ENV, os.getcwd()), out)
    return out


def execute(cfg: dict, out_dir=None, reduced=False):
    """Run one scenario; returns ``(checks, manifest)``.  ``out_dir=None`` writes nothing."""
    scenario = validate(cfg)
    digest = config_hash(cfg)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    emit = Emitter(out_dir, digest)
    start = time.perf_counter()
    checks = RUNNERS[scenario](cfg, emit, reduced)
    wall = time.perf_counter() - start
    manifest = {
        "config_hash": digest,
        "version": __version__,
        "scenario": scenario,
        "seed": cfg.get("seed"),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "wall_time_s": wall,
        "files": [{"name": n, "sha256": h} for n, h in sorted(emit.files.items())],
        "checks": {c.name: c.as_dict() for c in checks},
        "passed": all(c.passed for c in checks),
    }
    if out_dir is not None:
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return checks, manifest


def _report(checks, stream=sys.stdout):
    for c in checks:
        op = "<=" if c.kind == "max" else ">="
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} {op} {c.limit:.1e}",
              file=stream)


def _guarded(fn):
    """Map config and scenario errors to exit codes with a one-line message."""
    try:
        return fn()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"scenario error at {exc.location}: {exc}", file=sys.stderr)
        return EXIT_FAILED


def cmd_run(args) -> int:
    def go():
        cfg = load_config(args.config)
        out = output_dir_for(cfg, args.output_dir)
        checks, manifest = execute(cfg, out)
        _report(checks)
        print(f"wrote {len(manifest['files'])} files and manifest.json to {out}")
        return EXIT_OK if manifest["passed"] else EXIT_FAILED
    return _guarded(go)


def cmd_verify(args) -> int:
    def go():
        cfg = load_config(args.config)
        checks, manifest = execute(cfg, None, reduced=True)
        _report(checks)
        print("verify:", "all checks passed" if manifest["passed"] else "FAILED")
        return EXIT_OK if manifest["passed"] else EXIT_FAILED
    return _guarded(go)


# -- scan -----------------------------------------------------------------------------

def parse_range(text: str) -> list:
    """``a:b:n`` (n evenly spaced values) or a comma-separated list."""
    if text.count(":") == 2:
        a, b, n = text.split(":")
        try:
            a, b, n = float(a), float(b), int(n)
        except ValueError:
            raise ConfigError(f"bad range {text!r}; expected start:stop:count") from None
        if n < 1:
            raise ConfigError(f"bad range {text!r}; count must be positive")
        if n == 1:
            return [a]
        return [a + (b - a) * i / (n - 1) for i in range(n)]
    return [yaml.safe_load(item) for item in text.split(",") if item.strip()]


def parse_param(spec: str):
    if "=" not in spec:
        raise ConfigError(f"--param {spec!r} must look like path=range")
    path, rng = spec.split("=", 1)
    return path.strip(), parse_range(rng.strip())


def set_path(cfg: dict, path: str, value):
    keys = path.split(".")
    node = cfg
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
            continue
        if key not in node or not isinstance(node[key], (dict, list)):
            node[key] = {}
        node = node[key]
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def expand(cfg: dict, params) -> list:
    """Cartesian product of parameter ranges -> list of ``(overrides, config)``."""
    paths = [p for p, _ in params]
    points = []
    for combo in itertools.product(*(values for _, values in params)):
        point = copy.deepcopy(cfg)
        for path, value in zip(paths, combo):
            set_path(point, path, value)
        points.append((dict(zip(paths, combo)), point))
    return points


def _scan_point(job):
    cfg, out_dir = job
    try:
        _, manifest = execute(cfg, out_dir)
        return {"passed": manifest["passed"], "config_hash": manifest["config_hash"]}
    except ConfigError as exc:
        return {"passed": False, "error": f"config error: {exc}", "code": EXIT_CONFIG}
    except ScenarioError as exc:
        return {"passed": False, "error": f"{exc.location}: {exc}", "code": EXIT_FAILED}


def cmd_scan(args) -> int:
    def go():
        cfg = load_config(args.config)
        params = [parse_param(p) for p in args.param]
        if not params:
            raise ConfigError("scan needs at least one --param path=range")
        base = output_dir_for(cfg, args.output_dir)
        points = expand(cfg, params)
        for _, point in points:
            validate(point)
        jobs = [(point, os.path.join(base, f"point_{i:04d}")) for i, (_, point) in enumerate(points)]
        os.makedirs(base, exist_ok=True)
        workers = args.workers or os.cpu_count() or 1
        if workers == 1 or len(jobs) == 1:
            results = [_scan_point(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_scan_point, jobs))
        summary = {
            "config_hash": config_hash(cfg),
            "version": __version__,
            "parameters": {p: v for p, v in params},
            "points": [dict(index=i, overrides=ov, directory=os.path.basename(job[1]), **res)
                       for i, ((ov, _), job, res) in enumerate(zip(points, jobs, results))],
        }
        with open(os.path.join(base, "scan_manifest.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        n_ok = sum(r["passed"] for r in results)
        print(f"scan: {n_ok}/{len(results)} points passed; results in {base}")
        if any(r.get("code") == EXIT_CONFIG for r in results):
            return EXIT_CONFIG
        return EXIT_OK if n_ok == len(results) else EXIT_FAILED
    return _guarded(go)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strongweak",
                                     description="Weak values from strong measurement statistics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write CSV outputs plus a manifest")
    p.add_argument("config")
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run only the invariant checks, at reduced size")
    p.add_argument("config")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scan", help="sweep config parameters (Cartesian product)")
    p.add_argument("config")
    p.add_argument("--param", action="append", default=[], metavar="PATH=RANGE",
                   help="dotted config path and a:b:n range or comma list; repeatable")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
