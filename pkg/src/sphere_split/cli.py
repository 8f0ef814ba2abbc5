"""sphere-split command line: simulate, analytic, verify.

Exit codes: 0 ok, 1 gate failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, analytics, estimate, poissontess, splitproc, suite
from ._rng import DEFAULT_SEED
from .dirdist import DirectionDistribution

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "SPHERE_SPLIT_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: str = "split"
    d: str = "2"
    t: float = 1.0
    kappa: str = "uniform"
    n: int = 1
    seed: int = DEFAULT_SEED
    jobs: int = 1
    out: str | None = None
    formula: str | None = None
    grid: str | None = None
    r: str | None = None
    s: str | None = None
    scale: str = "quick"
    only: str | None = None
    threshold: float | None = None
    params: dict = field(default_factory=dict)

    def dim(self) -> int:
        try:
            d = int(self.d)
        except ValueError:
            raise ConfigError(f"--d must be an integer here, got {self.d!r}") from None
        if d < 2:
            raise ConfigError("d must be >= 2")
        return d

    def validate(self) -> "RunConfig":
        if self.model not in ("split", "poisson"):
            raise ConfigError(f"unknown model {self.model!r}")
        if not (self.t >= 0.0) or math.isinf(self.t):
            raise ConfigError("t must be a finite number >= 0")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.scale not in suite.SCALES:
            raise ConfigError(f"scale must be one of {sorted(suite.SCALES)}")
        return self


CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"command", "params"}
_TYPES = {"t": float, "n": int, "seed": int, "jobs": int, "threshold": float}


def parse_grid(spec: str) -> list[float]:
    """``a:b:step`` (inclusive of b up to rounding), ``a..b`` (integers) or a comma list."""
    spec = spec.strip()
    try:
        if ".." in spec:
            a, b = spec.split("..")
            return [float(v) for v in range(int(a), int(b) + 1)]
        if ":" in spec:
            a, b, step = (float(v) for v in spec.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"bad grid {spec!r}")
            k = int(math.floor((b - a) / step + 1e-9))
            return [round(a + i * step, 12) for i in range(k + 1)]
        return [float(v) for v in spec.split(",") if v]
    except ValueError:
        raise ConfigError(f"cannot parse grid {spec!r}") from None


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e}") from None
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected key=value")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        out[key] = val.strip()
    return out


def _coerce(key: str, val):
    if val is None:
        return None
    try:
        return _TYPES[key](val) if key in _TYPES else val
    except ValueError:
        raise ConfigError(f"bad value for {key}: {val!r}") from None


def build_config(ns: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(ns, "config", None):
        values.update(read_config_file(ns.config))
    for key in CONFIG_KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = v
    if "seed" not in values and os.environ.get(SEED_ENV):
        values["seed"] = os.environ[SEED_ENV]
    params = {}
    for item in getattr(ns, "param", None) or ():
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        params[k] = float(v)
    cfg = RunConfig(command=ns.command, params=params, **{k: _coerce(k, v) for k, v in values.items()})
    if cfg.jobs is None:
        cfg.jobs = 1
    return cfg.validate()


# --- commands --------------------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_simulate(cfg: RunConfig) -> int:
    d = cfg.dim()
    try:
        kappa = DirectionDistribution.parse(cfg.kappa, d)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(cfg.out or ".")
    for i in range(cfg.n):
        seed = cfg.seed if cfg.n == 1 else cfg.seed + i
        tag = "" if cfg.n == 1 else f"_{i:05d}"
        if cfg.model == "split":
            Y = splitproc.simulate(d, kappa, cfg.t, seed)
            _write(out / f"events{tag}.csv", splitproc.events_csv(Y))
            _write(out / f"snapshot{tag}.json", splitproc.snapshot_json(Y))
            print(f"split d={d} t={cfg.t!r} seed={seed}: {len(Y.events)} events, {len(Y.cells)} cells")
        else:
            P = poissontess.sample(d, kappa, cfg.t, seed)
            _write(out / f"normals{tag}.csv", poissontess.normals_csv(P))
            _write(out / f"snapshot{tag}.json", poissontess.snapshot_json(P))
            cells = P.arrangement.n_cells if P.arrangement else poissontess.face_counts(P.n, d, d)
            print(f"poisson d={d} t={cfg.t!r} seed={seed}: {P.n} hyperspheres, {cells} cells")
    return EXIT_OK


def cmd_analytic(cfg: RunConfig) -> int:
    name = cfg.formula
    if not name:
        raise ConfigError("--formula is required; known: " + ", ".join(sorted(analytics.REGISTRY)))
    if name not in analytics.REGISTRY:
        raise ConfigError(f"unknown formula {name!r}; did you mean: " + ", ".join(analytics.suggest(name)))
    f = analytics.REGISTRY[name]
    given = {"d": cfg.d, "t": cfg.t, "r": cfg.r, "s": cfg.s}
    grid_spec = cfg.grid or given.get(f.grid_param)
    if grid_spec is None:
        raise ConfigError(f"formula {name!r} tabulates over {f.grid_param}; pass --grid or --{f.grid_param}")
    grid = parse_grid(str(grid_spec))
    params = dict(cfg.params)
    for p in f.params:
        if p in params:
            continue
        if p == "d":
            params["d"] = cfg.dim()
        elif p == "t":
            params["t"] = cfg.t
        else:
            raise ConfigError(f"formula {name!r} needs --param {p}=<value>")
    try:
        header, rows = analytics.tabulate(name, grid, **params)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    text = analytics.table_csv(header, rows, name)
    if name == "birth_density":
        total = analytics.birth_density_total(int(params["d"]), params["t"])
        text += f"# total_mass={total!r}\n"
    if cfg.out:
        _write(Path(cfg.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, list_only: bool = False) -> int:
    if list_only:
        for g in suite.manifest():
            print(f"{g['criterion']:2d}  {g['description']}  (z <= {g['z_threshold']:.3f})")
        return EXIT_OK
    only = None
    if cfg.only:
        try:
            only = {int(v) for v in str(cfg.only).split(",")}
        except ValueError:
            raise ConfigError(f"--only expects criterion numbers, got {cfg.only!r}") from None
        if not only <= set(suite.CRITERIA):
            raise ConfigError("unknown criterion in --only")

    def progress(res):
        print(f"{res.line()}  [{res.wall_time:.1f} s]", flush=True)
        for f in res.failures():
            print(f"      {f}", flush=True)

    results = suite.run_suite(cfg.scale, cfg.seed, cfg.jobs, only=only, progress=progress, threshold=cfg.threshold)
    ok = all(r.passed for r in results)
    if cfg.out:
        doc = {
            "version": __version__,
            "scale": cfg.scale,
            "seed": cfg.seed,
            "pass": ok,
            "criteria": [r.to_dict() for r in results],
            "metadata": {"created_unix": time.time()},
        }
        _write(Path(cfg.out), json.dumps(doc, indent=1, sort_keys=True, default=_json_default))
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if ok else EXIT_GATE


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return repr(o)


# --- argument parsing ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override its values")
    common.add_argument("--seed", help=f"master seed (fallback: ${SEED_ENV}, then {DEFAULT_SEED})")
    common.add_argument("--jobs", help="worker processes")
    common.add_argument("--out", help="output path (directory for simulate)")
    common.add_argument("--d", help="dimension, or a range a..b where the formula tabulates over d")
    common.add_argument("--t", help="time / intensity")

    p = argparse.ArgumentParser(prog="sphere-split", description="Splitting tessellations of the sphere.")
    p.add_argument("--version", action="version", version=f"sphere-split {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate one or more tessellations")
    s.add_argument("--model", choices=["split", "poisson"])
    s.add_argument("--kappa", help="'uniform' or 'axial:beta=<b>[:axis=<c,...>]'")
    s.add_argument("--n", help="number of replicates (seeds seed, seed+1, ...)")

    a = sub.add_parser("analytic", parents=[common], help="tabulate a closed-form formula")
    a.add_argument("--formula")
    a.add_argument("--grid", help="a:b:step, a..b or a comma list")
    a.add_argument("--r", help="grid for r-indexed formulas")
    a.add_argument("--s", help="grid for s-indexed formulas")
    a.add_argument("--param", action="append", help="extra formula parameter key=value")

    v = sub.add_parser("verify", parents=[common], help="run the verification suite")
    v.add_argument("--scale", choices=sorted(suite.SCALES))
    v.add_argument("--list", action="store_true", help="print the gates and exit")
    v.add_argument("--only", help="comma list of criterion numbers")
    v.add_argument("--threshold", help="override the z threshold of every gate")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        cfg = build_config(ns)
        if cfg.command == "simulate":
            return cmd_simulate(cfg)
        if cfg.command == "analytic":
            return cmd_analytic(cfg)
        return cmd_verify(cfg, list_only=ns.list)
    except ConfigError as e:
        print(f"sphere-split: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
