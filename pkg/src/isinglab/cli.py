"""Command-line entry point: ``isinglab SUBCOMMAND [--key value ...]``.

Configuration comes from defaults, then an optional ``--config`` file of
``key=value`` lines, then flags. Results are written as CSV or JSON
records. Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import mpmath
import numpy as np

from .lattice import BoundaryCondition, Couplings, build_lattice, ghost_augment, read_edgelist
from .transfer import strip_extrapolate

CSV_HEADER = "experiment,params,observable,value,stderr,provenance,seconds"
FORMATS = ("csv", "json")
P_C = math.sqrt(2) / (1 + math.sqrt(2))


class ConfigError(ValueError):
    """Invalid configuration or arguments (exit code 1)."""


def _ints(text):
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    text = str(text).strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


def _window(text):
    if text is None or isinstance(text, tuple):
        return text
    lo, sep, hi = str(text).partition(":")
    if not sep:
        raise ConfigError("window must look like LO:HI")
    return (float(lo), float(hi))


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text in (None, "", "none") else float(text)


COMMON = {
    "seed": (int, 0),
    "threads": (int, None),
    "format": (str, "csv"),
    "output": (str, "-"),
    "record_time": (_bool, False),
}

SCHEMAS = {
    "exact": {"lattice": (str, "box:3x3"), "beta": (float, 0.4), "h": (float, 0.0),
              "bc": (str, "free"), "method": (str, "enumerate")},
    "mc": {"algo": (str, "sw"), "beta": (float, 0.4), "h": (float, 0.0), "L": (int, 16),
           "d": (int, 2), "topology": (str, "torus"), "bc": (str, "free"),
           "sweeps": (int, 2000), "burnin": (int, 200), "chains": (int, 4),
           "observable": (str, "abs_m"), "init": (str, "plus")},
    "fk": {"mode": (str, "crossing"), "n": (int, 8), "rho": (float, 1.0), "p": (float, P_C),
           "sweeps": (int, 2000), "burnin": (int, 100), "chains": (int, 2),
           "lattice": (str, "box:3x3"), "beta": (float, 0.5)},
    "currents": {"mode": (str, "correlation"), "lattice": (str, "box:2x3"),
                 "beta": (float, 0.5), "h": (float, 0.0), "A": (_ints, (0, 1)), "B": (_ints, ()),
                 "n_max": (int, 10), "functional": (str, "one"), "kind": (str, "chi-bubble")},
    "check": {"kind": (str, "ghs"), "trials": (int, 50), "size_cap": (int, 9),
              "q": (_opt_float, None)},
    "scaling": {"kind": (str, "beta-magnetization"), "L": (int, 64), "sweeps": (int, 20000),
                "burnin": (int, 500), "window": (_window, None), "chains": (int, 1),
                "separations": (_ints, (16, 32))},
    "holo": {"mode": (str, "residual"), "input": (str, "")},
}

# keys that change neither the computation nor its output bytes
NOT_ECHOED = ("threads", "format", "output", "record_time")


@dataclass
class ResultRecord:
    experiment: str
    params: dict
    observable: str
    value: float
    stderr: float | None
    provenance: str
    seconds: float | None = None


# ---------------------------------------------------------------------------
# configuration


def _schema(cmd):
    if cmd not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {cmd!r}")
    return {**COMMON, **SCHEMAS[cmd]}


def _convert(schema, key, raw):
    if key not in schema:
        raise ConfigError(f"unknown key {key!r}")
    conv = schema[key][0]
    try:
        return conv(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path) -> dict:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{n}: expected key=value")
        key = key.strip().replace("-", "_")
        if key in out:
            raise ConfigError(f"{path}:{n}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


def _validate(cmd, cfg):
    if cfg.get("beta") is not None and not cfg["beta"] >= 0:
        raise ConfigError("beta must be >= 0")
    if cfg["format"] not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if cfg["threads"] is not None and cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    for k in ("sweeps", "chains", "trials", "L", "n", "n_max"):
        if k in cfg and cfg[k] is not None and cfg[k] < 1:
            raise ConfigError(f"{k} must be >= 1")
    if "burnin" in cfg and not 0 <= cfg["burnin"] < cfg["sweeps"]:
        raise ConfigError("need 0 <= burnin < sweeps")
    if "lattice" in cfg:
        parse_lattice(cfg["lattice"])
    if "bc" in cfg:
        try:
            BoundaryCondition.parse(cfg["bc"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def parse_config(cmd: str, flags: dict, file: str | None = None) -> dict:
    """Merge defaults, file values and flags (in increasing precedence)."""
    schema = _schema(cmd)
    cfg = {k: v for k, (_, v) in schema.items()}
    if file:
        for k, v in read_config_file(file).items():
            cfg[k] = _convert(schema, k, v)
    for k, v in flags.items():
        cfg[k] = _convert(schema, k, v)
    if cfg["threads"] is None:
        env = os.environ.get("ISING_LAB_THREADS")
        if env:
            cfg["threads"] = _convert(schema, "threads", env)
    _validate(cmd, cfg)
    return cfg


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v) if v and not isinstance(v[0], float) or not v \
            else ":".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def canonical(cmd: str, cfg: dict) -> str:
    """Sorted ``key=value`` lines; parsing them back gives the same config."""
    lines = [f"# isinglab {cmd}"]
    lines += [f"{k}={_fmt(v)}" for k, v in sorted(cfg.items()) if v is not None]
    return "\n".join(lines) + "\n"


def parse_lattice(spec: str):
    """``box:3x3``, ``torus:4x4``, ``ghost:3x3`` or ``edges:PATH``.

    Returns
    -------
    lat : Lattice
    J : ndarray or None
    """
    kind, sep, rest = str(spec).partition(":")
    if not sep:
        raise ConfigError(f"lattice spec needs KIND:..., got {spec!r}")
    try:
        if kind == "edges":
            return read_edgelist(rest)
        sides = tuple(int(v) for v in rest.lower().split("x"))
        if kind == "box":
            return build_lattice(len(sides), sides), None
        if kind == "torus":
            return build_lattice(len(sides), sides, "torus"), None
        if kind == "ghost":
            return ghost_augment(build_lattice(len(sides), sides)), None
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad lattice {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown lattice kind {kind!r}")


# ---------------------------------------------------------------------------
# experiments


def _echo(cfg, keys):
    return {k: cfg[k] for k in keys if k in cfg and k not in NOT_ECHOED}


def _run_exact(cfg):
    from . import exact
    lat, J = parse_lattice(cfg["lattice"])
    coup = Couplings(cfg["beta"], cfg["h"], J)
    bc = BoundaryCondition.parse(cfg["bc"])
    method = cfg["method"]
    params = _echo(cfg, ("lattice", "beta", "h", "bc", "method"))
    if method in exact.METHODS:
        v = exact.log_partition(lat, coup, bc, method).value
        return [ResultRecord("exact", params, "log_z", v, None, method)]
    if method == "onsager":
        return [ResultRecord("exact", params, "minus_beta_f", exact.onsager_free_energy(
            cfg["beta"]), None, "quadrature")]
    if method == "yang":
        return [ResultRecord("exact", params, "spontaneous_magnetization",
                             exact.yang_magnetization(cfg["beta"]), None, "closed-form")]
    if method == "strip":
        v, _ = strip_extrapolate(cfg["beta"])
        return [ResultRecord("exact", params, "minus_beta_f", v, None, "transfer-strip")]
    raise ConfigError(f"unknown method {method!r}")


def _run_mc(cfg):
    from .mc import run_estimate
    L, d = cfg["L"], cfg["d"]
    lat = build_lattice(d, (L,) * d, cfg["topology"])
    coup = Couplings(cfg["beta"], cfg["h"])
    bc = BoundaryCondition.parse(cfg["bc"])
    ests = run_estimate(cfg["observable"], lat, coup, bc, cfg["chains"], cfg["sweeps"],
                        cfg["burnin"], cfg["seed"], algorithm=cfg["algo"],
                        threads=cfg["threads"], init=cfg["init"])
    params = _echo(cfg, ("algo", "beta", "h", "L", "d", "topology", "bc", "sweeps", "burnin",
                         "chains", "seed", "init"))
    prov = "swendsen-wang" if cfg["algo"] == "sw" else "glauber"
    return [ResultRecord("mc", {**params, "n_samples": e.n_samples}, e.name, e.value, e.stderr,
                         prov) for e in ests]


def _run_fk(cfg):
    from . import fk
    if cfg["mode"] == "crossing":
        e = fk.crossing_probability(cfg["n"], cfg["rho"], cfg["p"], cfg["sweeps"], cfg["seed"],
                                    cfg["burnin"], cfg["chains"], cfg["threads"])
        params = _echo(cfg, ("mode", "n", "rho", "p", "sweeps", "burnin", "chains", "seed"))
        return [ResultRecord("fk", params, "crossing", e.value, e.stderr, "swendsen-wang")]
    if cfg["mode"] == "es-check":
        lat, J = parse_lattice(cfg["lattice"])
        v = fk.es_coupling_check(lat, Couplings(cfg["beta"], 0.0, J))
        params = _echo(cfg, ("mode", "lattice", "beta"))
        return [ResultRecord("fk", params, "max_deviation", v, None, "enumeration")]
    raise ConfigError(f"unknown fk mode {cfg['mode']!r}")


def _run_currents(cfg):
    from . import currents
    lat, J = parse_lattice(cfg["lattice"])
    beta, mode = cfg["beta"], cfg["mode"]
    params = _echo(cfg, ("mode", "lattice", "beta", "A", "B", "n_max", "functional", "kind",
                         "h"))
    rec = []

    def add(name, value, prov="current-expansion"):
        rec.append(ResultRecord("currents", params, name, float(value), None, prov))

    if mode == "correlation":
        v, bound = currents.current_correlation(lat, beta, cfg["A"], cfg["n_max"], J)
        add("correlation", v)
        add("truncation_bound", bound)
    elif mode == "switching":
        c = currents.switching_check(lat, beta, cfg["A"], cfg["B"], cfg["functional"],
                                     cfg["n_max"], J)
        add("lhs", c.lhs), add("rhs", c.rhs), add("residual", c.residual), add("bound", c.bound)
    elif mode == "ursell":
        u4, chk = currents.ursell4(lat, beta, cfg["A"], cfg["n_max"], J)
        add("u4", u4, "enumeration")
        if chk is not None:
            add("residual", chk.residual), add("bound", chk.bound)
    elif mode == "diffineq":
        r = currents.diffineq_check(cfg["kind"], lat, beta, cfg["h"])
        for k in ("lower", "middle", "upper", "violation", "fd_error"):
            add(k, getattr(r, k), "enumeration")
    else:
        raise ConfigError(f"unknown currents mode {mode!r}")
    return rec


def _run_check(cfg):
    from .inequalities import run_battery
    r = run_battery(cfg["kind"], cfg["trials"], cfg["seed"], cfg["size_cap"], cfg["q"])
    params = _echo(cfg, ("kind", "trials", "seed", "size_cap", "q"))
    return [ResultRecord("check", params, "violations", float(r.violations), None, "enumeration"),
            ResultRecord("check", params, "worst_margin", r.worst_margin, None, "enumeration")]


def _run_scaling(cfg):
    from . import scaling
    kind = cfg["kind"]
    params = _echo(cfg, ("kind", "L", "sweeps", "burnin", "window", "chains", "seed"))
    p = {"L": cfg["L"], "sweeps": cfg["sweeps"], "burnin": cfg["burnin"],
         "chains": cfg["chains"], "threads": cfg["threads"],
         "separations": cfg["separations"]}
    if cfg["window"] is not None:
        p["window"] = cfg["window"]
    if kind == "boundary-pfaffian":
        params = _echo(cfg, ("kind", "sweeps", "burnin", "separations", "chains", "seed"))
        pts = scaling.exponent_experiment(kind, p, cfg["seed"])
        return [ResultRecord("scaling", {**params, "separation": q.separation},
                             "pfaffian_deviation", q.deviation, q.stderr, "swendsen-wang")
                for q in pts]
    fit = scaling.exponent_experiment(kind, p, cfg["seed"])
    prov = "closed-form" if kind == "beta-magnetization" else "swendsen-wang"
    if kind == "beta-magnetization":
        params = _echo(cfg, ("kind", "window"))
    params = {**params, "r2": fit.r2, "window": fit.window}
    return [ResultRecord("scaling", params, "exponent", fit.exponent, fit.stderr, prov)]


HOLO_FUNCTIONS = {"one": lambda z: np.ones_like(z), "z": lambda z: z, "z2": lambda z: z * z,
                  "conj": np.conj}


def _run_holo(cfg):
    from . import fermionic
    if not cfg["input"]:
        raise ConfigError("holo needs --input FILE.json")
    try:
        with open(cfg["input"]) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {cfg['input']}: {exc}") from exc
    lat, _ = parse_lattice(spec.get("lattice", "box:6x6"))
    params = {"mode": cfg["mode"], **{k: v for k, v in sorted(spec.items())}}
    if cfg["mode"] == "residual":
        name = spec.get("function", "z")
        if name == "noise":
            rng = np.random.default_rng(cfg["seed"])
            F = rng.normal(size=lat.n_vertices) + 1j * rng.normal(size=lat.n_vertices)
        elif name in HOLO_FUNCTIONS:
            F = fermionic.lattice_function(lat, HOLO_FUNCTIONS[name])
        else:
            raise ConfigError(f"unknown function {name!r}")
        v = fermionic.preholomorphic_check(F, lat)
        return [ResultRecord("holo", params, "max_residual", v, None, "exact")]
    if cfg["mode"] == "orderdisorder":
        pairs = [(None if x is None else int(x), tuple(f)) for x, f in spec["pairs"]]
        cuts = [fermionic.straight_cut(lat, f, c) if isinstance(c, str) else [int(e) for e in c]
                for (_, f), c in zip(pairs, spec["cuts"])]
        bc = BoundaryCondition.parse(spec.get("bc", "free"))
        beta = float(spec.get("beta", 0.5))
        v = fermionic.order_disorder_correlator(lat, beta, pairs, cuts, bc=bc,
                                                method=spec.get("method", "insertion"))
        return [ResultRecord("holo", params, "order_disorder", v, None, "enumeration")]
    raise ConfigError(f"unknown holo mode {cfg['mode']!r}")


RUNNERS = {"exact": _run_exact, "mc": _run_mc, "fk": _run_fk, "currents": _run_currents,
           "check": _run_check, "scaling": _run_scaling, "holo": _run_holo}


def run_experiment(cmd: str, cfg: dict) -> list:
    t0 = time.perf_counter()
    records = RUNNERS[cmd](cfg)
    if cfg.get("record_time"):
        dt = time.perf_counter() - t0
        for r in records:
            r.seconds = dt
    return records


# ---------------------------------------------------------------------------
# output


def _num(v):
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return str(v)
    return format(v, ".17g")


def _params_text(params):
    return ";".join(f"{k}={_fmt(v) if not isinstance(v, float) else _num(v)}"
                    for k, v in sorted(params.items()))


def _csv_field(text):
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return _num(v) if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def format_records(records, fmt: str = "csv") -> str:
    if not records:
        raise ValueError("no records to write")
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in records:
            row = [r.experiment, _params_text(r.params), r.observable, _num(r.value),
                   _num(r.stderr), r.provenance, _num(r.seconds)]
            lines.append(",".join(_csv_field(x) for x in row))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        items = [{"experiment": r.experiment, "params": dict(sorted(r.params.items())),
                  "observable": r.observable, "value": r.value, "stderr": r.stderr,
                  "provenance": r.provenance, "seconds": r.seconds} for r in records]
        return "[\n" + ",\n".join("  " + _json(i) for i in items) + "\n]\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(records, fmt: str = "csv", path: str = "-"):
    text = format_records(records, fmt)
    if path in ("-", ""):
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# argument parsing


class _Store(argparse.Action):
    """Store a flag value; the same key given twice with different values is an error."""

    def __call__(self, parser, namespace, values, option_string=None):
        old = getattr(namespace, self.dest, None)
        if self.dest in vars(namespace) and old != values:
            raise ConfigError(f"conflicting values for {self.dest}: {old!r} and {values!r}")
        setattr(namespace, self.dest, values)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isinglab", description="Ising model experiments")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    for cmd in SCHEMAS:
        sp = sub.add_parser(cmd, help=f"{cmd} experiments", argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="key=value file")
        sp.add_argument("--dry-run", action="store_true",
                        help="validate and print the canonical config")
        for key, (conv, _) in _schema(cmd).items():
            names = {f"--{key}", f"--{key.replace('_', '-')}"}
            if conv is _bool:
                sp.add_argument(*sorted(names), dest=key, action="store_const", const=True)
            else:
                sp.add_argument(*sorted(names), dest=key, metavar=key.upper(), action=_Store)
    return parser


def main(argv=None) -> int:
    try:
        ns = vars(build_parser().parse_args(argv))
        cmd = ns.pop("command", None)
        if cmd is None:
            raise ConfigError("a subcommand is required: " + ", ".join(SCHEMAS))
        file = ns.pop("config", None)
        dry = ns.pop("dry_run", False)
        cfg = parse_config(cmd, ns, file)
        if dry:
            sys.stdout.write(canonical(cmd, {k: v for k, v in cfg.items()
                                             if k != "threads"}))
            return 0
        records = run_experiment(cmd, cfg)
        emit_results(records, cfg["format"], cfg["output"])
        return 0
    except ConfigError as exc:
        print(f"isinglab: error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError,
            mpmath.libmp.NoConvergence) as exc:
        print(f"isinglab: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        print(f"isinglab: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"isinglab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
