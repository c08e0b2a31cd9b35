"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import jsonschema

from . import experiments as ex
from .errors import ConfigError, EdgeListError, GenerationError, NBDistError, NumericalError
from .graph_core import FAMILIES, ModelSpec, derive_seed, format_edge_list, generate, read_edge_list, two_core
from .nb_spectrum import nb_spectrum, rescale_spectrum
from .spectral_distance import DEFAULT_RESOLUTION

log = logging.getLogger("nbdist")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest(command: str, params: dict, inputs=(), seeds=None) -> str:
    payload = {
        "command": command,
        "parameters": params,
        "seeds": seeds or {},
        "tool_version": _tool_version(),
        "inputs": {str(p): _digest(p) for p in inputs},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _model_from_args(args) -> ModelSpec:
    if args.model is None or args.n is None:
        raise UsageError("either --edges or --model with --n is required")
    spec = ModelSpec(args.model, args.n, p=args.p, k=args.k, d=args.d,
                     m_attach=args.m_attach, seed=args.seed)
    spec.validate()
    return spec


# --------------------------------------------------------------------------
# Commands


def cmd_spectrum(args) -> int:
    if args.edges:
        if len(args.edges) != 1:
            raise UsageError("spectrum takes exactly one --edges input")
        g = read_edge_list(args.edges[0])
        inputs, source = [args.edges[0]], {"edges": str(args.edges[0])}
    else:
        spec = _model_from_args(args)
        g = generate(spec)
        inputs, source = [], {"model": spec.to_dict()}
    core = two_core(g)
    spec_ = nb_spectrum(core)
    payload = spec_.to_json()
    payload["rescaled"] = rescale_spectrum(spec_).to_json()
    payload["graph"] = {"n": g.n, "m": g.m, "core_n": core.n, "core_m": core.m}
    text = json.dumps(payload, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)
        atomic_write(f"{args.out}.manifest.json", manifest("spectrum", source, inputs, {"seed": args.seed}))
    return EXIT_OK


def cmd_distance(args) -> int:
    if not args.edges or len(args.edges) < 2:
        raise UsageError("distance needs at least two --edges inputs")
    graphs = [read_edge_list(p) for p in args.edges]
    labels = [Path(p).name for p in args.edges]
    dm = ex.distance_matrix(graphs, args.method, resolution=args.resolution,
                            trunc_k=args.trunc_k, labels=labels, threads=args.threads)
    text = dm.to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)
        params = {"method": args.method, "resolution": args.resolution, "trunc_k": args.trunc_k}
        atomic_write(f"{args.out}.manifest.json", manifest("distance", params, args.edges))
    return EXIT_OK


def cmd_generate(args) -> int:
    base = _model_from_args(args)
    if args.count < 1:
        raise UsageError("--count must be positive")
    out = Path(args.out or ".")
    seeds = [derive_seed(base.seed, i) for i in range(args.count)]
    specs = [base.with_n(base.n, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        graphs = list(pool.map(generate, specs))
    names = []
    for i, g in enumerate(graphs):
        name = f"{base.family}_{i:04d}.txt"
        atomic_write(out / name, format_edge_list(g))
        names.append(name)
    atomic_write(out / "manifest.json",
                 manifest("generate", {"model": base.to_dict(), "count": args.count, "files": names},
                          seeds={"base": base.seed, "per_file": seeds}))
    return EXIT_OK


_FAMILY_SCHEMA = {
    "type": "object",
    "properties": {
        "label": {"type": "string"},
        "family": {"enum": list(FAMILIES)},
        "count": {"type": "integer", "minimum": 1},
        "p": {"type": "number"},
        "k": {"type": "integer"},
        "d": {"type": "integer"},
        "m_attach": {"type": "integer"},
    },
    "required": ["family"],
    "additionalProperties": False,
}

CONFIG_SCHEMAS = {
    "size": {
        "type": "object",
        "properties": {
            "model": {**_FAMILY_SCHEMA, "properties": {k: v for k, v in _FAMILY_SCHEMA["properties"].items() if k != "count"}},
            "n_list": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "samples": {"type": "integer", "minimum": 1},
            "methods": {"type": "array", "items": {"enum": list(ex.METHODS)}, "minItems": 1},
            "resolution": {"type": "integer", "minimum": 2},
            "trunc_k": {"type": "integer", "minimum": 0},
            "reference_n": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer"},
        },
        "required": ["model", "n_list", "samples", "seed"],
        "additionalProperties": False,
    },
    "manifold": {
        "type": "object",
        "properties": {
            "n": {"type": "integer", "minimum": 3},
            "p_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "k_grid": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            "samples": {"type": "integer", "minimum": 1},
            "embed_k": {"type": "integer", "minimum": 2},
            "seed": {"type": "integer"},
        },
        "required": ["n", "p_grid", "k_grid", "samples", "embed_k", "seed"],
        "additionalProperties": False,
    },
    "classify": {
        "type": "object",
        "properties": {
            "families": {"type": "array", "items": {**_FAMILY_SCHEMA, "required": ["family", "count"]}, "minItems": 2},
            "size_mean": {"type": "number"},
            "size_sigma": {"type": "number", "minimum": 0},
            "min_size": {"type": "integer", "minimum": 1},
            "methods": {"type": "array", "items": {"enum": list(ex.METHODS)}, "minItems": 1},
            "k_neighbors": {"type": "integer", "minimum": 1},
            "folds": {"type": "integer", "minimum": 2},
            "resolution": {"type": "integer", "minimum": 2},
            "trunc_k": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer"},
        },
        "required": ["seed"],
        "additionalProperties": False,
    },
}


def load_config(name: str, path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMAS[name])
    problems = []
    for err in sorted(validator.iter_errors(config), key=lambda e: list(map(str, e.path))):
        where = "/".join(map(str, err.path)) or "<root>"
        problems.append(f"{where}: {err.message}")
    if problems:
        raise ConfigError("config schema violation:\n  " + "\n  ".join(problems))
    return config


def _run_size(config, out: Path, threads: int) -> list[str]:
    m = config["model"]
    model = ModelSpec(m["family"], 1, p=m.get("p"), k=m.get("k"), d=m.get("d"), m_attach=m.get("m_attach"))
    reports = ex.size_sensitivity_reports(
        model, config["n_list"], config["samples"], tuple(config.get("methods", ["dnbd"])),
        config["seed"], resolution=config.get("resolution", DEFAULT_RESOLUTION),
        trunc_k=config.get("trunc_k"), reference_n=config.get("reference_n", ex.REFERENCE_N),
        threads=threads,
    )
    written = []
    for method, rep in reports.items():
        name = f"size_{model.family}_{method}.csv"
        atomic_write(out / name, rep.to_csv())
        written.append(name)
    return written


def _run_manifold(config, out: Path, threads: int) -> list[str]:
    res = ex.ws_manifold(config["n"], config["p_grid"], config["k_grid"], config["samples"],
                         config["embed_k"], config["seed"], threads=threads)
    atomic_write(out / "manifold.csv", res.to_csv())
    return ["manifold.csv"]


def _run_classify(config, out: Path, threads: int) -> list[str]:
    families = config.get("families", list(ex.TABLE1_FAMILIES))
    data = ex.synthetic_dataset(families, config.get("size_mean", 200.0),
                                config.get("size_sigma", math.sqrt(40.0)), config["seed"],
                                config.get("min_size", 50))
    rows = ["method,split,recall,precision,accuracy"]
    written = []
    for method in config.get("methods", list(ex.METHODS)):
        dm = ex.distance_matrix(data.graphs, method, resolution=config.get("resolution", DEFAULT_RESOLUTION),
                                trunc_k=config.get("trunc_k"), labels=data.names, threads=threads)
        rep = ex.knn_classify(dm, data.labels, config.get("k_neighbors", 10), config.get("folds", 10),
                              config["seed"])
        atomic_write(out / f"classify_{method}_folds.csv", rep.to_csv(method))
        atomic_write(out / f"distances_{method}.csv", dm.to_csv())
        written += [f"classify_{method}_folds.csv", f"distances_{method}.csv"]
        for split in ("train", "test"):
            m = getattr(rep, split)
            rows.append(f"{method},{split},{m.recall!r},{m.precision!r},{m.accuracy!r}")
    atomic_write(out / "classify_report.csv", "\n".join(rows) + "\n")
    return ["classify_report.csv"] + written


_RUNNERS = {"size": _run_size, "manifold": _run_manifold, "classify": _run_classify}


def cmd_experiment(args) -> int:
    config = load_config(args.name, args.config)
    if args.name == "manifold" and args.embed_k is not None:
        config["embed_k"] = args.embed_k
    out = Path(args.out or ".")
    files = _RUNNERS[args.name](config, out, max(1, args.threads))
    atomic_write(out / f"{args.name}_manifest.json",
                 manifest(f"experiment {args.name}", {"config": config, "outputs": files},
                          [args.config], {"seed": config["seed"]}))
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser


def _add_model_flags(p):
    p.add_argument("--model", choices=FAMILIES)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--m-attach", type=int, dest="m_attach")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nbdist", description="Non-backtracking spectral graph distances.")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="reduced non-backtracking spectrum of one graph")
    p.add_argument("--edges", action="append", type=Path)
    _add_model_flags(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("distance", help="pairwise distance matrix")
    p.add_argument("--edges", action="append", type=Path, required=True)
    p.add_argument("--method", choices=ex.METHODS, default="dnbd")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--trunc-k", type=int, dest="trunc_k")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("generate", help="write random graphs as edge lists")
    _add_model_flags(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("experiment", help="run a synthetic experiment from a JSON config")
    p.add_argument("name", choices=sorted(_RUNNERS))
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--embed-k", type=int, dest="embed_k", help="override embed_k of a manifold config")
    p.set_defaults(func=cmd_experiment)

    for name in ("spectrum", "distance", "generate", "experiment"):
        sub.choices[name].add_argument("--threads", type=int, default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, parse errors exit EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nbdist: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"nbdist: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (EdgeListError, ConfigError, GenerationError, NBDistError, OSError, ValueError) as exc:
        print(f"nbdist: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
