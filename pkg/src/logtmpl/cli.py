"""Command-line entry point: parse, eval, bench, sweep and keywords subcommands.

Exit codes: 0 ok, 2 usage or missing input, 3 data/format error, 4 environment.
Option values resolve as defaults <- ``--config`` file <- command-line flags.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path

from . import __version__
from .core import catalog_json, snapshot
from .keywords import (ENDPOINT_ENV, HttpProvider, KeywordFormatError, KeywordLibrary,
                       KeywordTransportError, load_static, save_static)
from .metrics import GroupingMismatchError, SchemaError, evaluate, read_grouping
from .pipeline import ParseAborted, ParseConfig, Parser, read_loghub_csv, read_raw
from .preprocess import DEFAULT_RULES, load_rules

log = logging.getLogger("logtmpl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENV = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _flag(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


# option name -> (type, default); these may appear in a config file
OPTIONS = {
    "k": (int, 5),
    "tau": (float, 0.5),
    "theta": (float, 4.5),
    "keywords": (str, None),
    "rules": (str, None),
    "format": (str, "raw"),
    "delimiters": (str, None),
    "punct_features": (str, None),
    "disable_keywords": (_flag, False),
    "disable_index": (_flag, False),
    "templates": (int, None),
    "logs": (int, None),
    "seed": (int, 1),
    "variable_rate": (float, 0.2),
    "length_jitter": (float, None),
    "reps": (int, 5),
}


def read_config_file(path) -> dict:
    """``key = value`` lines without a section header; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read config file {path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise CliError(EXIT_USAGE, f"{path}: malformed config: {exc}") from None
    out = {}
    for key, raw in cp["config"].items():
        name = key.replace("-", "_")
        if name not in OPTIONS:
            raise CliError(EXIT_USAGE, f"{path}: unknown option {key!r}")
        try:
            out[name] = OPTIONS[name][0](raw)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, f"{path}: bad value for {key}: {exc}") from None
    return out


def resolve(args, names) -> dict:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for name in names:
        value = getattr(args, name, None)
        if value is None:
            value = file_values.get(name, OPTIONS[name][1])
        merged[name] = value
    return merged


def parse_config(opts) -> ParseConfig:
    extra = {}
    if opts["delimiters"]:
        extra["delimiters"] = opts["delimiters"]
    if opts["punct_features"]:
        extra["punct_features"] = opts["punct_features"]
    rules = DEFAULT_RULES
    if opts["rules"]:
        rules = tuple(_load(load_rules, opts["rules"], "rules file"))
    try:
        return ParseConfig(k=opts["k"], tau=opts["tau"], theta=opts["theta"], rules=rules,
                           keyword_library_path=opts["keywords"],
                           disable_keywords=bool(opts["disable_keywords"]),
                           disable_index=bool(opts["disable_index"]), **extra)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"invalid configuration: {exc}") from None


def _load(loader, path, what):
    if not Path(path).is_file():
        raise CliError(EXIT_USAGE, f"{what} not found: {path}")
    try:
        return loader(path)
    except (KeywordFormatError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"invalid {what} {path}: {exc}") from None


# -- manifest ----------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _environment() -> dict:
    import matplotlib
    import numpy
    env = {"python": platform.python_version(), "numpy": numpy.__version__,
           "matplotlib": matplotlib.__version__}
    try:
        import numba
        env["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        env["numba"] = None
    return env


def write_manifest(path, command, config, inputs, outputs) -> None:
    manifest = {
        "tool": "logtmpl",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                   for name, p in inputs.items() if p},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
        "environment": _environment(),
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_record(config: ParseConfig) -> dict:
    return {"k": config.k, "tau": config.tau, "theta": config.theta,
            "rules": [{"name": r.name, "pattern": r.pattern, "priority": r.priority}
                      for r in config.rules],
            "keyword_library_path": config.keyword_library_path,
            "punct_features": config.punct_features, "delimiters": config.delimiters,
            "disable_keywords": config.disable_keywords,
            "disable_index": config.disable_index}


class _Staged:
    """Files written under temporary names and renamed only on success."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.pending = []

    def path(self, name) -> Path:
        final = self.directory / name
        tmp = self.directory / f".{name}.partial"
        self.pending.append((tmp, final))
        return tmp

    def commit(self) -> list:
        for tmp, final in self.pending:
            os.replace(tmp, final)
        return [final for _, final in self.pending]

    def discard(self) -> None:
        for tmp, _ in self.pending:
            tmp.unlink(missing_ok=True)


# -- commands ------------------------------------------------------------------

def cmd_parse(args) -> int:
    if not Path(args.input).is_file():
        raise CliError(EXIT_USAGE, f"input not found: {args.input}")
    opts = resolve(args, ["k", "tau", "theta", "keywords", "rules", "format", "delimiters",
                          "punct_features", "disable_keywords", "disable_index"])
    if opts["format"] not in ("raw", "loghub-csv"):
        raise CliError(EXIT_USAGE, f"unknown input format {opts['format']!r}")
    config = parse_config(opts)
    keywords = KeywordLibrary()
    if opts["keywords"]:
        keywords = _load(load_static, opts["keywords"], "keyword file")

    reader = read_raw if opts["format"] == "raw" else read_loghub_csv
    try:
        rows = list(reader(args.input))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_DATA, f"cannot read {args.input}: {exc}") from None
    line_ids = [lid for lid, _ in rows]
    parser = Parser(config, keywords)
    try:
        results = list(parser.parse_lines(content for _, content in rows))
    except ParseAborted as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    for line_no, message in parser.diagnostics:
        log.info("line %s: %s", line_ids[line_no], message)

    from .pipeline import write_structured
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    staged = _Staged(out)
    try:
        write_structured(results, line_ids, staged.path("structured.csv"))
        staged.path("templates.json").write_text(catalog_json(parser.library, config.theta),
                                                 encoding="utf-8")
        written = staged.commit()
    except OSError:
        staged.discard()
        raise
    if args.snapshot:
        Path(args.snapshot).write_bytes(snapshot(parser.library))
        written.append(Path(args.snapshot))
    manifest = getattr(args, "manifest", None) or out / "manifest.json"
    write_manifest(manifest, "parse", {**_config_record(config), "format": opts["format"]},
                   {"input": args.input, "keywords": opts["keywords"], "rules": opts["rules"]},
                   written)
    log.info("%d lines, %d templates -> %s", len(results), len(parser.library), out)
    return EXIT_OK


def cmd_eval(args) -> int:
    for p in (args.pred, args.truth):
        if not Path(p).is_file():
            raise CliError(EXIT_USAGE, f"input not found: {p}")
    try:
        pred = read_grouping(args.pred)
        truth = read_grouping(args.truth)
        metrics = evaluate(truth, pred)
    except (SchemaError, GroupingMismatchError) as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    outputs = []
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        outputs.append(args.output)
    if getattr(args, "manifest", None):
        write_manifest(args.manifest, "eval", {}, {"pred": args.pred, "truth": args.truth},
                       outputs)
    return EXIT_OK


def _corpus_from(opts, default_templates, default_logs, default_jitter):
    from .benchgen import CorpusSpec, generate
    jitter = opts["length_jitter"]
    try:
        spec = CorpusSpec(n_templates=opts["templates"] or default_templates,
                          n_logs=opts["logs"] if opts["logs"] is not None else default_logs,
                          seed=opts["seed"], variable_rate=opts["variable_rate"],
                          length_jitter=default_jitter if jitter is None else jitter)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"invalid corpus: {exc}") from None
    return spec, generate(spec)


CORPUS_OPTIONS = ["templates", "logs", "seed", "variable_rate", "length_jitter"]
MODEL_OPTIONS = ["k", "tau", "theta", "keywords", "rules", "delimiters", "punct_features",
                 "disable_keywords", "disable_index"]


def cmd_bench(args) -> int:
    from .benchgen import time_run
    opts = resolve(args, CORPUS_OPTIONS + MODEL_OPTIONS + ["reps"])
    ablate = [a for a in (args.ablate or "").split(",") if a]
    unknown = set(ablate) - {"keywords", "index"}
    if unknown:
        raise CliError(EXIT_USAGE, f"unknown ablation(s): {', '.join(sorted(unknown))}")
    if opts["reps"] < 1:
        raise CliError(EXIT_USAGE, "--reps must be >= 1")
    config = parse_config(opts)
    spec, corpus = _corpus_from(opts, 3000, 100000, 0.0)
    runs = {"full": time_run(config, corpus, opts["reps"])}
    if ablate:
        variant = config.with_(disable_keywords=config.disable_keywords or "keywords" in ablate,
                               disable_index=config.disable_index or "index" in ablate)
        runs["ablated"] = time_run(variant, corpus, opts["reps"])
    report = {"corpus": {"n_templates": spec.n_templates, "n_logs": spec.n_logs,
                         "seed": spec.seed, "variable_rate": spec.variable_rate,
                         "length_jitter": spec.length_jitter},
              "ablate": ablate, "runs": runs}
    if "ablated" in runs:
        report["speedup"] = runs["ablated"]["mean_seconds"] / max(runs["full"]["mean_seconds"],
                                                                  1e-12)
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs = []
    if args.output:
        from .report import plot_bench, write_json, write_rows
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_json(report, out / "bench.json")
        rows = [{"variant": name, "rep": i, "seconds": s}
                for name, r in runs.items() for i, s in enumerate(r["reps"])]
        write_rows(rows, out / "bench.csv", ["variant", "rep", "seconds"])
        plot_bench(report, out / "bench.png")
        outputs = [out / "bench.json", out / "bench.csv", out / "bench.png"]
    manifest = getattr(args, "manifest", None) or (Path(args.output) / "manifest.json"
                                                   if args.output else None)
    if manifest:
        write_manifest(manifest, "bench", {**_config_record(config), **report["corpus"],
                                           "reps": opts["reps"], "ablate": ablate},
                       {}, outputs)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .report import SWEEP_COLUMNS, plot_sweep, run_sweep, write_json, write_rows
    opts = resolve(args, CORPUS_OPTIONS + MODEL_OPTIONS)
    config = parse_config(opts)
    spec, corpus = _corpus_from(opts, 50, 10000, 0.3)
    rows = run_sweep(corpus, config)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(rows, out / "sweep.csv", SWEEP_COLUMNS)
    write_json(rows, out / "sweep.json")
    plot_sweep(rows, out / "sweep.png")
    for r in rows:
        log.info("%s=%s F=%.4f GA=%.4f", r["param"], r["value"], r["f_measure"],
                 r["group_accuracy"])
    write_manifest(getattr(args, "manifest", None) or out / "manifest.json", "sweep",
                   {**_config_record(config), "n_templates": spec.n_templates,
                    "n_logs": spec.n_logs, "seed": spec.seed,
                    "variable_rate": spec.variable_rate, "length_jitter": spec.length_jitter},
                   {}, [out / "sweep.csv", out / "sweep.json", out / "sweep.png"])
    return EXIT_OK


def cmd_keywords(args) -> int:
    if args.provider == "static":
        if not args.path:
            raise CliError(EXIT_USAGE, "--path is required with --provider static")
        lib = _load(load_static, args.path, "keyword file")
        inputs = {"path": args.path}
    else:
        try:
            provider = HttpProvider.from_env(cache_dir=args.cache_dir)
        except KeywordTransportError:
            raise CliError(EXIT_ENV, f"{ENDPOINT_ENV} is not set; export the URL of the "
                                     "keyword extraction service and retry") from None
        if not args.sample or not Path(args.sample).is_file():
            raise CliError(EXIT_USAGE, "--sample FILE with example log lines is required "
                                       "for --provider http")
        sample = [line.rstrip("\r\n") for line in
                  open(args.sample, encoding="utf-8") if line.strip()]
        try:
            lib = provider.load(sample, args.budget)
        except KeywordFormatError as exc:
            raise CliError(EXIT_DATA, f"keyword service answer unusable: {exc}") from None
        except KeywordTransportError as exc:
            raise CliError(EXIT_ENV, str(exc)) from None
        inputs = {"sample": args.sample}
    for phrase in lib.phrases:
        sys.stdout.write(" ".join(phrase) + "\n")
    outputs = []
    if args.output:
        save_static(lib, args.output, header=f"{len(lib)} phrases via {args.provider}")
        outputs.append(args.output)
    if getattr(args, "manifest", None):
        write_manifest(args.manifest, "keywords extract",
                       {"provider": args.provider, "budget": args.budget}, inputs, outputs)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--manifest", default=default, metavar="PATH",
                   help="write the run manifest here")
    p.add_argument("--config", default=default, metavar="FILE",
                   help="key=value option file, overridden by flags")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress
                   else 0)
    return p


def _model_flags(p) -> None:
    g = p.add_argument_group("parser")
    g.add_argument("--k", type=int, help="recalled candidates per log (default 5)")
    g.add_argument("--tau", type=float, help="recall similarity threshold (default 0.5)")
    g.add_argument("--theta", type=float, help="entropy threshold in bits (default 4.5)")
    g.add_argument("--keywords", metavar="FILE", help="keyword library, one phrase per line")
    g.add_argument("--rules", metavar="FILE", help="JSON masking rules")
    g.add_argument("--delimiters", help="token delimiter characters")
    g.add_argument("--punct-features", dest="punct_features",
                   help="the 39 characters counted by the punctuation vector")
    g.add_argument("--disable-keywords", dest="disable_keywords", action="store_const",
                   const=True)
    g.add_argument("--disable-index", dest="disable_index", action="store_const", const=True)


def _corpus_flags(p) -> None:
    g = p.add_argument_group("corpus")
    g.add_argument("--templates", type=int)
    g.add_argument("--logs", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--variable-rate", dest="variable_rate", type=float)
    g.add_argument("--length-jitter", dest="length_jitter", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    ap = argparse.ArgumentParser(prog="logtmpl", parents=[_common(suppress=False)],
                                 description="Online log template extraction.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse a log file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, metavar="DIR")
    p.add_argument("--format", choices=("raw", "loghub-csv"))
    p.add_argument("--snapshot", metavar="FILE", help="also save the template library")
    _model_flags(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", parents=[common], help="score a grouping against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--output", metavar="FILE")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="time parsing on a synthetic corpus")
    _corpus_flags(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--ablate", metavar="LIST", help="also time with keywords,index disabled")
    p.add_argument("--output", metavar="DIR", help="write bench.json/csv/png here")
    _model_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", parents=[common], help="vary k, tau and theta one at a time")
    _corpus_flags(p)
    p.add_argument("--output", required=True, metavar="DIR")
    _model_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("keywords", parents=[common], help="keyword library tools")
    ksub = p.add_subparsers(dest="action", required=True)
    k = ksub.add_parser("extract", parents=[common], help="load or fetch a keyword library")
    k.add_argument("--provider", choices=("static", "http"), required=True)
    k.add_argument("--path", help="static keyword file")
    k.add_argument("--sample", metavar="FILE", help="log lines sent to the service")
    k.add_argument("--budget", type=int, default=200)
    k.add_argument("--cache-dir", dest="cache_dir")
    k.add_argument("--output", metavar="FILE", help="save the library as a static file")
    k.set_defaults(func=cmd_keywords)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0) or 0, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"logtmpl: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
