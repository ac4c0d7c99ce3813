"""The `modix` command line.

Subcommands: `compile` headers per a module map into `.pcm` files, `pch` to
merge them, `index` to build a global index, `validate` to check index
staleness, `run` for a script or REPL session, and `bench` for the strategy
comparison harness.

Exit codes: 0 success, 1 usage error, 2 corpus/ODR/staleness error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import tempfile
import time
from importlib import resources
from pathlib import Path

from . import bench as bench_mod
from . import gmi as gmi_mod
from . import modfile
from .declang import parse_header
from .errors import ModixError, ModuleNotFound
from .gmi import IndexFlavor
from .interp import format_result, repl, run_script
from .loader import CostModel, Strategy, open_session
from .modulemap import (
    Overlay,
    SearchPaths,
    load_modulemap,
    parse_overlay,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not 2
        raise _UsageError(message)


def _strategy(value: str) -> Strategy:
    try:
        return Strategy(value)
    except ValueError:
        choices = ", ".join(s.value for s in Strategy)
        raise _UsageError(f"unknown strategy '{value}' (choose from: {choices})")


def _cost_model(pairs: list[str]) -> CostModel:
    fields = {f.name for f in dataclasses.fields(CostModel)}
    values: dict[str, int] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or key not in fields:
            raise _UsageError(
                f"bad --cost '{pair}' (expected one of {sorted(fields)} as key=value)"
            )
        try:
            values[key] = int(value)
        except ValueError:
            raise _UsageError(f"bad --cost value in '{pair}' (integer required)")
    return CostModel(**values)


def _load_overlay(path: str | None) -> Overlay | None:
    if path is None:
        return None
    return parse_overlay(Path(path).read_text("utf-8"))


def _default_index(corpus_dir: Path, strategy: Strategy) -> Path:
    if strategy is Strategy.LEXICAL_GMI:
        candidate = corpus_dir / gmi_mod.LEXICAL_INDEX_FILE_NAME
        if candidate.is_file():
            return candidate
    return corpus_dir / gmi_mod.INDEX_FILE_NAME


def _cmd_compile(args: argparse.Namespace) -> int:
    map_path = Path(args.modulemap)
    root = map_path.parent
    module_map = load_modulemap(map_path)
    owners = module_map.header_owners()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    compiled = []
    for module_id, d in enumerate(module_map.defs):
        asts = []
        imports: list[str] = []
        for header in d.headers:
            # Origins are stored relative to the module's own directory so the
            # emitted files stay relocatable.
            origin = header[len(d.name) + 1:] if header.startswith(d.name + "/") else header
            text = (root / header).read_text("utf-8")
            ast = parse_header(text, origin)
            asts.append(ast)
            for include in ast.includes:
                owner = owners.get(include)
                if owner is not None and owner != d.name and owner not in imports:
                    imports.append(owner)
        data = modfile.compile_module(d.name, asts, imports)
        (out / f"{d.name}.pcm").write_bytes(data)
        mf = modfile.read_module_summary(data)
        mf.module_id = module_id
        compiled.append(mf)
    (out / "module.modulemap").write_text(map_path.read_text("utf-8"), "utf-8")
    (out / "modules.rootmap").write_text(bench_mod.build_rootmap(compiled), "utf-8")
    print(f"compiled {len(module_map.defs)} modules into {out}")
    return 0


def _cmd_pch(args: argparse.Namespace) -> int:
    corpus = Path(args.dir)
    module_map = load_modulemap(corpus / "module.modulemap")
    compiled = []
    for module_id, name in enumerate(module_map.names):
        path = corpus / f"{name}.pcm"
        if not path.is_file():
            raise ModuleNotFound(name)
        mf = modfile.read_module_summary(path.read_bytes())
        mf.module_id = module_id
        compiled.append(mf)
    out = Path(args.out) if args.out else corpus / f"{modfile.PCH_MODULE_NAME}.pcm"
    out.write_bytes(modfile.build_pch(compiled))
    print(f"wrote {out}")
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    corpus = Path(args.dir)
    module_map = load_modulemap(corpus / "module.modulemap")
    flavor = IndexFlavor.SEMANTIC if args.semantic else IndexFlavor.LEXICAL
    data = gmi_mod.build_index(module_map, corpus, flavor, args.exclude)
    if args.out:
        out = Path(args.out)
    elif flavor is IndexFlavor.SEMANTIC:
        out = corpus / gmi_mod.INDEX_FILE_NAME
    else:
        out = corpus / gmi_mod.LEXICAL_INDEX_FILE_NAME
    out.write_bytes(data)
    print(f"wrote {out} ({flavor.name.lower()}, {len(data)} bytes)")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    corpus = Path(args.dir)
    index_path = Path(args.index) if args.index else corpus / gmi_mod.INDEX_FILE_NAME
    index = gmi_mod.load_index(index_path.read_bytes())
    report = gmi_mod.validate_index(index, corpus)
    for name, status in report.statuses:
        print(f"{name}: {status.value}")
    if not report.all_fresh:
        print("index is stale", file=sys.stderr)
        return 2
    print(f"all {len(report.statuses)} modules fresh")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    strategy = _strategy(args.strategy)
    cost = _cost_model(args.cost)
    corpus = Path(args.dir)
    module_map = load_modulemap(corpus / "module.modulemap")
    paths = SearchPaths(tuple(args.local), str(corpus))
    index_path = None
    if strategy in (Strategy.LEXICAL_GMI, Strategy.SEMANTIC_GMI):
        index_path = Path(args.index) if args.index else _default_index(corpus, strategy)
    session = open_session(
        module_map,
        paths,
        strategy,
        cost=cost,
        index_path=index_path,
        allow_stale=args.allow_stale,
        overlay=_load_overlay(args.overlay),
    )
    if args.script:
        text = Path(args.script).read_text("utf-8")
        for result in run_script(session, text):
            print(format_result(result))
        return 0
    repl(session)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    strategies = [_strategy(s) for s in args.strategies.split(",") if s]
    if not strategies:
        raise _UsageError("--strategies must name at least one strategy")
    cost = _cost_model(args.cost)
    if args.spec == "cmssw319":
        spec_text = (
            resources.files("modix.data").joinpath("cmssw319.spec").read_text("utf-8")
        )
        scenario = "cmssw319"
    else:
        spec_text = Path(args.spec).read_text("utf-8")
        scenario = Path(args.spec).stem
    spec = bench_mod.load_spec(spec_text)
    workload = Path(args.workload).read_text("utf-8")

    def run_in(corpus_dir: Path) -> list[bench_mod.BenchRow]:
        started = time.perf_counter()
        bench_mod.generate_corpus(spec, corpus_dir)
        rows = bench_mod.run_benchmark(corpus_dir, workload, strategies, cost, scenario)
        elapsed = time.perf_counter() - started
        print(f"# wall clock (informational only): {elapsed:.3f}s", file=sys.stderr)
        return rows

    if args.dir:
        rows = run_in(Path(args.dir))
    else:
        with tempfile.TemporaryDirectory(prefix="modix-bench-") as tmp:
            rows = run_in(Path(tmp))
    sys.stdout.write(bench_mod.emit_report(rows, args.format))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="modix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile headers per a module map")
    p.add_argument("modulemap", help="final module.modulemap file")
    p.add_argument("-o", "--out", required=True, help="output directory for .pcm files")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("pch", help="merge a corpus into __pch__.pcm")
    p.add_argument("dir", help="corpus directory")
    p.add_argument("-o", "--out", help="output file (default DIR/__pch__.pcm)")
    p.set_defaults(func=_cmd_pch)

    p = sub.add_parser("index", help="build the global module index")
    p.add_argument("dir", help="corpus directory")
    flavor = p.add_mutually_exclusive_group(required=True)
    flavor.add_argument("--semantic", action="store_true")
    flavor.add_argument("--lexical", action="store_true")
    p.add_argument("--exclude", action="append", default=[], metavar="MODULE")
    p.add_argument("-o", "--out", help="output file")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("validate", help="check the index against the corpus")
    p.add_argument("dir", help="corpus directory")
    p.add_argument("--index", help="index file (default DIR/modules.gmi)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="run a script or REPL session")
    p.add_argument("--strategy", required=True, metavar="S")
    p.add_argument("--dir", default=".", help="corpus directory (default .)")
    p.add_argument("--local", action="append", default=[], metavar="PATH",
                   help="local checkout root, highest precedence first")
    p.add_argument("--cost", action="append", default=[], metavar="K=V")
    p.add_argument("--index", help="index file override")
    p.add_argument("--allow-stale", action="store_true")
    p.add_argument("--overlay", help="path overlay file")
    p.add_argument("script", nargs="?", help="script file (omit for a REPL)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="compare strategies over a generated corpus")
    p.add_argument("--spec", required=True, help="scenario .spec file (or 'cmssw319')")
    p.add_argument("--workload", required=True, help="workload script file")
    p.add_argument("--strategies", required=True, help="comma-separated strategy names")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--dir", help="keep the generated corpus here")
    p.add_argument("--cost", action="append", default=[], metavar="K=V")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"modix: {exc}", file=sys.stderr)
        return 1
    except ModixError as exc:
        print(f"modix: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"modix: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
