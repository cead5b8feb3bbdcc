"""Command line entry point.

    pippi check FILE...
    pippi meta PROTOCOL --initiator ROLE [FILE...] [--override INVITEE=INVITER]
    pippi run SCENARIO [--seed N] [--step-limit N]
    pippi encode SCHEMA VALUE... [--spec FILE]
    pippi decode BYTES [--spec FILE]

Exit codes: 0 success, 1 semantic or codec error, 2 syntax error,
3 step limit reached, 64 usage error.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from importlib import resources

from . import codec
from .harness import Scenario, builtin, run_scenario
from .lang import (AmbiguousAlias, ParseError, Span, Specification, UnknownPrefix, expand_names, parse,
                   print_declaration, print_spec, to_json)
from .metagen import MetagenError, customize, generate
from .model import ERROR, Diagnostic, Library, ResolutionError, check_static, resolve, resolve_decl

EXIT_OK, EXIT_FAIL, EXIT_SYNTAX, EXIT_LIMIT, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def _bundled():
    paths = []
    for package in ("pippi.corpus", "pippi.scenarios"):
        root = str(resources.files(package))
        paths.extend(sorted(glob.glob(os.path.join(root, "*.bspl"))))
    return paths


def _load(paths):
    """Parse every file; returns {path: Specification} and a shared library."""
    specs, lib = {}, Library()
    for p in paths:
        spec = expand_names(parse(_read(p)))
        specs[p] = spec
        lib.add(spec, os.path.basename(p))
    return specs, lib


def _syntax(path, e: ParseError):
    return Diagnostic(ERROR, "E-SYNTAX", e.message, path, Span(e.line, e.column))


def cmd_check(args, out, err) -> int:
    specs, lib = {}, Library()
    for path in args.paths:
        try:
            spec = expand_names(parse(_read(path)))
        except OSError as e:
            raise UsageError(str(e))
        except ParseError as e:
            print(_syntax(os.path.basename(path), e), file=out)
            return EXIT_SYNTAX
        except (UnknownPrefix, AmbiguousAlias) as e:
            print(Diagnostic(ERROR, "E-NAME", str(e), os.path.basename(path)), file=out)
            return EXIT_FAIL
        specs[path] = spec
        lib.add(spec, os.path.basename(path))
    diags = []
    for path, spec in specs.items():
        name = os.path.basename(path)
        for w in spec.warnings:
            diags.append(Diagnostic("WARNING", w.code, w.message, name, w.span))
        for r in resolve(spec, lib, name):
            diags.extend(check_static(r))
    if args.format == "json":
        json.dump([{"level": d.level, "code": d.code, "message": d.message, "file": d.file,
                    "line": d.span.line if d.span else 0, "column": d.span.column if d.span else 0}
                   for d in diags], out, indent=2)
        out.write("\n")
    else:
        for d in diags:
            print(d, file=out)
    return EXIT_FAIL if any(d.level == ERROR for d in diags) else EXIT_OK


def cmd_parse(args, out, err) -> int:
    try:
        spec = parse(_read(args.path))
    except OSError as e:
        raise UsageError(str(e))
    except ParseError as e:
        print(_syntax(os.path.basename(args.path), e), file=err)
        return EXIT_SYNTAX
    if args.format == "json":
        json.dump(to_json(spec), out, indent=2, ensure_ascii=False)
        out.write("\n")
    else:
        out.write(print_spec(spec))
    return EXIT_OK


def cmd_meta(args, out, err) -> int:
    try:
        specs, lib = _load(args.paths or _bundled())
    except OSError as e:
        raise UsageError(str(e))
    except ParseError as e:
        print(f"ERROR {e}", file=err)
        return EXIT_SYNTAX
    decl = lib.get(args.protocol)
    if decl is None:
        print(f"ERROR no protocol named {args.protocol}", file=err)
        return EXIT_FAIL
    warnings = []
    try:
        resolved = resolve_decl(decl, lib, lib.files.get(args.protocol, "-"))
        meta = generate(resolved, args.initiator, args.name, warnings)
        overrides = []
        for o in args.override or []:
            invitee, _, inviter = o.partition("=")
            if not inviter:
                raise UsageError(f"override must look like INVITEE=INVITER, got {o}")
            overrides.append((invitee, inviter))
        meta = customize(meta, overrides)
    except (MetagenError, ResolutionError) as e:
        print(f"ERROR {e}", file=err)
        return EXIT_FAIL
    for w in warnings:
        print(f"WARNING {w}", file=err)
    if args.format == "json":
        json.dump(to_json(Specification(declarations=(meta,))), out, indent=2)
        out.write("\n")
    else:
        out.write(print_declaration(meta) + "\n")
    return EXIT_OK


def cmd_run(args, out, err) -> int:
    path = args.scenario
    if not os.path.exists(path):
        candidate = builtin(path)
        if not os.path.exists(candidate):
            raise UsageError(f"no scenario {path}")
        path = candidate
    scenario = Scenario.load(path)
    report = run_scenario(scenario, seed=args.seed, step_limit=args.step_limit)
    if args.format == "json":
        json.dump(report.to_json(), out, indent=2)
        out.write("\n")
    else:
        for line in report.trace:
            print(line, file=out)
        for desc, ok, detail in report.assertions:
            print(f"{'PASS' if ok else 'FAIL'} {desc}" + (f" ({detail})" if detail and not ok else ""), file=err)
        print(f"{report.name}: {report.status} after {report.steps} steps", file=err)
    if report.status == "step-limit":
        return EXIT_LIMIT
    return EXIT_OK if report.passed else EXIT_FAIL


def _table(paths):
    specs, lib = _load(paths or _bundled())
    schemas = []
    for path, spec in specs.items():
        for d in spec.declarations:
            try:
                schemas.extend(resolve_decl(d, lib, os.path.basename(path)).schemas)
            except ResolutionError:
                continue
    return codec.schema_table(schemas)


def _find(table, name):
    if name in table:
        return table[name]
    matches = [s for s in table.values() if s.name == name]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise codec.UnknownSchema(name)
    raise UsageError(f"{name} is ambiguous: {', '.join(s.id for s in matches)}")


def cmd_encode(args, out, err) -> int:
    table = _table(args.spec)
    try:
        schema = _find(table, args.schema)
        named = {}
        positional = []
        for v in args.values:
            name, eq, text = v.partition("=")
            if eq and name in schema.names:
                named[name] = codec.value_from_text(text)
            else:
                positional.append(codec.value_from_text(v))
        if positional:
            if named or len(positional) > len(schema.payload):
                raise codec.ArityMismatch(len(schema.payload), len(positional) + len(named))
            named = dict(zip(schema.names, positional))
        data = codec.encode(schema, named, args.sender, args.recipient)
    except codec.CodecError as e:
        print(f"ERROR {type(e).__name__}: {e}", file=err)
        return EXIT_FAIL
    out.write(data.decode("utf-8") + "\n")
    return EXIT_OK


def cmd_decode(args, out, err) -> int:
    table = _table(args.spec)
    data = sys.stdin.buffer.read().strip() if args.data == "-" else args.data.encode("utf-8")
    try:
        schema, named = codec.decode(table, data)
    except codec.CodecError as e:
        print(f"ERROR {type(e).__name__}: {e}", file=err)
        return EXIT_FAIL
    msg = codec.WireMessage.from_bytes(data)
    result = {"schema": schema.id, "sender": msg.sender, "recipient": msg.recipient,
              "payload": {k: codec._plain(v) for k, v in named.items()}}
    json.dump(result, out, ensure_ascii=False)
    out.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pippi", description="Information protocol toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fmt(sp):
        sp.add_argument("--format", choices=("text", "json"), default="text")

    c = sub.add_parser("check", help="parse, resolve and check protocol files")
    c.add_argument("paths", nargs="+")
    fmt(c)
    c.set_defaults(func=cmd_check)

    pa = sub.add_parser("parse", help="print the canonical text or AST of a file")
    pa.add_argument("path")
    fmt(pa)
    pa.set_defaults(func=cmd_parse)

    m = sub.add_parser("meta", help="generate a role binding metaprotocol")
    m.add_argument("protocol")
    m.add_argument("paths", nargs="*", help="protocol files (default: bundled corpus)")
    m.add_argument("--initiator", required=True)
    m.add_argument("--override", action="append", metavar="INVITEE=INVITER")
    m.add_argument("--name")
    fmt(m)
    m.set_defaults(func=cmd_meta)

    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("scenario", help="scenario file or bundled scenario name")
    r.add_argument("--seed", type=int)
    r.add_argument("--step-limit", type=int)
    fmt(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("encode", help="encode a message")
    e.add_argument("schema")
    e.add_argument("values", nargs="*", help="positional values or name=value pairs")
    e.add_argument("--spec", action="append", help="protocol files (default: bundled)")
    e.add_argument("--sender", default="")
    e.add_argument("--recipient", default="")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a message ('-' reads stdin)")
    d.add_argument("data")
    d.add_argument("--spec", action="append")
    d.set_defaults(func=cmd_decode)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except UsageError as e:
        print(f"usage error: {e}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
