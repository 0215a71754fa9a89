"""he-zoo command line: keys, encryption, evaluation, self-test, test vectors and parameter advice."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.config import REPORTS_DIR, VECTOR_CASES, VECTORS_DIR, load_profile
from src.data_prep import (
    coerce_param_value,
    format_envelope,
    load_message,
    load_params,
    parse_envelope,
    parse_seed,
    read_json,
    read_key_bundle,
    read_ledger_count,
    write_key_bundle,
    write_ledger_count,
)
from src.exceptions import INPUT_ERRORS, HEZooError, ParameterError
from src.he_core import OPS, RngStream, SchemeId, eval_dispatch, get_adapter
from src.params_advisor import advise
from src.pipeline import run_selftest
from src import vectors

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2
VARIANTS = {"vector": SchemeId.CG_VECTOR, "matrix": SchemeId.CG_MATRIX}


def resolve_scheme(name: str, variant: Optional[str] = None) -> SchemeId:
    """Scheme id from ``--scheme`` (``challagunta`` needs ``--variant``)."""
    if name == "challagunta":
        if variant not in VARIANTS:
            raise ParameterError("challagunta needs --variant vector|matrix")
        return VARIANTS[variant]
    try:
        return SchemeId(name)
    except ValueError as exc:
        raise ParameterError(f"unknown scheme {name!r}") from exc


def resolve_schemes(names: Sequence[str]) -> Optional[List[SchemeId]]:
    """None stands for every scheme."""
    if not names or "all" in names:
        return None
    return [resolve_scheme(n) for n in names]


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text + "\n")
        logger.info(f"Wrote {out}")
    else:
        print(text)


def _read_ciphertext(source: str):
    text = sys.stdin.read() if source == "-" else Path(source).read_text()
    return parse_envelope(text)


def cmd_keygen(args) -> int:
    scheme = resolve_scheme(args.scheme, args.variant)
    params = load_params(scheme, args.params)
    bundle = get_adapter(scheme).keygen(params, parse_seed(args.seed))
    write_key_bundle(bundle, args.out, args.format)
    return EXIT_OK


def cmd_encrypt(args) -> int:
    bundle = read_key_bundle(args.key)
    adapter = get_adapter(bundle.scheme)
    keys = adapter.load(bundle)
    message = adapter.parse_message(load_message(args.message, args.message_file), keys)
    ledger = adapter.ledger(keys)
    if ledger is not None:
        # the count lives next to the key file so limits hold across invocations
        ledger.count = read_ledger_count(args.key, bundle.digest())
        ledger.enforce = not args.allow_over_limit
    envelope = adapter.encrypt_envelope(message, keys, RngStream(parse_seed(args.seed)))
    if ledger is not None:
        write_ledger_count(args.key, bundle.digest(), ledger.count)
    _emit(format_envelope(envelope, args.format), args.out)
    return EXIT_OK


def cmd_decrypt(args) -> int:
    bundle = read_key_bundle(args.key)
    adapter = get_adapter(bundle.scheme)
    message = adapter.decrypt(_read_ciphertext(args.ct), bundle)
    _emit(json.dumps(adapter.format_message(message)), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    bundle = read_key_bundle(args.key)
    cts = [_read_ciphertext(source) for source in args.ct]
    operand = json.loads(args.operand) if args.operand is not None else None
    result = eval_dispatch(args.op, cts, bundle, operand)
    _emit(format_envelope(result, args.format), args.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    outcome = run_selftest(
        schemes=resolve_schemes(args.scheme),
        quick=args.quick,
        seed=int(args.seed),
        out_dir=Path(args.out_dir),
        studies=not args.no_studies,
        figures=not args.no_figures,
    )
    matrix = outcome["matrix"]
    print(matrix.to_string() if not matrix.empty else "no checks ran")
    return EXIT_OK if outcome["status"]["all_passed"] else EXIT_FAILED


def cmd_vectors_emit(args) -> int:
    schemes = resolve_schemes(args.scheme) or list(SchemeId)
    profiles = load_profile(args.profile) if args.profile else None
    for path in vectors.emit(schemes, int(args.seed), Path(args.out_dir), profiles=profiles, n_cases=args.cases):
        print(path)
    return EXIT_OK


def cmd_vectors_check(args) -> int:
    paths = [Path(p) for p in args.files] or sorted(Path(args.dir).glob("*.json"))
    failed = 0
    for path in paths:
        mismatches = vectors.check(path)
        if mismatches:
            failed += 1
            logger.error(f"{path}: {len(mismatches)} mismatches")
            for mismatch in mismatches:
                print(json.dumps({"file": str(path), **mismatch}, default=str))
        else:
            logger.info(f"{path}: ok")
    return EXIT_FAILED if failed else EXIT_OK


def _advisor_inputs(args, scheme: SchemeId) -> Dict[str, Any]:
    inputs: Dict[str, Any] = {}
    if args.params:
        doc = read_json(args.params)
        if isinstance(doc, dict) and isinstance(doc.get(scheme.value), dict):
            doc = doc[scheme.value]
        inputs.update(coerce_param_value(doc))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        inputs[key.strip()] = coerce_param_value(value)
    if not inputs:
        inputs = load_params(scheme)
    return inputs


def cmd_params_advise(args) -> int:
    scheme = resolve_scheme(args.scheme, args.variant)
    report = advise(scheme, _advisor_inputs(args, scheme))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="he-zoo", description="Homomorphic encryption scheme zoo")
    sub = parser.add_subparsers(dest="command", required=True)

    def scheme_args(p, required=True):
        p.add_argument("--scheme", required=required, help="scheme id, or challagunta with --variant")
        p.add_argument("--variant", choices=sorted(VARIANTS))

    def format_arg(p):
        p.add_argument("--format", choices=["json", "hex"], default="json")

    p = sub.add_parser("keygen", help="derive a key file from parameters and a seed")
    scheme_args(p)
    p.add_argument("--params", help="parameter JSON (defaults to the active profile)")
    p.add_argument("--seed", required=True)
    p.add_argument("--out", required=True)
    format_arg(p)
    p.set_defaults(handler=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt one message")
    p.add_argument("--key", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--message", help="message as inline JSON")
    group.add_argument("--message-file")
    p.add_argument("--seed", required=True)
    p.add_argument("--out")
    p.add_argument("--allow-over-limit", action="store_true",
                   help="warn instead of failing when a key's encryption limit is used up")
    format_arg(p)
    p.set_defaults(handler=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt one ciphertext ('-' reads stdin)")
    p.add_argument("--key", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_decrypt)

    p = sub.add_parser("eval", help="apply a homomorphic operation")
    p.add_argument("op", choices=sorted(OPS))
    p.add_argument("--key", required=True)
    p.add_argument("--ct", required=True, nargs="+")
    p.add_argument("--operand", help="plaintext for ptmult or target level for rescale, as JSON")
    p.add_argument("--out")
    format_arg(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("selftest", help="run the property suites and studies")
    p.add_argument("--scheme", nargs="*", default=["all"])
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out-dir", default=str(REPORTS_DIR))
    p.add_argument("--no-studies", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=cmd_selftest)

    p = sub.add_parser("vectors", help="emit or check test-vector files")
    vsub = p.add_subparsers(dest="action", required=True)
    e = vsub.add_parser("emit")
    e.add_argument("--scheme", nargs="*", default=["all"])
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--out-dir", default=str(VECTORS_DIR))
    e.add_argument("--profile", choices=["desk", "paper"])
    e.add_argument("--cases", type=int, default=VECTOR_CASES)
    e.set_defaults(handler=cmd_vectors_emit)
    c = vsub.add_parser("check")
    c.add_argument("files", nargs="*")
    c.add_argument("--dir", default=str(VECTORS_DIR))
    c.set_defaults(handler=cmd_vectors_check)

    p = sub.add_parser("params", help="parameter advice")
    psub = p.add_subparsers(dest="action", required=True)
    a = psub.add_parser("advise")
    scheme_args(a)
    a.add_argument("--params", help="advisor inputs as JSON")
    a.add_argument("--set", action="append", metavar="KEY=VALUE")
    a.set_defaults(handler=cmd_params_advise)
    return parser


def _report_error(exc: Exception) -> None:
    code = exc.code if isinstance(exc, HEZooError) else type(exc).__name__
    sys.stderr.write(json.dumps({"error": code, "message": str(exc)}) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (*INPUT_ERRORS, FileNotFoundError, json.JSONDecodeError) as exc:
        _report_error(exc)
        return EXIT_INPUT
    except HEZooError as exc:
        _report_error(exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
