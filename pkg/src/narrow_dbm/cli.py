"""Command-line front end: compile, eval, verify, bounds and rerun.

Exit codes: 0 success, 1 verification failure, 2 convergence failure,
3 input error.  Every run that writes files also writes a manifest next to
them; ``rerun`` replays a manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from typing import Callable, Sequence

import numpy as np

from . import model as model_io
from .bounds import bounds_report
from .compiler import CompileConfig, compile_distribution
from .core import Distribution, StateSpace, condition_split, hadamard
from .errors import ConvergenceError, DbmError
from .inference import (
    layer_marginal,
    log_partition,
    split_at_layer,
    visible_factorization_check,
)
from .model import DbmParams, oracle_layer_marginal, oracle_log_partition

EXIT_OK, EXIT_VERIFY, EXIT_CONVERGENCE, EXIT_INPUT = 0, 1, 2, 3
VERIFY_TOL = 1e-10
VERIFY_ORACLE_LIMIT = 2**16


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _write(path: str, text: str | bytes) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    data = text.encode() if isinstance(text, str) else text
    with open(path, "wb") as fh:
        fh.write(data)
    return path


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _read_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def load_model(path: str) -> DbmParams:
    return model_io.from_json(_read_json(path))


def load_distribution(path: str) -> Distribution:
    return Distribution.from_json(_read_json(path))


def parse_clamp(spec: str) -> tuple[list[int], list[int]]:
    """Parse ``"i=v,j=w"`` into coordinate and value lists."""
    coords, values = [], []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"clamp entry {item!r} is not of the form i=v")
        try:
            coords.append(int(key))
            values.append(int(val))
        except ValueError as exc:
            raise InputError(f"clamp entry {item!r} is not integer-valued") from exc
    if not coords:
        raise InputError("empty clamp specification")
    return coords, values


def random_target(n: int, q: int, seed: int) -> Distribution:
    rng = np.random.default_rng(seed)
    return Distribution.from_weights(StateSpace(n, q), rng.dirichlet(np.ones(q**n)))


# verification -----------------------------------------------------------------


def verify_model(
    params: DbmParams,
    seed: int = 0,
    marginal_fn: Callable[[DbmParams, int], Distribution] = layer_marginal,
    oracle_limit: int = VERIFY_ORACLE_LIMIT,
) -> dict:
    """Max deviations of the exact inference routines on ``params``.

    ``marginal_fn`` is the routine under test; swapping it lets a harness
    inject a corrupted marginal.
    """
    rng = np.random.default_rng(seed)
    joint = params.q ** params.total_units
    report: dict = {"widths": list(params.widths), "q": params.q, "checks": {}}
    checks = report["checks"]
    marginals = [marginal_fn(params, k) for k in range(params.depth + 1)]

    if joint <= oracle_limit:
        report["oracle"] = True
        checks["log_partition"] = abs(log_partition(params) - oracle_log_partition(params))
        checks["marginals"] = max(
            float(np.max(np.abs(m.probs - oracle_layer_marginal(params, k).probs)))
            for k, m in enumerate(marginals)
        )
    else:
        report["oracle"] = False
        report["note"] = "model exceeds the oracle limit; self-consistency checks only"
        checks["normalization"] = max(abs(float(m.probs.sum()) - 1.0) for m in marginals)

    comp = 0.0
    for k in range(1, params.depth):
        split = rng.normal(size=params.biases[k].shape)
        lower, upper = split_at_layer(params, k, split)
        prod = hadamard(layer_marginal(lower, k), layer_marginal(upper, 0))
        comp = max(comp, float(np.max(np.abs(prod.probs - marginals[k].probs))))
    checks["composition"] = comp
    if params.depth >= 2:
        checks["factorization"] = visible_factorization_check(params)
    report["max_deviation"] = max(checks.values())
    report["passed"] = bool(report["max_deviation"] <= VERIFY_TOL)
    return report


# subcommands ------------------------------------------------------------------


def _manifest_path(out: str, is_dir: bool) -> str:
    return os.path.join(out, "manifest.json") if is_dir else out + ".manifest.json"


def _finish(args, argv, inputs: Sequence[str], outputs: Sequence[str], manifest_path, config, t0):
    if manifest_path is None:
        return
    manifest = {
        "subcommand": args.command,
        "argv": list(argv),
        "inputs": [{"path": p, "sha256": _sha256(p)} for p in inputs],
        "config": config,
        "seed": args.seed,
        "outputs": [{"path": p, "sha256": _sha256(p)} for p in outputs],
        "timing_seconds": round(time.perf_counter() - t0, 6),
    }
    _write(manifest_path, _dump(manifest))


def cmd_compile(args, argv) -> int:
    t0 = time.perf_counter()
    inputs = []
    if args.target:
        target = load_distribution(args.target)
        inputs.append(args.target)
    elif args.random is not None:
        target = random_target(args.random, args.alphabet, args.seed)
    else:
        raise InputError("compile needs --target FILE or --random N")
    config = CompileConfig(
        tolerance=args.tolerance,
        beta0=args.beta0,
        max_beta=args.max_beta,
        max_depth=args.max_depth,
        width=args.width,
    )
    code = EXIT_OK
    try:
        params, cert = compile_distribution(target, config)
    except ConvergenceError as exc:
        params, cert, code = exc.params, exc.certificate, EXIT_CONVERGENCE
        print(f"convergence failure: best KL {exc.best_kl:.6g}", file=sys.stderr)
    out = args.out or "."
    outputs = []
    if args.random is not None and not args.target:
        outputs.append(_write(os.path.join(out, "target.json"), _dump(target.to_json())))
    if params is not None:
        outputs.append(_write(os.path.join(out, "model.dbm.json"), model_io.serialize(params)))
    if cert is not None:
        outputs.append(_write(os.path.join(out, "certificate.json"), _dump(cert.to_json())))
        print(f"depth {cert.depth}  KL {cert.kl:.6g}  converged {cert.converged}")
    _finish(args, argv, inputs, outputs, _manifest_path(out, True), vars_config(config), t0)
    return code


def vars_config(config: CompileConfig) -> dict:
    return {k: getattr(config, k) for k in config.__dataclass_fields__}


def cmd_eval(args, argv) -> int:
    t0 = time.perf_counter()
    params = load_model(args.model)
    k = args.layer if args.layer is not None else 0
    dist = layer_marginal(params, k)
    if args.clamp is not None:
        coords, values = parse_clamp(args.clamp)
        dist = condition_split(dist, coords, values)
    text = _dump(dist.to_json())
    if args.out:
        _write(args.out, text)
        _finish(args, argv, [args.model], [args.out], _manifest_path(args.out, False),
                {"layer": k, "clamp": args.clamp}, t0)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args, argv) -> int:
    t0 = time.perf_counter()
    params = load_model(args.model)
    report = verify_model(params, seed=args.seed)
    text = _dump(report)
    if args.out:
        _write(args.out, text)
        _finish(args, argv, [args.model], [args.out], _manifest_path(args.out, False),
                {"tolerance": VERIFY_TOL}, t0)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_bounds(args, argv) -> int:
    t0 = time.perf_counter()
    if args.n < 1:
        raise InputError("n must be >= 1")
    report = bounds_report(args.n, args.alphabet, args.depth)
    text = _dump(report.to_json())
    if args.out:
        _write(args.out, text)
        _finish(args, argv, [], [args.out], _manifest_path(args.out, False),
                {"n": args.n, "q": args.alphabet, "depth": args.depth}, t0)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rerun(args, argv) -> int:
    manifest = _read_json(args.manifest)
    if not isinstance(manifest, dict) or not isinstance(manifest.get("argv"), list):
        raise InputError(f"{args.manifest} is not a run manifest")
    if manifest["argv"] and manifest["argv"][0] == "rerun":
        raise InputError("refusing to replay a rerun manifest")
    return main(manifest["argv"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="narrow-dbm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)

    p = sub.add_parser("compile", help="compile a target distribution into a narrow DBM")
    p.add_argument("--target", help="distribution JSON file")
    p.add_argument("--random", type=int, metavar="N", help="seeded random target on N units")
    p.add_argument("--alphabet", type=int, default=2, help="q, used with --random")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=1e-2)
    p.add_argument("--beta0", type=float, default=8.0)
    p.add_argument("--max-beta", type=float, default=64.0)
    p.add_argument("--max-depth", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("eval", help="exact layer marginal or clamped conditional")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", type=int, default=None)
    p.add_argument("--clamp", default=None, help="i=v,... clamps coordinates of the layer")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="check exact inference against the oracle")
    p.add_argument("--model", required=True)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", help="depth and width bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--depth", type=int, default=None, help="L for the parameter count")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("rerun", help="replay the run recorded in a manifest")
    p.add_argument("--manifest", required=True)
    common(p)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, argv)
    except (InputError, DbmError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
