"""Command-line front end: verify, tile, compare, simulate.

Exit codes: 0 pass, 1 mismatch, 2 infeasible input, 3 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import load_config, preset, render, run_compare
from .exceptions import CapacityError, ConfigError, FalconPackError, GeometryError
from .packing.plan import make_plan
from .protocol.secure_conv import BACKENDS, secure_dwconv
from .protocol.sharing import reconstruct, share
from .tensor import ConvDims, HeParams, Tensor, conv2d_reference
from .tiling import FRAMEWORKS, comm_cost, solve_tiling

EXIT_PASS, EXIT_MISMATCH, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2, 3
SCHEMES = FRAMEWORKS
# Largest weight magnitude the rlwe backend is fed by these commands.
RLWE_WEIGHT_BOUND = 1 << 8
SIM_NOTE = "simulation-grade parameters; no security level is claimed"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _dims(args) -> ConvDims:
    try:
        size, channels, kernel = (int(v) for v in args.dims.split(","))
    except ValueError:
        raise ConfigError(f"--dims expects H,C,R, got {args.dims!r}") from None
    try:
        return ConvDims.square(size, channels, kernel, group=args.group, stride=args.stride,
                               padding=args.padding)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc


def _params(args) -> HeParams:
    try:
        return HeParams(n=args.n)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc


def _scheme(name: str) -> str:
    return "falcon_tiled" if name == "falcon" else name


def _operands(dims: ConvDims, params: HeParams, seed: int, bounded: bool):
    rng = np.random.default_rng(seed)
    X = Tensor.random((dims.C, dims.H, dims.W), rng, params.bits)
    shape = (dims.K, dims.G, dims.R, dims.R)
    if bounded:
        W = Tensor.small(shape, rng, RLWE_WEIGHT_BOUND, params.bits)
    else:
        W = Tensor.random(shape, rng, params.bits)
    return X, W, rng


def _first_mismatch(got: Tensor, want: Tensor) -> tuple[int, ...]:
    return tuple(int(v) for v in np.argwhere(got.data != want.data)[0])


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    dims, params = _dims(args), _params(args)
    scheme = _scheme(args.scheme)
    X, W, rng = _operands(dims, params, args.seed, bounded=args.backend == "rlwe")
    want = conv2d_reference(X, W, dims)
    plan = make_plan(scheme, dims, params)
    got = plan.evaluate(X, W)
    report = {"dims": dims.to_dict(), "N": params.n, "scheme": plan.scheme,
              "plan": plan.describe(), "packing": "PASS" if got == want else "FAIL"}
    if got != want:
        report["first_mismatch"] = _first_mismatch(got, want)
    if args.protocol:
        xc, xs = share(X, rng)
        yc, ys, _ = secure_dwconv(xc, xs, W, dims, params, backend=args.backend, seed=args.seed,
                                  scheme=scheme)
        y = reconstruct(yc, ys)
        report["protocol"] = "PASS" if y == want else "FAIL"
        report["backend"] = args.backend
        if y != want:
            report.setdefault("first_mismatch", _first_mismatch(y, want))
    ok = report["packing"] == "PASS" and report.get("protocol", "PASS") == "PASS"
    if args.format == "json":
        _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
    else:
        lines = [f"{k}: {v}" for k, v in report.items() if k != "plan"]
        lines.append(f"plan: {json.dumps(report['plan'], sort_keys=True)}")
        lines.append("PASS" if ok else "FAIL")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_PASS if ok else EXIT_MISMATCH


def cmd_tile(args) -> int:
    dims, params = _dims(args), _params(args)
    tile = solve_tiling(dims, params)
    reports = [comm_cost(f, dims, params) for f in FRAMEWORKS]
    body = {"dims": dims.to_dict(), "N": params.n, "tile": tile.to_dict(),
            "costs": [r.row() for r in reports]}
    if args.format == "json":
        _emit(json.dumps(body, sort_keys=True) + "\n", args.out)
    else:
        lines = [f"tile: C_x={tile.c_x} C_w={tile.c_w} k={tile.k} "
                 f"objective={float(tile.objective):.4f}"]
        lines += [f"{r.framework:<13} {r.total_mb:10.3f} MB  mults={r.poly_mult_count}"
                  for r in reports]
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_PASS


def cmd_compare(args) -> int:
    config = load_config(args.config) if args.config else preset(args.preset)
    fmt = args.format or config.format
    _emit(render(run_compare(config), fmt), args.out)
    return EXIT_PASS


def cmd_simulate(args) -> int:
    dims, params = _dims(args), _params(args)
    X, W, rng = _operands(dims, params, args.seed, bounded=args.backend == "rlwe")
    xc, xs = share(X, rng)
    yc, ys, transcript = secure_dwconv(xc, xs, W, dims, params, backend=args.backend,
                                       seed=args.seed, scheme=_scheme(args.scheme))
    ok = reconstruct(yc, ys) == conv2d_reference(X, W, dims)
    body = transcript.summary()
    body["result"] = "PASS" if ok else "FAIL"
    body["note"] = SIM_NOTE
    if args.format == "json":
        _emit(json.dumps(body, sort_keys=True) + "\n", args.out)
    else:
        _emit("\n".join(f"{k}: {v}" for k, v in body.items()) + "\n", args.out)
    return EXIT_PASS if ok else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="falconpack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def geometry(p, scheme=True):
        p.add_argument("--dims", required=True, help="H,C,R with square H=W")
        p.add_argument("--n", type=int, default=4096)
        p.add_argument("--group", type=int, default=1)
        p.add_argument("--stride", type=int, default=1)
        p.add_argument("--padding", choices=("same", "valid"), default="same",
                       help="same: H is the activation size and the input is pre-padded")
        if scheme:
            p.add_argument("--scheme", choices=SCHEMES, default="falcon_tiled")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("table", "json"), default="table")
        p.add_argument("--out")

    v = sub.add_parser("verify", help="pack, multiply, extract and compare with the reference")
    geometry(v)
    v.add_argument("--backend", choices=BACKENDS, default="ideal")
    v.add_argument("--no-protocol", dest="protocol", action="store_false")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("tile", help="solve the tiling and print model costs")
    geometry(t, scheme=False)
    t.set_defaults(func=cmd_tile)

    c = sub.add_parser("compare", help="model communication over a benchmark config")
    src = c.add_mutually_exclusive_group()
    src.add_argument("--config", help="YAML or JSON benchmark config")
    src.add_argument("--preset", default="all", choices=("all", "n_sweep", "dims", "group"))
    c.add_argument("--format", choices=("table", "csv", "json"))
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("simulate", help="run the two-party protocol and report the transcript")
    geometry(s)
    s.add_argument("--backend", choices=BACKENDS, default="ideal")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FalconPackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
