"""Command-line front end.

Exit codes: 0 on success, 1 on domain errors (an error object is printed as
JSON), 2 on usage errors.  Output is canonical JSON, so identical inputs,
flags and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .cantor import CantorSpace, Word, _as_lambda, enumerate_words
from .deform import chordal_extend, invert, sphericalize
from .distort import bilipschitz_of_map, is_mobius, weak_qm_constant, weak_qs_constant
from .embed import embed_compact, embed_unbounded, uniformize
from .errors import InvalidParams, SizeLimitExceeded, UMTError
from .generators import random_euclidean, random_ultrametric, rng_from_seed
from .metric import ExtendedSpace, QuasiMetricSpace, require_metric
from .props import check_ultrametric, disconnectedness_modulus, doubling_constant, uniform_perfectness_constant
from .props import ExactSearchTooLarge
from .ultrametrize import build_dendrogram, subdominant_ultrametric, ultrametrization_distortion

MAX_CANTOR_WORDS = 10**6


def _label_index(space, label: str) -> int:
    try:
        return space.labels.index(str(label))
    except ValueError:
        raise InvalidParams(f"unknown point label {label!r}") from None


def _plain_space(space):
    return space.base if isinstance(space, ExtendedSpace) else space


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> dict:
    rng = rng_from_seed(args.seed)
    if args.kind == "ultrametric":
        return io.space_to_dict(random_ultrametric(args.n, rng, _as_lambda(args.lam), args.top,
                                                   args.max_branch, args.max_step))
    if args.kind == "metric":
        return io.space_to_dict(random_euclidean(args.n, rng, args.dim))
    total = args.k ** args.depth
    if total > MAX_CANTOR_WORDS:
        raise SizeLimitExceeded(f"k^depth = {total} exceeds {MAX_CANTOR_WORDS}")
    base = Word.zeros(args.depth)
    if args.sample is None:
        space = CantorSpace.full(args.k, args.depth, args.lam, base, include_base=not args.no_base)
    else:
        words = [w for w in enumerate_words(args.k, args.depth) if not (args.no_base and w == base)]
        if not 1 <= args.sample <= len(words):
            raise InvalidParams(f"--sample must lie in [1, {len(words)}]")
        pick = np.sort(rng.choice(len(words), size=args.sample, replace=False))
        space = CantorSpace(args.k, args.lam, args.depth, tuple(words[i] for i in pick), base)
    return space.to_dict()


def cmd_check(args) -> dict:
    space = _plain_space(io.load_space(args.inp))
    out: dict = {}
    props = ["ultrametric", "doubling", "perfect", "disconnected"] if args.property == "all" else [args.property]
    if "ultrametric" in props:
        ok, witness = check_ultrametric(space, args.tol)
        out["is_ultrametric"] = ok
        if witness is not None:
            out["ultrametric_witness"] = witness.to_dict()
    if isinstance(space, QuasiMetricSpace) and len(props) > 1:
        props = ["ultrametric"]
        out["note"] = "quasi-metric input: only the ultrametric check applies"
    if "doubling" in props:
        try:
            res = doubling_constant(space, "exact" if args.mode == "auto" else args.mode)
        except ExactSearchTooLarge:
            if args.mode != "auto":
                raise
            res = doubling_constant(space, "greedy")
        out.update(doubling_N=res.n, doubling_method=res.method,
                   doubling_witness={"center": res.center, "radius": res.radius})
    if "perfect" in props:
        res = uniform_perfectness_constant(require_metric(space))
        out.update(perfectness_C=res.C, perfectness_witness={"center": res.center, "radius": res.radius,
                                                             "inner": res.inner})
    if "disconnected" in props:
        res = disconnectedness_modulus(space)
        out.update(ud_modulus=res.mu, chain=[space.labels[i] for i in res.chain])
    return out


def cmd_deform(args) -> dict:
    space = require_metric(_plain_space(io.load_space(args.inp)))
    p = _label_index(space, args.base)
    if args.kind == "chordal":
        return io.space_to_dict(chordal_extend(space, p))
    if args.kind == "invert":
        return io.space_to_dict(invert(space, p))
    return io.space_to_dict(sphericalize(space, p))


def cmd_ultrametrize(args) -> dict:
    space = require_metric(_plain_space(io.load_space(args.inp)))
    sub = subdominant_ultrametric(space)
    out = io.space_to_dict(sub)
    if space.n >= 2:
        L, (i, j) = ultrametrization_distortion(space, return_witness=True)
        out["ultrametrization_distortion"] = L
        out["distortion_witness"] = [space.labels[i], space.labels[j]]
    if args.dendrogram:
        out["dendrogram"] = build_dendrogram(sub).to_dict()
    return out


def cmd_embed(args) -> dict:
    space = require_metric(_plain_space(io.load_space(args.inp)))
    base = _label_index(space, args.base) if args.base is not None else None
    if args.uniformize is not None:
        res = uniformize(space, args.uniformize, base, args.lam, full_report=not args.no_quadruples)
    elif args.unbounded:
        res = embed_unbounded(space, base or 0, args.k, args.lam, args.mode, full_report=not args.no_quadruples)
    else:
        res = embed_compact(space, args.k, args.lam, args.mode, full_report=not args.no_quadruples)
    return res.to_dict()


def cmd_distort(args) -> dict:
    f = io.load_map(args.map)
    kinds = ["bilip", "qs", "qm", "mobius"] if args.kind == "all" else [args.kind]
    out: dict = {}
    if "bilip" in kinds:
        out["L_bilip"] = bilipschitz_of_map(f, exact=args.exact).to_dict()
    if "qs" in kinds:
        m, steps = weak_qs_constant(f, step_data=args.steps)
        out["H_qs"] = m.to_dict()
        if steps is not None:
            out["qs_steps"] = steps.to_dict()
    if "qm" in kinds:
        m, steps = weak_qm_constant(f, step_data=args.steps, exact=args.exact, force=args.force, seed=args.seed)
        out["K_qm"] = m.to_dict()
        if steps is not None:
            out["qm_steps"] = steps.to_dict()
    if "mobius" in kinds:
        out["mobius"] = is_mobius(f, 0.0 if args.exact else args.tol, force=args.force, seed=args.seed).to_dict()
    return out


# ------------------------------------------------------------------ parser

def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _lam(text: str):
    try:
        return _as_lambda(text)
    except (ValueError, ZeroDivisionError, UMTError) as exc:
        raise argparse.ArgumentTypeError(f"bad lambda {text!r}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("gen", help="generate a random space")
    p.add_argument("kind", choices=["ultrametric", "metric", "cantor"])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--lambda", dest="lam", type=_lam, default=_as_lambda("1/2"))
    p.add_argument("--top", type=int, default=0, help="exponent of the root height (ultrametric)")
    p.add_argument("--max-branch", type=int, default=4)
    p.add_argument("--max-step", type=int, default=2)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--sample", type=int, default=None, help="sample this many distinct words")
    p.add_argument("--no-base", action="store_true", help="leave the base word out")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", help="analyze a space")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--property", choices=["ultrametric", "doubling", "perfect", "disconnected", "all"],
                   default="all")
    p.add_argument("--mode", choices=["exact", "greedy", "auto"], default="auto")
    p.add_argument("--tol", type=float, default=1e-12)
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("deform", help="chordal extension, inversion or sphericalization")
    p.add_argument("--kind", choices=["chordal", "invert", "sphericalize"], required=True)
    p.add_argument("--base", required=True, help="label of the base point")
    p.add_argument("--in", dest="inp", required=True)
    common(p)
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("ultrametrize", help="subdominant ultrametric")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--dendrogram", action="store_true")
    common(p)
    p.set_defaults(func=cmd_ultrametrize)

    p = sub.add_parser("embed", help="embed into a symbolic Cantor set")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=_lam, default=_as_lambda("1/2"))
    p.add_argument("--mode", choices=["exact-level", "expand-depth"], default="exact-level")
    p.add_argument("--unbounded", action="store_true")
    p.add_argument("--base", default=None, help="label of the chordal base point")
    p.add_argument("--uniformize", choices=["bounded", "unbounded"], default=None)
    p.add_argument("--no-quadruples", action="store_true", help="skip the K_qm and Mobius scans")
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("distort", help="measure the distortion of a map")
    p.add_argument("--map", required=True)
    p.add_argument("--kind", choices=["bilip", "qs", "qm", "mobius", "all"], default="all")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--exact", action="store_true", help="Fraction arithmetic (tol 0 for mobius)")
    p.add_argument("--force", action="store_true", help="subsample quadruples above the scan limit")
    p.add_argument("--steps", action="store_true", help="include step data")
    common(p)
    p.set_defaults(func=cmd_distort)
    return parser


def _threads() -> int:
    """``UMT_THREADS`` caps internal parallelism; every scan here is sequential."""
    raw = os.environ.get("UMT_THREADS")
    if raw is None:
        return 1
    if not raw.isdigit() or int(raw) < 1:
        raise ValueError(f"UMT_THREADS must be a positive integer, got {raw!r}")
    return int(raw)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _threads()
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"umt: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = args.func(args)
    except UMTError as exc:
        io.write_output(exc.to_dict())
        return 1
    except OSError as exc:
        io.write_output({"error": type(exc).__name__, "message": str(exc), "witness": None})
        return 1
    io.write_output(result, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
