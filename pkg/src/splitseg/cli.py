"""``splitseg`` command-line entry point.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 I/O or file
format failure, 4 solver non-convergence, order outside the band, or a failed
equivalence check. Every output file is written to a temporary sibling and
renamed into place, so a failing command leaves no partial files.
"""

import argparse
import os
from pathlib import Path
import sys
import tempfile

import numpy as np

from . import _backend, config, netequiv, potts, splitting, synthetic
from .field import CONVENTIONS
from .errors import ConvergenceError, DegenerateFitError, DomainError, FormatError, InvalidParameterError
from .metrics import compare_masks
from .pgm import read_pgm, write_pgm

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4
MASK_LEVEL = 127.0 / 255.0  # 8-bit masks are foreground above 127


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def write_atomic(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent if str(path.parent) else ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _commit(outputs):
    """Write all ``(path, bytes)`` pairs; nothing is written until every
    payload has been produced."""
    for path, data in outputs:
        write_atomic(path, data)


def _read_image(path):
    try:
        return read_pgm(Path(path).read_bytes())
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    except FormatError as exc:
        raise _Fail(EXIT_IO, f"{path}: {exc}") from None


def _read_json(path):
    try:
        return config.read_json(path)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None


def _parse_levels(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be 'background,foreground', got {text!r}") from None
    return lo, hi


def _parse_size(text):
    try:
        h, w = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be HEIGHTxWIDTH, got {text!r}") from None
    return h, w


def _parse_init(text):
    if text == "normalized-input":
        return text
    if text.startswith("constant:"):
        return {"constant": float(text.split(":", 1)[1])}
    return {"pgm": text}


# -- segment ------------------------------------------------------------------

_SEG_FLAGS = {
    # flag dest -> parameter key
    "dt": "dt", "steps": "steps", "lambda_eps": "lambda_eps", "lambda_over_eps": "lambda_over_eps",
    "eps": "eps", "lam": "lambda", "delta": "delta", "K": "K", "convention": "convention",
    "prefactor": "prefactor", "fp_tol": "fp_tol", "fp_max_iters": "fp_max_iters", "kernel_radius": "radius",
}


def cmd_segment(args):
    doc = {}
    base = None
    if args.config:
        doc = _read_json(args.config)
        base = Path(args.config).parent
    model = args.model if args.model is not None else doc.get("model", 1)
    if model not in (1, 2):
        raise _Fail(EXIT_CONFIG, f"model must be 1 or 2, got {model!r}")
    src = args.input or doc.get("input")
    if not src:
        raise _Fail(EXIT_CONFIG, "no input image given (--input or config 'input')")
    if args.input is None and base is not None and not Path(src).is_absolute():
        src = base / src
    mask_out = args.mask_out or doc.get("mask_out")
    if not mask_out:
        raise _Fail(EXIT_CONFIG, "no mask output path given (--mask-out or config 'mask_out')")
    u_out = args.u_out or doc.get("u_out")
    trace_out = args.energy_trace or doc.get("energy_trace")

    params = dict(doc.get("params", {}))
    for dest, key in _SEG_FLAGS.items():
        v = getattr(args, dest)
        if v is not None:
            params[key] = v
    if args.no_polish:
        params["fp_polish"] = False
    if args.init is not None:
        params["init"] = _parse_init(args.init)
    if model == 1:
        bad = sorted(set(params) - set(config.MODEL1_KEYS))
        if bad:
            raise _Fail(EXIT_CONFIG, f"options {bad} do not apply to model 1")

    f = _read_image(src)
    cfg = config.model_config(model, params, f.shape, base)
    force_doc = dict(doc.get("force", {}))
    for key in ("c0", "c1", "update_every"):
        v = getattr(args, key)
        if v is not None:
            force_doc[key] = v
    force = config.region_force_from_dict(force_doc, f.shape, base)

    res = potts.segment(f, model, cfg, force)
    outputs = [(mask_out, write_pgm(res.mask))]
    if u_out:
        outputs.append((u_out, write_pgm(np.clip(res.u, 0.0, 1.0))))
    if trace_out:
        outputs.append((trace_out, res.trace.to_csv().encode("ascii")))
    _commit(outputs)
    fg = int(res.mask.sum())
    print(f"model {model}: {cfg.steps} steps, foreground {fg} of {res.mask.size} pixels")
    if res.c0 is not None:
        print(f"c0 {res.c0:.12g} c1 {res.c1:.12g}")
    return EXIT_OK


# -- verify-order -------------------------------------------------------------


def cmd_verify_order(args):
    names = splitting.ORDER_PROBLEMS if args.problem == "all" else (args.problem,)
    code = EXIT_OK
    for name in names:
        try:
            make, u0, exact, dts, T, _ = splitting.order_problem(name)
        except KeyError:
            raise _Fail(EXIT_CONFIG, f"unknown problem {name!r}; choose from {', '.join(splitting.ORDER_PROBLEMS)}") from None
        if args.dts:
            dts = tuple(args.dts)
        try:
            res = splitting.estimate_order(make, u0, exact, dts, T)
        except DegenerateFitError as exc:
            raise _Fail(EXIT_SOLVER, f"{name}: {exc}") from None
        lo, hi = splitting.ORDER_BAND
        ok = lo <= res.slope <= hi
        print(f"problem {name}")
        print(f"{'dt':>12} {'max error':>22}")
        for dt, err in zip(res.dts, res.errors):
            print(f"{dt:>12.6g} {err:>22.12e}")
        print(f"slope {res.slope:.6f} band [{lo}, {hi}] {'ok' if ok else 'OUT OF BAND'}")
        if not ok:
            code = EXIT_SOLVER
    return code


# -- export-net / eval-net ----------------------------------------------------


def _load_scheme(path):
    doc = _read_json(path)
    return config.scheme_from_dict(doc, Path(path).parent)


def _start_field(initial, shape, seed):
    if initial is not None:
        return initial
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.random(shape)


def cmd_export_net(args):
    spec, shape, initial = _load_scheme(args.scheme)
    model = netequiv.export(spec)
    payload = config.to_json(config.model_to_dict(model, shape)).encode("utf-8")
    _commit([(args.out, payload)])
    print(f"{model.topology} model with {model.width} {'layers' if model.topology == 'chain' else 'branches'}, "
          f"{model.head} head -> {args.out}")
    if args.check:
        # re-read what was written so the check covers serialization too
        reread, _ = config.model_from_dict(config.read_json(args.out), Path(args.out).parent)
        u0 = _start_field(initial, shape, args.seed)
        rep = netequiv.compare_trajectories(spec, reread, u0, args.steps or spec.steps)
        print(f"check: max_abs_diff {rep.max_abs_diff:.17g} {'PASS' if rep.passed else 'FAIL'}")
        if not rep.passed:
            return EXIT_SOLVER
    return EXIT_OK


def cmd_eval_net(args):
    doc = _read_json(args.model)
    model, shape = config.model_from_dict(doc, Path(args.model).parent)
    spec = initial = None
    if args.against:
        spec, sshape, initial = _load_scheme(args.against)
        if sshape != shape:
            raise _Fail(EXIT_CONFIG, f"network shape {shape} differs from scheme shape {sshape}")
    if args.input:
        initial = _read_image(args.input)
        if initial.shape != shape:
            raise _Fail(EXIT_CONFIG, f"input shape {initial.shape} differs from network shape {shape}")
    u0 = _start_field(initial, shape, args.seed)
    passes = args.passes or (spec.steps if spec is not None else 1)
    out = netequiv.forward(model, u0, passes)
    if args.out:
        _commit([(args.out, config.to_json({"shape": list(shape), "field": config.dump_field(out)}).encode("utf-8"))])
    print(f"{passes} passes: min {out.min():.12g} max {out.max():.12g} mean {out.mean():.12g}")
    if spec is not None:
        rep = netequiv.compare_trajectories(spec, model, u0, passes)
        print(f"against scheme: max_abs_diff {rep.max_abs_diff:.17g} {'PASS' if rep.passed else 'FAIL'}")
        if not rep.passed:
            return EXIT_SOLVER
    return EXIT_OK


# -- data and measurement -----------------------------------------------------


def cmd_gen_synthetic(args):
    h, w = args.size if args.size else (args.height, args.width)
    img, truth = synthetic.make_image(args.shape, h, w, args.levels, args.noise_sd, args.seed, args.radius)
    if img.min() < 0 or img.max() > 1:
        raise _Fail(EXIT_CONFIG, "levels must lie in [0, 1]")
    _commit([(args.image_out, write_pgm(img)), (args.truth_out, write_pgm(truth))])
    print(f"{args.shape} {h}x{w} noise_sd {args.noise_sd:g} seed {args.seed}: "
          f"{int(truth.sum())} foreground pixels")
    return EXIT_OK


def cmd_metrics(args):
    a = _read_image(args.pred) > MASK_LEVEL
    b = _read_image(args.truth) > MASK_LEVEL
    if a.shape != b.shape:
        raise _Fail(EXIT_CONFIG, f"mask shapes differ: {a.shape} vs {b.shape}")
    m = compare_masks(a, b)
    print(f"accuracy {m.accuracy:.12g}")
    print(f"dice {m.dice:.12g}")
    return EXIT_OK


def cmd_approx_perimeter(args):
    v = _read_image(args.mask)
    p = potts.approx_perimeter(v, args.delta, args.convention, args.prefactor)
    print(f"{p:.12g}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="splitseg", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("segment", help="run Model I or II on a PGM image")
    s.add_argument("--config", help="run configuration JSON (flags override it)")
    s.add_argument("--model", type=int, choices=(1, 2))
    s.add_argument("--input", help="input PGM")
    s.add_argument("--mask-out", help="output mask PGM (0/255)")
    s.add_argument("--u-out", help="optional output of the final field, clipped to [0, 1]")
    s.add_argument("--energy-trace", help="optional energy CSV")
    s.add_argument("--dt", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--lambda-eps", type=float, help="Model I: lambda*eps")
    s.add_argument("--lambda-over-eps", type=float, help="Model I: lambda/eps")
    s.add_argument("--eps", type=float, help="Model II: entropy weight")
    s.add_argument("--lambda", dest="lam", type=float, help="Model II: perimeter weight")
    s.add_argument("--delta", type=float, help="Model II: Gaussian width parameter")
    s.add_argument("--K", type=int, help="Model II: number of substeps")
    s.add_argument("--convention", choices=CONVENTIONS)
    s.add_argument("--prefactor", choices=potts.PREFACTORS)
    s.add_argument("--kernel-radius", type=int, help="Model II: Gaussian truncation radius (default ceil(4*std))")
    s.add_argument("--fp-tol", type=float)
    s.add_argument("--fp-max-iters", type=int)
    s.add_argument("--no-polish", action="store_true", help="Model II: plain lagged fixed point only")
    s.add_argument("--init", help="normalized-input, constant:V, or a PGM path")
    s.add_argument("--c0", type=float, help="initial foreground mean")
    s.add_argument("--c1", type=float, help="initial background mean")
    s.add_argument("--update-every", type=int, help="mean update period in steps (0 = never)")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("verify-order", help="measure the temporal order of a built-in problem")
    s.add_argument("--problem", default="lie-linear", help=f"one of {', '.join(splitting.ORDER_PROBLEMS)}, or all")
    s.add_argument("--dts", type=float, nargs="+")
    s.set_defaults(func=cmd_verify_order)

    s = sub.add_parser("export-net", help="write the network form of a scheme")
    s.add_argument("--scheme", required=True, help="scheme JSON")
    s.add_argument("--out", required=True, help="network JSON")
    s.add_argument("--check", action="store_true", help="verify bitwise equivalence after writing")
    s.add_argument("--steps", type=int, help="steps to compare (default: scheme steps)")
    s.add_argument("--seed", type=int, default=0, help="seed for the start field if the scheme has none")
    s.set_defaults(func=cmd_export_net)

    s = sub.add_parser("eval-net", help="run a network JSON forward")
    s.add_argument("--model", required=True, help="network JSON")
    s.add_argument("--input", help="start field PGM")
    s.add_argument("--passes", type=int)
    s.add_argument("--against", help="scheme JSON to compare with bitwise")
    s.add_argument("--out", help="write the result field as JSON")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval_net)

    s = sub.add_parser("gen-synthetic", help="write a synthetic two-level image and its truth mask")
    s.add_argument("--shape", choices=synthetic.SHAPES, default="disk")
    s.add_argument("--size", type=_parse_size, help="HEIGHTxWIDTH (overrides --height/--width)")
    s.add_argument("--height", type=int, default=192)
    s.add_argument("--width", type=int, default=256)
    s.add_argument("--radius", type=int, default=30)
    s.add_argument("--levels", type=_parse_levels, default=(0.2, 0.9), help="background,foreground")
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--image-out", required=True)
    s.add_argument("--truth-out", required=True)
    s.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("metrics", help="accuracy and dice of two mask PGMs")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("approx-perimeter", help="threshold-dynamics perimeter of a mask PGM")
    s.add_argument("--mask", required=True)
    s.add_argument("--delta", type=float, default=2.0)
    s.add_argument("--convention", choices=CONVENTIONS, default="heat-time")
    s.add_argument("--prefactor", choices=potts.PREFACTORS, default="paper")
    s.set_defaults(func=cmd_approx_perimeter)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    _backend.apply_thread_cap()
    try:
        return args.func(args)
    except _Fail as exc:
        msg, code = str(exc), exc.code
    except ConvergenceError as exc:
        msg, code = f"solver did not converge: {exc}", EXIT_SOLVER
    except FormatError as exc:
        msg, code = f"format error: {exc}", EXIT_IO
    except (InvalidParameterError, DomainError) as exc:
        msg, code = f"invalid configuration: {exc}", EXIT_CONFIG
    except OSError as exc:
        msg, code = f"I/O error: {exc}", EXIT_IO
    print(f"splitseg: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
