"""JSON documents for schemes, exported networks and segmentation runs.

Field references accept a bare number (constant), ``{"constant": v}``,
``{"inline": [[...], ...]}`` or ``{"pgm": "path"}`` (relative to the document).
Kernel references are ``{"weights": [[...]], "factors": [col, row]?,
"normalized": bool?}`` or ``{"gaussian": {"delta": d, "convention": c,
"radius": r?}}``. Floats are written with ``repr`` so they round-trip exactly.
"""

import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .field import CONVENTIONS, ConvKernel, gaussian_kernel
from .netequiv import FnnLayer, FnnModel
from .pgm import read_pgm
from .potts import PREFACTORS, ModelIConfig, ModelIIConfig, RegionForce
from .splitting import LinearOp, LinearTerm, Resolvent, SchemeSpec

FNN_FORMAT = "splitseg-fnn"
SCHEME_FORMAT = "splitseg-scheme"
RUN_FORMAT = "splitseg-run"

_BLOCK_NOTE = (
    "parallel-block: first layer W1 = blockdiag(I + K*dt*A_1, ..., I + K*dt*A_K) acting on K copies "
    "of the input, b1 = (K*dt*g_1, ..., K*dt*g_K); head W2 = (1/K)[I ... I], b2 = 0"
)


def _need(doc, key, where):
    if not isinstance(doc, dict) or key not in doc:
        raise InvalidParameterError(f"{where}: missing required key {key!r}")
    return doc[key]


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise InvalidParameterError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _matrix(rows, where):
    try:
        a = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"{where}: not a numeric matrix ({exc})") from None
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise InvalidParameterError(f"{where}: expected a finite 2-D array")
    return a


# -- fields and kernels -------------------------------------------------------


def load_field(ref, shape=None, base=None, where="field"):
    """Resolve a field reference; ``None`` stays ``None`` (meaning zero)."""
    if ref is None:
        return None
    if isinstance(ref, (int, float)) and not isinstance(ref, bool):
        ref = {"constant": ref}
    if not isinstance(ref, dict) or len(ref) != 1:
        raise InvalidParameterError(f"{where}: unrecognized field reference {ref!r}")
    (kind, val), = ref.items()
    if kind == "constant":
        if shape is None:
            raise InvalidParameterError(f"{where}: constant field needs a known shape")
        return np.full(tuple(shape), _number(val, where))
    if kind == "inline":
        a = _matrix(val, where)
    elif kind == "pgm":
        path = Path(val)
        if base is not None and not path.is_absolute():
            path = Path(base) / path
        a = read_pgm(path)
    else:
        raise InvalidParameterError(f"{where}: unknown field reference kind {kind!r}")
    if shape is not None and a.shape != tuple(shape):
        raise InvalidParameterError(f"{where}: shape {a.shape} does not match {tuple(shape)}")
    return a


def dump_field(a):
    return None if a is None else {"inline": np.asarray(a, dtype=float).tolist()}


def load_kernel(ref, where="kernel"):
    if not isinstance(ref, dict):
        raise InvalidParameterError(f"{where}: expected an object, got {ref!r}")
    if "gaussian" in ref:
        g = ref["gaussian"]
        delta = _number(_need(g, "delta", where), where)
        conv = g.get("convention", "heat-time")
        if conv not in CONVENTIONS:
            raise InvalidParameterError(f"{where}: unknown convention {conv!r}")
        radius = g.get("radius")
        return gaussian_kernel(delta, conv, None if radius is None else int(radius))
    w = _matrix(_need(ref, "weights", where), where)
    factors = ref.get("factors")
    if factors is not None:
        if not isinstance(factors, list) or len(factors) != 2:
            raise InvalidParameterError(f"{where}: factors must be [column, row]")
        factors = tuple(np.array(f, dtype=float) for f in factors)
    return ConvKernel(w, bool(ref.get("normalized", False)), factors)


def dump_kernel(k):
    doc = {"weights": k.weights.tolist(), "normalized": bool(k.normalized)}
    if k.factors is not None:
        doc["factors"] = [k.factors[0].tolist(), k.factors[1].tolist()]
    return doc


# -- operators and resolvents -------------------------------------------------


def load_operator(doc, where="operator"):
    kind = _need(doc, "kind", where)
    if kind == "zero":
        return LinearOp.zero()
    if kind in ("scaled-identity", "scaled-laplacian"):
        return LinearOp(kind, _number(_need(doc, "coefficient", where), where))
    if kind == "conv-kernel":
        return LinearOp.conv(load_kernel(_need(doc, "kernel", where), where + ".kernel"))
    raise InvalidParameterError(f"{where}: unknown operator kind {kind!r}")


def dump_operator(op):
    doc = {"kind": op.kind}
    if op.kind in ("scaled-identity", "scaled-laplacian"):
        doc["coefficient"] = op.coefficient
    elif op.kind == "conv-kernel":
        doc["kernel"] = dump_kernel(op.kernel)
    return doc


def load_resolvent(doc, where="resolvent"):
    kind = _need(doc, "kind", where)
    if kind == "identity":
        return Resolvent.identity()
    if kind == "double-well":
        return Resolvent.double_well(_number(_need(doc, "c", where), where))
    if kind == "logit":
        return Resolvent.logit(_number(_need(doc, "mu", where), where))
    if kind == "logit-nonlocal":
        return Resolvent(
            "logit-nonlocal",
            mu=_number(_need(doc, "mu", where), where),
            nu=_number(_need(doc, "nu", where), where),
            kernel=load_kernel(_need(doc, "kernel", where), where + ".kernel"),
            tol=_number(doc.get("tol", 1e-10), where),
            max_iters=int(doc.get("max_iters", 50)),
            polish=bool(doc.get("polish", True)),
        )
    raise InvalidParameterError(f"{where}: unknown resolvent kind {kind!r}")


def dump_resolvent(r):
    doc = {"kind": r.kind}
    if r.kind == "double-well":
        doc["c"] = r.c
    elif r.kind == "logit":
        doc["mu"] = r.mu
    elif r.kind == "logit-nonlocal":
        doc.update(mu=r.mu, nu=r.nu, kernel=dump_kernel(r.kernel), tol=r.tol, max_iters=r.max_iters, polish=r.polish)
    return doc


# -- schemes ------------------------------------------------------------------


def scheme_from_dict(doc, base=None):
    """Return ``(spec, shape, initial)``; ``initial`` may be None."""
    shape = _need(doc, "shape", "scheme")
    if not (isinstance(shape, list) and len(shape) == 2 and all(isinstance(s, int) and s > 0 for s in shape)):
        raise InvalidParameterError(f"scheme: shape must be [height, width], got {shape!r}")
    terms = []
    for i, t in enumerate(_need(doc, "terms", "scheme")):
        where = f"scheme.terms[{i}]"
        op = load_operator(t.get("operator", {"kind": "zero"}), where + ".operator")
        src = load_field(t.get("source"), shape, base, where + ".source")
        res = load_resolvent(t.get("resolvent", {"kind": "identity"}), where + ".resolvent")
        terms.append((LinearTerm(op, src), res))
    spec = SchemeSpec(
        _need(doc, "mode", "scheme"),
        tuple(terms),
        _number(_need(doc, "dt", "scheme"), "scheme.dt"),
        _need(doc, "steps", "scheme"),
    )
    initial = load_field(doc.get("initial"), shape, base, "scheme.initial")
    return spec, tuple(shape), initial


def scheme_to_dict(spec, shape, initial=None):
    doc = {
        "format": SCHEME_FORMAT,
        "mode": spec.mode,
        "dt": spec.dt,
        "steps": spec.steps,
        "shape": list(shape),
        "terms": [
            {"operator": dump_operator(t.op), "source": dump_field(t.source), "resolvent": dump_resolvent(r)}
            for t, r in spec.terms
        ],
    }
    if initial is not None:
        doc["initial"] = dump_field(initial)
    return doc


# -- networks -----------------------------------------------------------------


def _dump_layer(layer):
    return {
        "weight": {"form": "I + a*A", "a": layer.a, "A": dump_operator(layer.op)},
        "bias": dump_field(layer.bias),
        "activation": dump_resolvent(layer.activation),
    }


def model_to_dict(model, shape):
    doc = {"format": FNN_FORMAT, "topology": model.topology, "head": model.head, "shape": list(shape)}
    if model.topology == "chain":
        doc["layers"] = [_dump_layer(layer) for layer in model.layers]
    else:
        doc["branches"] = [_dump_layer(layer) for layer in model.layers]
        doc["block_form"] = _BLOCK_NOTE
    return doc


def model_from_dict(doc, base=None):
    if doc.get("format") != FNN_FORMAT:
        raise InvalidParameterError(f"network: expected format {FNN_FORMAT!r}")
    shape = _need(doc, "shape", "network")
    topology = _need(doc, "topology", "network")
    expected = {"chain": "identity", "parallel-block": "average"}.get(topology)
    if expected is None:
        raise InvalidParameterError(f"network: unknown topology {topology!r}")
    if doc.get("head", expected) != expected:
        raise InvalidParameterError(f"network: topology {topology!r} requires the {expected} head")
    key = "layers" if topology == "chain" else "branches"
    layers = []
    for i, lay in enumerate(_need(doc, key, "network")):
        where = f"network.{key}[{i}]"
        w = _need(lay, "weight", where)
        layers.append(
            FnnLayer(
                load_operator(_need(w, "A", where + ".weight"), where + ".weight.A"),
                _number(_need(w, "a", where + ".weight"), where + ".weight.a"),
                load_field(lay.get("bias"), shape, base, where + ".bias"),
                load_resolvent(_need(lay, "activation", where), where + ".activation"),
            )
        )
    return FnnModel(tuple(layers), topology), tuple(shape)


# -- segmentation runs --------------------------------------------------------


def _init_ref(ref, base):
    if ref is None or ref == "normalized-input":
        return "normalized-input"
    if isinstance(ref, dict) and "constant" in ref:
        return ("constant", _number(ref["constant"], "init"))
    if isinstance(ref, dict) and "pgm" in ref:
        p = Path(ref["pgm"])
        return ("file", str(p if base is None or p.is_absolute() else Path(base) / p))
    raise InvalidParameterError(f"init: unrecognized value {ref!r}")


def _per_step(seq, steps, loader, where):
    if seq is None:
        return None
    if not isinstance(seq, list) or len(seq) != steps:
        raise InvalidParameterError(f"{where}: expected a list of length steps={steps}")
    return [loader(x, f"{where}[{n}]") for n, x in enumerate(seq)]


MODEL1_KEYS = ("dt", "lambda_eps", "lambda_over_eps", "steps", "init", "control_kernels", "control_biases")
MODEL2_KEYS = (
    "dt", "eps", "lambda", "delta", "K", "steps", "convention", "prefactor",
    "fp_tol", "fp_max_iters", "fp_polish", "radius", "init", "term_kernels", "term_sources",
)


def model_config(model, params, shape, base=None):
    """Build a ModelIConfig / ModelIIConfig from a plain parameter dict."""
    params = dict(params or {})
    keys = MODEL1_KEYS if model == 1 else MODEL2_KEYS
    unknown = sorted(set(params) - set(keys))
    if unknown:
        raise InvalidParameterError(f"model {model} parameters: unknown keys {unknown}")
    kern = lambda x, w: None if x is None else load_kernel(x, w)  # noqa: E731
    fld = lambda x, w: load_field(x, shape, base, w)  # noqa: E731
    if model == 1:
        cfg = ModelIConfig()
        steps = int(params.get("steps", cfg.steps))
        return ModelIConfig(
            dt=float(params.get("dt", cfg.dt)),
            lambda_eps=float(params.get("lambda_eps", cfg.lambda_eps)),
            lambda_over_eps=float(params.get("lambda_over_eps", cfg.lambda_over_eps)),
            steps=steps,
            control_kernels=_per_step(params.get("control_kernels"), steps, kern, "control_kernels"),
            control_biases=_per_step(params.get("control_biases"), steps, fld, "control_biases"),
            init=_init_ref(params.get("init"), base),
        )
    cfg = ModelIIConfig()
    steps = int(params.get("steps", cfg.steps))
    K = int(params.get("K", cfg.K))
    row = lambda loader: lambda xs, w: [loader(x, f"{w}[{k}]") for k, x in enumerate(_list_of(xs, K, w))]  # noqa: E731
    for name in ("convention", "prefactor"):
        allowed = CONVENTIONS if name == "convention" else PREFACTORS
        if name in params and params[name] not in allowed:
            raise InvalidParameterError(f"{name} must be one of {allowed}, got {params[name]!r}")
    return ModelIIConfig(
        dt=float(params.get("dt", cfg.dt)),
        eps=float(params.get("eps", cfg.eps)),
        lam=float(params.get("lambda", cfg.lam)),
        delta=float(params.get("delta", cfg.delta)),
        K=K,
        steps=steps,
        convention=params.get("convention", cfg.convention),
        prefactor=params.get("prefactor", cfg.prefactor),
        fp_tol=float(params.get("fp_tol", cfg.fp_tol)),
        fp_max_iters=int(params.get("fp_max_iters", cfg.fp_max_iters)),
        fp_polish=bool(params.get("fp_polish", cfg.fp_polish)),
        radius=params.get("radius"),
        term_kernels=_per_step(params.get("term_kernels"), steps, row(kern), "term_kernels"),
        term_sources=_per_step(params.get("term_sources"), steps, row(fld), "term_sources"),
        init=_init_ref(params.get("init"), base),
    )


def _list_of(xs, n, where):
    if not isinstance(xs, list) or len(xs) != n:
        raise InvalidParameterError(f"{where}: expected a list of length K={n}")
    return xs


def region_force_from_dict(doc, shape=None, base=None):
    doc = dict(doc or {})
    kind = doc.get("kind", "chan-vese")
    if kind == "chan-vese":
        c0, c1 = doc.get("c0"), doc.get("c1")
        return RegionForce(
            "chan-vese",
            None if c0 is None else _number(c0, "force.c0"),
            None if c1 is None else _number(c1, "force.c1"),
            int(doc.get("update_every", 5)),
        )
    if kind == "fixed-field":
        return RegionForce("fixed-field", field=load_field(_need(doc, "F", "force"), shape, base, "force.F"))
    raise InvalidParameterError(f"force: unknown kind {kind!r}")


def read_json(path):
    """Parse a JSON file; decoding problems become InvalidParameterError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def to_json(doc):
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"
