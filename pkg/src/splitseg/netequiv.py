"""Feedforward-network form of splitting schemes.

A sequential scheme with K substeps is a chain of K layers
``sigma_k((I + dt A_k) x + dt g_k)`` followed by an identity head. A parallel
scheme is one block of K branches with step ``K*dt`` and an averaging head.
Weights are kept structurally (operator kind, coefficient, kernel); a dense
matrix for an image-sized field would not fit in memory.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidParameterError
from .splitting import LinearOp, Resolvent, affine, step

TOPOLOGIES = ("chain", "parallel-block")


@dataclass(frozen=True, eq=False)
class FnnLayer:
    """``activation((I + a*op) x + bias)``."""

    op: LinearOp
    a: float
    bias: Optional[np.ndarray]
    activation: Resolvent

    def __call__(self, x):
        if self.bias is not None and self.bias.shape != x.shape:
            raise InvalidParameterError(f"bias shape {self.bias.shape} does not match input {x.shape}")
        return self.activation(affine(x, self.op, self.a, self.bias))


@dataclass(frozen=True, eq=False)
class FnnModel:
    layers: tuple
    topology: str = "chain"

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise InvalidParameterError(f"unknown topology {self.topology!r}")
        if not self.layers:
            raise InvalidParameterError("model needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def head(self):
        return "identity" if self.topology == "chain" else "average"

    @property
    def width(self):
        """Number of layers in a chain, number of branches in a parallel block."""
        return len(self.layers)

    def pass_once(self, x):
        if self.topology == "chain":
            for layer in self.layers:
                x = layer(x)
            return x  # identity head: W = I, b = 0
        outs = [layer(x) for layer in self.layers]
        acc = outs[0]
        for o in outs[1:]:
            acc = acc + o
        return acc / len(outs)


def export_sequential(spec):
    if spec.mode != "sequential":
        raise InvalidParameterError("export_sequential needs a sequential scheme")
    layers = [
        FnnLayer(term.op, spec.dt, None if term.source is None else spec.dt * term.source, res)
        for term, res in spec.terms
    ]
    return FnnModel(tuple(layers), "chain")


def export_parallel(spec):
    if spec.mode != "parallel":
        raise InvalidParameterError("export_parallel needs a parallel scheme")
    a = spec.dt * spec.K
    layers = [FnnLayer(term.op, a, None if term.source is None else a * term.source, res) for term, res in spec.terms]
    return FnnModel(tuple(layers), "parallel-block")


def export(spec):
    return export_sequential(spec) if spec.mode == "sequential" else export_parallel(spec)


def forward(model, u0, n_passes=1):
    """Apply the model ``n_passes`` times; one pass is one scheme time step."""
    if int(n_passes) != n_passes or n_passes < 1:
        raise InvalidParameterError(f"n_passes must be a positive integer, got {n_passes!r}")
    x = np.asarray(u0, dtype=float)
    for _ in range(int(n_passes)):
        x = model.pass_once(x)
    return x


class EquivalenceReport(NamedTuple):
    max_abs_diff: float
    passed: bool


def compare_trajectories(spec, model, u0, n):
    """Step the scheme and the model side by side for ``n`` steps."""
    u = v = np.asarray(u0, dtype=float)
    worst = 0.0
    same = True
    for _ in range(n):
        u = step(u, spec)
        v = model.pass_once(v)
        same = same and np.array_equal(u, v)
        worst = max(worst, float(np.max(np.abs(u - v))))
    return EquivalenceReport(worst, bool(same and worst == 0.0))


def check_equivalence(spec, u0, n=None):
    n = spec.steps if n is None else n
    return compare_trajectories(spec, export(spec), u0, n)

