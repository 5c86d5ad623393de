"""Random SchemeSpecs for equivalence tests."""

import numpy as np

from splitseg.field import ConvKernel, gaussian_kernel
from splitseg.splitting import LinearOp, LinearTerm, Resolvent, SchemeSpec


def random_op(rng):
    kind = rng.integers(4)
    if kind == 0:
        return LinearOp.zero()
    if kind == 1:
        return LinearOp.scaled_identity(rng.uniform(-1, 1))
    if kind == 2:
        return LinearOp.scaled_laplacian(rng.uniform(0, 0.5))
    size = 2 * int(rng.integers(0, 2)) + 1
    return LinearOp.conv(ConvKernel(rng.normal(scale=0.3, size=(size, size))))


def random_resolvent(rng, kind):
    if kind == "identity":
        return Resolvent.identity()
    if kind == "double-well":
        return Resolvent.double_well(rng.uniform(0, 8))
    if kind == "logit":
        return Resolvent.logit(rng.uniform(0.05, 2))
    k = gaussian_kernel(rng.uniform(0.3, 1.0), radius=int(rng.integers(1, 3)))
    return Resolvent.logit_nonlocal(rng.uniform(0.5, 2), rng.uniform(0, 1.5), k, max_iters=500)


KINDS = ("identity", "double-well", "logit", "logit-nonlocal")


def random_spec(rng, mode=None, K=None, shape=None, kinds=None):
    """Return ``(spec, u0)``. ``kinds`` forces the resolvent kind per term."""
    mode = mode or ("sequential", "parallel")[rng.integers(2)]
    K = K or int(rng.integers(1, 5))
    H, W = shape or (int(rng.integers(5, 17)), int(rng.integers(5, 17)))
    terms = []
    for k in range(K):
        kind = kinds[k] if kinds else KINDS[rng.integers(4)]
        src = rng.normal(scale=0.2, size=(H, W)) if rng.random() < 0.5 else None
        terms.append((LinearTerm(random_op(rng), src), random_resolvent(rng, kind)))
    spec = SchemeSpec(mode, tuple(terms), float(rng.uniform(0.01, 0.1)), int(rng.integers(1, 4)))
    return spec, rng.uniform(0.05, 0.95, (H, W))
