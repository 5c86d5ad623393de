"""Operator-splitting engine for du/dt = sum_k (A_k u + B_k(u) + g_k).

Each substep is an explicit Euler step on the linear part followed by a
resolvent ``(I - dt B_k)^-1`` on the nonlinear part. The linear step is
evaluated as ``(u + a*(A u)) + a*g`` in that exact order; the network export
in :mod:`splitseg.netequiv` relies on the same primitive, which is what makes
the scheme/network equivalence hold bit for bit.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import ConvergenceError, DegenerateFitError, DomainError, InvalidParameterError
from .field import ConvKernel, convolve_periodic, laplacian_periodic

GAMMA = 1e-15

OPERATOR_KINDS = ("zero", "scaled-identity", "scaled-laplacian", "conv-kernel")
RESOLVENT_KINDS = ("identity", "double-well", "logit", "logit-nonlocal")
MODES = ("sequential", "parallel")


# -- scalar / pointwise resolvents ------------------------------------------


def _unwrap(x, scalar):
    return float(x) if scalar else x


def resolve_identity(ubar):
    return ubar


def resolve_double_well(ubar, c):
    """Solve ``u + c*(2u^3 - 3u^2 + u) = ubar`` pointwise.

    When the cubic has several real roots (possible for c > 2) the root nearest
    ``ubar`` is returned, ties going to the smaller root.
    """
    if not (c >= 0 and math.isfinite(c)):
        raise InvalidParameterError(f"double-well parameter must be finite and >= 0, got {c!r}")
    scalar = np.ndim(ubar) == 0
    arr = np.atleast_1d(np.asarray(ubar, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError("double-well resolvent input must be finite")
    out = kernels.dw_solve(arr, c)
    return _unwrap(out[0] if scalar else out, scalar)


def resolve_logit(ubar, mu):
    """Solve ``u + mu*ln(u/(1-u)) = ubar`` pointwise; output in (0, 1) for mu > 0."""
    if not (mu >= 0 and math.isfinite(mu)):
        raise InvalidParameterError(f"logit parameter must be finite and >= 0, got {mu!r}")
    scalar = np.ndim(ubar) == 0
    arr = np.atleast_1d(np.asarray(ubar, dtype=float))
    if mu == 0:
        if not np.all((arr > 0.0) & (arr < 1.0)):
            raise DomainError("logit resolvent with mu = 0 needs input strictly inside (0, 1)")
        out = arr.copy()
    else:
        out = kernels.logit_solve(arr, mu, GAMMA)
    return _unwrap(out[0] if scalar else out, scalar)


POLISH_GATE = 0.1  # lagged change below which Newton polishing may start
_POLISH_COOLDOWN = 3


def _is_symmetric(kernel):
    w = kernel.weights
    return bool(np.array_equal(w, w[::-1, ::-1]))


def _newton_point(u, ubar, mu, nu, kernel, rtol=1e-4, max_cg=100):
    """One inexact Newton step on H(u) = u + mu*logit(u) + nu*G*(1-2u) - ubar.

    The Jacobian diag(1 + mu/(u(1-u))) - 2*nu*G is symmetric for a symmetric
    kernel and positive definite near a stable solution, so the correction is
    found by Jacobi-preconditioned CG. CG stops at the first direction of
    nonpositive curvature and keeps what it has.
    """
    a = u * (1.0 - u)
    d = 1.0 + mu / a
    h = u + mu * (np.log(u) - np.log1p(-u)) + nu * convolve_periodic(1.0 - 2.0 * u, kernel) - ubar
    x = np.zeros_like(u)
    r = -h
    z = r / d
    p = z.copy()
    rz = kernels.seq_sum((r * z).ravel())
    stop = rtol * rtol * rz
    for _ in range(max_cg):
        if rz <= stop:
            break
        ap = d * p - 2.0 * nu * convolve_periodic(p, kernel)
        pap = kernels.seq_sum((p * ap).ravel())
        if not pap > 0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = r / d
        rz_new = kernels.seq_sum((r * z).ravel())
        p = z + (rz_new / rz) * p
        rz = rz_new
    return np.clip(u + x, GAMMA, 1.0 - GAMMA)


def resolve_logit_nonlocal(ubar, mu, nu, kernel, tol=1e-10, max_iters=50, polish=True):
    """Solve ``u + mu*ln(u/(1-u)) + nu*G*(1-2u) = ubar`` over a whole field.

    Lagged fixed point: the convolution is evaluated at the previous iterate
    and each pass is a pointwise logit solve. Since the interaction term is
    concave this is a majorize-minimize iteration on the associated energy.

    For large nu the contraction rate on interface pixels approaches 1. With
    ``polish`` (and a symmetric kernel), once two consecutive lagged passes
    contract and the change is below ``POLISH_GATE``, a pass may start from a
    Newton-corrected point instead. The Newton pass is kept only if its change
    is smaller than the last accepted one; otherwise it is discarded and a few
    plain passes follow. The system can have many solutions, so the gate keeps
    the acceleration inside the basin the lagged iterates are already in.
    Convergence is judged on a lagged pass: the returned ``u`` satisfies
    ``max|u - prev| <= tol`` where ``u`` is the lagged update of ``prev``.
    Every pass, accepted or not, counts toward ``max_iters``.
    """
    if not mu > 0:
        raise InvalidParameterError(f"nonlocal logit resolvent needs mu > 0, got {mu!r}")
    if not nu >= 0:
        raise InvalidParameterError(f"nonlocal coupling must be >= 0, got {nu!r}")
    if not kernel.normalized:
        raise InvalidParameterError("nonlocal logit resolvent needs a normalized kernel")
    ubar = np.asarray(ubar, dtype=float)
    if nu == 0:
        return kernels.logit_solve(ubar, mu, GAMMA)
    polish = polish and _is_symmetric(kernel)

    def lagged(v):
        return kernels.logit_solve(ubar - nu * convolve_periodic(1.0 - 2.0 * v, kernel), mu, GAMMA)

    u = lagged(np.clip(ubar, GAMMA, 1.0 - GAMMA))
    change = before = math.inf
    contracting = 0  # consecutive plain passes with shrinking change
    cooldown = 0
    for _ in range(max_iters):
        if polish and cooldown == 0 and contracting >= 2 and change < POLISH_GATE:
            cand = _newton_point(u, ubar, mu, nu, kernel)
            nxt = lagged(cand)
            step_change = float(np.max(np.abs(nxt - cand)))
            if step_change < change:
                u, change = nxt, step_change
            else:
                cooldown, contracting = _POLISH_COOLDOWN, 0
        else:
            nxt = lagged(u)
            before, change = change, float(np.max(np.abs(nxt - u)))
            u = nxt
            contracting = contracting + 1 if change < before else 0
            cooldown = max(cooldown - 1, 0)
        if change <= tol:
            return u
    raise ConvergenceError(f"nonlocal logit resolvent did not converge in {max_iters} iterations", change)


# -- structural types ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearOp:
    """Linear, translation-equivariant operator on periodic fields."""

    kind: str = "zero"
    coefficient: float = 0.0
    kernel: Optional[ConvKernel] = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise InvalidParameterError(f"unknown operator kind {self.kind!r}")
        if self.kind == "conv-kernel" and self.kernel is None:
            raise InvalidParameterError("conv-kernel operator needs a kernel")
        if not math.isfinite(self.coefficient):
            raise InvalidParameterError("operator coefficient must be finite")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def scaled_identity(cls, a):
        return cls("scaled-identity", float(a))

    @classmethod
    def scaled_laplacian(cls, a):
        return cls("scaled-laplacian", float(a))

    @classmethod
    def conv(cls, kernel):
        return cls("conv-kernel", kernel=kernel)

    def __call__(self, u):
        if self.kind == "scaled-identity":
            return self.coefficient * u
        if self.kind == "scaled-laplacian":
            return self.coefficient * laplacian_periodic(u)
        if self.kind == "conv-kernel":
            return convolve_periodic(u, self.kernel)
        return np.zeros_like(u)


@dataclass(frozen=True, eq=False)
class LinearTerm:
    op: LinearOp = LinearOp()
    source: Optional[np.ndarray] = None  # None means g = 0

    def __post_init__(self):
        if self.source is not None:
            src = np.array(self.source, dtype=float)
            if src.ndim != 2 or not np.all(np.isfinite(src)):
                raise InvalidParameterError("source must be a finite 2-D field")
            src.setflags(write=False)
            object.__setattr__(self, "source", src)


@dataclass(frozen=True, eq=False)
class Resolvent:
    """Activation ``(I - dt B)^-1`` of one substep.

    ``c`` parametrizes the double well; ``mu`` the logit forms; ``nu``,
    ``kernel``, ``tol`` and ``max_iters`` the nonlocal logit form.
    """

    kind: str = "identity"
    c: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    kernel: Optional[ConvKernel] = None
    tol: float = 1e-10
    max_iters: int = 50
    polish: bool = True

    def __post_init__(self):
        if self.kind not in RESOLVENT_KINDS:
            raise InvalidParameterError(f"unknown resolvent kind {self.kind!r}")
        for name in ("c", "mu", "nu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"resolvent parameter {name} must be finite and >= 0")
        if self.kind == "logit-nonlocal":
            if self.kernel is None or not self.kernel.normalized:
                raise InvalidParameterError("logit-nonlocal needs a normalized kernel")
            if not self.mu > 0:
                raise InvalidParameterError("logit-nonlocal needs mu > 0")
            if not (self.tol > 0 and int(self.max_iters) == self.max_iters and self.max_iters >= 1):
                raise InvalidParameterError("logit-nonlocal needs tol > 0 and max_iters >= 1")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def double_well(cls, c):
        return cls("double-well", c=float(c))

    @classmethod
    def logit(cls, mu):
        return cls("logit", mu=float(mu))

    @classmethod
    def logit_nonlocal(cls, mu, nu, kernel, tol=1e-10, max_iters=50, polish=True):
        return cls("logit-nonlocal", mu=float(mu), nu=float(nu), kernel=kernel, tol=tol, max_iters=max_iters, polish=polish)

    def __call__(self, ubar):
        if self.kind == "identity":
            return ubar
        if self.kind == "double-well":
            return kernels.dw_solve(ubar, self.c)
        if self.kind == "logit":
            return resolve_logit(ubar, self.mu)
        return resolve_logit_nonlocal(ubar, self.mu, self.nu, self.kernel, self.tol, self.max_iters, self.polish)


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    mode: str
    terms: tuple  # of (LinearTerm, Resolvent)
    dt: float
    steps: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        terms = tuple((t, r) for t, r in self.terms)
        if not terms:
            raise InvalidParameterError("a scheme needs at least one term")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidParameterError(f"dt must be positive, got {self.dt!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidParameterError(f"steps must be a positive integer, got {self.steps!r}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def K(self):
        return len(self.terms)


# -- stepping -----------------------------------------------------------------


def affine(u, op, a, bias):
    """``(u + a*op(u)) + bias`` with the evaluation order fixed."""
    out = u if op.kind == "zero" else u + a * op(u)
    return out if bias is None else out + bias


def _check_dims(u, term):
    if term.source is not None and term.source.shape != u.shape:
        raise InvalidParameterError(f"source shape {term.source.shape} does not match field {u.shape}")


def apply_linear_step(u, term, dt_eff):
    """Forward Euler on the linear part: ``u + dt_eff*(A u + g)``."""
    u = np.asarray(u, dtype=float)
    _check_dims(u, term)
    bias = None if term.source is None else dt_eff * term.source
    return affine(u, term.op, dt_eff, bias)


def step_sequential(u, spec):
    if spec.mode != "sequential":
        raise InvalidParameterError("step_sequential needs a sequential scheme")
    for term, res in spec.terms:
        u = res(apply_linear_step(u, term, spec.dt))
    return u


def average_fixed_order(branches):
    acc = branches[0]
    for b in branches[1:]:
        acc = acc + b
    return acc / len(branches)


def step_parallel(u, spec):
    if spec.mode != "parallel":
        raise InvalidParameterError("step_parallel needs a parallel scheme")
    a = spec.dt * spec.K
    return average_fixed_order([res(apply_linear_step(u, term, a)) for term, res in spec.terms])


def step(u, spec):
    return step_sequential(u, spec) if spec.mode == "sequential" else step_parallel(u, spec)


def run(spec, u0, record=False):
    """Advance ``u0`` by ``spec.steps`` steps. Returns ``(u, trajectory)``;
    the trajectory is None unless ``record`` and then holds steps+1 fields."""
    u = np.asarray(u0, dtype=float)
    for term, _ in spec.terms:
        _check_dims(u, term)
    traj = [u] if record else None
    for _ in range(spec.steps):
        u = step(u, spec)
        if record:
            traj.append(u)
    return u, traj


# -- convergence order --------------------------------------------------------


class OrderResult(NamedTuple):
    slope: float
    dts: tuple
    errors: tuple


def estimate_order(make_spec, u0, exact, dts, T):
    """Fit the log-log slope of max-norm error against dt.

    ``make_spec(dt, steps)`` builds the scheme; ``exact`` is the reference
    field at time ``T``. Every dt must divide T.
    """
    dts = tuple(float(d) for d in dts)
    if len(set(dts)) < 3:
        raise InvalidParameterError("order estimation needs at least 3 distinct dt values")
    errors = []
    for dt in dts:
        n = round(T / dt)
        if n < 1 or abs(n * dt - T) > 1e-9 * T:
            raise InvalidParameterError(f"dt={dt} does not divide T={T}")
        u, _ = run(make_spec(dt, n), u0)
        errors.append(float(np.max(np.abs(u - exact))))
    if min(errors) == 0.0:
        raise DegenerateFitError("zero error at some dt; the scheme is exact for this problem")
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    return OrderResult(float(slope), dts, tuple(errors))


# -- built-in convergence problems ------------------------------------------

ORDER_DTS = (1 / 10, 1 / 20, 1 / 40, 1 / 80)
ORDER_BAND = (0.9, 1.1)


def _decay_u0():
    return np.linspace(0.5, 1.5, 9).reshape(3, 3)


def _linear_split(mode):
    def make(dt, n):
        terms = (
            (LinearTerm(LinearOp.scaled_identity(-0.3)), Resolvent.identity()),
            (LinearTerm(LinearOp.scaled_identity(-0.7)), Resolvent.identity()),
        )
        return SchemeSpec(mode, terms, dt, n)

    return make


def _euler_linear(dt, n):
    return SchemeSpec("sequential", ((LinearTerm(LinearOp.scaled_identity(-1.0)), Resolvent.identity()),), dt, n)


def _double_well_split(dt, n):
    # du/dt = -0.5 u - (2u^3 - 3u^2 + u); the resolvent parameter scales with dt
    terms = (
        (LinearTerm(LinearOp.scaled_identity(-0.5)), Resolvent.identity()),
        (LinearTerm(), Resolvent.double_well(dt)),
    )
    return SchemeSpec("sequential", terms, dt, n)


def _double_well_reference(u0, T):
    from scipy.integrate import solve_ivp

    def rhs(_, y):
        return -0.5 * y - (2 * y**3 - 3 * y**2 + y)

    sol = solve_ivp(rhs, (0.0, T), u0.ravel(), method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1].reshape(u0.shape)


def order_problem(name):
    """Return ``(make_spec, u0, exact, dts, T, asserted)`` for a built-in problem.

    ``asserted`` is False for problems whose order is measured only (nonlinear
    resolvents, reference from a high-accuracy ODE solve).
    """
    T = 1.0
    u0 = _decay_u0()
    if name in ("lie-linear", "parallel-linear"):
        mode = "sequential" if name == "lie-linear" else "parallel"
        return _linear_split(mode), u0, math.exp(-T) * u0, ORDER_DTS, T, True
    if name == "euler-linear":
        return _euler_linear, u0, math.exp(-T) * u0, ORDER_DTS, T, True
    if name == "lie-double-well":
        u0 = np.linspace(0.1, 0.9, 9).reshape(3, 3)
        return _double_well_split, u0, _double_well_reference(u0, T), ORDER_DTS, T, False
    raise KeyError(name)


ORDER_PROBLEMS = ("lie-linear", "parallel-linear", "euler-linear", "lie-double-well")
