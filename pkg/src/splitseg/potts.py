"""Two-phase Potts segmentation by operator splitting.

Model I relaxes the binary constraint with a double-well potential and the
perimeter with a gradient term; one step is an explicit Euler update of the
linear part followed by a pointwise cubic resolvent.

Model II approximates the perimeter by threshold dynamics,
``sqrt(pi/delta) * integral v * (G*(1-v))``, and relaxes the binary
constraint with an entropy term; one step is K Lie substeps, each an explicit
Euler update followed by a logit resolvent, the last one also carrying the
nonlocal interaction implicitly.

Control variables (``W^n, b^n`` for Model I, ``A_k^n, g_k^n`` for Model II)
default to zero; the region force is Chan-Vese with periodic mean updates.
"""

from dataclasses import dataclass, field as dc_field
import math
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import DomainError, InvalidParameterError
from .field import CONVENTIONS, ConvKernel, convolve_periodic, gaussian_kernel, gaussian_std, integrate, laplacian_periodic
from .splitting import GAMMA, resolve_logit_nonlocal

INIT_GAMMA = 1e-3
PREFACTORS = ("paper", "calibrated")


# -- region force -------------------------------------------------------------


def region_force(f, c0, c1):
    """Chan-Vese force ``(f - c0)^2 - (f - c1)^2``; c0 is the foreground mean."""
    f = np.asarray(f, dtype=float)
    return (f - c0) ** 2 - (f - c1) ** 2


class Means(NamedTuple):
    c0: float
    c1: float
    empty: Optional[str]  # "foreground", "background" or None


def update_means(f, u, previous=None):
    """Foreground (u > 0.5) and background means of ``f``.

    An empty region keeps its ``previous`` value; with no previous value the
    global mean is used.
    """
    f = np.asarray(f, dtype=float)
    fg = np.asarray(u) > 0.5
    n_fg = int(fg.sum())
    n_bg = fg.size - n_fg
    fallback = previous if previous is not None else (integrate(f) / f.size,) * 2
    c0 = kernels.seq_sum(f[fg]) / n_fg if n_fg else float(fallback[0])
    c1 = kernels.seq_sum(f[~fg]) / n_bg if n_bg else float(fallback[1])
    empty = "foreground" if n_fg == 0 else "background" if n_bg == 0 else None
    return Means(c0, c1, empty)


def threshold(u):
    return (np.asarray(u) > 0.5).astype(float)


@dataclass
class RegionForce:
    kind: str = "chan-vese"
    c0: Optional[float] = None
    c1: Optional[float] = None
    update_every: int = 5
    field: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("chan-vese", "fixed-field"):
            raise InvalidParameterError(f"unknown region force {self.kind!r}")
        if self.kind == "chan-vese" and (int(self.update_every) != self.update_every or self.update_every < 0):
            raise InvalidParameterError("update_every must be a non-negative integer")
        if self.kind == "fixed-field" and self.field is None:
            raise InvalidParameterError("fixed-field force needs a field")


# -- configs ------------------------------------------------------------------


def _check_positive(obj, names):
    for name in names:
        v = getattr(obj, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InvalidParameterError(f"{name} must be a positive number, got {v!r}")


def _check_steps(steps):
    if int(steps) != steps or steps < 1:
        raise InvalidParameterError(f"steps must be a positive integer, got {steps!r}")


@dataclass
class ModelIConfig:
    dt: float = 0.2
    lambda_eps: float = 1.0
    lambda_over_eps: float = 15.0
    steps: int = 100
    control_kernels: Optional[list] = None  # W^n, one ConvKernel (or None) per step
    control_biases: Optional[list] = None  # b^n, one field (or None) per step
    init: object = "normalized-input"

    def __post_init__(self):
        _check_positive(self, ("dt", "lambda_eps", "lambda_over_eps"))
        _check_steps(self.steps)
        for name in ("control_kernels", "control_biases"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != self.steps:
                raise InvalidParameterError(f"{name} has {len(seq)} entries, expected {self.steps}")

    @property
    def well_coefficient(self):
        """Cubic resolvent parameter ``2*(lambda/eps)*dt``."""
        return 2.0 * self.lambda_over_eps * self.dt


@dataclass
class ModelIIConfig:
    dt: float = 0.5
    eps: float = 2.0
    lam: float = 80.0
    delta: float = 2.0
    K: int = 1
    steps: int = 100
    convention: str = "heat-time"
    prefactor: str = "paper"
    term_kernels: Optional[list] = None  # A_k^n: steps lists of K ConvKernel-or-None
    term_sources: Optional[list] = None  # g_k^n: steps lists of K field-or-None
    fp_tol: float = 1e-10
    fp_max_iters: int = 50
    fp_polish: bool = True
    init: object = "normalized-input"
    radius: Optional[int] = None  # Gaussian truncation radius; None means ceil(4*std)
    _kernel: Optional[ConvKernel] = dc_field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_positive(self, ("dt", "eps", "lam", "delta", "fp_tol"))
        if self.radius is not None and (int(self.radius) != self.radius or self.radius < 0):
            raise InvalidParameterError(f"radius must be a non-negative integer, got {self.radius!r}")
        _check_steps(self.steps)
        if int(self.K) != self.K or self.K < 1:
            raise InvalidParameterError(f"K must be a positive integer, got {self.K!r}")
        if int(self.fp_max_iters) != self.fp_max_iters or self.fp_max_iters < 1:
            raise InvalidParameterError("fp_max_iters must be a positive integer")
        if self.convention not in CONVENTIONS:
            raise InvalidParameterError(f"unknown Gaussian convention {self.convention!r}")
        if self.prefactor not in PREFACTORS:
            raise InvalidParameterError(f"unknown prefactor {self.prefactor!r}")
        for name in ("term_kernels", "term_sources"):
            seq = getattr(self, name)
            if seq is None:
                continue
            if len(seq) != self.steps or any(len(row) != self.K for row in seq):
                raise InvalidParameterError(f"{name} must be a {self.steps}x{self.K} nested list")

    @property
    def kernel(self):
        if self._kernel is None:
            self._kernel = gaussian_kernel(self.delta, self.convention, self.radius)
        return self._kernel

    @property
    def perimeter_scale(self):
        return perimeter_prefactor(self.delta, self.convention, self.prefactor)

    @property
    def mu(self):
        return self.dt * self.eps

    @property
    def nu(self):
        return self.dt * self.lam * self.perimeter_scale


# -- Model I ------------------------------------------------------------------


def _control(seq, n):
    return None if seq is None else seq[n]


def model1_step(u, F, cfg, n=0):
    """One Lie step: explicit Euler on ``F - lambda*eps*lap(u) + W*u + b``,
    then the double-well resolvent with c = 2*(lambda/eps)*dt."""
    u = np.asarray(u, dtype=float)
    if np.shape(F) != u.shape:
        raise InvalidParameterError(f"force shape {np.shape(F)} does not match field {u.shape}")
    rate = F - cfg.lambda_eps * laplacian_periodic(u)
    W = _control(cfg.control_kernels, n)
    if W is not None:
        rate = rate + convolve_periodic(u, W)
    b = _control(cfg.control_biases, n)
    if b is not None:
        rate = rate + b
    return kernels.dw_solve(u - cfg.dt * rate, cfg.well_coefficient)


class EnergyI(NamedTuple):
    total: float
    data: float
    reg: float


def energy_model1(u, F, lambda_eps, lambda_over_eps):
    """Data term plus ``lambda*eps/2 |grad u|^2 + lambda/eps u^2 (1-u)^2``.

    The gradient uses periodic forward differences, the Dirichlet energy
    matching the five-point Laplacian.
    """
    u = np.asarray(u, dtype=float)
    data = integrate(F * u)
    dx = np.roll(u, -1, axis=1) - u
    dy = np.roll(u, -1, axis=0) - u
    grad = integrate(dx * dx + dy * dy)
    well = integrate(u * u * (1.0 - u) ** 2)
    reg = 0.5 * lambda_eps * grad + lambda_over_eps * well
    return EnergyI(data + reg, data, reg)


# -- Model II -----------------------------------------------------------------


def perimeter_prefactor(delta, convention="heat-time", prefactor="paper"):
    """``sqrt(pi/delta)`` ("paper") or ``sqrt(2*pi)/std`` ("calibrated")."""
    if prefactor == "paper":
        if not delta > 0:
            raise InvalidParameterError(f"delta must be positive, got {delta!r}")
        return math.sqrt(math.pi / delta)
    if prefactor == "calibrated":
        return math.sqrt(2.0 * math.pi) / gaussian_std(delta, convention)
    raise InvalidParameterError(f"unknown prefactor {prefactor!r}")


def interaction(v, kernel):
    """``integral v * (G*(1-v))``."""
    v = np.asarray(v, dtype=float)
    return integrate(v * convolve_periodic(1.0 - v, kernel))


def approx_perimeter(v, delta, convention="heat-time", prefactor="paper", kernel=None):
    """Threshold-dynamics perimeter estimate of the set where v = 1."""
    v = np.asarray(v, dtype=float)
    if v.min() < 0.0 or v.max() > 1.0:
        raise InvalidParameterError("approx_perimeter needs values in [0, 1]")
    if kernel is None:
        kernel = gaussian_kernel(delta, convention)
    return perimeter_prefactor(delta, convention, prefactor) * interaction(v, kernel)


def model2_step(u, cfg, F=None, n=0):
    """K Lie substeps. Substep k: ``ubar = u - dt*(A_k*u + g_k)``, then the
    logit resolvent with mu = dt*eps. The region force F joins the source of
    the last substep, whose resolvent also carries the nonlocal term with
    nu = dt*lambda*prefactor."""
    u = np.asarray(u, dtype=float)
    if u.min() <= 0.0 or u.max() >= 1.0:
        raise DomainError("Model II state must lie strictly inside (0, 1)")
    A_row = _control(cfg.term_kernels, n)
    g_row = _control(cfg.term_sources, n)
    for k in range(cfg.K):
        rate = None
        A = None if A_row is None else A_row[k]
        if A is not None:
            rate = convolve_periodic(u, A)
        g = None if g_row is None else g_row[k]
        if g is not None:
            rate = g if rate is None else rate + g
        last = k == cfg.K - 1
        if last and F is not None:
            rate = F if rate is None else rate + F
        ubar = u if rate is None else u - cfg.dt * rate
        if last:
            u = resolve_logit_nonlocal(ubar, cfg.mu, cfg.nu, cfg.kernel, cfg.fp_tol, cfg.fp_max_iters, cfg.fp_polish)
        else:
            u = kernels.logit_solve(ubar, cfg.mu, GAMMA)
    return u


class EnergyII(NamedTuple):
    total: float
    data: float
    entropy: float
    interaction: float


def energy_model2(u, F, eps, lam, delta, convention="heat-time", prefactor="paper", kernel=None):
    u = np.asarray(u, dtype=float)
    if u.min() <= 0.0 or u.max() >= 1.0:
        raise DomainError("entropy energy needs u strictly inside (0, 1)")
    if kernel is None:
        kernel = gaussian_kernel(delta, convention)
    data = integrate(F * u)
    ent = eps * integrate(u * np.log(u) + (1.0 - u) * np.log1p(-u))
    inter = lam * perimeter_prefactor(delta, convention, prefactor) * interaction(u, kernel)
    return EnergyII(data + ent + inter, data, ent, inter)


# -- driver -------------------------------------------------------------------


class EnergyTrace:
    """Per-step energy rows; ``columns`` names the energy parts."""

    def __init__(self, parts):
        self.columns = ("step", "t", "total") + tuple(parts)
        self.rows = []

    def append(self, step, t, energy):
        if self.rows and step <= self.rows[-1][0]:
            raise InvalidParameterError("energy trace steps must increase")
        self.rows.append((int(step), float(t)) + tuple(float(x) for x in energy))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self):
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join([str(r[0])] + [f"{x:.17g}" for x in r[1:]]))
        return "\n".join(lines) + "\n"


class SegmentResult(NamedTuple):
    u: np.ndarray
    mask: np.ndarray
    trace: EnergyTrace
    c0: Optional[float]
    c1: Optional[float]


def normalized_input(f, gamma=INIT_GAMMA):
    """Rescale f affinely onto [gamma, 1-gamma]; a constant image maps to 0.5."""
    f = np.asarray(f, dtype=float)
    lo, hi = f.min(), f.max()
    if hi == lo:
        return np.full_like(f, 0.5)
    return gamma + (1.0 - 2.0 * gamma) * (f - lo) / (hi - lo)


def initial_state(f, init):
    if isinstance(init, str) and init == "normalized-input":
        return normalized_input(f)
    if isinstance(init, tuple) and len(init) == 2 and init[0] == "constant":
        return np.full(np.shape(f), float(init[1]))
    if isinstance(init, tuple) and len(init) == 2 and init[0] == "file":
        from .pgm import read_pgm

        u0 = read_pgm(Path(init[1]).read_bytes())
    elif isinstance(init, np.ndarray):
        u0 = np.asarray(init, dtype=float)
    else:
        raise InvalidParameterError(f"unrecognized init {init!r}")
    if u0.shape != np.shape(f):
        raise InvalidParameterError(f"initial state shape {u0.shape} does not match image {np.shape(f)}")
    return u0


def segment(f, model, cfg=None, force=None, on_step=None):
    """Run Model I or II on image ``f`` and threshold the result at 0.5.

    ``on_step(n, u)``, if given, sees every state including the initial one.
    """
    f = np.asarray(f, dtype=float)
    if model in (1, "1", "I"):
        cfg = cfg if cfg is not None else ModelIConfig()
        stepper = lambda u, F, n: model1_step(u, F, cfg, n)  # noqa: E731
        energy = lambda u, F: energy_model1(u, F, cfg.lambda_eps, cfg.lambda_over_eps)  # noqa: E731
        parts = ("data", "reg")
    elif model in (2, "2", "II"):
        cfg = cfg if cfg is not None else ModelIIConfig()
        stepper = lambda u, F, n: model2_step(u, cfg, F, n)  # noqa: E731
        energy = lambda u, F: energy_model2(  # noqa: E731
            u, F, cfg.eps, cfg.lam, cfg.delta, cfg.convention, cfg.prefactor, cfg.kernel
        )
        parts = ("data", "entropy", "interaction")
    else:
        raise InvalidParameterError(f"model must be 1 or 2, got {model!r}")
    force = force if force is not None else RegionForce()

    u = initial_state(f, cfg.init)
    c0 = c1 = None
    if force.kind == "chan-vese":
        if force.c0 is None or force.c1 is None:
            m = update_means(f, u)
            c0 = m.c0 if force.c0 is None else float(force.c0)
            c1 = m.c1 if force.c1 is None else float(force.c1)
        else:
            c0, c1 = float(force.c0), float(force.c1)
        F = region_force(f, c0, c1)
    else:
        F = np.asarray(force.field, dtype=float)
        if F.shape != f.shape:
            raise InvalidParameterError("fixed force field shape does not match image")

    trace = EnergyTrace(parts)
    trace.append(0, 0.0, energy(u, F))
    if on_step is not None:
        on_step(0, u)
    for n in range(cfg.steps):
        if force.kind == "chan-vese" and force.update_every and n > 0 and n % force.update_every == 0:
            c0, c1, _ = update_means(f, u, (c0, c1))
            F = region_force(f, c0, c1)
        u = stepper(u, F, n)
        trace.append(n + 1, (n + 1) * cfg.dt, energy(u, F))
        if on_step is not None:
            on_step(n + 1, u)
    return SegmentResult(u, threshold(u), trace, c0, c1)
