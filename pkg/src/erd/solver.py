"""ADMM solver for the exponential Retinex decomposition.

The observed image ``f`` is modelled as ``exp(i + r) + noise`` with a smooth
log-illumination ``i`` and a piecewise-constant log-reflectance ``r``. The
energy being minimized is::

    lam/2 ||f - exp(i + r)||_{H^-1}^2 + omega1 sum phi(hess i)
        + omega2 sum phi(grad r) + theta/2 ||i||^2

and is split with ``v = i + r``, ``u = exp(v)``, ``m = hess i``, ``n = grad r``.
Each outer iteration updates, in this order, v (linearized step), u, i, r
(exact spectral solves), m, n (one MM step each) and the three multipliers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import kernels
from .fftops import grad, hess, hminus_norm_sq, solve_i, solve_r, solve_u
from .grid import check_same_shape
from .metrics import psnr, relative_error
from .potentials import PotentialSpec, mm_step, phi_sum

__all__ = [
    "SolverConfig", "AdmmState", "IterationDiagnostics", "Decomposition",
    "SolverDivergence", "V_MIN", "V_MAX", "EPS_LOG", "INIT_MODES", "expv",
    "init_state", "update_v", "update_u", "update_i", "update_r", "update_m",
    "update_n", "update_multipliers", "step", "lagrangian_value", "energy",
    "residuals", "run", "decompose_outputs",
]

#: Exponent range applied before every ``exp(v)``.
V_MIN = math.log(1e-4)
V_MAX = math.log(4.0)
#: Floor used when taking the log of the initial guess.
EPS_LOG = 1e-4
#: Accepted range of observed intensities; noisy inputs are not clamped.
F_RANGE = (-1.0, 2.0)

INIT_MODES = ("zeros", "ones", "random", "observed")


class SolverDivergence(FloatingPointError):
    """A non-finite value appeared during an update."""

    def __init__(self, update: str, iteration: int):
        super().__init__(f"non-finite values after the {update}-update "
                         f"at iteration {iteration}")
        self.update = update
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """Model weights and algorithm settings.

    Defaults form the documented default profile, tuned for intensities in
    [0, 1] with moderate Gaussian noise; they are normally retuned per image
    and noise level.

    The linearized v-step is only locally stable while
    ``rho * exp(2 v) < beta + 2 tau``, so ``beta`` and ``tau`` are kept large
    enough for intensities up to about 2 at the default ``rho``.
    """

    lam: float = 2.0
    omega1: float = 0.01
    omega2: float = 0.1
    theta: float = 0.01
    beta: float = 200.0
    rho: float = 100.0
    tau: float = 100.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    tol: float = 1e-5
    max_iters: int = 1000
    min_iters: int = 10
    init_mode: str = "observed"
    couple_init: bool = False
    rng_seed: int = 0
    track_lagrangian: bool = True

    def __post_init__(self):
        for name in ("lam", "omega1", "omega2", "theta", "beta", "rho", "tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not math.isfinite(self.tau) or not self.beta > abs(self.tau):
            raise ValueError(f"need beta > |tau|, got beta={self.beta}, tau={self.tau}")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be at least 1")
        if int(self.min_iters) < 0:
            raise ValueError("min_iters must be non-negative")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if int(self.rng_seed) < 0:
            raise ValueError("rng_seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        data = dict(data)
        pot = data.pop("potential", None)
        if isinstance(pot, dict):
            pot = PotentialSpec(**pot)
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if pot is not None:
            data["potential"] = pot
        return cls(**data)


@dataclass
class AdmmState:
    """Primal and dual variables after ``k`` iterations."""

    i: np.ndarray
    r: np.ndarray
    v: np.ndarray
    u: np.ndarray
    m: np.ndarray
    n: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    y3: np.ndarray
    k: int = 0

    def copy(self) -> "AdmmState":
        return AdmmState(*(getattr(self, f.name).copy() for f in fields(self)[:-1]),
                         k=self.k)


@dataclass(frozen=True)
class IterationDiagnostics:
    iter: int
    rel_err: float
    lagrangian: float
    res_u: float
    res_m: float
    res_n: float
    psnr: Optional[float] = None

    COLUMNS = ("iter", "rel_err", "lagrangian", "res_u", "res_m", "res_n", "psnr")


@dataclass(frozen=True)
class Decomposition:
    reflectance: np.ndarray
    illumination: np.ndarray
    recon: np.ndarray
    u: np.ndarray
    noise: np.ndarray
    split_gap: float


def expv(v: np.ndarray) -> np.ndarray:
    """``exp(v)`` with the exponent clamped to ``[V_MIN, V_MAX]``."""
    return np.exp(np.clip(v, V_MIN, V_MAX))


def _check_observed(f: np.ndarray) -> np.ndarray:
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"observed image must be 2-D, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("observed image contains NaN or Inf")
    lo, hi = F_RANGE
    if f.min() < lo or f.max() > hi:
        raise ValueError(f"observed image values must lie in [{lo}, {hi}] "
                         f"(normalized intensities plus noise); got "
                         f"[{f.min():.3g}, {f.max():.3g}]")
    return f


def init_state(f, config: SolverConfig) -> AdmmState:
    """Starting point for :func:`run`.

    ``config.init_mode`` selects ``u0``: all zeros, all ones, uniform noise in
    ``[0, 1)`` drawn from ``config.rng_seed``, or the observed image. The
    log-domain variables start from the observed image, ``v0 = r0 =
    log(max(f, EPS_LOG))`` and ``i0 = 0``, unless ``config.couple_init`` is set,
    in which case they are derived from ``u0`` instead.
    """
    f = _check_observed(f)
    h, w = f.shape
    mode = config.init_mode
    if mode == "zeros":
        u0 = np.zeros((h, w))
    elif mode == "ones":
        u0 = np.ones((h, w))
    elif mode == "random":
        u0 = np.random.default_rng(config.rng_seed).uniform(0.0, 1.0, size=(h, w))
    else:
        u0 = f.copy()
    v0 = np.log(np.maximum(u0 if config.couple_init else f, EPS_LOG))
    i0 = np.zeros((h, w))
    r0 = v0.copy()
    return AdmmState(i=i0, r=r0, v=v0, u=u0, m=hess(i0), n=grad(r0),
                     y1=np.zeros((h, w)), y2=np.zeros((4, h, w)),
                     y3=np.zeros((2, h, w)), k=0)


def update_v(state: AdmmState, config: SolverConfig) -> np.ndarray:
    return kernels.v_update(state.i, state.r, state.v, state.u, state.y1,
                            config.beta, config.tau, config.rho, V_MIN, V_MAX)


def update_u(state: AdmmState, f, config: SolverConfig) -> np.ndarray:
    return solve_u(f, expv(state.v), state.y1, config.lam, config.rho)


def update_i(state: AdmmState, config: SolverConfig) -> np.ndarray:
    return solve_i(state.v, state.r, state.m, state.y2, config.beta,
                   config.theta, config.rho)


def update_r(state: AdmmState, config: SolverConfig) -> np.ndarray:
    return solve_r(state.v, state.i, state.n, state.y3, config.beta, config.rho)


def update_m(state: AdmmState, config: SolverConfig, hess_i=None) -> np.ndarray:
    base = hess(state.i) if hess_i is None else hess_i
    return mm_step(base, state.y2, state.m, config.omega1, config.rho, config.potential)


def update_n(state: AdmmState, config: SolverConfig, grad_r=None) -> np.ndarray:
    base = grad(state.r) if grad_r is None else grad_r
    return mm_step(base, state.y3, state.n, config.omega2, config.rho, config.potential)


def update_multipliers(state: AdmmState, config: SolverConfig, hess_i=None,
                       grad_r=None):
    """Dual ascent on the three constraints; returns ``(y1, y2, y3)``."""
    hess_i = hess(state.i) if hess_i is None else hess_i
    grad_r = grad(state.r) if grad_r is None else grad_r
    rho = config.rho
    y1 = kernels.y1_update(state.y1, state.u, state.v, rho, V_MIN, V_MAX)
    y2 = state.y2 + rho * (state.m - hess_i)
    y3 = state.y3 + rho * (state.n - grad_r)
    return y1, y2, y3


def _guard(arr: np.ndarray, update: str, iteration: int) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise SolverDivergence(update, iteration)
    return arr


def step(state: AdmmState, f, config: SolverConfig) -> AdmmState:
    """One full ADMM iteration; `state` is left untouched."""
    k = state.k + 1
    s = state.copy()
    s.v = _guard(update_v(s, config), "v", k)
    s.u = _guard(update_u(s, f, config), "u", k)
    s.i = _guard(update_i(s, config), "i", k)
    s.r = _guard(update_r(s, config), "r", k)
    hess_i = hess(s.i)
    grad_r = grad(s.r)
    s.m = _guard(update_m(s, config, hess_i), "m", k)
    s.n = _guard(update_n(s, config, grad_r), "n", k)
    y1, y2, y3 = update_multipliers(s, config, hess_i, grad_r)
    s.y1 = _guard(y1, "y1", k)
    s.y2 = _guard(y2, "y2", k)
    s.y3 = _guard(y3, "y3", k)
    s.k = k
    return s


def _constraint_gaps(state: AdmmState, hess_i=None, grad_r=None):
    hess_i = hess(state.i) if hess_i is None else hess_i
    grad_r = grad(state.r) if grad_r is None else grad_r
    return state.u - expv(state.v), state.m - hess_i, state.n - grad_r


def residuals(state: AdmmState, hess_i=None, grad_r=None) -> tuple[float, float, float]:
    """Constraint residual norms ``||u - e^v||, ||m - hess i||, ||n - grad r||``."""
    return tuple(float(np.linalg.norm(g)) for g in _constraint_gaps(state, hess_i, grad_r))


def energy(i, r, f, config: SolverConfig) -> float:
    """Model energy of a log-illumination / log-reflectance pair."""
    pot = config.potential
    return (0.5 * config.lam * hminus_norm_sq(f - expv(i + r))
            + config.omega1 * phi_sum(pot, hess(i))
            + config.omega2 * phi_sum(pot, grad(r))
            + 0.5 * config.theta * float(np.vdot(i, i)))


def lagrangian_value(state: AdmmState, f, config: SolverConfig,
                     form: str = "completed", hess_i=None, grad_r=None) -> float:
    """Augmented Lagrangian, including the ``-C`` multiplier correction.

    ``form="completed"`` sums ``rho/2 ||res + y/rho||^2`` terms and subtracts
    ``C``; ``form="inner"`` uses ``<y, res> + rho/2 ||res||^2``. The two agree
    up to rounding.
    """
    rho = config.rho
    pot = config.potential
    res = _constraint_gaps(state, hess_i, grad_r)
    ys = (state.y1, state.y2, state.y3)
    base = (0.5 * config.lam * hminus_norm_sq(f - state.u)
            + config.omega1 * phi_sum(pot, state.m)
            + config.omega2 * phi_sum(pot, state.n)
            + 0.5 * config.theta * float(np.vdot(state.i, state.i))
            + 0.5 * config.beta * float(np.sum((state.v - state.i - state.r) ** 2)))
    if form == "completed":
        c = sum(float(np.vdot(y, y)) for y in ys) / (2.0 * rho)
        pen = sum(0.5 * rho * float(np.sum((a + y / rho) ** 2)) for a, y in zip(res, ys))
        return base + pen - c
    if form == "inner":
        return base + sum(float(np.vdot(y, a)) + 0.5 * rho * float(np.vdot(a, a))
                          for a, y in zip(res, ys))
    raise ValueError(f"unknown form {form!r}")


def run(f, config: SolverConfig, reference=None,
        callback: Optional[Callable[[AdmmState, AdmmState, IterationDiagnostics], None]] = None,
        score: str = "exp"):
    """Iterate until the relative change of ``u`` drops below ``config.tol``.

    The test is skipped during the first ``config.min_iters`` iterations and
    the loop always ends after ``config.max_iters``.

    Parameters
    ----------
    f : ndarray
        Observed image, normalized to [0, 1] plus possible noise excursions.
    config : SolverConfig
    reference : ndarray, optional
        Clean image; when given each diagnostics record carries a PSNR.
    callback : callable, optional
        Called as ``callback(prev_state, new_state, diag)`` after every
        iteration.
    score : {"exp", "u"}
        Which estimate the per-iteration PSNR scores: ``exp(i + r)`` or the
        split variable ``u``.

    Returns
    -------
    state : AdmmState
    trace : list of IterationDiagnostics
    """
    f = _check_observed(f)
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64)
        check_same_shape(f, reference)
    if score not in ("exp", "u"):
        raise ValueError(f"score must be 'exp' or 'u', got {score!r}")
    state = init_state(f, config)
    trace: list[IterationDiagnostics] = []
    for _ in range(int(config.max_iters)):
        new = step(state, f, config)
        rel = relative_error(new.u, state.u)
        hess_i, grad_r = hess(new.i), grad(new.r)
        lag = (lagrangian_value(new, f, config, hess_i=hess_i, grad_r=grad_r)
               if config.track_lagrangian else math.nan)
        res_u, res_m, res_n = residuals(new, hess_i, grad_r)
        q = None
        if reference is not None:
            est = np.exp(new.i + new.r) if score == "exp" else new.u
            q = psnr(est, reference) if np.all(np.isfinite(est)) else math.nan
        diag = IterationDiagnostics(iter=new.k, rel_err=rel, lagrangian=lag,
                                    res_u=res_u, res_m=res_m, res_n=res_n, psnr=q)
        trace.append(diag)
        if callback is not None:
            callback(state, new, diag)
        state = new
        # a feasible start (u0 = f = exp(i0 + r0)) leaves u fixed for the
        # first sweeps, so the stopping test is held off for min_iters
        if rel < config.tol and new.k >= config.min_iters:
            break
    return state, trace


def decompose_outputs(state: AdmmState, f) -> Decomposition:
    """Reflectance ``e^r``, illumination ``e^i``, their product and the noise layer."""
    refl = np.exp(state.r)
    illum = np.exp(state.i)
    recon = refl * illum
    return Decomposition(reflectance=refl, illumination=illum, recon=recon,
                         u=state.u.copy(), noise=np.asarray(f) - state.u,
                         split_gap=float(np.linalg.norm(state.u - recon)))
