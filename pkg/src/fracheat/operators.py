"""Solution operators P_alpha(t), S_alpha(t) and exact Duhamel weights.

Per Fourier mode with lambda = |xi|^2:

    P_alpha(t):  E_alpha(-lambda t^alpha)          = int Phi(th) exp(-lambda t^a th) dth
    S_alpha(t):  E_{alpha,alpha}(-lambda t^alpha)  = alpha int th Phi(th) exp(-lambda t^a th) dth

The ``ml_multiplier`` backend evaluates the Mittag-Leffler functions
directly; the ``subordination`` backend integrates the heat multiplier
against the Wright density.  Both must agree; each is the other's check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, UsageError
from .norms import SpaceParams, as_field, besov_morrey_norm
from .spectral import Field, FilterBank, Grid, apply_multiplier, filter_bank, heat_semigroup
from .specfun import WrightEvaluator, mittag_leffler, subordinate, wright_evaluator

__all__ = [
    "FracParams",
    "OperatorBackend",
    "ML",
    "SUBORDINATION",
    "p_alpha",
    "s_alpha",
    "p_multiplier",
    "s_multiplier",
    "duhamel_weights",
    "duhamel_weight_table",
    "smoothing_slope",
    "SlopeFit",
]


@dataclass(frozen=True)
class FracParams:
    alpha: float
    gamma: float
    dim: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha={self.alpha} outside ]0,1]")
        if not self.gamma > 1.0:
            raise DomainError(f"gamma={self.gamma} must exceed 1")
        if self.dim not in (1, 2):
            raise DomainError(f"dim={self.dim} must be 1 or 2")


@dataclass(frozen=True)
class OperatorBackend:
    variant: str = "ml_multiplier"
    evaluator: WrightEvaluator | None = None

    def __post_init__(self):
        if self.variant not in ("ml_multiplier", "subordination"):
            raise UsageError(f"unknown backend {self.variant!r}", "backend")


ML = OperatorBackend("ml_multiplier")
SUBORDINATION = OperatorBackend("subordination")


def _radial_multiplier(xi: np.ndarray, fn) -> np.ndarray:
    # evaluate once per distinct |xi|^2
    lam = np.round(xi * xi, 12)
    uniq, inv = np.unique(lam.ravel(), return_inverse=True)
    return fn(uniq)[inv].reshape(xi.shape)


def _ml_or_sub(alpha: float, t: float, lam: np.ndarray, backend: OperatorBackend, weight_power: int):
    x = lam * t**alpha
    if backend.variant == "ml_multiplier":
        beta = 1.0 if weight_power == 0 else alpha
        return mittag_leffler(alpha, beta, -x)
    ev = backend.evaluator or wright_evaluator(alpha)
    # one column per mode; chunk to bound memory
    out = np.empty_like(x)
    step = 256
    for i in range(0, x.size, step):
        xs = x[i : i + step]
        out[i : i + step] = subordinate(alpha, lambda th: np.exp(-np.outer(th, xs)), weight_power, evaluator=ev)
    return out


def p_multiplier(alpha: float, t: float, lam, backend: OperatorBackend = ML) -> np.ndarray:
    """Multiplier of P_alpha(t) at eigenvalues ``lam`` = |xi|^2."""
    lam = np.asarray(lam, dtype=float)
    if alpha == 1.0:
        return np.exp(-lam * t)
    out = _ml_or_sub(alpha, t, lam.ravel(), backend, 0).reshape(lam.shape)
    return np.where(lam == 0, 1.0, out)


def s_multiplier(alpha: float, t: float, lam, backend: OperatorBackend = ML) -> np.ndarray:
    """Multiplier of S_alpha(t); equals 1/Gamma(alpha) at lam = 0."""
    lam = np.asarray(lam, dtype=float)
    if alpha == 1.0:
        return np.exp(-lam * t)
    return _ml_or_sub(alpha, t, lam.ravel(), backend, 1).reshape(lam.shape)


def _operator(kind, t, data, fp: FracParams, backend: OperatorBackend) -> Field:
    if not t > 0:
        raise DomainError("operators need t > 0")
    f = as_field(data)
    if fp.alpha == 1.0:
        return heat_semigroup(t, f)
    mult = p_multiplier if kind == "p" else s_multiplier
    m = _radial_multiplier(f.grid.xi_abs_half, lambda lam: mult(fp.alpha, t, lam, backend))
    return apply_multiplier(f, m)


def p_alpha(t: float, mu, fp: FracParams, backend: OperatorBackend = ML) -> Field:
    """P_alpha(t) mu; mass is conserved exactly (the xi = 0 multiplier is 1)."""
    return _operator("p", t, mu, fp, backend)


def s_alpha(t: float, f, fp: FracParams, backend: OperatorBackend = ML) -> Field:
    """S_alpha(t) f."""
    return _operator("s", t, f, fp, backend)


# ---------------------------------------------------------------------------
# Duhamel weights


def _ml_difference_series(alpha, lam, v, w):
    """sum_{k>=1} (-lam)^{k-1} (v^{ak} - w^{ak}) / Gamma(ak+1), for lam v^a <= 1."""
    total = np.zeros(np.broadcast(lam, v, w).shape)
    va = v**alpha
    with np.errstate(divide="ignore"):
        ratio_log = np.log(w) - np.log(v)  # <= 0, -inf when w = 0
    power = np.ones_like(total)
    for k in range(1, 2000):
        # v^{ak} - w^{ak} = -v^{ak} expm1(ak log(w/v)), accurate when w is close to v
        diff = -(va**k) * np.expm1(alpha * k * ratio_log)
        term = power * diff * special.rgamma(alpha * k + 1.0)
        total = total + term
        if k > 3 and np.all(np.abs(term) <= 1e-17 * np.abs(total) + 1e-300):
            break
        power = power * (-lam)
    return total


def duhamel_weights(fp: FracParams, lam, t_target: float, a, b):
    """int_a^b (t - tau)^{alpha-1} E_{alpha,alpha}(-lam (t - tau)^alpha) dtau.

    Uses d/ds E_alpha(-lam s^alpha) = -lam s^{alpha-1} E_{alpha,alpha}(-lam s^alpha):
    weight = [E_alpha(-lam (t-b)^alpha) - E_alpha(-lam (t-a)^alpha)] / lam, with a
    cancellation-free series when lam (t-a)^alpha <= 1 and the limit
    ((t-a)^alpha - (t-b)^alpha) / Gamma(1+alpha) at lam = 0.
    Broadcasts over ``lam``, ``a`` and ``b``.
    """
    lam, a, b = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (lam, a, b)))
    if np.any(lam < 0):
        raise DomainError("eigenvalue lambda must be nonnegative")
    if np.any(a < 0) or np.any(b <= a) or np.any(b > t_target * (1 + 1e-14)):
        raise DomainError("need 0 <= a < b <= t_target")
    alpha = fp.alpha
    v = t_target - a
    w = np.maximum(t_target - b, 0.0)
    out = np.empty(lam.shape)
    if alpha == 1.0:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(
                lam == 0,
                v - w,
                np.exp(-lam * w) * -np.expm1(-lam * (v - w)) / np.where(lam == 0, 1.0, lam),
            )
        return out if out.ndim else float(out)
    z = lam * v**alpha
    small = z <= 1.0
    if small.any():
        out[small] = _ml_difference_series(alpha, lam[small], v[small], w[small])
    big = ~small
    if big.any():
        lb = lam[big]
        e_w = mittag_leffler(alpha, 1.0, -lb * w[big] ** alpha)
        e_v = mittag_leffler(alpha, 1.0, -lb * v[big] ** alpha)
        out[big] = (e_w - e_v) / lb
    return out if out.ndim else float(out)


def duhamel_weight_table(fp: FracParams, lam: np.ndarray, times: np.ndarray) -> np.ndarray:
    """W[m, k, i] = weight of interval [t_k, t_{k+1}] seen from t_m, mode lam[i], k < m.

    Entries with k >= m are zero.  E_alpha(-lam d^alpha) is evaluated once
    per distinct gap d = t_m - t_k.
    """
    times = np.asarray(times, dtype=float)
    lam = np.asarray(lam, dtype=float).ravel()
    M = times.size - 1
    W = np.zeros((M + 1, M, lam.size))
    alpha = fp.alpha
    m_idx, k_idx = np.tril_indices(M + 1, -1)  # m > k
    if m_idx.size == 0:
        return W
    v = times[m_idx] - times[k_idx]  # t_m - t_k
    w = times[m_idx] - times[k_idx + 1]  # t_m - t_{k+1} (>= 0)
    if alpha == 1.0:
        W[m_idx, k_idx] = duhamel_weights(fp, lam[None, :], 1.0, 1.0 - v[:, None], 1.0 - w[:, None])
        return W
    # E_alpha(-lam g^alpha) on the distinct gaps
    gaps, inv = np.unique(np.concatenate([v, w]), return_inverse=True)
    E = np.empty((gaps.size, lam.size))
    for i in range(0, gaps.size, 64):
        g = gaps[i : i + 64, None] ** alpha
        E[i : i + 64] = mittag_leffler(alpha, 1.0, -(lam[None, :] * g))
    Ev = E[inv[: v.size]]
    Ew = E[inv[v.size :]]
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (Ew - Ev) / lam[None, :]
    z = lam[None, :] * (v[:, None] ** alpha)
    small = z <= 1.0
    if small.any():
        rows, cols = np.nonzero(small)
        direct[rows, cols] = _ml_difference_series(alpha, lam[cols], v[rows], w[rows])
    W[m_idx, k_idx] = direct
    return W


# ---------------------------------------------------------------------------
# Smoothing-rate fits


@dataclass(frozen=True)
class SlopeFit:
    op: str
    slope: float
    intercept: float
    residual: float
    expected: float
    times: tuple
    norms: tuple

    @property
    def deviation(self) -> float:
        return abs(self.slope - self.expected)


def smoothing_slope(
    op: str,
    data,
    s: float,
    sigma: float,
    space: SpaceParams,
    t_grid,
    fp: FracParams | None = None,
    bank: FilterBank | None = None,
    backend: OperatorBackend = ML,
    centers_stride: int = 1,
) -> SlopeFit:
    """Least-squares slope of log ||op(t) data | N^sigma|| against log t.

    ``space`` supplies p, q, r and homogeneity; its ``s`` is ignored in
    favour of ``sigma``.  The expected slope is (s - sigma) alpha / 2 for
    P_alpha and S_alpha and (s - sigma) / 2 for the heat semigroup.
    """
    if op not in ("heat", "p_alpha", "s_alpha"):
        raise UsageError(f"unknown operator {op!r}", "op")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 4:
        raise UsageError("a slope fit needs at least 4 times", "t_grid")
    if s > sigma:
        raise DomainError("smoothing fit needs s <= sigma")
    gap_cap = {"heat": math.inf, "p_alpha": 2.0, "s_alpha": 4.0}[op]
    if sigma - s >= gap_cap:
        raise DomainError(f"sigma - s must stay below {gap_cap} for {op}")
    if op != "heat" and fp is None:
        raise UsageError("fractional operators need FracParams", "fp")
    f = as_field(data)
    if bank is None:
        bank = filter_bank(f.grid, space.homogeneous)
    target = SpaceParams(sigma, space.p, space.q, space.r, space.homogeneous)
    norms = []
    for t in t_grid:
        if op == "heat":
            u = heat_semigroup(float(t), f)
        elif op == "p_alpha":
            u = p_alpha(float(t), f, fp, backend)
        else:
            u = s_alpha(float(t), f, fp, backend)
        norms.append(besov_morrey_norm(u, target, bank, centers_stride=centers_stride))
    lt = np.log(t_grid)
    ln = np.log(norms)
    A = np.vstack([lt, np.ones_like(lt)]).T
    coef, *_ = np.linalg.lstsq(A, ln, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ln) ** 2)))
    factor = 1.0 if op == "heat" else fp.alpha
    return SlopeFit(op, float(coef[0]), float(coef[1]), resid, (s - sigma) * factor / 2.0,
                    tuple(map(float, t_grid)), tuple(map(float, norms)))
