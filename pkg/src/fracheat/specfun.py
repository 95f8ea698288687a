"""Special functions for the fractional propagators.

Gamma, the Wright type function Phi_alpha (the density of the inverse
alpha-stable subordinator), Mittag-Leffler functions E_{alpha,beta} on the
negative real axis, and quadrature of arbitrary functions against the Wright
density.

Everything runs in binary64.  The two routes to E_alpha(-lambda) (direct
evaluation here, and ``subordinate`` against exp(-lambda*theta)) share no
code beyond Gauss-Legendre nodes, so each can serve as the other's check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .errors import AccuracyError, DomainError

EPS = float(np.finfo(float).eps)

__all__ = [
    "gamma_fn",
    "wright_phi",
    "wright_moment",
    "WrightEvaluator",
    "wright_evaluator",
    "subordinate",
    "mittag_leffler",
    "composite_gauss_legendre",
]


# ---------------------------------------------------------------------------
# Gamma


def gamma_fn(x: float) -> float:
    """Gamma function for real ``x`` away from the poles.

    Uses the C library implementation behind :func:`math.gamma`, which is
    accurate to a few ulp on the whole real line.
    """
    x = float(x)
    if x <= 0.0 and x.is_integer():
        raise DomainError(f"Gamma has a pole at {x:g}")
    try:
        return math.gamma(x)
    except OverflowError as exc:
        raise DomainError(f"Gamma({x:g}) overflows binary64") from exc


def _rgamma(x):
    # 1/Gamma, zero at the poles; vectorised
    return special.rgamma(x)


# ---------------------------------------------------------------------------
# Quadrature helpers


@lru_cache(maxsize=None)
def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def composite_gauss_legendre(edges, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``n``-point Gauss-Legendre rule on every panel."""
    edges = np.asarray(edges, dtype=float)
    x, w = _gl(n)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (half * x + 0.5 * (a + b)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def _neumaier_add(total, comp, term):
    t = total + term
    big = np.abs(total) >= np.abs(term)
    comp = comp + np.where(big, (total - t) + term, (term - t) + total)
    return t, comp


# ---------------------------------------------------------------------------
# Wright function Phi_alpha


def _check_alpha(alpha: float, allow_one: bool = False) -> float:
    alpha = float(alpha)
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (alpha > 0.0 and upper_ok):
        bound = "]0,1]" if allow_one else "]0,1["
        raise DomainError(f"alpha={alpha} outside {bound}")
    return alpha


def _phi_series(alpha: float, theta: np.ndarray, cutoff: int):
    """Compensated power series; returns value, error estimate."""
    theta = np.asarray(theta, dtype=float)
    total = np.zeros_like(theta)
    comp = np.zeros_like(theta)
    absum = np.zeros_like(theta)
    last = np.zeros_like(theta)
    done = np.zeros(theta.shape, dtype=bool)
    with np.errstate(divide="ignore"):
        logt = np.log(theta)
    for k in range(cutoff):
        z = 1.0 - alpha - alpha * k
        sign = float(special.gammasgn(z))
        if z <= 0 and z == math.floor(z):
            continue  # 1/Gamma vanishes at the poles
        if k == 0:
            term = np.full_like(theta, sign * math.exp(-special.gammaln(z)))
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                logmag = k * logt - special.gammaln(k + 1.0) - special.gammaln(z)
                term = (-1.0) ** k * sign * np.exp(logmag)
        term = np.where(done, 0.0, term)
        with np.errstate(over="ignore", invalid="ignore"):
            total, comp = _neumaier_add(total, comp, term)
            absum += np.abs(term)
        # stop on the reflection envelope |1/Gamma(z)| <= Gamma(1-z)/pi, not on the
        # term itself, which is spuriously small next to a pole of Gamma
        if z <= 0.5:
            with np.errstate(over="ignore", invalid="ignore"):
                env = np.exp(k * logt - special.gammaln(k + 1.0) + special.gammaln(1.0 - z)) / math.pi
        else:
            env = np.abs(term)
        last = np.where(done, last, env)
        done |= (k > 4) & (last <= 1e-18 * np.maximum(absum, 1e-300))
        if done.all():
            break
    with np.errstate(invalid="ignore"):
        value = total + comp
    # rounding in each term, plus the first neglected term where the series did not settle
    err = 4.0 * EPS * absum + np.where(done, 0.0, np.where(np.isfinite(last), last, np.inf))
    value = np.where(np.isfinite(value), value, 0.0)
    err = np.where(np.isfinite(err), err, np.inf)
    return value, err


@lru_cache(maxsize=None)
def _kanter_rule(alpha: float):
    """log of the Kanter kernel and weights on ]0, pi[.

    Phi_alpha(theta) = theta^{a/(1-a)} / (pi (1-a)) * int_0^pi K(phi) exp(-theta^{1/(1-a)} K(phi)) dphi
    with K(phi) = sin(a phi)^{a/(1-a)} sin((1-a) phi) / sin(phi)^{1/(1-a)}.
    Both halves of ]0, pi[ are parametrised by the distance to the nearer
    endpoint so sin(phi) keeps full relative precision near pi.
    """
    a = alpha
    k = np.arange(16, 0, -1)
    half_edges = np.concatenate([[0.0], 0.5 * np.pi * 2.0 ** (-k), [0.5 * np.pi]])
    x, w = composite_gauss_legendre(half_edges, 20)
    # left half: phi = x
    sin_phi = np.sin(x)
    log_left = (
        (a / (1 - a)) * np.log(np.sin(a * x))
        + np.log(np.sin((1 - a) * x))
        - np.log(sin_phi) / (1 - a)
    )
    # right half: phi = pi - x
    phi_r = np.pi - x
    log_right = (
        (a / (1 - a)) * np.log(np.sin(a * phi_r))
        + np.log(np.sin((1 - a) * phi_r))
        - np.log(sin_phi) / (1 - a)
    )
    logk = np.concatenate([log_left, log_right])
    wts = np.concatenate([w, w])
    logk.flags.writeable = False
    wts.flags.writeable = False
    return logk, wts


def _phi_kanter(alpha: float, theta: np.ndarray):
    logk, wts = _kanter_rule(alpha)
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    kvals = np.exp(logk)
    step = 512
    with np.errstate(over="ignore", under="ignore"):
        for i in range(0, theta.size, step):
            th = theta[i : i + step]
            c = th ** (1.0 / (1.0 - alpha))
            f = np.exp(logk[None, :] - c[:, None] * kvals[None, :])
            out[i : i + step] = th ** (alpha / (1.0 - alpha)) / (np.pi * (1.0 - alpha)) * (f @ wts)
    err = np.full_like(theta, 1e-14)
    return out, err


@lru_cache(maxsize=None)
def _phi_switch(alpha: float, cutoff: int = 400) -> float:
    """Largest theta at which the series keeps cancellation error below ~1e-14."""
    grid = np.arange(0.25, 20.0, 0.25)
    _, err = _phi_series(alpha, grid, cutoff)
    ok = err <= 2e-14
    if not ok[0]:
        return 0.0
    bad = np.flatnonzero(~ok)
    return float(grid[bad[0] - 1]) if bad.size else float(grid[-1])


def wright_phi(
    alpha: float,
    theta,
    *,
    method: str = "auto",
    series_cutoff: int = 400,
    full_output: bool = False,
):
    """Wright type function Phi_alpha(theta) for theta >= 0.

    ``method`` is ``"auto"`` (series below a precision-derived switch point,
    the positive Kanter integral above it), ``"series"`` or ``"integral"``.
    With ``full_output`` returns ``(value, error_estimate, branch)`` where
    ``branch`` is an array of branch names.
    """
    alpha = _check_alpha(alpha)
    th = np.asarray(theta, dtype=float)
    scalar = th.ndim == 0
    th = np.atleast_1d(th).ravel()
    if np.any(th < 0) or not np.all(np.isfinite(th)):
        raise DomainError("wright_phi needs finite theta >= 0")
    if method not in ("auto", "series", "integral"):
        raise DomainError(f"unknown method {method!r}")

    if method == "auto":
        use_series = th <= _phi_switch(alpha, series_cutoff)
    else:
        use_series = np.full(th.shape, method == "series")
    val = np.empty_like(th)
    err = np.empty_like(th)
    if use_series.any():
        v, e = _phi_series(alpha, th[use_series], series_cutoff)
        val[use_series], err[use_series] = v, e
    if (~use_series).any():
        v, e = _phi_kanter(alpha, th[~use_series])
        val[~use_series], err[~use_series] = v, e
    if method == "series" and np.any(err > 1e-10):
        raise AccuracyError(
            f"series for Phi_{alpha:g} loses precision at theta={th[np.argmax(err)]:g}",
            float(err.max()),
        )
    branch = np.where(use_series, "series", "integral")

    shape = np.shape(theta)
    val = val.reshape(shape)
    if full_output:
        err = err.reshape(shape)
        branch = branch.reshape(shape)
        if scalar:
            return float(val), float(err), str(branch)
        return val, err, branch
    return float(val) if scalar else val


def wright_moment(alpha: float, r: float) -> float:
    """Closed form of int_0^inf theta^r Phi_alpha(theta) dtheta = Gamma(1+r)/Gamma(1+alpha r)."""
    alpha = _check_alpha(alpha, allow_one=True)
    if not r > -1.0:
        raise DomainError(f"moment order r={r} must exceed -1")
    return gamma_fn(1.0 + r) / gamma_fn(1.0 + alpha * r)


# ---------------------------------------------------------------------------
# Quadrature against the Wright density


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class WrightEvaluator:
    """Fixed composite quadrature rule carrying Phi_alpha at its nodes.

    Panels are geometric (ratio 2) from 2^-70 up to 1/2, which handles
    integrable endpoint singularities such as theta^-1/2 and sharply
    decaying exp(-lambda theta), then of width ``panel_width`` up to
    ``theta_max``.  A coarser Gauss rule on the same panels gives an
    embedded error estimate.  Instances are immutable and may be shared.
    """

    alpha: float
    series_cutoff: int = 400
    theta_max: float | None = None
    quad_nodes: int = 16
    tail_tol: float = 1e-10
    panel_width: float = 0.25
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    coarse_nodes: np.ndarray = field(init=False, repr=False)
    coarse_weights: np.ndarray = field(init=False, repr=False)
    coarse_phi: np.ndarray = field(init=False, repr=False)
    clamped: int = field(init=False)
    clamp_max: float = field(init=False)
    truncated_mass: float = field(init=False)

    def __post_init__(self):
        alpha = _check_alpha(self.alpha)
        if self.quad_nodes < 4:
            raise DomainError("quad_nodes must be at least 4")
        theta_max = self.theta_max
        if theta_max is None:
            theta_max = self._find_theta_max(alpha)
        theta_max = float(theta_max)
        if theta_max <= 1.0:
            raise DomainError("theta_max must exceed 1")
        npanels = int(math.ceil((theta_max - 0.5) / self.panel_width))
        edges = np.concatenate(
            [
                [0.0],
                2.0 ** np.arange(-70, 0),
                0.5 + self.panel_width * np.arange(1, npanels + 1),
            ]
        )
        theta_max = float(edges[-1])
        nodes, weights = composite_gauss_legendre(edges, self.quad_nodes)
        cn, cw = composite_gauss_legendre(edges, max(self.quad_nodes // 2, 3))

        clamped = 0
        clamp_max = 0.0
        phis = []
        for pts in (nodes, cn):
            ph = wright_phi(alpha, pts, series_cutoff=self.series_cutoff)
            neg = ph < 0
            if neg.any():
                clamped += int(neg.sum())
                clamp_max = max(clamp_max, float(-ph[neg].min()))
                ph = np.where(neg, 0.0, ph)
            phis.append(ph)
        mass = float(np.dot(weights, phis[0]))
        if mass < 1.0 - self.tail_tol:
            raise AccuracyError(
                f"Wright density mass on [0,{theta_max:g}] is {mass:.15f}", 1.0 - mass
            )

        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta_max", theta_max)
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "weights", _readonly(weights))
        object.__setattr__(self, "phi", _readonly(phis[0]))
        object.__setattr__(self, "coarse_nodes", _readonly(cn))
        object.__setattr__(self, "coarse_weights", _readonly(cw))
        object.__setattr__(self, "coarse_phi", _readonly(phis[1]))
        object.__setattr__(self, "clamped", clamped)
        object.__setattr__(self, "clamp_max", clamp_max)
        object.__setattr__(self, "truncated_mass", mass)

    @staticmethod
    def _find_theta_max(alpha: float) -> float:
        # walk outwards until theta^3 Phi(theta) is negligible, so that the
        # moments of order <= 2 see no truncation
        th = np.arange(1.0, 400.0, 0.5)
        vals = wright_phi(alpha, th)
        small = np.flatnonzero(th**3 * np.abs(vals) < 1e-20)
        if small.size == 0:
            raise AccuracyError(f"Phi_{alpha:g} does not decay on [0, 400]", float(vals[-1]))
        return float(th[small[0]])

    def integrate(self, g: Callable, weight_power: int = 0):
        """Return (integral, quadrature error estimate, tail bound)."""
        if weight_power not in (0, 1):
            raise DomainError("weight_power must be 0 or 1")
        fine = _apply_rule(self.nodes, self.weights * self.phi, g, weight_power)
        coarse = _apply_rule(self.coarse_nodes, self.coarse_weights * self.coarse_phi, g, weight_power)
        gsup = np.max(np.abs(np.asarray(g(self.nodes))), axis=0)
        scale = self.alpha if weight_power == 1 else 1.0
        exact_moment = wright_moment(self.alpha, weight_power)
        trunc_moment = float(np.dot(self.weights * self.phi, self.nodes**weight_power))
        tail = gsup * scale * abs(exact_moment - trunc_moment)
        return scale * fine, np.abs(scale * (fine - coarse)), tail


def _apply_rule(nodes, kernel, g, weight_power):
    vals = np.asarray(g(nodes), dtype=float)
    if vals.shape[:1] != nodes.shape:
        raise DomainError("g must return an array whose first axis matches theta")
    ker = kernel * nodes if weight_power == 1 else kernel
    return np.tensordot(ker, vals, axes=(0, 0))


@lru_cache(maxsize=64)
def wright_evaluator(alpha: float) -> WrightEvaluator:
    """Shared default evaluator for ``alpha`` (cached)."""
    return WrightEvaluator(float(alpha))


def subordinate(
    alpha: float,
    g: Callable,
    weight_power: int = 0,
    *,
    tol: float = 1e-8,
    evaluator: WrightEvaluator | None = None,
    full_output: bool = False,
):
    """Integrate ``g`` against the Wright density.

    weight_power 0:  int_0^theta_max Phi_alpha(theta) g(theta) dtheta
    weight_power 1:  alpha * int_0^theta_max theta Phi_alpha(theta) g(theta) dtheta

    ``g`` receives the node array and may return extra trailing axes (for
    instance one column per Fourier mode); the result then keeps them.
    Raises AccuracyError when the truncation tail bound exceeds ``tol``.
    With ``full_output`` returns ``(value, quad_error_estimate, tail_bound)``.
    """
    ev = evaluator if evaluator is not None else wright_evaluator(float(alpha))
    if abs(ev.alpha - float(alpha)) > 0:
        raise DomainError("evaluator built for a different alpha")
    value, qerr, tail = ev.integrate(g, weight_power)
    if np.any(tail > tol):
        raise AccuracyError("truncated Wright tail exceeds tolerance", float(np.max(tail)))
    if np.ndim(value) == 0:
        value, qerr, tail = float(value), float(qerr), float(tail)
    if full_output:
        return value, qerr, tail
    return value


# ---------------------------------------------------------------------------
# Mittag-Leffler functions on the negative real axis


def _ml_series(alpha: float, beta: float, x: np.ndarray, nmax: int = 2000):
    """sum_k (-x)^k / Gamma(alpha k + beta) for 0 <= x < 1."""
    total = np.zeros_like(x)
    comp = np.zeros_like(x)
    absum = np.zeros_like(x)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    term = np.zeros_like(x)
    for k in range(nmax):
        if k == 0:
            term = np.full_like(x, float(_rgamma(beta)))
        else:
            mag = np.exp(k * logx) * float(_rgamma(alpha * k + beta))
            term = (-1.0) ** k * mag
        total, comp = _neumaier_add(total, comp, term)
        absum += np.abs(term)
        if k > 2 and np.all(np.abs(term) <= 1e-18 * np.maximum(absum, 1e-300)):
            break
    return total + comp, 4.0 * EPS * absum + np.abs(term)


def _asymptotic_envelope(alpha: float, beta: float, ks: np.ndarray) -> np.ndarray:
    # reflection gives |1/Gamma(z)| <= Gamma(1 - z)/pi for every real z; using the
    # bound for small arguments keeps (near-)poles from faking convergence
    z = beta - alpha * ks
    env = np.abs(_rgamma(z))
    low = z <= 0.5
    env[low] = np.maximum(env[low], np.exp(special.gammaln(1.0 - z[low])) / math.pi)
    return env


@lru_cache(maxsize=None)
def _ml_asymptotic_plan(alpha: float, beta: float) -> tuple[float, int]:
    """Threshold x_a and term count K so that for x >= x_a the truncated
    expansion -sum_{k=1}^{K} (-x)^{-k}/Gamma(beta - alpha k) is accurate to
    ~1e-16 relative."""
    ks = np.arange(1, 120)
    rg = _rgamma(beta - alpha * ks)
    env = np.log(_asymptotic_envelope(alpha, beta, ks))
    for logx in math.log(2.0) + math.log(1.25) * np.arange(0, 3000):
        if logx > 690.0:
            break
        terms = -((-1.0) ** ks) * rg * np.exp(-ks * logx)
        partial = np.abs(np.cumsum(terms))
        bound = np.exp(env - ks * logx)
        # keep terms 1..k-1, the omitted remainder is bounded by the k-th envelope
        ok = np.flatnonzero(bound[1:] <= 1e-17 * partial[:-1])
        if ok.size:
            return float(math.exp(logx)), int(ok[0] + 1)
    return math.inf, 0


def _ml_asymptotic(alpha: float, beta: float, x: np.ndarray, nterms: int):
    ks = np.arange(1, nterms + 1)
    rg = _rgamma(beta - alpha * ks)
    out = np.zeros_like(x)
    for k, c in zip(ks, rg):
        if c != 0.0:
            out -= (-1.0) ** k * c * x ** (-float(k))
    nxt = float(_asymptotic_envelope(alpha, beta, np.array([nterms + 1.0]))[0]) * x ** (-(nterms + 1.0))
    return out, nxt + 4.0 * EPS * np.abs(out)


@lru_cache(maxsize=None)
def _ml_rule(alpha: float):
    """Nodes for int_{r0}^{128} exp(-s r) K(r) dr, plus r0 and the
    Chebyshev-U coefficients used for the analytic first panel [0, r0]."""
    j = max(4, int(math.ceil(4.0 / alpha)))
    r0 = 2.0**-j
    edges = list(r0 * 2.0 ** np.arange(0, j + 8))
    if alpha > 0.6:
        # the kernel's denominator nearly vanishes at r=1 when alpha -> 1
        d = math.pi * (1.0 - alpha)
        extra = []
        i = -1
        while d * 2.0**i < 0.5:
            extra += [1.0 - d * 2.0**i, 1.0 + d * 2.0**i]
            i += 1
        edges = [e for e in edges if not 0.5 < e < 2.0] + extra + [0.5, 1.0, 2.0]
    edges = np.unique(np.array(edges))
    r, w = composite_gauss_legendre(edges, 16)
    # 1/(1 + 2u cos(a pi) + u^2) = sum_j U_j(-cos(a pi)) u^j, |u| = r^a <= 1/16 on [0, r0]
    xc = -math.cos(alpha * math.pi)
    u0 = r0**alpha
    coeffs = [1.0, 2.0 * xc]
    while (len(coeffs) + 1) * u0 ** len(coeffs) > 1e-19:
        coeffs.append(2.0 * xc * coeffs[-1] - coeffs[-2])
    return _readonly(r), _readonly(w), r0, tuple(coeffs)


def _lower_inc(c: float, s: np.ndarray, r0: float) -> np.ndarray:
    # int_0^r0 r^c exp(-s r) dr, c > -1
    a = c + 1.0
    return np.exp(special.gammaln(a) - a * np.log(s)) * special.gammainc(a, s * r0)


def _ml_integral(alpha: float, beta: float, x: np.ndarray):
    """E_{a,b}(-x) = s^{1-b} int_0^inf exp(-s r) K(r) dr, s = x^{1/a}, b < 1 + a."""
    r, w, r0, coeffs = _ml_rule(alpha)
    sin_a = math.sin(math.pi * (1.0 - beta))
    sin_b = math.sin(math.pi * (1.0 - beta + alpha))
    ra = r**alpha
    kern = r ** (alpha - beta) * (ra * sin_a + sin_b) / (ra * ra + 2.0 * ra * math.cos(alpha * math.pi) + 1.0) / math.pi
    kw = kern * w
    s = x ** (1.0 / alpha)
    out = np.empty_like(x)
    step = 4096
    for i in range(0, x.size, step):
        ss = s[i : i + step]
        body = np.exp(-np.outer(ss, r)) @ kw
        head = np.zeros_like(ss)
        for jj, cj in enumerate(coeffs):
            c = alpha - beta + jj * alpha
            if sin_b != 0.0:
                head += cj * sin_b * _lower_inc(c, ss, r0)
            if sin_a != 0.0:
                head += cj * sin_a * _lower_inc(c + alpha, ss, r0)
        out[i : i + step] = ss ** (1.0 - beta) * (body + head / math.pi)
    err = (2e-15 + 1e-16 / (1.0 - alpha) ** 2) * np.maximum(np.abs(out), 1.0 / (1.0 + x))
    return out, err


def _ml_negative(alpha: float, beta: float, x: np.ndarray):
    """E_{alpha,beta}(-x) for x >= 0, alpha in ]0,1[; returns value, err, branch codes."""
    val = np.empty_like(x)
    err = np.empty_like(x)
    code = np.zeros(x.shape, dtype=np.int8)  # 0 series, 1 integral, 2 asymptotic
    ser = x < 0.5**alpha
    xa, nterms = _ml_asymptotic_plan(alpha, beta)
    asy = (~ser) & (x >= xa)
    mid = ~(ser | asy)
    if ser.any():
        val[ser], err[ser] = _ml_series(alpha, beta, x[ser])
    if asy.any():
        val[asy], err[asy] = _ml_asymptotic(alpha, beta, x[asy], nterms)
        code[asy] = 2
    if mid.any():
        xm = x[mid]
        # the kernel develops a point mass at r=0 as beta -> 1 + alpha; keep a margin
        if beta <= 1.0 + 0.5 * alpha:
            v, e = _ml_integral(alpha, beta, xm)
        else:
            # E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
            v0, e0, _ = _ml_negative(alpha, beta - alpha, xm)
            v = (float(_rgamma(beta - alpha)) - v0) / xm
            e = e0 / xm + EPS * np.abs(v)
        val[mid], err[mid] = v, e
        code[mid] = 1
    return val, err, code


_BRANCHES = np.array(["series", "integral", "asymptotic", "exponential"])


def mittag_leffler(alpha: float, beta: float, x, *, full_output: bool = False):
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(x) for real x <= 0.

    alpha in ]0,1], beta > 0.  For alpha = 1 only beta in {1, 2} is
    supported (exp and its divided difference).  With ``full_output``
    returns ``(value, error_estimate, branch)``.
    """
    alpha = _check_alpha(alpha, allow_one=True)
    beta = float(beta)
    if not beta > 0.0:
        raise DomainError(f"beta={beta} must be positive")
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    shape = xa.shape
    xa = np.atleast_1d(xa).ravel()
    if np.any(xa > 0) or not np.all(np.isfinite(xa)):
        raise DomainError("mittag_leffler is implemented on the finite negative axis only")
    neg = -xa

    if alpha == 1.0:
        if beta == 1.0:
            val = np.exp(xa)
        elif beta == 2.0:
            with np.errstate(invalid="ignore", divide="ignore"):
                val = np.where(xa == 0.0, 1.0, np.expm1(xa) / np.where(xa == 0.0, 1.0, xa))
        else:
            raise DomainError("alpha=1 supports beta in {1, 2} only")
        err = 2.0 * EPS * np.abs(val)
        code = np.full(xa.shape, 3, dtype=np.int8)
    else:
        val, err, code = _ml_negative(alpha, beta, neg)

    val = val.reshape(shape)
    if full_output:
        err = err.reshape(shape)
        branch = _BRANCHES[code].reshape(shape)
        if scalar:
            return float(val), float(err), str(branch)
        return val, err, branch
    return float(val) if scalar else val
