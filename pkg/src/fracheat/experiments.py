"""Parameter admissibility, initial data, and scripted verification studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import DomainError, UsageError
from .norms import (
    INF,
    DiscreteMeasure,
    MorreyParams,
    SpaceParams,
    as_field,
    besov_l1_norm,
    besov_morrey_norm,
    highfreq_limsup,
    morrey_norm,
)
from .operators import FracParams, OperatorBackend, p_alpha, smoothing_slope
from .solver import SolverConfig, TimeGrid, evaluate_at, global_norm, solve, xt_norm
from .spectral import Field, Grid, filter_bank, heat_semigroup, irfft_field, rfft_field
from .specfun import gamma_fn

__all__ = [
    "Interval",
    "AdmissibilityReport",
    "admissible_params",
    "gamma_threshold",
    "DataSpec",
    "make_data",
    "rescaled",
    "StudyConfig",
    "StudyReport",
    "STUDY_DEFAULTS",
    "study_smoothing",
    "delta_peak_fit",
    "study_scaling",
    "study_weak_convergence",
    "study_continuity",
    "study_doubly_critical",
    "study_global",
    "study_besov_contraction",
    "amplitude_threshold",
]


# ---------------------------------------------------------------------------
# Admissibility arithmetic


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    @classmethod
    def empty(cls) -> "Interval":
        return cls(math.nan, math.nan)

    @property
    def is_empty(self) -> bool:
        if math.isnan(self.lo) or math.isnan(self.hi):
            return True
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def __contains__(self, x: float) -> bool:
        if self.is_empty:
            return False
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    def __str__(self) -> str:
        if self.is_empty:
            return "empty"
        return f"{'[' if self.lo_closed else ']'}{self.lo:g}, {self.hi:g}{']' if self.hi_closed else '['}"


def gamma_threshold(alpha: float, N: int) -> tuple[float, float, float]:
    """(gamma(alpha), first branch, second branch) of the global-existence threshold."""
    b1 = 1.0 + 2.0 * alpha / (N * alpha + 2.0 * (1.0 - alpha))
    b2 = (4.0 - N + math.sqrt(N * N + 16.0)) / 4.0
    return max(b1, b2), b1, b2


def _pos(x: float) -> float:
    return x if x > 0 else 0.0


def _ratio_or_inf(num: float, den: float) -> float:
    return math.inf if den == 0 else num / den


@dataclass(frozen=True)
class AdmissibilityReport:
    local_ok: bool
    reasons_local: tuple
    global_ok: bool
    reasons_global: tuple
    s_window: Interval
    p_window: Interval
    gamma_threshold: float
    gamma_branches: tuple
    beta: float
    q_c: float
    s_critical: float
    weak_convergence_ok: bool

    def as_dict(self) -> dict:
        return {
            "local_ok": self.local_ok,
            "reasons_local": list(self.reasons_local),
            "global_ok": self.global_ok,
            "reasons_global": list(self.reasons_global),
            "s_window": str(self.s_window),
            "p_window": str(self.p_window),
            "gamma_threshold": self.gamma_threshold,
            "gamma_branches": list(self.gamma_branches),
            "beta": self.beta,
            "q_c": self.q_c,
            "s_critical": self.s_critical,
            "weak_convergence_ok": self.weak_convergence_ok,
        }


def admissible_params(fp: FracParams, space: SpaceParams) -> AdmissibilityReport:
    """Evaluate the local and global existence conditions; never raises."""
    a, g, N = fp.alpha, fp.gamma, fp.dim
    s, p, q = space.s, space.p, space.q
    q_c = N * (g - 1.0) / 2.0
    s_crit = N / p - 2.0 / (g - 1.0) if g > 1 else math.nan
    beta = a / (g - 1.0) - a * N / (2.0 * p) if g > 1 else math.nan

    # local existence
    rl = []
    if not g > 1:
        rl.append(f"γ > 1 fails (γ={g:g})")
    if not (g <= q <= p < math.inf):
        rl.append(f"γ ≤ q ≤ p < ∞ fails (γ={g:g}, q={q:g}, p={p:g})")
    lo_frac = max(-2.0 / (a * g), -2.0)
    if rl:
        s_window = Interval.empty()
    elif s_crit > lo_frac:
        s_window = Interval(s_crit, 0.0, lo_closed=True)
    else:
        s_window = Interval(lo_frac, 0.0)
    if not (lo_frac < s < 0):
        rl.append(f"max{{−2/αγ,−2}} < s < 0 fails (s={s:g}, lower bound {lo_frac:g})")
    if g > 1 and not s >= s_crit - 1e-12:
        rl.append(f"s ≥ N/p − 2/(γ−1) fails (s={s:g}, N/p − 2/(γ−1)={s_crit:g})")
    local_ok = not rl

    # global existence
    rg = []
    gth, b1, b2 = gamma_threshold(a, N)
    if not g > gth:
        rg.append(f"γ > γ(α) fails (γ={g:g}, γ(α)={gth:g})")
    if not (g <= q <= p < math.inf):
        rg.append(f"γ ≤ q ≤ p < ∞ fails (γ={g:g}, q={q:g}, p={p:g})")
    up1 = _ratio_or_inf(N * (g - 1.0), _pos(4.0 - 2.0 * g))
    up2 = _ratio_or_inf(N * g * a * (g - 1.0), 2.0 * _pos(1.0 + a * g - g))
    p_window = Interval(q_c, min(up1, up2))
    if p not in p_window:
        rg.append(
            f"N(γ−1)/2 < p < min{{N(γ−1)/(4−2γ)_+, Nγα(γ−1)/(2(1+αγ−γ)_+)}} fails (p={p:g}, window {p_window})"
        )
    if g > 1 and not (-beta * g > -1.0 and beta < a):
        rg.append(f"−βγ > −1 and β < α fails (β={beta:g})")
    global_ok = not rg

    weak_ok = local_ok and s > -2.0 / g
    return AdmissibilityReport(local_ok, tuple(rl), global_ok, tuple(rg), s_window, p_window,
                               gth, (b1, b2), beta, q_c, s_crit, weak_ok)


# ---------------------------------------------------------------------------
# Initial data


DATA_KINDS = ("gaussian", "l1_bump", "dirac", "dirac_derivative", "power_law", "random_band")


@dataclass(frozen=True)
class DataSpec:
    """Initial datum description.

    ``amplitude`` multiplies the profile (for dirac and l1_bump it is the
    total mass).  ``scale`` is the profile width.  ``exponent`` is the power
    of |x|^{-exponent} for power_law (default 2/(gamma-1)).  random_band
    draws a field whose spectrum lives in the Littlewood-Paley blocks
    j1..j2.  ``dipole`` selects "atoms" (two-atom dipole) or "spectral"
    (i xi multiplier applied to the binned atom).
    """

    kind: str = "gaussian"
    amplitude: float = 1.0
    scale: float = 1.0
    seed: int = 0
    exponent: float | None = None
    j1: int = 2
    j2: int = 4
    dipole: str = "atoms"

    def __post_init__(self):
        if self.kind not in DATA_KINDS:
            raise UsageError(f"unknown data kind {self.kind!r}", "data")
        if self.dipole not in ("atoms", "spectral"):
            raise UsageError(f"unknown dipole mode {self.dipole!r}", "dipole")
        if not math.isfinite(self.amplitude):
            raise UsageError("amplitude must be finite", "amplitude")


def _bump(r):
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def make_data(spec: DataSpec, grid: Grid, gamma: float | None = None):
    """Build the datum on ``grid``; dirac and atom dipoles come back as DiscreteMeasure."""
    A = spec.amplitude
    h = grid.h
    kind = spec.kind
    if kind in ("gaussian", "l1_bump") and spec.scale < h:
        raise UsageError(f"scale {spec.scale:g} is below the grid spacing {h:g}", "scale")
    if kind == "gaussian":
        return Field(grid, A * np.exp(-grid.radius**2 / (2.0 * spec.scale**2)))
    if kind == "l1_bump":
        prof = _bump(grid.radius / spec.scale)
        mass = prof.sum() * grid.cell_volume
        return Field(grid, A * prof / mass)
    if kind == "dirac":
        return DiscreteMeasure.dirac(grid, A)
    if kind == "dirac_derivative":
        c = grid.n // 2
        if spec.dipole == "atoms":
            i0 = [c] * grid.dim
            i1 = [c + 1] + [c] * (grid.dim - 1)
            return DiscreteMeasure(grid, [i0, i1], [A / h, -A / h])
        delta = DiscreteMeasure.dirac(grid, A).bin()
        coef = rfft_field(delta.values, grid)
        if grid.dim == 1:
            k = np.arange(grid.n // 2 + 1, dtype=float)
            k[-1] = 0.0  # Nyquist mode has no odd partner
        else:
            k = grid.wavenumbers.copy()
            k[grid.n // 2] = 0.0
            k = k[:, None]
        coef = coef * (1j * k * math.pi / grid.L)
        return Field(grid, irfft_field(coef, grid))
    if kind == "power_law":
        a = spec.exponent
        if a is None:
            if gamma is None or not gamma > 1:
                raise UsageError("power_law needs an exponent or gamma > 1", "exponent")
            a = 2.0 / (gamma - 1.0)
        r = np.maximum(grid.radius, h)
        return Field(grid, A * r ** (-a))
    # random_band
    bank = filter_bank(grid, homogeneous=False)
    j1, j2 = spec.j1, spec.j2
    if not (bank.j_min <= j1 <= j2 <= bank.j_max):
        raise UsageError(f"band [{j1}, {j2}] outside the available blocks [{bank.j_min}, {bank.j_max}]", "j1")
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(grid.shape)
    _, pieces = bank.pieces(Field(grid, noise))
    vals = sum(pieces[j] for j in range(j1, j2 + 1) if j in pieces)
    norm = math.sqrt(float(np.sum(vals**2)) * grid.cell_volume)
    if norm == 0:
        raise UsageError("empty band on this grid", "j1")
    return Field(grid, A * vals / norm)


def rescaled(spec: DataSpec, lam: float, alpha: float, gamma: float, N: int) -> DataSpec:
    """DataSpec of mu_lam(x) = lam^{2 alpha/(gamma-1)} mu(lam^alpha x)."""
    if not lam > 0:
        raise DomainError("scaling factor must be positive")
    amp = lam ** (2.0 * alpha / (gamma - 1.0))
    shrink = lam**alpha
    if spec.kind == "gaussian":
        return replace(spec, amplitude=spec.amplitude * amp, scale=spec.scale / shrink)
    if spec.kind == "l1_bump":
        return replace(spec, amplitude=spec.amplitude * amp * shrink ** (-N), scale=spec.scale / shrink)
    if spec.kind == "dirac":
        return replace(spec, amplitude=spec.amplitude * amp * shrink ** (-N))
    if spec.kind == "power_law":
        a = spec.exponent if spec.exponent is not None else 2.0 / (gamma - 1.0)
        return replace(spec, amplitude=spec.amplitude * amp * shrink ** (-a), exponent=a)
    raise UsageError(f"no closed-form rescaling for {spec.kind}", "data")


# ---------------------------------------------------------------------------
# Study configuration


@dataclass(frozen=True)
class StudyConfig:
    """Flat configuration shared by the CLI and the studies."""

    N: int = 1
    n: int = 512
    L: float = 32.0
    alpha: float = 0.5
    gamma: float = 3.0
    T: float = 0.5
    M: int = 64
    rho: float = 2.0
    grid_mode: str = "graded"
    t_min: float = 0.0
    p: float = 3.0
    q: float = 3.0
    s: float = -0.5
    r: float = INF
    homogeneous: bool = False
    data: str = "gaussian"
    amplitude: float = 0.1
    scale: float = 1.0
    seed: int = 0
    exponent: float = 0.0
    j1: int = 2
    j2: int = 4
    dipole: str = "atoms"
    max_iters: int = 30
    cauchy_tol: float = 1e-9
    divergence_cap: float = 1e6
    max_halvings: int = 8
    backend: str = "ml_multiplier"
    centers_stride: int = 1
    force: bool = False
    nonlinear: bool = True
    sigma: float = 1.5
    alphas: str = "0.5"
    t_lo: float = 1e-3
    t_hi: float = 1e-1
    t_points: int = 9
    lambdas: str = "0.5,2"
    tolerance: float = 0.05
    delta: float = 0.5
    j0: int = -1
    large_factor: float = 20.0
    beta: float = math.nan

    # --- derived objects
    @property
    def grid(self) -> Grid:
        return Grid(self.N, self.n, self.L)

    @property
    def fp(self) -> FracParams:
        return FracParams(self.alpha, self.gamma, self.N)

    @property
    def space(self) -> SpaceParams:
        return SpaceParams(self.s, self.p, self.q, self.r, self.homogeneous)

    @property
    def data_spec(self) -> DataSpec:
        return DataSpec(self.data, self.amplitude, self.scale, self.seed,
                        self.exponent if self.exponent > 0 else None, self.j1, self.j2, self.dipole)

    def time_grid(self, T: float | None = None) -> TimeGrid:
        T = self.T if T is None else T
        tm = self.t_min if self.t_min > 0 else None
        return TimeGrid(T, self.M, self.rho, self.grid_mode, tm)

    def solver_config(self, **over) -> SolverConfig:
        kw = dict(
            fp=self.fp,
            space=self.space,
            time=self.time_grid(),
            max_picard_iters=self.max_iters,
            cauchy_tol=self.cauchy_tol,
            divergence_cap=self.divergence_cap,
            backend=OperatorBackend(self.backend),
            centers_stride=self.centers_stride,
            max_halvings=self.max_halvings,
            nonlinear=self.nonlinear,
        )
        kw.update(over)
        return SolverConfig(**kw)

    def floats(self, key: str) -> tuple[float, ...]:
        raw = getattr(self, key)
        try:
            return tuple(float(v) for v in str(raw).split(",") if v.strip())
        except ValueError as exc:
            raise UsageError(f"{key} must be a comma-separated list of numbers", key) from exc

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Per-study defaults layered between the global defaults and the user's file/flags.
STUDY_DEFAULTS: dict[str, dict] = {
    "smoothing": dict(n=4096, data="dirac", amplitude=1.0, p=1.0, q=1.0, s=0.0, sigma=1.5, alphas="0.5,0.8",
                      homogeneous=True, t_lo=1e-4, t_points=13),
    "scaling": dict(amplitude=0.2, T=0.25, M=32),
    "weak_convergence": dict(n=4096, alpha=0.8, gamma=2.0, p=2.0, q=2.0, s=-0.5, data="dirac",
                             amplitude=0.05, T=0.1, M=64, grid_mode="log_spaced", t_min=1e-7),
    "continuity": dict(amplitude=0.2, T=0.5),
    "doubly_critical": dict(n=1024, alpha=0.5, gamma=3.0, p=3.0, q=3.0, s=-2.0 / 3.0, data="l1_bump",
                            amplitude=1.0, scale=0.25, T=0.25, lambdas="1,0.5,0.25,0.125", delta=0.01),
    "global": dict(alpha=0.8, gamma=3.0, p=4.0, q=4.0, s=-0.75, homogeneous=True, amplitude=0.05, scale=0.25, T=100.0,
                   grid_mode="log_spaced", t_min=1e-4, M=64, delta=0.05),
}


@dataclass
class StudyReport:
    name: str
    rows: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool | None:
        if not self.checks:
            return None
        return all(bool(v) for v in self.checks.values())


def _fit_slope(t, y) -> float:
    lt = np.log(np.asarray(t, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lt, ly, 1)[0])


def _check_admissible(cfg: StudyConfig, report: StudyReport) -> None:
    adm = admissible_params(cfg.fp, cfg.space)
    report.summary["admissibility"] = adm.as_dict()
    if not adm.local_ok and not cfg.force:
        raise UsageError("inadmissible parameters: " + "; ".join(adm.reasons_local), "s")


# ---------------------------------------------------------------------------
# Smoothing exponents


def study_smoothing(cfg: StudyConfig) -> StudyReport:
    """Fitted decay slopes of ||op(t) mu | N^sigma|| for heat, P_alpha and S_alpha.

    Each operator is sampled where its effective diffusion time (t for the
    heat semigroup, t^alpha for the fractional ones) spans [t_lo, t_hi], so
    all fits see the same range of dyadic blocks.
    """
    rep = StudyReport("smoothing")
    grid = cfg.grid
    mu = make_data(cfg.data_spec, grid, cfg.gamma)
    space = cfg.space
    bank = filter_bank(grid, cfg.homogeneous)
    tau = np.geomspace(cfg.t_lo, cfg.t_hi, cfg.t_points)
    backend = OperatorBackend(cfg.backend)
    heat = smoothing_slope("heat", mu, cfg.s, cfg.sigma, space, tau, bank=bank,
                           centers_stride=cfg.centers_stride)
    rep.rows.append(dict(op="heat", alpha=1.0, slope=heat.slope, expected=heat.expected,
                         deviation=heat.deviation, ratio_to_heat=1.0, residual=heat.residual))
    ok_dev = heat.deviation <= cfg.tolerance
    ok_ratio = True
    for a in cfg.floats("alphas"):
        fp = FracParams(a, cfg.gamma, cfg.N)
        t = tau ** (1.0 / a)
        for op in ("p_alpha", "s_alpha"):
            fit = smoothing_slope(op, mu, cfg.s, cfg.sigma, space, t, fp=fp, bank=bank, backend=backend,
                                  centers_stride=cfg.centers_stride)
            ratio = fit.slope / heat.slope if heat.slope != 0 else math.nan
            rep.rows.append(dict(op=op, alpha=a, slope=fit.slope, expected=fit.expected,
                                 deviation=fit.deviation, ratio_to_heat=ratio, residual=fit.residual))
            ok_dev &= fit.deviation <= cfg.tolerance
            if op == "p_alpha" and cfg.s != cfg.sigma:
                ok_ratio &= abs(ratio - a) <= cfg.tolerance
    rep.checks["slope_deviation"] = bool(ok_dev)
    if cfg.s != cfg.sigma:
        rep.checks["p_alpha_to_heat_ratio"] = bool(ok_ratio)
    rep.summary["max_deviation"] = max(r["deviation"] for r in rep.rows)
    return rep


def delta_peak_fit(alpha: float, t, n: int = 4096, L: float = 32.0) -> tuple[float, np.ndarray, np.ndarray]:
    """Slope of log (P_alpha(t) delta)(0) against log t in one dimension.

    Returns (slope, sampled values, closed form t^{-alpha/2} Gamma(1/2) / (sqrt(4 pi) Gamma(1 - alpha/2))).
    """
    grid = Grid(1, n, L)
    fp = FracParams(alpha, 3.0, 1)
    mu = DiscreteMeasure.dirac(grid)
    t = np.asarray(t, dtype=float)
    vals = np.array([p_alpha(float(tt), mu, fp).values[n // 2] for tt in t])
    exact = t ** (-alpha / 2.0) * gamma_fn(0.5) / (math.sqrt(4.0 * math.pi) * gamma_fn(1.0 - alpha / 2.0))
    return _fit_slope(t, vals), vals, exact


# ---------------------------------------------------------------------------
# Scale invariance


def study_scaling(cfg: StudyConfig) -> StudyReport:
    """Solve with mu and with mu_lam on the rescaled space/time grids and compare.

    u_lam(x, t) = lam^{2 alpha/(gamma-1)} u(lam^alpha x, lam^2 t); the rescaled
    grid has L / lam^alpha and T / lam^2, so its nodes map onto the original
    ones and the comparison is node by node.
    """
    rep = StudyReport("scaling")
    _check_admissible(cfg, rep)
    a, g, N = cfg.alpha, cfg.gamma, cfg.N
    spec = cfg.data_spec
    base = solve(make_data(spec, cfg.grid, g), cfg.solver_config(), force=cfg.force, auto_halve=False)
    rep.warnings += base.warnings
    worst = 0.0
    for lam in cfg.floats("lambdas"):
        grid_l = Grid(N, cfg.n, cfg.L / lam**a)
        sc = cfg.solver_config(time=cfg.time_grid().scaled(lam**-2.0))
        res = solve(make_data(rescaled(spec, lam, a, g, N), grid_l, g), sc, force=cfg.force, auto_halve=False)
        rep.warnings += res.warnings
        expected = lam ** (2 * a / (g - 1)) * base.trajectory.values
        diff = res.trajectory.values - expected
        tr = res.trajectory
        num = xt_norm(type(tr)(tr.grid, tr.space_grid, diff), cfg.s, a, cfg.p, cfg.q, cfg.centers_stride)
        den = xt_norm(tr, cfg.s, a, cfg.p, cfg.q, cfg.centers_stride)
        rel = num / den if den > 0 else 0.0
        worst = max(worst, rel)
        rep.rows.append(dict(lam=lam, verdict=res.verdict, iterations=res.iterations, base_verdict=base.verdict,
                             xt_norm=den, relative_error=rel))
    rep.checks["relative_error"] = worst <= 0.02
    rep.checks["converged"] = base.verdict == "converged" and all(r["verdict"] == "converged" for r in rep.rows)
    rep.summary["max_relative_error"] = worst
    return rep


# ---------------------------------------------------------------------------
# Weak convergence to the datum


def _pair(obj, psi: np.ndarray) -> float:
    if isinstance(obj, DiscreteMeasure):
        return obj.pair(psi)
    f = as_field(obj)
    return float(np.sum(f.values * psi) * f.grid.cell_volume)


def study_weak_convergence(cfg: StudyConfig, widths=(0.5, 1.0, 2.0)) -> StudyReport:
    """Pairings <u(t), psi> against Gaussian test functions as t -> 0.

    Reports the gap |<u(t) - mu, psi>| at t = 10^-k T (k = 1..4), its drop
    between 1e-1 T and 1e-3 T, and the decay slope of the Duhamel part
    <u(t) - P_alpha(t) mu, psi>, expected to be alpha + s alpha gamma / 2.
    """
    rep = StudyReport("weak_convergence")
    _check_admissible(cfg, rep)
    adm = admissible_params(cfg.fp, cfg.space)
    if not adm.weak_convergence_ok and not cfg.force:
        raise UsageError(f"s > −2/γ fails (s={cfg.s:g})", "s")
    grid = cfg.grid
    mu = make_data(cfg.data_spec, grid, cfg.gamma)
    res = solve(mu, cfg.solver_config(), force=cfg.force, auto_halve=False)
    rep.warnings += res.warnings
    rep.summary["verdict"] = res.verdict
    rep.summary["iterations"] = res.iterations
    if res.verdict != "converged":
        rep.checks["converged"] = False
        return rep
    T = res.T
    ts = T * 10.0 ** -np.arange(1, 5)
    psis = {w: np.exp(-grid.radius**2 / (2.0 * w * w)) for w in widths}
    gaps = {w: [] for w in widths}
    duh = {w: [] for w in widths}
    for t in ts:
        u = evaluate_at(res, float(t))
        lin = p_alpha(float(t), mu, cfg.fp, OperatorBackend(cfg.backend))
        for w, psi in psis.items():
            pm = _pair(mu, psi)
            pu = _pair(u, psi)
            pd = _pair(u - lin, psi)
            gaps[w].append(abs(pu - pm))
            duh[w].append(abs(pd))
            rep.rows.append(dict(t=float(t), width=w, pair_u=pu, pair_mu=pm, gap=abs(pu - pm), duhamel=pd))
    expected = cfg.alpha + cfg.s * cfg.alpha * cfg.gamma / 2.0
    ratios = {w: gaps[w][0] / gaps[w][2] if gaps[w][2] > 0 else math.inf for w in widths}
    slopes = {w: _fit_slope(ts[:3], duh[w][:3]) for w in widths}
    rep.summary.update(gap_ratio=min(ratios.values()), duhamel_slopes=slopes, expected_slope=expected,
                       final_gap_relative=max(gaps[w][-1] / abs(_pair(mu, psis[w])) for w in widths))
    rep.checks["converged"] = True
    rep.checks["gap_ratio"] = min(ratios.values()) >= 10.0
    rep.checks["duhamel_slope"] = all(abs(v - expected) <= 0.1 for v in slopes.values())
    return rep


# ---------------------------------------------------------------------------
# Continuity in time


def study_continuity(cfg: StudyConfig, t_fracs=(0.1, 0.5), halvings: int = 6) -> StudyReport:
    """||u(t + h) - u(t) | N^s_{p,q,inf}|| for h = 0.4 T 2^-k, nonlinear and linear runs."""
    rep = StudyReport("continuity")
    _check_admissible(cfg, rep)
    grid = cfg.grid
    mu = make_data(cfg.data_spec, grid, cfg.gamma)
    bank = filter_bank(grid, False)
    space = SpaceParams(cfg.s, cfg.p, cfg.q, INF, False)
    monotone = True
    for mode in ("nonlinear", "linear"):
        sc = cfg.solver_config(nonlinear=(mode == "nonlinear"))
        res = solve(mu, sc, force=cfg.force, auto_halve=False)
        rep.warnings += res.warnings
        if res.verdict != "converged":
            rep.checks[f"{mode}_converged"] = False
            continue
        T = res.T
        for frac in t_fracs:
            t = frac * T
            ut = evaluate_at(res, t)
            prev = None
            for k in range(halvings):
                hh = 0.4 * T * 2.0**-k
                d = besov_morrey_norm(evaluate_at(res, t + hh) - ut, space, bank, centers_stride=cfg.centers_stride)
                rep.rows.append(dict(mode=mode, t=t, h=hh, difference=d))
                if prev is not None and d > 1.1 * prev:
                    monotone = False
                prev = d
    rep.checks["monotone_to_zero"] = monotone
    return rep


# ---------------------------------------------------------------------------
# Doubly critical case


def study_doubly_critical(cfg: StudyConfig) -> StudyReport:
    """High-frequency surrogate of mu_lam for shrinking lam, then solves.

    gamma must equal 1 + 2/N and (s, p, q) = (-N + N/gamma, gamma, gamma).
    The solve runs at the first lam whose surrogate is below ``delta`` and at
    the smallest lam; an observational run at lam = 1 with the amplitude
    multiplied by ``large_factor`` is recorded without a check.
    """
    rep = StudyReport("doubly_critical")
    N, g, a = cfg.N, cfg.gamma, cfg.alpha
    if abs(g - (1.0 + 2.0 / N)) > 1e-12:
        raise UsageError(f"the doubly critical case needs γ = 1 + 2/N = {1 + 2 / N:g}", "gamma")
    s = -N + N / g
    if abs(cfg.s - s) > 1e-12 or cfg.p != g or cfg.q != g:
        raise UsageError(f"the doubly critical case uses s = {s:g} and p = q = γ", "s")
    _check_admissible(cfg, rep)
    grid = cfg.grid
    bank = filter_bank(grid, False)
    j0 = cfg.j0 if cfg.j0 >= 0 else max(bank.j_max - 2, 0)
    lams = cfg.floats("lambdas")
    if list(lams) != sorted(lams, reverse=True):
        raise UsageError("lambdas must be listed in decreasing order", "lambdas")
    surr = []
    for lam in lams:
        mu = make_data(rescaled(cfg.data_spec, lam, a, g, N), grid, g)
        v = highfreq_limsup(mu, s, g, g, j0, bank, centers_stride=cfg.centers_stride)
        surr.append(v)
        rep.rows.append(dict(lam=lam, surrogate=v, verdict="", iterations=0))
    rep.checks["surrogate_decreasing"] = all(b < a_ for a_, b in zip(surr, surr[1:]))
    below = [i for i, v in enumerate(surr) if v < cfg.delta]
    pick = below[0] if below else len(lams) - 1
    targets = sorted({pick, len(lams) - 1})
    for i in targets:
        mu = make_data(rescaled(cfg.data_spec, lams[i], a, g, N), grid, g)
        res = solve(mu, cfg.solver_config(), force=cfg.force)
        rep.warnings += res.warnings
        rep.rows[i].update(verdict=res.verdict, iterations=res.iterations)
        rep.rows[i]["halvings"] = res.halvings
    rep.checks["converged_at_smallest"] = rep.rows[-1]["verdict"] == "converged"
    big = replace(cfg.data_spec, amplitude=cfg.amplitude * cfg.large_factor)
    res = solve(make_data(big, grid, g), cfg.solver_config(), force=True, auto_halve=False)
    rep.summary["large_amplitude_verdict"] = res.verdict
    rep.summary["j0"] = j0
    rep.summary["selected_lam"] = lams[pick]
    return rep


# ---------------------------------------------------------------------------
# Global small-data runs


def study_global(cfg: StudyConfig) -> StudyReport:
    """Small-data run on a long log-spaced grid with the t^beta weighted global norm.

    The amplitude is halved until the homogeneous Besov-Morrey estimator of
    the datum (index N/p - 2/(gamma-1)) drops below ``delta``.
    """
    rep = StudyReport("global")
    fp = cfg.fp
    s_c = cfg.N / cfg.p - 2.0 / (cfg.gamma - 1.0)
    space = SpaceParams(s_c, cfg.p, cfg.q, INF, True)
    adm = admissible_params(fp, space)
    rep.summary["admissibility"] = adm.as_dict()
    if not adm.global_ok and not cfg.force:
        raise UsageError("inadmissible global parameters: " + "; ".join(adm.reasons_global), "p")
    grid = cfg.grid
    bank = filter_bank(grid, True)
    spec = cfg.data_spec
    mu = make_data(spec, grid, cfg.gamma)
    est = besov_morrey_norm(mu, space, bank, centers_stride=cfg.centers_stride)
    for _ in range(40):
        if est < cfg.delta:
            break
        spec = replace(spec, amplitude=spec.amplitude / 2.0)
        mu = make_data(spec, grid, cfg.gamma)
        est = besov_morrey_norm(mu, space, bank, centers_stride=cfg.centers_stride)
    rep.summary["amplitude"] = spec.amplitude
    rep.summary["data_estimator"] = est
    sc = cfg.solver_config(space=replace(cfg.space, s=s_c))
    res = solve(mu, sc, force=cfg.force, auto_halve=False)
    rep.warnings += res.warnings
    beta = adm.beta if math.isnan(cfg.beta) else cfg.beta
    rep.summary.update(verdict=res.verdict, iterations=res.iterations, beta=beta)
    weighted = []
    if res.verdict == "converged":
        tr = res.trajectory
        mp = MorreyParams(cfg.p, cfg.q, local=False)
        for m in range(1, tr.grid.M + 1):
            t = tr.times[m]
            v = t**beta * morrey_norm(tr.state(m), mp, cfg.centers_stride, warn=False)
            weighted.append(v)
            rep.rows.append(dict(t=float(t), weighted_norm=v))
        rep.summary["global_norm"] = global_norm(tr, beta, fp, cfg.p, cfg.q, cfg.centers_stride)
        tail = weighted[3 * len(weighted) // 4:]
        rep.summary["tail_spread"] = (max(tail) - min(tail)) / max(weighted)
        rep.summary["argmax_t"] = float(tr.times[1 + int(np.argmax(weighted))])
    rep.checks["not_diverged"] = res.verdict == "converged" and all(np.isfinite(weighted))
    return rep


# ---------------------------------------------------------------------------
# Contraction of the heat filter in B^s_{1,1}


def study_besov_contraction(cfg: StudyConfig, ts=(1e-6, 1e-3, 1e-1, 1.0, 10.0), thetas=(0.1, 1.0, 5.0),
                            ss=(-1.0, 0.0, 0.5, 1.5), samples: int = 3) -> StudyReport:
    """Largest relative excess of ||e^{t^alpha theta Delta} psi | B^s_{1,1}|| over ||psi | B^s_{1,1}||."""
    rep = StudyReport("besov_contraction")
    grid = cfg.grid
    bank = filter_bank(grid, False)
    rng = np.random.default_rng(cfg.seed)
    worst = -math.inf
    for k in range(samples):
        psi = Field(grid, rng.standard_normal(grid.shape) * np.exp(-grid.radius**2 / 8.0))
        for s in ss:
            base = besov_l1_norm(psi, s, bank)
            for t in ts:
                for th in thetas:
                    filt = besov_l1_norm(heat_semigroup(t**cfg.alpha * th, psi), s, bank)
                    excess = (filt - base) / base
                    worst = max(worst, excess)
                    rep.rows.append(dict(sample=k, s=s, t=t, theta=th, norm=base, filtered=filt, excess=excess))
    rep.summary["max_relative_excess"] = worst
    rep.checks["contraction"] = worst <= 1e-8
    return rep


def amplitude_threshold(cfg: StudyConfig, factors=(1.0, 0.5, 0.25, 0.125, 0.0625)) -> StudyReport:
    """Sweep the amplitude downward and report the first one whose solve converges on the full horizon."""
    rep = StudyReport("amplitude_sweep")
    grid = cfg.grid
    found = None
    for f in factors:
        spec = replace(cfg.data_spec, amplitude=cfg.amplitude * f)
        res = solve(make_data(spec, grid, cfg.gamma), cfg.solver_config(), force=cfg.force, auto_halve=False)
        rep.rows.append(dict(amplitude=spec.amplitude, verdict=res.verdict, iterations=res.iterations,
                             max_ratio=max(res.ratios) if res.ratios else 0.0))
        if res.verdict == "converged" and found is None:
            found = spec.amplitude
            break
    rep.summary["threshold_amplitude"] = found
    return rep
