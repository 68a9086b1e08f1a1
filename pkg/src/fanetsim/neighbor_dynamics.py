"""Closed-form and quadrature results for neighbor-set dynamics.

A node with transmission range ``R`` inside a Poisson field of density
``rho`` sees neighbors arrive, stay for one chord-crossing, and leave.
Everything here is an expectation over the relative velocity between the
observer (speed ``v_c`` along +Z) and an ordinary node (speed uniform on
``[v_l, v_u]``, direction angles uniform).  The relative-speed density in
the observer's spherical coordinates is::

    f(v, alpha_v, beta_v) = v * g(v, v_c, beta_v) / (4 pi^2 (v_u - v_l))
    g = [step(h - v_l) - step(h - v_u)] / h
    h = sqrt(v^2 + v_c^2 + 2 v v_c cos(beta_v))

``h`` recovers the ordinary node's own speed, so the step window is
equivalent to integrating over the source speed directly; several
routines below exploit that change of variables, which is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import ellipe, ellipk

from .geometry import swept_volume_array


class QuadratureError(RuntimeError):
    """Numerical integration failed to converge; carries the residual estimate."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ClosedFormBranchError(ValueError):
    """The elliptic-integral form is undefined here; use the quadrature route."""


@dataclass(frozen=True)
class AnalyticScenario:
    """Parameter tuple feeding every closed-form result.

    rho: node density (1/m^3); R: transmission range (m); v_l/v_u: speed
    bounds (m/s); v_c: observer speed (m/s); L: side of the cubic flight
    region (m), only used for sanity checks and bookkeeping.
    """

    rho: float
    R: float
    v_l: float
    v_u: float
    v_c: float
    L: float | None = None

    def __post_init__(self):
        if not (0 <= self.v_l < self.v_u):
            raise ValueError("need 0 <= v_l < v_u")
        if not (0 <= self.v_c <= self.v_u):
            raise ValueError("need 0 <= v_c <= v_u")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.L is not None and self.R >= math.sqrt(3.0) * self.L:
            raise ValueError("R must be smaller than the region diagonal")

    @classmethod
    def from_box(cls, n_nodes: int, L: float, R: float, v_l: float, v_u: float,
                 v_c: float) -> "AnalyticScenario":
        return cls(rho=n_nodes / L**3, R=R, v_l=v_l, v_u=v_u, v_c=v_c, L=L)

    def with_v_c(self, v_c: float) -> "AnalyticScenario":
        return AnalyticScenario(self.rho, self.R, self.v_l, self.v_u, v_c, self.L)


def _h(v, v_c, beta_v):
    return np.sqrt(v * v + v_c * v_c + 2.0 * v * v_c * np.cos(beta_v))


def joint_pdf_rel_velocity(scn: AnalyticScenario, v: float, beta_v: float) -> float:
    """Joint density of (v, alpha_v, beta_v); independent of alpha_v."""
    if v < 0:
        return 0.0
    h = float(_h(v, scn.v_c, beta_v))
    if h < scn.v_l or h > scn.v_u or h == 0.0:
        return 0.0
    return v / h / (4.0 * math.pi**2 * (scn.v_u - scn.v_l))


def relative_speed_support(scn: AnalyticScenario, beta_v: float) -> list[tuple[float, float]]:
    """Intervals of relative speed v with nonzero density at this polar angle."""
    a = scn.v_c * math.cos(beta_v)
    s = abs(scn.v_c * math.sin(beta_v))
    if s >= scn.v_u:
        return []
    w_u = math.sqrt(scn.v_u**2 - s * s)
    segs = []
    if s >= scn.v_l:
        lo, hi = max(a, -w_u), w_u
        if hi > lo:
            segs.append((lo - a, hi - a))
    else:
        w_l = math.sqrt(scn.v_l**2 - s * s)
        for lo, hi in ((-w_u, -w_l), (w_l, w_u)):
            lo = max(lo, a)
            if hi > lo:
                segs.append((lo - a, hi - a))
    return segs


def _beta_breakpoints(scn: AnalyticScenario) -> list[float]:
    pts = [0.0, math.pi]
    if 0.0 < scn.v_l < scn.v_c:
        b = math.asin(scn.v_l / scn.v_c)
        pts += [b, math.pi - b]
    return sorted(set(pts))


# ---------------------------------------------------------------------------
# arrival rate
# ---------------------------------------------------------------------------

def arrival_rate_quadrature(scn: AnalyticScenario, epsabs: float = 1e-9,
                            epsrel: float = 1e-7) -> float:
    """Neighbor arrival rate rho*pi*R^2*E[v] by nested adaptive quadrature.

    E[v] integrates v against the joint density over (v, beta_v) with the
    azimuth factored out; the v-window per polar angle is resolved exactly
    so the integrand stays smooth on every panel.
    """
    def inner(beta):
        a = scn.v_c * math.cos(beta)
        s = abs(scn.v_c * math.sin(beta))
        total = 0.0
        for lo, hi in relative_speed_support(scn, beta):
            val, err = integrate.quad(
                lambda v: v * v / math.sqrt((v + a) ** 2 + s * s), lo, hi,
                epsabs=epsabs, epsrel=epsrel)
            total += val
        return total

    pts = _beta_breakpoints(scn)
    total = 0.0
    total_err = 0.0
    for b0, b1 in zip(pts[:-1], pts[1:]):
        val, err = integrate.quad(inner, b0, b1, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
        total_err += err
    ev = total / (math.pi * (scn.v_u - scn.v_l))
    if total > 0 and total_err / total > 1e-4:
        raise QuadratureError("arrival-rate quadrature did not converge", total_err / total)
    return scn.rho * math.pi * scn.R**2 * ev


def _log_integral(f, a: float, b: float) -> float:
    """Adaptive quadrature tolerant of an integrable log endpoint at ``a``."""
    val, err = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=400,
                              points=[a, a + (b - a) * 1e-6, b])
    return val


def arrival_rate_closed_form(scn: AnalyticScenario) -> float:
    """Arrival rate via complete elliptic integrals plus 1D log-kernel quadratures.

    Defined for v_l <= v_c <= v_u.  Derivation: integrate v^2/h over the
    windowed (v, beta_v) region; the algebraic antiderivative evaluates to
    elliptic integrals of the second (and, through the reciprocal-modulus
    reduction, first) kind at the window edges, plus three weighted
    log-kernel integrals handled by adaptive quadrature with the endpoint
    singularity factored analytically.
    """
    v_l, v_u, v_c = scn.v_l, scn.v_u, scn.v_c
    if v_c == 0.0:
        # relative speed equals source speed; plain uniform mean
        return scn.rho * math.pi * scn.R**2 * 0.5 * (v_l + v_u)
    if v_c < v_l:
        raise ClosedFormBranchError(
            "closed form needs v_c >= v_l (arcsin(v_l/v_c) branch); "
            "use arrival_rate_quadrature")

    def kappa(beta):
        return v_c * v_c * (3.0 * math.cos(beta) ** 2 - 1.0) / 2.0

    # upper-window edge: elliptic term + log term
    j = v_u * v_u * float(ellipe((v_c / v_u) ** 2))
    m_a = _log_integral(
        lambda b: kappa(b) * math.log(v_u + math.sqrt(v_u * v_u - (v_c * math.sin(b)) ** 2)),
        0.0, math.pi)
    # inner chord endpoint at v = 0 (h = v_c); substitute u = pi - beta so the
    # log singularity sits at u = 0 where sin(u/2) evaluates without cancellation
    m_b = _log_integral(
        lambda u: kappa(math.pi - u) * (math.log(2.0 * v_c) + 2.0 * math.log(math.sin(u / 2.0))),
        0.0, math.pi)
    j += m_a - m_b

    if v_c > v_l:
        beta_l = math.asin(v_l / v_c)
        k = v_c / v_l
        # incomplete E(arcsin(1/k), k) with k > 1 via reciprocal-modulus reduction
        e_inc = k * float(ellipe(1.0 / k**2)) - (k - 1.0 / k) * float(ellipk(1.0 / k**2))

        def m_c_integrand(u):
            # beta = pi - u; w_l = sqrt(v_l^2 - (v_c sin u)^2); the ratio
            # (v_l - w_l)/(v_l + w_l) is computed cancellation-free
            s = v_c * math.sin(u)
            w_l = math.sqrt(max(v_l * v_l - s * s, 0.0))
            return kappa(math.pi - u) * 2.0 * (math.log(s) - math.log(v_l + w_l))

        m_c = _log_integral(m_c_integrand, 0.0, beta_l)
        j += -v_l * v_l * e_inc + m_c

    ev = j / (math.pi * (v_u - v_l))
    return scn.rho * math.pi * scn.R**2 * ev


def _gl(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@lru_cache(maxsize=4096)
def _mean_relative_speed_cached(v_l: float, v_u: float, v_c: float) -> float:
    """E[v] via the pairwise mean-relative-speed kernel (fast path).

    For one source speed a against observer speed b the polar average of
    the relative speed is 2(a+b)/pi * E(2 sqrt(ab)/(a+b)); averaging over
    the uniform source speed needs one smooth 1D integral, split at
    a = v_c where the elliptic modulus touches 1.
    """
    if v_c == 0.0:
        return 0.5 * (v_l + v_u)

    def chunk(lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        x, w = _gl(lo, hi, 80)
        m = (2.0 * (x + v_c) / math.pi) * ellipe(4.0 * x * v_c / (x + v_c) ** 2)
        return float(np.dot(w, m))

    mid = min(max(v_c, v_l), v_u)
    return (chunk(v_l, mid) + chunk(mid, v_u)) / (v_u - v_l)


def mean_relative_speed(scn: AnalyticScenario) -> float:
    return _mean_relative_speed_cached(scn.v_l, scn.v_u, scn.v_c)


def arrival_rate(scn: AnalyticScenario) -> float:
    """Fast arrival rate (pairwise-kernel route); agrees with the quadrature
    route to well below 1e-6 relative."""
    return scn.rho * math.pi * scn.R**2 * mean_relative_speed(scn)


def change_rate(scn: AnalyticScenario, method: str = "quadrature") -> float:
    """Neighbor change rate: departures balance arrivals, so exactly twice
    the arrival rate."""
    if method == "quadrature":
        return 2.0 * arrival_rate_quadrature(scn)
    if method == "fast":
        return 2.0 * arrival_rate(scn)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# inter-arrival / inter-change time distributions
# ---------------------------------------------------------------------------

@dataclass
class DistributionCurve:
    """Tabulated CDF/PDF of an inter-event time plus its exponential surrogate."""

    abscissa: np.ndarray
    cdf: np.ndarray
    pdf: np.ndarray
    rate_param: float

    @property
    def exp_cdf(self) -> np.ndarray:
        return 1.0 - np.exp(-self.rate_param * self.abscissa)

    @property
    def exp_pdf(self) -> np.ndarray:
        return self.rate_param * np.exp(-self.rate_param * self.abscissa)

    def pdf_fit_sup_error(self) -> float:
        return float(np.max(np.abs(self.pdf - self.exp_pdf)))

    def cdf_fit_sup_error(self) -> float:
        return float(np.max(np.abs(self.cdf - self.exp_cdf)))

    def cdf_at(self, times: np.ndarray) -> np.ndarray:
        return np.interp(times, self.abscissa, self.cdf, left=0.0, right=1.0)

    def write_csv(self, path) -> None:
        header = "t,cdf,pdf,exp_cdf,exp_pdf"
        cols = np.column_stack([self.abscissa, self.cdf, self.pdf, self.exp_cdf, self.exp_pdf])
        lines = [header]
        for row in cols:
            lines.append(",".join(repr(float(x)) for x in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def default_grid(rate: float, n: int = 200) -> np.ndarray:
    """Log-spaced grid covering well past the 0.999 quantile of Exp(rate)."""
    return np.geomspace(0.002 / rate, 9.0 / rate, n)


class _SpeedNodes:
    """Gauss-Legendre tensor nodes of the relative-speed distribution.

    The (source speed, source angle) rectangle carries the full law, so the
    window step functions never appear; refinement doubles both orders and
    checks the change, per the curve tolerances.
    """

    def __init__(self, scn: AnalyticScenario, n: int):
        vo, wv = _gl(scn.v_l, scn.v_u, n)
        bo, wb = _gl(0.0, math.pi, n)
        v = np.sqrt(vo[:, None] ** 2 + scn.v_c ** 2
                    - 2.0 * vo[:, None] * scn.v_c * np.cos(bo[None, :]))
        w = (wv[:, None] / (scn.v_u - scn.v_l)) * (wb[None, :] / math.pi)
        self.v = v.ravel()
        self.w = w.ravel()

    def expect(self, values: np.ndarray) -> np.ndarray:
        return np.einsum("i,ij->j", self.w, values)


def _nit_arrays(scn: AnalyticScenario, nodes: _SpeedNodes, t: np.ndarray):
    decay = np.exp(-scn.rho * math.pi * scn.R**2 * nodes.v[:, None] * t[None, :])
    cdf = 1.0 - nodes.expect(decay)
    pdf = scn.rho * math.pi * scn.R**2 * nodes.expect(nodes.v[:, None] * decay)
    return cdf, pdf


def _ncit_arrays(scn: AnalyticScenario, nodes: _SpeedNodes, t: np.ndarray):
    d = nodes.v[:, None] * t[None, :]
    decay = np.exp(-scn.rho * swept_volume_array(d, scn.R))
    front = np.where(d <= 2.0 * scn.R, 2.0 - d * d / (4.0 * scn.R**2), 1.0)
    cdf = 1.0 - nodes.expect(decay)
    pdf = scn.rho * math.pi * scn.R**2 * nodes.expect(nodes.v[:, None] * front * decay)
    return cdf, pdf


def _refined_curve(scn: AnalyticScenario, grid: np.ndarray, kernel, rate: float,
                   epsabs: float = 1e-9, epsrel: float = 1e-7) -> DistributionCurve:
    n = 128
    cdf, pdf = kernel(scn, _SpeedNodes(scn, n), grid)
    while n <= 512:
        n *= 2
        cdf2, pdf2 = kernel(scn, _SpeedNodes(scn, n), grid)
        resid = max(float(np.max(np.abs(cdf2 - cdf))),
                    float(np.max(np.abs(pdf2 - pdf) / max(rate, 1.0))))
        cdf, pdf = cdf2, pdf2
        if resid < max(epsabs, epsrel):
            return DistributionCurve(grid, cdf, pdf, rate)
    raise QuadratureError("distribution-curve quadrature did not converge", resid)


def nit_distribution(scn: AnalyticScenario, grid: np.ndarray | None = None) -> DistributionCurve:
    """CDF/PDF of the neighbor inter-arrival time; surrogate rate is the
    arrival rate."""
    rate = arrival_rate_quadrature(scn)
    if grid is None:
        grid = default_grid(rate)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("grid must be sorted, positive")
    return _refined_curve(scn, grid, _nit_arrays, rate)


def ncit_distribution(scn: AnalyticScenario, grid: np.ndarray | None = None) -> DistributionCurve:
    """CDF/PDF of the neighbor-change inter-arrival time; surrogate rate is
    the change rate (twice the arrival rate)."""
    rate = 2.0 * arrival_rate_quadrature(scn)
    if grid is None:
        grid = default_grid(rate)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("grid must be sorted, positive")
    return _refined_curve(scn, grid, _ncit_arrays, rate)


def pooled_distribution(scn: AnalyticScenario, kind: str,
                        grid: np.ndarray | None = None,
                        n_vc: int = 12) -> DistributionCurve:
    """Curve averaged over the observer speed, uniform on [v_l, v_u].

    Matches statistics pooled across all nodes of a mobility simulation,
    where every node takes a turn as observer at its own current speed.
    """
    kernel = {"nit": _nit_arrays, "ncit": _ncit_arrays}[kind]
    factor = 1.0 if kind == "nit" else 2.0
    vcs, wts = _gl(scn.v_l, scn.v_u, n_vc)
    wts = wts / (scn.v_u - scn.v_l)
    rate = factor * sum(w * arrival_rate(scn.with_v_c(float(vc)))
                        for vc, w in zip(vcs, wts))
    if grid is None:
        grid = default_grid(rate)
    grid = np.asarray(grid, dtype=float)
    cdf = np.zeros_like(grid)
    pdf = np.zeros_like(grid)
    for vc, w in zip(vcs, wts):
        sub = scn.with_v_c(float(vc))
        c, p = kernel(sub, _SpeedNodes(sub, 256), grid)
        cdf += w * c
        pdf += w * p
    return DistributionCurve(grid, cdf, pdf, rate)
