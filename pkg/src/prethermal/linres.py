"""Linear-response heating rates for the three suppression classes.

The heating rate is

    rate = (g**2 / lam) * integral_0^inf exp(-Omega/J - 2 p(Omega/lam)) dOmega

with the Kubo spectral function fixed to ``exp(-Omega/J)``.  Write
``phi(Omega) = Omega/J + 2 p(Omega/lam)``.  The module provides

* an adaptive-quadrature oracle,
* the saddle point ``Omega_0`` of ``phi``,
* the Gaussian (Laplace) approximation
  ``(g**2/lam) sqrt(2 pi / phi''(Omega_0)) exp(-phi(Omega_0))``,
* ``ln tau* = -ln rate``.

Everything is done in log space so that rates far below the smallest
double stay usable.

For the Poly class the suppression is the bare power law ``|x|**b`` on
the whole axis.  That is what makes the rate an exact
``Gamma(2b+1) J**(2b+1) g**2 / lam**(2b+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import curve_fit

from .arithmetic import Poly, Quasipoly, StretchExpt, SuppressionClass
from .errors import ParameterError, QuadratureError, SaddleValidityError, SolverError

TAIL_MARGIN = 50.0
LOW_MARGIN = 60.0


@dataclass(frozen=True)
class HeatingParams:
    cls: SuppressionClass
    J: float = 1.0
    lam: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        for name in ("J", "lam", "g"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive and finite", **{name: v})
        if not isinstance(self.cls, (Poly, Quasipoly, StretchExpt)):
            raise ParameterError("unsupported suppression class", cls=repr(self.cls))

    def with_lambda(self, lam: float) -> "HeatingParams":
        return HeatingParams(self.cls, self.J, lam, self.g)


@dataclass(frozen=True)
class TauStar:
    ln_tau: float
    overflow: bool

    @property
    def tau(self) -> float:
        return math.inf if self.overflow else math.exp(self.ln_tau)


def rate_penalty(cls: SuppressionClass, x):
    """``-ln f(x)`` as used in the heating integral (Poly left uncapped)."""
    x = np.asarray(x, dtype=float)
    if isinstance(cls, Poly):
        with np.errstate(divide="ignore"):
            return -cls.b * np.log(x) if cls.b else np.zeros_like(x)
    if isinstance(cls, Quasipoly):
        with np.errstate(divide="ignore"):
            return np.abs(np.log(x)) ** cls.b
    return cls.p(x)


def phi(p: HeatingParams, omega):
    """Exponent ``Omega/J + 2 p(Omega/lam)`` of the heating integrand."""
    omega = np.asarray(omega, dtype=float)
    return omega / p.J + 2.0 * rate_penalty(p.cls, omega / p.lam)


def phi_second_derivative(p: HeatingParams, omega: float) -> float:
    """Analytic ``phi''(Omega)`` for each class."""
    b, lam = p.cls.b, p.lam
    if isinstance(p.cls, StretchExpt):
        return 2.0 * b * (b + 1.0) * lam**b / omega ** (b + 2.0)
    if isinstance(p.cls, Quasipoly):
        ell = math.log(lam / omega)
        return (2.0 * b / omega**2) * ell ** (b - 2.0) * ((b - 1.0) + ell)
    return 2.0 * b / omega**2


def _quasipoly_saddle(b: float, J: float, lam: float, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Solve ``Omega = 2 b J [ln(lam/Omega)]**(b-1)`` by damped fixed-point iteration."""
    omega = 2.0 * b * J
    for _ in range(max_iter):
        ell = math.log(lam / omega)
        if ell <= 1.0:
            raise SolverError("quasipolynomial saddle left the guard lam >= e * Omega0", lam=lam, omega=omega)
        target = 2.0 * b * J * ell ** (b - 1.0)
        new = 0.5 * omega + 0.5 * target
        if abs(new - omega) <= tol * abs(new):
            omega = new
            break
        omega = new
    else:
        raise SolverError("quasipolynomial saddle iteration did not converge", lam=lam)
    residual = abs(omega - 2.0 * b * J * math.log(lam / omega) ** (b - 1.0)) / omega
    if residual > 1e-10:
        raise SolverError("quasipolynomial saddle residual too large", residual=residual)
    return omega


def saddle_point(p: HeatingParams) -> tuple[float, float]:
    """Return ``(Omega_0, phi(Omega_0))``."""
    b, J, lam = p.cls.b, p.J, p.lam
    if isinstance(p.cls, StretchExpt):
        omega0 = (2.0 * b * J) ** (1.0 / (b + 1.0)) * lam ** (b / (b + 1.0))
    elif isinstance(p.cls, Quasipoly):
        omega0 = _quasipoly_saddle(b, J, lam)
    else:
        omega0 = 2.0 * b * J
        if omega0 == 0.0:
            return 0.0, 0.0
    return float(omega0), float(phi(p, omega0))


def _log_integral(p: HeatingParams, rel_tol: float) -> float:
    """``ln integral_0^inf exp(-phi)`` by adaptive Gauss-Kronrod in ``u = ln Omega``."""
    omega0, phi0 = saddle_point(p)
    center = omega0 if omega0 > 0 else p.J
    u_lo = math.log(center) - LOW_MARGIN
    u_hi = math.log(p.J * (max(phi0, 0.0) + TAIL_MARGIN) + center)
    u0 = math.log(center)

    def integrand(u):
        om = math.exp(u)
        return math.exp(u - float(phi(p, om)) + phi0)

    total, err = 0.0, 0.0
    # Break at the saddle and at a few widths around it so the peak is resolved.
    width = 1.0
    if omega0 > 0:
        d2 = phi_second_derivative(p, omega0)
        if d2 > 0:
            width = min(1.0, math.sqrt(1.0 / d2) / omega0)
    cuts = sorted({u_lo, u_hi, *[min(max(u0 + k * width, u_lo), u_hi) for k in (-8, -3, -1, 0, 1, 3, 8)]})
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        val, e = quad(integrand, a, b, epsabs=0.0, epsrel=rel_tol * 0.1, limit=400)
        total += val
        err += e
    if not total > 0 or err > rel_tol * total:
        raise QuadratureError("heating quadrature did not reach the requested tolerance", achieved=err / total if total else math.inf)
    return math.log(total) - phi0


def log_heating_quadrature(p: HeatingParams, rel_tol: float = 1e-10) -> float:
    """Natural log of the quadrature heating rate."""
    if not (1e-12 < rel_tol < 1e-2):
        raise ParameterError("rel_tol must lie in (1e-12, 1e-2)", rel_tol=rel_tol)
    return 2.0 * math.log(p.g) - math.log(p.lam) + _log_integral(p, rel_tol)


def heating_quadrature(p: HeatingParams, rel_tol: float = 1e-10) -> float:
    """Heating rate from adaptive quadrature (may underflow to 0; see the log version)."""
    return math.exp(log_heating_quadrature(p, rel_tol))


def log_laplace_heating(p: HeatingParams) -> float:
    """Natural log of the Gaussian saddle-point heating rate (quadrature for Poly)."""
    if isinstance(p.cls, Poly):
        return log_heating_quadrature(p)
    omega0, phi0 = saddle_point(p)
    d2 = phi_second_derivative(p, omega0)
    if not d2 > 0:
        raise SaddleValidityError("phi'' at the saddle is not positive", phi2=d2)
    return 2.0 * math.log(p.g) - math.log(p.lam) + 0.5 * math.log(2.0 * math.pi / d2) - phi0


def laplace_heating(p: HeatingParams) -> float:
    return math.exp(log_laplace_heating(p))


def gaussian_laplace(phi0: float, phi2: float) -> float:
    """``sqrt(2 pi / phi2) exp(-phi0)``: exact for a quadratic exponent."""
    if not phi2 > 0:
        raise SaddleValidityError("phi'' must be positive", phi2=phi2)
    return math.sqrt(2.0 * math.pi / phi2) * math.exp(-phi0)


def integrate_exponent(phi_fn: Callable[[float], float], lo: float, hi: float, points: Sequence[float] = (), rel_tol: float = 1e-10) -> float:
    """``integral_lo^hi exp(-phi_fn(x)) dx`` with breakpoints (generic oracle)."""
    cuts = sorted({lo, hi, *[x for x in points if lo < x < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = quad(lambda x: math.exp(-phi_fn(x)), a, b, epsabs=0.0, epsrel=rel_tol, limit=400)
        total += val
    return total


def tau_star_lrt(p: HeatingParams) -> TauStar:
    """``tau* = 1/rate`` in log space; ``overflow`` is set when ``tau*`` exceeds a double."""
    ln_rate = log_laplace_heating(p)
    if not math.isfinite(ln_rate):
        raise SolverError("heating rate is not finite", ln_rate=ln_rate)
    ln_tau = -ln_rate
    return TauStar(ln_tau, ln_tau > math.log(np.finfo(float).max))


def laplace_quadrature_ratio(p: HeatingParams) -> float:
    return math.exp(log_laplace_heating(p) - log_heating_quadrature(p))


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    model: str
    coefficients: tuple[float, ...]


def lrt_scaling_exponent(cls: SuppressionClass, lambdas: Sequence[float], J: float = 1.0, g: float = 1.0) -> ScalingFit:
    """Fit the large-``lam`` growth exponent of ``ln tau*``.

    * Poly: slope of ``ln tau*`` against ``ln lam``.
    * StretchExpt: ``ln tau* = a lam**beta + c ln lam + d``; reports ``beta``.
    * Quasipoly: ``ln tau* = a ell**beta + c ell + d`` with
      ``ell = ln(lam / Omega_0)``; reports ``beta``.

    The extra linear and logarithmic terms absorb the prefactors the
    Gaussian approximation keeps, namely ``g**2/lam`` and
    ``sqrt(2 pi/phi'')``.  For Quasipoly they also absorb the
    ``Omega_0/J`` part of ``phi``.  By the saddle equation, ``Omega_0/J``
    is linear in ``ell``.
    """
    lams = np.asarray(lambdas, dtype=float)
    ps = [HeatingParams(cls, J, float(l), g) for l in lams]
    ln_tau = np.array([tau_star_lrt(p).ln_tau for p in ps])
    if isinstance(cls, Poly):
        slope, intercept = np.polyfit(np.log(lams), ln_tau, 1)
        return ScalingFit(float(slope), "ln tau = s ln lam + c", (float(slope), float(intercept)))
    if isinstance(cls, StretchExpt):
        x = np.log(lams)
        guess = cls.b / (cls.b + 1.0)

        def model(x, a, beta, c, d):
            return a * np.exp(beta * x) + c * x + d

        coef, _ = curve_fit(model, x, ln_tau, p0=[1.0, guess, 1.0, 0.0], maxfev=20000)
        return ScalingFit(float(coef[1]), "ln tau = a lam^beta + c ln lam + d", tuple(map(float, coef)))
    ell = np.array([math.log(p.lam / saddle_point(p)[0]) for p in ps])

    def model_q(x, a, beta, c, d):
        return a * x**beta + c * x + d

    coef, _ = curve_fit(model_q, ell, ln_tau, p0=[1.0, cls.b, 1.0, 0.0], maxfev=20000)
    return ScalingFit(float(coef[1]), "ln tau = a ell^beta + c ell + d, ell = ln(lam/Omega0)", tuple(map(float, coef)))


def sweep_rows(p: HeatingParams, lambdas: Sequence[float]) -> list[dict]:
    """Rows of ``lambda,rate_quadrature,rate_laplace,omega0,phi0,ln_tau_star``."""
    rows = []
    for lam in lambdas:
        q = p.with_lambda(float(lam))
        omega0, phi0 = saddle_point(q)
        lq = log_heating_quadrature(q)
        ll = log_laplace_heating(q)
        rows.append(
            {
                "lambda": float(lam),
                "rate_quadrature": math.exp(lq),
                "rate_laplace": math.exp(ll),
                "omega0": omega0,
                "phi0": phi0,
                "ln_tau_star": -ll,
            }
        )
    return rows
