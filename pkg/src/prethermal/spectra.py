"""Discrete Fourier analysis of step sequences and near-origin envelope fits.

Conventions
-----------
``dft`` returns ``f(Omega_k) = (1/N) sum_m s_m exp(-i Omega_k m)`` with
``Omega_k = 2 pi k / N`` for ``k = 1 .. N-1`` (the zero bin is dropped).
``riesz_product`` uses the same sign in the exponent, so
``N * dft(thue_morse_word(r)) == riesz_product(r, Omega_k)`` holds as an
identity between complex numbers, not only in magnitude.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .arithmetic import Poly, Quasipoly, StretchExpt, SuppressionClass
from .drives import StepSequence
from .errors import EmptyEnvelopeError, FitError, ParameterError

DEFAULT_OMEGA_MAX = math.pi / 8
DEFAULT_BINS_PER_DECADE = 24
RANDOM_SIGN_EXCLUSION = 0.10


@dataclass(frozen=True)
class Spectrum:
    """Complex spectrum on ``omega`` in (0, 2 pi), strictly increasing."""

    omega: np.ndarray
    values: np.ndarray
    normalization: str = "one_over_n"
    n: int = 0
    random_signed: bool = False

    def __len__(self) -> int:
        return int(self.omega.size)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class Envelope:
    """Binned medians of ``|f|`` on log-spaced bins below ``omega_max``."""

    omega: np.ndarray
    magnitude: np.ndarray
    edges: np.ndarray
    omega_max: float
    bins: int
    random_signed: bool = False

    def __len__(self) -> int:
        return int(self.omega.size)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    rms_residual: float
    n_points: int

    def __iter__(self):
        return iter((self.slope, self.intercept, self.rms_residual))


@dataclass(frozen=True)
class ClassFit:
    cls_name: str
    b_hat: float
    rms_residual: float
    coefficients: tuple[float, float]
    n_points: int

    def __iter__(self):
        return iter((self.b_hat, self.rms_residual))


def _signal(seq) -> tuple[np.ndarray, bool]:
    if isinstance(seq, StepSequence):
        return seq.as_float(), seq.random_signed
    x = np.asarray(seq)
    return x.astype(complex if np.iscomplexobj(x) else float), False


def dft(seq, subtract_mean: bool = True, normalization: str = "one_over_n") -> Spectrum:
    """Discrete Fourier transform with the zero bin removed.

    Parameters
    ----------
    seq : StepSequence or array_like
        Real or complex samples ``s_m``.
    subtract_mean : bool
        Remove the sample mean before transforming.
    normalization : {"one_over_n", "unnormalized"}
    """
    x, random_signed = _signal(seq)
    n = x.size
    if n < 2:
        raise ParameterError("dft needs at least two samples", length=n)
    if normalization not in ("one_over_n", "unnormalized"):
        raise ParameterError("unknown normalization", normalization=normalization)
    if subtract_mean:
        x = x - x.mean()
    f = np.fft.fft(x)
    if normalization == "one_over_n":
        f = f / n
    k = np.arange(1, n)
    return Spectrum(2.0 * np.pi * k / n, f[1:], normalization, n, random_signed)


def dft_direct(x, omega) -> np.ndarray:
    """Direct ``(1/N) sum_m x_m exp(-i omega m)`` at arbitrary ``omega`` (reference)."""
    x = np.asarray(x)
    m = np.arange(x.size)
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    return np.exp(-1j * np.outer(om, m)) @ x / x.size


_SNAP_DENOM = 1 << 30


def riesz_product(r: int, omega):
    """``prod_{j<r} (1 - exp(-i 2**j omega))``: the unnormalized Thue-Morse transform."""
    if r < 1:
        raise ParameterError("riesz_product needs r >= 1", r=r)
    om = np.asarray(omega, dtype=float)
    turns = np.mod(om / (2.0 * np.pi), 1.0)
    # Frequencies within rounding of a dyadic point k / 2**30 turns (every
    # DFT grid frequency of a power-of-two length) are snapped to it.  The
    # doubled phases are then exact integers.
    scaled = turns * _SNAP_DENOM
    ticks = np.rint(scaled)
    snap = np.abs(scaled - ticks) <= 64.0 * np.finfo(float).eps * _SNAP_DENOM
    ticks = np.where(snap, ticks, 0.0).astype(np.int64) % _SNAP_DENOM
    out = np.ones(om.shape, dtype=complex)
    for j in range(r):
        exact = ((ticks << j) % _SNAP_DENOM) / _SNAP_DENOM
        approx = np.mod((2.0**j) * turns, 1.0)
        frac = np.where(snap, exact, approx)
        frac = np.where(frac > 0.5, frac - 1.0, frac)
        out *= 1.0 - np.exp(-2j * np.pi * frac)
    return complex(out) if out.ndim == 0 else out


def riesz_bound(r: int, omega):
    """Upper bound ``2**(r(r-1)/2) |omega|**r`` on ``|riesz_product(r, omega)|``."""
    if r < 1:
        raise ParameterError("riesz_bound needs r >= 1", r=r)
    om = np.abs(np.asarray(omega, dtype=float))
    out = 2.0 ** (r * (r - 1) / 2.0) * om**r
    return float(out) if out.ndim == 0 else out


def block_sign_transform(block_signs, r: int, omega) -> np.ndarray:
    """``B(omega) = sum_l b_l exp(-i 2**r l omega)`` for the n-RMD factorization."""
    b = np.asarray(block_signs, dtype=float)
    l = np.arange(b.size)
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    phase = np.mod(np.outer(om, (2.0**r) * l), 2.0 * np.pi)
    return np.exp(-1j * phase) @ b


def binned_median_envelope(
    spec: Spectrum,
    omega_max: float = DEFAULT_OMEGA_MAX,
    bins: int = DEFAULT_BINS_PER_DECADE,
) -> Envelope:
    """Median ``|f|`` in log-spaced bins from the lowest frequency to ``omega_max``.

    ``bins`` is the number of bins per decade.  Bin centers are geometric
    means of the edges; an even number of entries takes the mean of the two
    middle values; empty bins are dropped.
    """
    if not (0 < omega_max <= math.pi):
        raise ParameterError("omega_max must lie in (0, pi]", omega_max=omega_max)
    if bins < 4:
        raise ParameterError("bins must be >= 4", bins=bins)
    om = np.asarray(spec.omega)
    mag = np.abs(np.asarray(spec.values))
    sel = (om > 0) & (om <= omega_max)
    if not sel.any():
        raise EmptyEnvelopeError("no spectral entries below omega_max", omega_max=omega_max)
    om, mag = om[sel], mag[sel]
    lo = float(om.min())
    decades = math.log10(omega_max / lo)
    nbins = max(1, int(math.ceil(decades * bins - 1e-9)))
    edges = np.geomspace(lo, omega_max, nbins + 1) if omega_max > lo else np.array([lo, lo])
    idx = np.clip(np.searchsorted(edges, om, side="right") - 1, 0, nbins - 1)
    order = np.argsort(idx, kind="stable")
    idx_sorted, mag_sorted = idx[order], mag[order]
    bounds = np.searchsorted(idx_sorted, np.arange(nbins + 1))
    centers, medians = [], []
    for b in range(nbins):
        chunk = mag_sorted[bounds[b] : bounds[b + 1]]
        if chunk.size == 0:
            continue
        centers.append(math.sqrt(edges[b] * edges[b + 1]))
        medians.append(float(np.median(chunk)))
    return Envelope(
        np.array(centers),
        np.array(medians),
        edges,
        float(omega_max),
        int(bins),
        spec.random_signed,
    )


def envelope_from_points(omega, magnitude, random_signed: bool = False) -> Envelope:
    """Wrap raw ``(omega, magnitude)`` points as an envelope (for synthetic data)."""
    om = np.asarray(omega, dtype=float)
    mag = np.asarray(magnitude, dtype=float)
    return Envelope(om, mag, om.copy(), float(om.max()), 0, random_signed)


def _usable(env: Envelope, exclude_low_fraction: float | None, floor: float = 0.0):
    om, mag = np.asarray(env.omega), np.asarray(env.magnitude)
    frac = (RANDOM_SIGN_EXCLUSION if env.random_signed else 0.0) if exclude_low_fraction is None else exclude_low_fraction
    skip = int(math.floor(frac * om.size))
    om, mag = om[skip:], mag[skip:]
    keep = mag > floor
    return om[keep], mag[keep]


def fit_power_law(
    env: Envelope,
    exclude_low_fraction: float | None = None,
    floor: float = 0.0,
) -> PowerLawFit:
    """Least-squares line through ``(ln omega, ln M)``.

    The lowest ``exclude_low_fraction`` of the bins is dropped first; by
    default that is 10% for random-signed sequences and nothing otherwise.
    Points with magnitude ``<= floor`` are ignored.
    """
    om, mag = _usable(env, exclude_low_fraction, floor)
    if om.size < 3:
        raise FitError("power-law fit needs at least three positive points", points=int(om.size))
    x, y = np.log(om), np.log(mag)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return PowerLawFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), int(om.size))


def _profile_fit(x: np.ndarray, y: np.ndarray, feature, bounds: tuple[float, float]):
    def solve(b):
        a = np.column_stack([np.ones_like(x), feature(x, b)])
        coef, *_ = np.linalg.lstsq(a, y, rcond=None)
        resid = y - a @ coef
        return float(np.sqrt(np.mean(resid**2))), coef

    res = minimize_scalar(lambda b: solve(b)[0], bounds=bounds, method="bounded", options={"xatol": 1e-8})
    if not res.success or not np.isfinite(res.fun):
        raise FitError("one-dimensional class fit did not converge", message=str(res.message))
    rms, coef = solve(res.x)
    return float(res.x), rms, (float(coef[0]), float(coef[1]))


def fit_suppression_class(
    env: Envelope,
    cls: SuppressionClass,
    exclude_low_fraction: float | None = None,
    floor: float = 0.0,
    b_bounds: tuple[float, float] | None = None,
) -> ClassFit:
    """Fit the exponent ``b`` of a suppression class to an envelope.

    ``ln M`` is modelled as ``a + c * g_b(omega)`` with

    * Poly: ``g = ln omega`` (``b`` is the slope),
    * Quasipoly: ``g = |ln omega|**b``,
    * StretchExpt: ``g = omega**(-b)``.

    For the last two, ``a`` and ``c`` are solved linearly for each trial
    ``b`` and ``b`` is found by a bounded one-dimensional search.  The rms
    residual in ``ln M`` lets callers compare classes on the same data.
    """
    om, mag = _usable(env, exclude_low_fraction, floor)
    if om.size < 4:
        raise FitError("class fit needs at least four positive points", points=int(om.size))
    x, y = np.log(om), np.log(mag)
    if isinstance(cls, Poly):
        slope, intercept = np.polyfit(x, y, 1)
        rms = float(np.sqrt(np.mean((y - slope * x - intercept) ** 2)))
        return ClassFit("poly", float(slope), rms, (float(intercept), float(slope)), int(om.size))
    if isinstance(cls, Quasipoly):
        b, rms, coef = _profile_fit(x, y, lambda lx, b: np.abs(lx) ** b, b_bounds or (1.0 + 1e-6, 8.0))
        return ClassFit("quasipoly", b, rms, coef, int(om.size))
    if isinstance(cls, StretchExpt):
        b, rms, coef = _profile_fit(x, y, lambda lx, b: np.exp(-b * lx), b_bounds or (1e-3, 4.0))
        return ClassFit("stretch", b, rms, coef, int(om.size))
    raise FitError("unsupported suppression class", cls=str(cls))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def spectrum_to_csv(spec: Spectrum) -> str:
    buf = io.StringIO()
    buf.write("omega,re,im\n")
    for w, v in zip(spec.omega, spec.values):
        buf.write(f"{w:.17g},{v.real:.17g},{v.imag:.17g}\n")
    return buf.getvalue()


def spectrum_from_csv(text: str) -> Spectrum:
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    n = data.shape[0] + 1
    return Spectrum(data[:, 0], data[:, 1] + 1j * data[:, 2], "one_over_n", n)


def envelope_to_csv(env: Envelope) -> str:
    buf = io.StringIO()
    buf.write("omega,median_mag\n")
    for w, m in zip(env.omega, env.magnitude):
        buf.write(f"{w:.17g},{m:.17g}\n")
    return buf.getvalue()


def envelope_from_csv(text: str) -> Envelope:
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    return envelope_from_points(data[:, 0], data[:, 1])


def envelope_to_gnuplot(env: Envelope) -> str:
    """Two-column ``ln omega  ln M`` text for log-log plotting."""
    lines = [
        f"{math.log(w):.17g} {math.log(m):.17g}" for w, m in zip(env.omega, env.magnitude) if m > 0
    ]
    return "\n".join(lines) + "\n"
