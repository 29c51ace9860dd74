"""Exact evolution of small spin chains under step drives.

The static part ``D`` is a mixed-field Ising chain and the drive is a
uniform transverse field.  Each step applies ``exp(-i dt (D + s_n V))``.
The sign sequence only takes the values ``+1`` and ``-1``, so each
propagator is built once from an eigendecomposition and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .drives import StepSequence
from .errors import CapacityError, NumericalStabilityError, ParameterError

MAX_DIM = 4096
MAX_SITES = 12
NORM_TOLERANCE = 1e-6
LONG_RUN = 8
DEFAULT_TERMS = (("zz", 1.0), ("z", 0.9), ("x", 0.8))
_KNOWN_TERMS = ("zz", "z", "x")


@dataclass(frozen=True)
class ChainSpec:
    """Spin chain with ``D = sum_i zz Z_i Z_{i+1} + z Z_i + x X_i`` and ``V = g sum_i X_i``.

    Attributes
    ----------
    L : int
        Number of sites, 1 to 12.
    D_terms : tuple of (name, strength)
        Names ``zz`` (nearest-neighbour), ``z`` and ``x`` (uniform fields).
    g : float
        Drive amplitude.
    periodic : bool
        Close the ``zz`` bond between the last and first site.
    """

    L: int = 8
    D_terms: tuple = DEFAULT_TERMS
    g: float = 0.5
    periodic: bool = False

    def __post_init__(self):
        if int(self.L) != self.L or not (1 <= self.L <= MAX_SITES):
            raise CapacityError("L must lie in 1..12", L=self.L)
        if 2**self.L > MAX_DIM:
            raise CapacityError("Hilbert dimension exceeds the cap", dim=2**self.L, cap=MAX_DIM)
        for name, value in self.D_terms:
            if name not in _KNOWN_TERMS:
                raise ParameterError("unknown coupling", name=name)
            if not math.isfinite(value):
                raise ParameterError("coupling strengths must be finite", name=name)
        if not math.isfinite(self.g):
            raise ParameterError("g must be finite", g=self.g)

    @property
    def dim(self) -> int:
        return 2**self.L

    @property
    def energy_scale(self) -> float:
        """Local energy scale ``J``: summed coupling magnitudes, so ``|<D>| <= J L``."""
        s = sum(abs(v) for _, v in self.D_terms)
        return s if s > 0 else 1.0


def _spins(L: int) -> np.ndarray:
    """``(2**L, L)`` array of ``Z`` eigenvalues, site 0 the most significant bit."""
    idx = np.arange(2**L)
    bits = (idx[:, None] >> (L - 1 - np.arange(L))[None, :]) & 1
    return 1 - 2 * bits


def _x_field(L: int) -> np.ndarray:
    dim = 2**L
    out = np.zeros((dim, dim))
    idx = np.arange(dim)
    for i in range(L):
        out[idx, idx ^ (1 << (L - 1 - i))] += 1.0
    return out


def build_chain(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dense real symmetric ``(D, V)`` for a chain."""
    L = spec.L
    z = _spins(L).astype(float)
    diag = np.zeros(2**L)
    D = np.zeros((2**L, 2**L))
    X = _x_field(L)
    for name, value in spec.D_terms:
        if name == "zz":
            bonds = [(i, i + 1) for i in range(L - 1)]
            if spec.periodic and L > 2:
                bonds.append((L - 1, 0))
            for i, j in bonds:
                diag += value * z[:, i] * z[:, j]
        elif name == "z":
            diag += value * z.sum(axis=1)
        else:
            D += value * X
    D[np.diag_indices_from(D)] += diag
    return D, spec.g * X


def product_state(L: int, up: bool = True) -> np.ndarray:
    """All spins up (``Z = +1``) or all spins down."""
    psi = np.zeros(2**L, dtype=complex)
    psi[0 if up else -1] = 1.0
    return psi


@dataclass
class PropagatorCache:
    """Eigendecomposition of ``D + s V`` per distinct sign ``s``.

    Calling the cache returns the dense step propagator
    ``exp(-i dt (D + s V))``; :meth:`eigen` exposes the eigenpairs
    ``(w, U)`` and :meth:`phases` the diagonal of ``m`` steps.
    """

    D: np.ndarray
    V: np.ndarray
    dt: float
    _store: dict = field(default_factory=dict)

    def __post_init__(self):
        self._static = not np.any(self.V)

    def key(self, s: float) -> float:
        # With a vanishing drive every sign gives the same Hamiltonian.
        return 0.0 if self._static else float(s)

    def eigen(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        k = self.key(s)
        if k not in self._store:
            self._store[k] = np.linalg.eigh(self.D + k * self.V)
        return self._store[k]

    def phases(self, s: float, m: int) -> np.ndarray:
        return np.exp(-1j * (self.dt * m) * self.eigen(s)[0])

    def __call__(self, s: float) -> np.ndarray:
        k = ("step", self.key(s))
        if k not in self._store:
            U = self.eigen(s)[1]
            self._store[k] = (U * self.phases(s, 1)) @ U.conj().T
        return self._store[k]


@dataclass(frozen=True)
class EnergyTrajectory:
    """Energy density ``<D>/(J L)`` at recorded times.

    ``e_infty`` is the infinite-temperature value on the same scale.
    ``norm_drift`` is the largest ``| |psi| - 1 |`` seen at a recorded time.
    """

    times: np.ndarray
    energy_density: np.ndarray
    e_infty: float
    norm_drift: float
    energy_scale: float

    def to_csv(self) -> str:
        lines = ["t,energy_density"]
        lines += [f"{t:.17g},{e:.17g}" for t, e in zip(self.times, self.energy_density)]
        return "\n".join(lines) + "\n"


def infinite_temperature_density(D: np.ndarray, L: int, energy_scale: float = 1.0) -> float:
    """``tr(D) / (J L 2**L)``."""
    return float(np.trace(D).real / (energy_scale * L * D.shape[0]))


def evolve_step_drive(
    D: np.ndarray,
    V: np.ndarray,
    seq: StepSequence | np.ndarray,
    dt: float,
    state0: np.ndarray,
    record_every: int = 1,
    energy_scale: float = 1.0,
    norm_tol: float = NORM_TOLERANCE,
) -> EnergyTrajectory:
    """Apply ``exp(-i dt (D + s_n V))`` for each sign ``s_n`` and record ``<D>``.

    Raises
    ------
    NumericalStabilityError
        If the state norm drifts by more than ``norm_tol``.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ParameterError("dt must be positive", dt=dt)
    if record_every < 1:
        raise ParameterError("record_every must be >= 1", record_every=record_every)
    psi = np.asarray(state0, dtype=complex).copy()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise ParameterError("initial state must be normalized")
    signs = seq.as_float() if isinstance(seq, StepSequence) else np.asarray(seq, dtype=float)
    dim = D.shape[0]
    L = int(round(math.log2(dim)))
    cache = PropagatorCache(D, V, dt)
    scale = energy_scale * L
    n = signs.size
    n_rec = n // record_every + 1
    times = np.empty(n_rec)
    energy = np.empty(n_rec)
    drift = 0.0

    def record(k: int, step: int) -> None:
        nonlocal drift
        nrm = np.linalg.norm(psi)
        drift = max(drift, abs(nrm - 1.0))
        if drift > norm_tol:
            raise NumericalStabilityError("state norm drifted", step=step, drift=drift)
        times[k] = step * dt
        energy[k] = np.vdot(psi, D @ psi).real / scale

    record(0, 0)
    k = 1
    # Short runs of equal Hamiltonians use the cached step propagator.
    # Long runs are propagated in the eigenbasis, which costs two basis
    # changes plus diagonal phases and keeps energy exact for static runs.
    keys = np.array([cache.key(s) for s in (-1.0, 1.0)])
    step_keys = np.where(signs > 0, keys[1], keys[0]) if n else signs
    bounds = np.flatnonzero(np.diff(step_keys)) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [n]))
    step_u = {float(v): cache(v) for v in np.unique(signs)}
    for a, b in zip(starts.tolist(), ends.tolist()):
        s = float(signs[a])
        if b - a <= LONG_RUN:
            u = step_u[s]
            for step in range(a + 1, b + 1):
                psi = u @ psi
                if step % record_every == 0:
                    record(k, step)
                    k += 1
            continue
        U = cache.eigen(s)[1]
        coeff = U.conj().T @ psi
        done = a
        first = -(-(a + 1) // record_every) * record_every
        for step in range(first, b + 1, record_every):
            psi = U @ (coeff * cache.phases(s, step - a))
            record(k, step)
            k += 1
            done = step
        if done != b:
            psi = U @ (coeff * cache.phases(s, b - a))
    return EnergyTrajectory(times[:k], energy[:k], infinite_temperature_density(D, L, energy_scale), drift, energy_scale)


def heating_time(traj: EnergyTrajectory, threshold_fraction: float) -> float:
    """First time the energy density moves ``threshold_fraction`` of the way to ``e_infty``.

    Returns ``inf`` when the threshold is never crossed.
    """
    if not (0 < threshold_fraction < 1):
        raise ParameterError("threshold_fraction must lie in (0, 1)", threshold_fraction=threshold_fraction)
    e = np.asarray(traj.energy_density)
    e0 = e[0]
    gap = traj.e_infty - e0
    if gap == 0:
        return math.inf
    progress = (e - e0) / gap
    hit = np.flatnonzero(progress >= threshold_fraction * (1 - 1e-12))
    return float(traj.times[hit[0]]) if hit.size else math.inf


def run_fixture(seq: StepSequence, spec: ChainSpec | None = None, dt: float | None = None, record_every: int = 20, up: bool = True) -> EnergyTrajectory:
    """Evolve the default chain from a product state under ``seq``."""
    spec = ChainSpec() if spec is None else spec
    D, V = build_chain(spec)
    return evolve_step_drive(
        D, V, seq, seq.dt if dt is None else dt, product_state(spec.L, up),
        record_every=record_every, energy_scale=spec.energy_scale,
    )
