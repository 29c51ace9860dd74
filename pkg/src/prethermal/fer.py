"""Discrete Fer recursion for a driven two-level system.

Operators on the qubit are stored as real Pauli coefficients
``(c0, cx, cy, cz)`` meaning ``c0 I + cx X + cy Y + cz Z``.  Step
propagators are stored as ``(alpha, w, v)``, meaning
``exp(i alpha) (w I - i v . sigma)`` with ``w**2 + |v|**2 = 1``.  This
quaternion form lets every step of a long drive be exponentiated,
multiplied and logged in one vectorised numpy call.

One Fer step takes the step Hamiltonians ``H_n = D + V_n`` (``V`` has
zero time average) and builds ``A_n = -i dt sum_{m<n} V_m`` with
``A_0 = 0``.  The dressed step Hamiltonians are then exactly

    H'_n = (i/dt) log(P_{n+1}^dagger exp(-i dt H_n) P_n),   P_n = exp(A_n).

The generator is anti-Hermitian.  It is stored as ``A = i G`` with ``G``
Hermitian, so ``G_n = -dt sum_{m<n} V_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .drives import StepSequence
from .errors import BranchError, NumericalError, ParameterError, PreconditionError
from .spectra import Envelope, Spectrum, binned_median_envelope, dft, fit_power_law

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
BRANCH_GUARD = 2.0
ZERO_MEAN_TOL = 1e-12
NOISE_FLOOR = 1e3 * np.finfo(float).tiny
_COMPONENT = {"x": 1, "y": 2, "z": 3}


@dataclass(frozen=True)
class Su2Operator:
    """Hermitian ``c0 I + cx X + cy Y + cz Z`` with real coefficients."""

    c0: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    cz: float = 0.0

    @classmethod
    def from_array(cls, c) -> "Su2Operator":
        c = np.asarray(c, dtype=float)
        return cls(float(c[0]), float(c[1]), float(c[2]), float(c[3]))

    @classmethod
    def from_matrix(cls, m) -> "Su2Operator":
        m = np.asarray(m, dtype=complex)
        return cls.from_array([np.trace(p @ m).real / 2.0 for p in PAULI])

    def to_array(self) -> np.ndarray:
        return np.array([self.c0, self.cx, self.cy, self.cz])

    def matrix(self) -> np.ndarray:
        return sum(c * p for c, p in zip(self.to_array(), PAULI))

    def norm(self) -> float:
        """Operator norm ``|c0| + sqrt(cx**2 + cy**2 + cz**2)``."""
        return abs(self.c0) + math.sqrt(self.cx**2 + self.cy**2 + self.cz**2)

    def __add__(self, other):
        return Su2Operator.from_array(self.to_array() + other.to_array())

    def __sub__(self, other):
        return Su2Operator.from_array(self.to_array() - other.to_array())

    def __mul__(self, s: float):
        return Su2Operator.from_array(self.to_array() * s)

    __rmul__ = __mul__


def op_norms(c: np.ndarray) -> np.ndarray:
    """Row-wise operator norms of an ``(N, 4)`` coefficient array."""
    c = np.atleast_2d(c)
    return np.abs(c[:, 0]) + np.linalg.norm(c[:, 1:], axis=1)


# ---------------------------------------------------------------------------
# Vectorised SU(2) algebra on (alpha, w, v) triples
# ---------------------------------------------------------------------------


def _expi(coeffs: np.ndarray, tau: float):
    """``exp(-i tau (c0 + c . sigma))`` for each row of ``coeffs``."""
    c = np.atleast_2d(coeffs)
    r = np.linalg.norm(c[:, 1:], axis=1)
    safe = np.where(r > 0, r, 1.0)
    nhat = c[:, 1:] / safe[:, None]
    th = r * tau
    return -c[:, 0] * tau, np.cos(th), np.sin(th)[:, None] * nhat


def _mul(a, b):
    """Product ``a @ b`` of two batches of unitaries."""
    a1, w1, v1 = a
    a2, w2, v2 = b
    w = w1 * w2 - np.einsum("ij,ij->i", v1, v2)
    v = w1[:, None] * v2 + w2[:, None] * v1 + np.cross(v1, v2)
    return a1 + a2, w, v


def _dag(u):
    al, w, v = u
    return -al, w, -v


def _take(u, sl):
    return tuple(x[sl] for x in u)


def _to_matrix(u) -> np.ndarray:
    al, w, v = u
    out = np.empty((al.size, 2, 2), dtype=complex)
    ph = np.exp(1j * al)
    out[:, 0, 0] = ph * (w - 1j * v[:, 2])
    out[:, 1, 1] = ph * (w + 1j * v[:, 2])
    out[:, 0, 1] = ph * (-1j * v[:, 0] - v[:, 1])
    out[:, 1, 0] = ph * (-1j * v[:, 0] + v[:, 1])
    return out


def _from_matrix(m: np.ndarray):
    """Decompose 2x2 unitaries into ``(alpha, w, v)`` with ``alpha`` from the determinant."""
    m = np.asarray(m, dtype=complex).reshape(-1, 2, 2)
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    al = 0.5 * np.angle(det)
    s = m * np.exp(-1j * al)[:, None, None]
    w = 0.5 * (s[:, 0, 0] + s[:, 1, 1]).real
    vz = (-0.5 * (s[:, 0, 0] - s[:, 1, 1]) / 1j).real
    vx = (0.5j * (s[:, 0, 1] + s[:, 1, 0])).real
    vy = (0.5 * (s[:, 1, 0] - s[:, 0, 1])).real
    return al, w, np.column_stack([vx, vy, vz])


def _log(u, dt: float) -> np.ndarray:
    """Principal ``(i/dt) log U`` as Pauli coefficients; raises on the branch cut."""
    al, w, v = u
    s = np.linalg.norm(v, axis=1)
    th = np.arctan2(s, w)  # in [0, pi]
    nhat = v / np.where(s > 0, s, 1.0)[:, None]
    al = (al + np.pi) % (2.0 * np.pi) - np.pi
    # Eigenphases are al - th and al + th; (al, th, n) ~ (al +- pi, pi - th, -n).
    bad = np.abs(al) + th >= np.pi
    if np.any(bad):
        al2 = np.where(al > 0, al - np.pi, al + np.pi)
        th2 = np.pi - th
        ok = bad & (np.abs(al2) + th2 < np.pi)
        if np.any(bad & ~ok):
            raise BranchError("eigenphase on the principal-log branch cut; reduce dt")
        al = np.where(ok, al2, al)
        th = np.where(ok, th2, th)
        nhat = np.where(ok[:, None], -nhat, nhat)
    return np.column_stack([-al, th[:, None] * nhat]) / dt


def _ordered_product(u):
    """Time-ordered product ``U_{N-1} ... U_1 U_0`` by pairwise reduction."""
    while u[0].size > 1:
        n = u[0].size
        if n % 2:
            head = _take(u, slice(0, n - 1))
            tail = _take(u, slice(n - 1, n))
        else:
            head, tail = u, None
        early = _take(head, slice(0, None, 2))
        late = _take(head, slice(1, None, 2))
        red = _mul(late, early)
        if tail is not None:
            red = tuple(np.concatenate([x, y]) for x, y in zip(red, tail))
        u = red
    return u


def principal_log_su2(U, dt: float = 1.0, unitarity_tol: float = 1e-10) -> Su2Operator:
    """Hermitian ``H = (i/dt) log U`` on the principal branch.

    Raises
    ------
    ParameterError
        If ``U`` is not unitary to ``unitarity_tol``.
    BranchError
        If an eigenphase of ``U`` sits at ``+-pi``.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2):
        raise ParameterError("expected a 2x2 matrix")
    dev = np.linalg.norm(U.conj().T @ U - np.eye(2), 2)
    if dev > unitarity_tol:
        raise ParameterError("matrix is not unitary", deviation=float(dev))
    return Su2Operator.from_array(_log(_from_matrix(U), dt)[0])


def step_unitaries(H: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i dt H_n)`` as an ``(N, 2, 2)`` array."""
    return _to_matrix(_expi(H, dt))


# ---------------------------------------------------------------------------
# Fer state and recursion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FerState:
    """Dressed-frame data at order ``q``.

    ``D`` is the time average and ``V`` the ``(N, 4)`` zero-mean remainder.
    ``G`` holds the generators ``A_n = i G_n`` for ``n = 0 .. N`` (``G_0 = 0``).
    ``G_N`` also vanishes up to rounding because ``V`` has zero mean.
    """

    q: int
    D: Su2Operator
    V: np.ndarray
    dt: float
    G: np.ndarray | None = None
    rule: str = "custom"
    random_signed: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def H(self) -> np.ndarray:
        return self.D.to_array()[None, :] + self.V

    @property
    def n_steps(self) -> int:
        return int(self.V.shape[0])

    def V_ops(self) -> list[Su2Operator]:
        return [Su2Operator.from_array(row) for row in self.V]

    def max_V_norm(self) -> float:
        return float(op_norms(self.V).max())

    @property
    def A(self) -> np.ndarray:
        """Generators ``A_0 .. A_{N-1}`` as Hermitian coefficients ``G`` (``A = i G``)."""
        return self.G[:-1] if self.G is not None else None


def _split(H: np.ndarray) -> tuple[Su2Operator, np.ndarray]:
    D = H.mean(axis=0)
    return Su2Operator.from_array(D), H - D[None, :]


def state_from_hamiltonians(H: np.ndarray, dt: float, q: int = 0, rule: str = "custom", random_signed: bool = False) -> FerState:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[1] != 4 or H.shape[0] == 0:
        raise ParameterError("step Hamiltonians must be an (N, 4) array")
    D, V = _split(H)
    state = FerState(q, D, V, float(dt), None, rule, random_signed)
    return replace(state, G=_generator(state))


def step_hamiltonians(seq: StepSequence, J: float, g: float, dt: float | None = None) -> FerState:
    """Bare steps ``H_n = J Z + g s_n X`` split into mean and drive."""
    if not (math.isfinite(J) and math.isfinite(g)):
        raise ParameterError("J and g must be finite")
    s = seq.as_float()
    H = np.zeros((s.size, 4))
    H[:, 3] = J
    H[:, 1] = g * s
    return state_from_hamiltonians(H, seq.dt if dt is None else dt, 0, seq.rule, seq.random_signed)


def _generator(state: FerState, tol: float = ZERO_MEAN_TOL) -> np.ndarray:
    V = state.V
    mean = V.mean(axis=0)
    scale = max(1.0, float(np.abs(V).max()) if V.size else 1.0)
    if np.any(np.abs(mean) > tol * scale):
        raise PreconditionError("V does not have zero mean", mean=mean.tolist())
    G = np.zeros((V.shape[0] + 1, 4))
    G[1:] = -state.dt * np.cumsum(V, axis=0)
    return G


def solve_generator(state: FerState) -> np.ndarray:
    """Generators ``A_n = -i dt sum_{m<n} V_m`` for ``n = 0 .. N-1``.

    Returned as the Hermitian coefficients ``G_n`` of ``A_n = i G_n``, an
    ``(N, 4)`` array with ``G_0 = 0``.
    """
    return _generator(state)[:-1]


def frame_unitaries(state: FerState):
    """``P_n = exp(A_n)`` for ``n = 0 .. N`` in quaternion form."""
    # A = i G  =>  exp(A) = exp(-i * (-G)).
    return _expi(-state.G, 1.0)


def fer_iterate(state: FerState) -> FerState:
    """One exact Fer step: dressed Hamiltonians via the principal log."""
    H = state.H
    worst = float(op_norms(H).max()) * state.dt
    if worst > BRANCH_GUARD:
        raise BranchError("dt * ||H_n|| exceeds the branch guard", value=worst, guard=BRANCH_GUARD)
    P = frame_unitaries(state)
    U = _expi(H, state.dt)
    n = state.n_steps
    dressed = _mul(_dag(_take(P, slice(1, n + 1))), _mul(U, _take(P, slice(0, n))))
    H_new = _log(dressed, state.dt)
    return state_from_hamiltonians(H_new, state.dt, state.q + 1, state.rule, state.random_signed)


def fer_sequence(state: FerState, q_max: int) -> list[FerState]:
    """States for orders ``state.q .. state.q + q_max``."""
    out = [state]
    for _ in range(q_max):
        out.append(fer_iterate(out[-1]))
    return out


def dressed_first_order(state: FerState) -> np.ndarray:
    """Truncated dressed steps to first order in the generator (diagnostic).

    ``H'_n ~ D + [H_n, (A_n + A_{n+1})/2] + [A_n, V_n]/2``.  With
    ``A = iG``, ``[a.sigma, i g.sigma] = -2 (a x g).sigma``.
    """
    H = state.H
    G = state.G[:-1]
    G_mid = 0.5 * (state.G[:-1] + state.G[1:])
    V = state.V

    def comm_i(a, g):
        out = np.zeros_like(a)
        out[:, 1:] = -2.0 * np.cross(a[:, 1:], g[:, 1:])
        return out

    return H - V + comm_i(H, G_mid) - 0.5 * comm_i(V, G)


def time_ordered_product(H: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i dt H_{N-1}) ... exp(-i dt H_0)`` as a 2x2 matrix."""
    return _to_matrix(_ordered_product(_expi(np.atleast_2d(H), dt)))[0]


def frame_change_residual(state: FerState, dressed: FerState | None = None) -> float:
    """Operator-norm gap between the dressed product and ``P_N^dag U(T) P_0``."""
    dressed = fer_iterate(state) if dressed is None else dressed
    lhs = time_ordered_product(dressed.H, state.dt)
    bare = time_ordered_product(state.H, state.dt)
    P = _to_matrix(frame_unitaries(state))
    rhs = P[-1].conj().T @ bare @ P[0]
    return float(np.linalg.norm(lhs - rhs, 2))


def dressed_spectrum(state: FerState, component: str) -> Spectrum:
    """Mean-subtracted DFT of one Pauli coefficient of ``V``."""
    if component not in _COMPONENT:
        raise ParameterError("component must be x, y or z", component=component)
    if state.n_steps < 4:
        raise ParameterError("need at least four steps", steps=state.n_steps)
    spec = dft(state.V[:, _COMPONENT[component]], subtract_mean=True)
    return Spectrum(spec.omega, spec.values, spec.normalization, spec.n, state.random_signed)


def plot_component(q: int) -> str:
    """Plotting convention: ``x`` for even orders, ``y`` for odd orders."""
    return "x" if q % 2 == 0 else "y"


def dressed_slope(state: FerState, component: str | None = None, omega_max: float | None = None, bins: int | None = None):
    """Fitted near-origin slope of a dressed-drive spectrum.

    Uses the random-sign low-bin exclusion and drops bins whose median is
    below ``1e3`` times the smallest positive double.
    """
    comp = plot_component(state.q) if component is None else component
    spec = dressed_spectrum(state, comp)
    kw = {}
    if omega_max is not None:
        kw["omega_max"] = omega_max
    if bins is not None:
        kw["bins"] = bins
    env = binned_median_envelope(spec, **kw)
    return fit_power_law(env, floor=NOISE_FLOOR), env


# ---------------------------------------------------------------------------
# Mori-Magnus recursion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoriMagnusTable:
    """Effective-Hamiltonian coefficients for recursive ``±`` blocks.

    ``base_plus[m]`` and ``base_minus[m]`` are ``h^(+-)_{m,m}``.
    ``h[r][m]`` holds the recursion value for ``m < r``, with
    ``h[r][0] = D``.
    """

    r: int
    m_max: int
    base_plus: dict[int, Su2Operator]
    base_minus: dict[int, Su2Operator]
    h: dict[int, dict[int, Su2Operator]]
    condition_number: float


def block_unitaries(D: Su2Operator, V_amp: Su2Operator, r: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(U^+_r, U^-_r)`` from ``U^+-_0 = exp(-i dt (D +- V))``.

    The blocks obey ``U^+_r = U^-_{r-1} U^+_{r-1}`` and
    ``U^-_r = U^+_{r-1} U^-_{r-1}``.
    """
    Dm, Vm = D.matrix(), V_amp.matrix()
    up = expm(-1j * dt * (Dm + Vm))
    um = expm(-1j * dt * (Dm - Vm))
    for _ in range(r):
        up, um = um @ up, up @ um
    return up, um


def block_hamiltonians(D: Su2Operator, V_amp: Su2Operator, r: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``H^+-_r = (i / (2**r dt)) log U^+-_r`` as Pauli coefficient arrays."""
    up, um = block_unitaries(D, V_amp, r, dt)
    T = 2.0**r * dt
    return principal_log_su2(up, T).to_array(), principal_log_su2(um, T).to_array()


def fit_block_expansion(D: Su2Operator, V_amp: Su2Operator, r: int, dt_fit, degree: int | None = None):
    """Least-squares coefficients of ``H^+-_r = sum_j (2**r dt)**j h_{r,j}``.

    Returns ``(coef_plus, coef_minus, cond)`` with ``coef[j]`` the Pauli
    coefficients of ``h_{r,j}``.
    """
    dts = np.asarray(dt_fit, dtype=float)
    deg = min(dts.size - 1, 6) if degree is None else degree
    T = 2.0**r * dts
    scale = T.max()
    A = np.vander(T / scale, deg + 1, increasing=True)
    cond = float(np.linalg.cond(A))
    if not math.isfinite(cond) or cond > 1e12:
        raise NumericalError("polynomial fit is ill-conditioned", condition_number=cond)
    Hp = np.empty((dts.size, 4))
    Hm = np.empty((dts.size, 4))
    for i, dt in enumerate(dts):
        Hp[i], Hm[i] = block_hamiltonians(D, V_amp, r, dt)
    unscale = scale ** -np.arange(deg + 1)
    cp = np.linalg.lstsq(A, Hp, rcond=None)[0] * unscale[:, None]
    cm = np.linalg.lstsq(A, Hm, rcond=None)[0] * unscale[:, None]
    return cp, cm, cond


def mori_magnus_terms(D: Su2Operator, V_amp: Su2Operator, r: int, m_max: int, dt_fit) -> MoriMagnusTable:
    """Recursion table ``h[r'][m] = 2**(-m (r'-m)) (h^+_{m,m} + h^-_{m,m}) / 2``.

    Base data ``h^+-_{m,m}`` come from polynomial fits of the exact block
    Hamiltonians at level ``m`` over the step sizes in ``dt_fit``.
    """
    dts = np.asarray(dt_fit, dtype=float)
    if m_max > 3 or m_max < 0:
        raise ParameterError("m_max must lie in 0..3", m_max=m_max)
    if r < m_max:
        raise ParameterError("r must be >= m_max", r=r, m_max=m_max)
    if dts.size < m_max + 2:
        raise ParameterError("dt_fit needs at least m_max + 2 values", count=int(dts.size))
    if dts.max() / dts.min() < 10.0 * (1 - 1e-9):
        raise ParameterError("dt_fit must span a decade")
    base_p, base_m = {}, {}
    cond = 1.0
    for m in range(m_max + 1):
        cp, cm, c = fit_block_expansion(D, V_amp, m, dts)
        cond = max(cond, c)
        base_p[m] = Su2Operator.from_array(cp[m])
        base_m[m] = Su2Operator.from_array(cm[m])
    table: dict[int, dict[int, Su2Operator]] = {}
    for rr in range(1, r + 1):
        table[rr] = {}
        for m in range(min(m_max, rr - 1) + 1):
            table[rr][m] = 2.0 ** (-m * (rr - m)) * (0.5 * (base_p[m] + base_m[m]))
    return MoriMagnusTable(r, m_max, base_p, base_m, table, cond)


def mori_magnus_direct(D: Su2Operator, V_amp: Su2Operator, r: int, m_max: int, dt_fit):
    """Oracle: ``h^+-_{r,m}`` fitted directly from the depth-``r`` block."""
    cp, cm, _ = fit_block_expansion(D, V_amp, r, dt_fit)
    return (
        {m: Su2Operator.from_array(cp[m]) for m in range(m_max + 1)},
        {m: Su2Operator.from_array(cm[m]) for m in range(m_max + 1)},
    )


def coefficient_relative_error(a: Su2Operator, b: Su2Operator, scale: float) -> float:
    """Largest per-coefficient ``|a - b| / max(|b|, scale)``.

    ``scale`` is the natural magnitude of the expansion order.  Without it,
    coefficients that vanish identically would give a 0/0 ratio.
    """
    x, y = a.to_array(), b.to_array()
    return float(np.max(np.abs(x - y) / np.maximum(np.abs(y), scale)))
