"""Solution operators, coefficient paths and the fundamental solution.

Two settings are covered.

*Constant coefficients.*  For a Dirac triple ``(A, γ)`` the module evaluates
the extension operator ``x -> e^{-t(|A| + Q_0)} x``, the solution operator

    (S_L σ)(t) = ∫_0^t e^{(s-t)A_>} σ(s) ds - ∫_t^∞ e^{(s-t)A_<} σ(s) ds,
    S_D = S_L γ*,

exactly for piecewise-linear right-hand sides, and decomposes sampled
sections as ``E_> x + S_D τ + σ_0``.

*Eventually constant paths.*  A :class:`CoefficientPath` carries ``A(t)`` and
a potential ``V(t)`` on ``[0, r]`` with ``A(t) = A(r)`` and ``V(t) = 0``
beyond ``r``.  Solutions of ``(D + V)σ = 0`` with ``D = γ(∂_t + A)`` solve

    σ' = (-A(t) + γ V(t)) σ     (using γ^{-1} = -γ),

which is integrated with the classical fourth-order Runge-Kutta scheme on a
uniform grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, NonConvergenceError, NotRepresentedError, PathError
from .spectral_core import DiracData, eigendecompose, validate_dirac_data

DEFAULT_RESOLUTION = 2048
DEFAULT_RTOL = 1e-9


class KernelComponentWarning(UserWarning):
    """The right-hand side has a component in ``ker A``, which is dropped."""


# ---------------------------------------------------------------------------
# sections

@dataclass(frozen=True, eq=False)
class GridSection:
    """Samples ``values[i] = σ(grid[i])`` of a section, linear in between."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=complex)
        if grid.ndim != 1 or grid.size < 2:
            raise DimensionError("grid must be a 1-d array with at least two points")
        if np.any(np.diff(grid) <= 0):
            raise DimensionError("grid must be strictly increasing")
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != grid.size:
            raise DimensionError("one value per grid point required",
                                 {"grid": grid.size, "values": values.shape[0]})
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[1]

    def at(self, t):
        """Linear interpolation at ``t`` (zero outside the grid)."""
        g = self.grid
        if t < g[0] or t > g[-1]:
            return np.zeros(self.dim, dtype=complex)
        i = min(int(np.searchsorted(g, t, side="right")) - 1, g.size - 2)
        w = (t - g[i]) / (g[i + 1] - g[i])
        return (1 - w) * self.values[i] + w * self.values[i + 1]

    def map(self, M) -> "GridSection":
        """Apply a constant matrix pointwise."""
        return GridSection(self.grid, self.values @ np.asarray(M).T)

    def __add__(self, other):
        _same_grid(self, other)
        return GridSection(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return GridSection(self.grid, self.values - other.values)

    def max_norm(self):
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def to_dict(self):
        from . import io as _io
        return {"grid": self.grid.tolist(), "values": [_io.encode_vector(v) for v in self.values]}

    @classmethod
    def from_dict(cls, obj):
        from . import io as _io
        return cls(np.asarray(obj["grid"], dtype=float),
                   np.array([_io.decode_vector(v) for v in obj["values"]]))


def _same_grid(a, b):
    if a.grid.shape != b.grid.shape or np.any(a.grid != b.grid):
        raise DimensionError("sections live on different grids")


# ---------------------------------------------------------------------------
# constant-coefficient operators

def _modes(d, dec=None):
    dec = eigendecompose(d) if dec is None else dec
    return dec, dec.eigenvalues, dec.vectors


def extension_section(d, x, t, dec=None):
    """``e^{-t(|A| + Q_0)} x``; kernel modes decay like ``e^{-t}``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    dec, a, vec = _modes(d, dec)
    rate = np.where(np.abs(a) <= dec.cluster_tol, 1.0, np.abs(a))
    coeff = vec.conj().T @ np.asarray(x, dtype=complex)
    return vec @ (np.exp(-t * rate) * coeff)


def extension_grid(d, x, grid, dec=None, positive_only=False) -> GridSection:
    """Sampled extension ``t -> E x(t)``; with ``positive_only`` only ``E_> Q_> x``."""
    dec, a, vec = _modes(d, dec)
    rate = np.where(np.abs(a) <= dec.cluster_tol, 1.0, np.abs(a))
    coeff = vec.conj().T @ np.asarray(x, dtype=complex)
    if positive_only:
        coeff = np.where(a > dec.cluster_tol, coeff, 0.0)
    grid = np.asarray(grid, dtype=float)
    vals = (np.exp(-np.outer(grid, rate)) * coeff) @ vec.T
    return GridSection(grid, vals)


def _cell_weights(x):
    """``p0 = (1 - e^{-x})/x`` and ``p1 = (1 - e^{-x}(1 + x))/x²`` for ``x ≥ 0``."""
    x = np.asarray(x, dtype=float)
    p0 = np.empty_like(x)
    p1 = np.empty_like(x)
    small = x < 0.5
    xs = x[small]
    # series: p0 = Σ (-x)^k/(k+1)!,  p1 = Σ (-x)^k/(k!(k+2))
    term = np.ones_like(xs)
    s0 = np.zeros_like(xs)
    s1 = np.zeros_like(xs)
    for k in range(16):
        s0 += term / (k + 1)
        s1 += term / (k + 2)
        term = term * (-xs) / (k + 1)
    p0[small], p1[small] = s0, s1
    xl = x[~small]
    p0[~small] = -np.expm1(-xl) / xl
    p1[~small] = (1.0 - np.exp(-xl) * (1.0 + xl)) / xl ** 2
    return p0, p1


def solve_inhomogeneous_grid(d, tau: GridSection, dec=None) -> GridSection:
    """``S_D τ`` on the grid of ``τ``, with ``τ`` piecewise linear and zero past the grid.

    Each cell integral of ``e^{(s-t)a}`` against the linear interpolant is
    evaluated in closed form and accumulated by a forward recursion for the
    positive modes and a backward recursion for the negative modes.
    """
    dec, a, vec = _modes(d, dec)
    if tau.dim != d.dim:
        raise DimensionError("section dimension does not match the system")
    # coefficients of γ* τ in the eigenbasis
    c = tau.values @ (vec.conj().T @ d.gamma.conj().T).T
    zero_modes = np.abs(a) <= dec.cluster_tol
    if np.any(zero_modes) and np.max(np.abs(c[:, zero_modes]), initial=0.0) > 1e-12 * (1 + np.max(np.abs(c))):
        warnings.warn("right-hand side has a ker A component; it is ignored",
                      KernelComponentWarning, stacklevel=2)
    g = tau.grid
    h = np.diff(g)
    out = np.zeros_like(c)
    pos = a > dec.cluster_tol
    neg = a < -dec.cluster_tol
    if np.any(pos):
        ap = a[pos]
        cp = c[:, pos]
        x = np.outer(h, ap)
        p0, p1 = _cell_weights(x)
        decay = np.exp(-x)
        acc = np.zeros(ap.size, dtype=complex)
        for i in range(h.size):
            cell = h[i] * (cp[i + 1] * (p0[i] - p1[i]) + cp[i] * p1[i])
            acc = decay[i] * acc + cell
            out[i + 1, pos] = acc
    if np.any(neg):
        bn = -a[neg]
        cn = c[:, neg]
        x = np.outer(h, bn)
        p0, p1 = _cell_weights(x)
        decay = np.exp(-x)
        acc = np.zeros(bn.size, dtype=complex)
        for i in range(h.size - 1, -1, -1):
            cell = h[i] * (cn[i] * (p0[i] - p1[i]) + cn[i + 1] * p1[i])
            acc = decay[i] * acc + cell
            out[i, neg] = -acc
    return GridSection(g, out @ vec.T)


def solve_inhomogeneous(d, tau: GridSection, t, dec=None):
    """``(S_D τ)(t)`` for one evaluation time ``t`` in the grid range."""
    g = tau.grid
    if t < g[0] or t > g[-1]:
        raise ValueError("evaluation time outside the support grid")
    if np.any(g == t):
        i = int(np.flatnonzero(g == t)[0])
        return solve_inhomogeneous_grid(d, tau, dec).values[i]
    j = int(np.searchsorted(g, t))
    grid = np.insert(g, j, t)
    vals = np.insert(tau.values, j, tau.at(t), axis=0)
    return solve_inhomogeneous_grid(d, GridSection(grid, vals), dec).values[j]


def dirac_apply(d, sigma: GridSection) -> GridSection:
    """``γ(σ' + Aσ)`` with second-order finite differences."""
    deriv = np.gradient(sigma.values, sigma.grid, axis=0, edge_order=2)
    return GridSection(sigma.grid, (deriv + sigma.values @ d.a0.T) @ d.gamma.T)


@dataclass(frozen=True, eq=False)
class Representation:
    """Result of :func:`representation_decompose`."""

    x: np.ndarray
    tau: GridSection
    sigma0: GridSection
    residual: float


def representation_decompose(d, sigma: GridSection, tol=1e-6, dec=None) -> Representation:
    """Split a sampled section as ``E_> x + S_D τ + σ_0``.

    ``x = Q_> σ(0)``, ``σ_0 = Q_0 σ`` and ``τ = Q_≠ γ(σ' + Aσ)`` (finite
    differences).  The triple is re-synthesized and compared with ``σ``.

    Raises
    ------
    NotRepresentedError
        If the relative re-synthesis residual exceeds ``tol``.
    """
    dec = eigendecompose(d) if dec is None else dec
    a, vec = dec.eigenvalues, dec.vectors
    ct = dec.cluster_tol
    proj = lambda mask: (vec[:, mask] @ vec[:, mask].conj().T)
    Qp, Q0, Qne = proj(a > ct), proj(np.abs(a) <= ct), proj(np.abs(a) > ct)
    x = Qp @ sigma.values[0]
    sigma0 = sigma.map(Q0)
    tau = dirac_apply(d, sigma).map(Qne)
    synth = extension_grid(d, x, sigma.grid, dec) + solve_inhomogeneous_grid(d, tau, dec) + sigma0
    scale = max(1.0, sigma.max_norm())
    resid = (synth - sigma).max_norm() / scale
    if resid > tol:
        raise NotRepresentedError("not in represented form", {"residual": resid, "tol": tol})
    return Representation(x=x, tau=tau, sigma0=sigma0, residual=resid)


# ---------------------------------------------------------------------------
# trace inequalities

def _pl_integrals(section: GridSection):
    """Exact ``∫|σ'|²`` and ``∫|σ|²`` for a piecewise-linear section."""
    g, v = section.grid, section.values
    h = np.diff(g)
    dv = np.diff(v, axis=0)
    d2 = float(np.sum(np.sum(np.abs(dv) ** 2, axis=1) / h))
    v0, v1 = v[:-1], v[1:]
    s2 = float(np.sum(h / 3.0 * (np.sum(np.abs(v0) ** 2, axis=1)
                                 + np.real(np.sum(v0.conj() * v1, axis=1))
                                 + np.sum(np.abs(v1) ** 2, axis=1))))
    return d2, s2


@dataclass(frozen=True)
class TraceReport:
    """Worst ratio ``lhs / rhs`` over the samples and any violating witnesses."""

    worst_ratio: float
    worst_index: int
    violations: list
    count: int

    @property
    def ok(self):
        return not self.violations


def trace_inequality_report(sections, a, half_line=False, slack=1e-12) -> TraceReport:
    """Check the interval trace inequality on piecewise-linear sections.

    For each section on ``[s, t]`` the inequality
    ``a |σ(s) - σ(t)|² ≤ 2 ∫|σ'|² + 2 a² ∫|σ|²`` is evaluated with exact
    integrals.  With ``half_line`` the section is regarded as compactly
    supported in ``[s, ∞)`` (its last value should vanish) and
    ``a |σ(s)|² ≤ ∫|σ'|² + a² ∫|σ|²`` is checked instead.

    Parameters
    ----------
    sections : sequence of GridSection
    a : float or sequence of float
        Positive constant, one per section or shared.
    """
    sections = list(sections)
    avals = np.broadcast_to(np.asarray(a, dtype=float), (len(sections),))
    worst, worst_i, bad = -math.inf, -1, []
    for i, (sec, ai) in enumerate(zip(sections, avals)):
        if ai <= 0:
            raise ValueError("a must be positive")
        d2, s2 = _pl_integrals(sec)
        if half_line:
            lhs = ai * float(np.sum(np.abs(sec.values[0]) ** 2))
            rhs = d2 + ai ** 2 * s2
        else:
            lhs = ai * float(np.sum(np.abs(sec.values[0] - sec.values[-1]) ** 2))
            rhs = 2 * d2 + 2 * ai ** 2 * s2
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        if ratio > worst:
            worst, worst_i = ratio, i
        if lhs > rhs * (1 + slack) + slack:
            bad.append({"index": i, "a": float(ai), "lhs": lhs, "rhs": rhs})
    return TraceReport(worst_ratio=float(worst), worst_index=worst_i, violations=bad,
                       count=len(sections))


def trace_bound_report(d, section: GridSection, dec=None):
    """Aggregated mode-wise bound ``<|A|σ(0), σ(0)> ≤ ∫|σ'|² + ∫|Aσ|²``.

    Valid for sections vanishing at the right end of their grid.  Returns
    ``(lhs, rhs)``.
    """
    dec = eigendecompose(d) if dec is None else dec
    absA = dec.function(np.abs)
    s0 = section.values[0]
    lhs = float(np.real(np.vdot(s0, absA @ s0)))
    d2, _ = _pl_integrals(section)
    _, s2a = _pl_integrals(section.map(d.a0))
    return lhs, d2 + s2a


# ---------------------------------------------------------------------------
# coefficient paths

class PiecewiseLinear:
    """Matrix-valued piecewise-linear function of ``t`` from a knot table.

    Constant beyond the last knot.
    """

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=complex)
        # real tables are kept real so that real systems integrate in real arithmetic
        self.values = values.real.copy() if not np.any(values.imag) else values
        if self.knots.ndim != 1 or self.values.shape[0] != self.knots.size:
            raise DimensionError("one matrix per knot required")
        if self.knots.size > 1 and np.any(np.diff(self.knots) <= 0):
            raise DimensionError("knots must be strictly increasing")
        self._slopes = np.diff(self.values, axis=0)

    def __call__(self, t):
        k = self.knots
        if t <= k[0]:
            return self.values[0]
        if t >= k[-1]:
            return self.values[-1]
        i = int(np.searchsorted(k, t, side="right")) - 1
        w = (t - k[i]) / (k[i + 1] - k[i])
        return (1 - w) * self.values[i] + w * self.values[i + 1]

    def batch(self, ts):
        ts = np.asarray(ts, dtype=float)
        k = self.knots
        if k.size == 1:
            return np.broadcast_to(self.values[0], (ts.size,) + self.values.shape[1:])
        tc = np.clip(ts, k[0], k[-1])
        i = np.clip(np.searchsorted(k, tc, side="right") - 1, 0, k.size - 2)
        w = (tc - k[i]) / (k[i + 1] - k[i])
        out = np.empty((ts.size,) + self.values.shape[1:], dtype=self.values.dtype)
        for cell in np.unique(i):
            sel = i == cell
            out[sel] = self.values[cell] + w[sel, None, None] * self._slopes[cell]
        return out

    def left_multiply(self, G):
        return PiecewiseLinear(self.knots, np.matmul(G, self.values))

    def lipschitz(self):
        if self.knots.size < 2:
            return 0.0
        dv = np.diff(self.values, axis=0)
        norms = np.array([np.linalg.norm(m, 2) for m in dv])
        return float(np.max(norms / np.diff(self.knots)))


class ScaledMatrix:
    """``t -> f(t) M`` for a scalar profile ``f`` (vectorized over ``t``)."""

    def __init__(self, profile, M):
        self.profile = profile
        self.M = np.asarray(M, dtype=complex)

    def __call__(self, t):
        return complex(self.profile(np.asarray([t], dtype=float))[0]) * self.M

    def batch(self, ts):
        f = np.asarray(self.profile(np.asarray(ts, dtype=float)), dtype=complex)
        return f[:, None, None] * self.M

    def left_multiply(self, G):
        return ScaledMatrix(self.profile, G @ self.M)


class SumOf:
    """Pointwise sum of matrix-valued functions."""

    def __init__(self, *fns):
        self.fns = fns

    def __call__(self, t):
        return sum(f(t) for f in self.fns)

    def batch(self, ts):
        return sum(_batch_eval(f, ts) for f in self.fns)

    def left_multiply(self, G):
        if not all(hasattr(f, "left_multiply") for f in self.fns):
            return None
        return SumOf(*[f.left_multiply(G) for f in self.fns])


class BlockDiag:
    """Block-diagonal assembly of matrix-valued functions."""

    def __init__(self, *fns, sizes):
        self.fns = fns
        self.sizes = list(sizes)

    def __call__(self, t):
        return self.batch(np.asarray([t], dtype=float))[0]

    def batch(self, ts):
        ts = np.asarray(ts, dtype=float)
        n = sum(self.sizes)
        out = np.zeros((ts.size, n, n), dtype=complex)
        off = 0
        for f, m in zip(self.fns, self.sizes):
            out[:, off:off + m, off:off + m] = _batch_eval(f, ts)
            off += m
        return out


def constant_matrix(M):
    M = np.asarray(M, dtype=complex)
    return PiecewiseLinear([0.0], M[None])


def _batch_eval(fn, ts):
    if hasattr(fn, "batch"):
        return np.asarray(fn.batch(ts))
    return np.array([np.asarray(fn(float(t)), dtype=complex) for t in ts])


@dataclass(frozen=True, eq=False)
class CoefficientPath:
    """Eventually constant coefficients of a Dirac-Schrödinger system.

    Attributes
    ----------
    d : DiracData
        Data at ``t = 0`` (``d.a0 = A(0)``); ``γ`` and ``α`` are constant.
    r : float
        Horizon; ``A(t) = A(r)`` and ``V(t) = 0`` for ``t > r``.
    A_of_t, V_of_t : callable
        Matrix-valued functions of ``t`` (objects with a ``batch`` method are
        evaluated vectorized).  ``V_of_t = None`` means no potential.
    lipschitz_bound : float
        Bound on the Lipschitz constant of ``A`` (estimated when omitted).
    name : str
    meta : dict
        Free-form parameters (used for reports and configs).
    """

    d: DiracData
    r: float
    A_of_t: Callable
    V_of_t: Optional[Callable] = None
    lipschitz_bound: float = math.nan
    name: str = "path"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.r > 0:
            raise PathError("horizon r must be positive", {"r": self.r})
        # γV precomputed when V knows how to absorb a left factor
        gV = None
        if self.V_of_t is not None and hasattr(self.V_of_t, "left_multiply"):
            gV = self.V_of_t.left_multiply(self.d.gamma)
        object.__setattr__(self, "_gamma_v", gV)
        if math.isnan(self.lipschitz_bound):
            lip = getattr(self.A_of_t, "lipschitz", None)
            object.__setattr__(self, "lipschitz_bound",
                               lip() if lip is not None else _estimate_lipschitz(self))

    @property
    def dim(self):
        return self.d.dim

    @property
    def gamma(self):
        return self.d.gamma

    def A(self, t):
        return np.asarray(self.A_of_t(min(max(float(t), 0.0), self.r)), dtype=complex)

    def V(self, t):
        if self.V_of_t is None or t > self.r:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return np.asarray(self.V_of_t(max(float(t), 0.0)), dtype=complex)

    def generator(self, t):
        """``-A(t) + γ V(t)``."""
        return -self.A(t) + self.gamma @ self.V(t)

    def generator_batch(self, ts):
        ts = np.clip(np.asarray(ts, dtype=float), 0.0, self.r)
        M = -_batch_eval(self.A_of_t, ts)
        if self._gamma_v is not None:
            M = M + _batch_eval(self._gamma_v, ts)
        elif self.V_of_t is not None:
            M = M + np.matmul(self.gamma, _batch_eval(self.V_of_t, ts))
        return M

    def tail_data(self) -> DiracData:
        """The Dirac triple ``(A(r), γ, α)`` governing ``t ≥ r``."""
        return self.d.with_a(self.A(self.r))

    def is_fredholm_type(self) -> bool:
        dec = eigendecompose(self.A(self.r))
        return not np.any(np.abs(dec.eigenvalues) <= dec.cluster_tol)

    def max_generator_norm(self, samples=33):
        ts = np.linspace(0.0, self.r, samples)
        return float(max(np.linalg.norm(M, 2) for M in self.generator_batch(ts)))

    @classmethod
    def constant(cls, d, r=1.0, name="constant"):
        return cls(d, float(r), constant_matrix(d.a0), None, 0.0, name)

    @classmethod
    def from_tables(cls, d, knots, A_values, V_values=None, name="table"):
        """Piecewise-linear path; the horizon is the last knot."""
        knots = np.asarray(knots, dtype=float)
        if abs(knots[0]) > 0:
            raise PathError("tables must start at t = 0")
        A = PiecewiseLinear(knots, A_values)
        V = PiecewiseLinear(knots, V_values) if V_values is not None else None
        return cls(d, float(knots[-1]), A, V, A.lipschitz(), name)


def _estimate_lipschitz(path, samples=257):
    ts = np.linspace(0.0, path.r, samples)
    As = _batch_eval(path.A_of_t, ts)
    dq = [np.linalg.norm(As[i + 1] - As[i], 2) / (ts[i + 1] - ts[i]) for i in range(samples - 1)]
    return float(max(dq))


def validate_path(path: CoefficientPath, samples=65, tol=None):
    """Check the path invariants at sampled times; raises :class:`PathError`.

    Checked: ``A(0) = d.a0``; ``A(t)`` and ``V(t)`` Hermitian; ``A(t)`` anticommutes
    with ``γ``; with ``α`` present, ``A(t)`` commutes and ``V(t)`` anticommutes
    with it; sampled difference quotients of ``A`` respect ``lipschitz_bound``.
    """
    d = path.d
    ts = np.linspace(0.0, path.r, samples)
    As = _batch_eval(path.A_of_t, ts)
    Vs = _batch_eval(path.V_of_t, ts) if path.V_of_t is not None else np.zeros_like(As)
    scale = 1.0 + max(np.linalg.norm(M, 2) for M in np.concatenate([As, Vs]))
    tol = 1e-8 * scale if tol is None else tol
    g = d.gamma
    checks = {
        "A(0) = a0": np.linalg.norm(As[0] - d.a0, 2),
        "A Hermitian": max(np.linalg.norm(M - M.conj().T, 2) for M in As),
        "V Hermitian": max(np.linalg.norm(M - M.conj().T, 2) for M in Vs),
        "A anticommutes with gamma": max(np.linalg.norm(M @ g + g @ M, 2) for M in As),
    }
    if d.alpha is not None:
        al = d.alpha
        checks["A commutes with alpha"] = max(np.linalg.norm(M @ al - al @ M, 2) for M in As)
        checks["V anticommutes with alpha"] = max(np.linalg.norm(M @ al + al @ M, 2) for M in Vs)
    bad = {k: float(v) for k, v in checks.items() if v > tol}
    dq = max(np.linalg.norm(As[i + 1] - As[i], 2) / (ts[i + 1] - ts[i]) for i in range(samples - 1))
    if dq > path.lipschitz_bound * (1 + 1e-9) + tol:
        bad["lipschitz bound"] = float(dq)
    if bad:
        raise PathError("coefficient path violates its invariants", bad)
    validate_dirac_data(path.A(path.r), g, d.alpha)
    return True


# ---------------------------------------------------------------------------
# integration

def default_resolution(path: CoefficientPath, minimum=DEFAULT_RESOLUTION):
    """Smallest power of two ``N ≥ minimum`` with ``h ||M|| ≤ 1/256``."""
    need = 256.0 * path.max_generator_norm() * path.r
    N = minimum
    while N < need:
        N *= 2
    return N


def _chunk_steps(n):
    return max(8, min(512, (1 << 20) // max(1, n * n)))


def integrate(path: CoefficientPath, t0, t1, N, X0, store_every=None, qr_every=None):
    """RK4 integration of ``X' = M(t) X`` from ``t0`` to ``t1`` in ``N`` steps.

    Parameters
    ----------
    X0 : ndarray, shape (n, k)
    store_every : int, optional
        Record ``(t, X)`` every so many steps (and at both ends).
    qr_every : int, optional
        Re-orthonormalize the columns by QR every so many steps.  QR keeps the
        span of every leading block of columns, so nested subspaces are
        propagated together.

    Returns
    -------
    (ndarray, list)
        Final ``X`` and the stored samples.
    """
    X = np.array(X0, dtype=complex)
    n = X.shape[0]
    h = (t1 - t0) / N
    chunk = _chunk_steps(n)
    stored = [(t0, X.copy())] if store_every else []
    # real data stays in real arithmetic, which is several times faster
    real = not np.any(X.imag)
    if real:
        X = X.real.copy()
    step = 0
    while step < N:
        m = min(chunk, N - step)
        ts = t0 + (step + np.arange(2 * m + 1) * 0.5) * h
        Ms = path.generator_batch(ts)
        if np.iscomplexobj(Ms):
            if real and np.any(Ms.imag):
                real = False
                X = X.astype(complex)
            if real:
                Ms = Ms.real
        elif not real:
            Ms = Ms.astype(complex)
        for j in range(m):
            M0, Mh, M1 = Ms[2 * j], Ms[2 * j + 1], Ms[2 * j + 2]
            k1 = M0 @ X
            k2 = Mh @ (X + 0.5 * h * k1)
            k3 = Mh @ (X + 0.5 * h * k2)
            k4 = M1 @ (X + h * k3)
            X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            step += 1
            if qr_every and (step % qr_every == 0 or step == N):
                X, _ = np.linalg.qr(X)
            if store_every and (step % store_every == 0 or step == N):
                stored.append((t0 + step * h, X.astype(complex)))
    return X.astype(complex), stored


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    """``Φ`` with ``Φ(0) = I`` and ``Φ' = (-A + γV)Φ`` on ``[0, r]``.

    Attributes
    ----------
    grid : ndarray
        Times at which ``Phi_of_t`` is stored.
    Phi_of_t : ndarray, shape (m, n, n)
    Phi_r : ndarray
    integrator_stats : dict
        ``steps``, ``error_estimate`` (absolute, spectral norm),
        ``relative_error`` and ``coarse_steps``.
    """

    grid: np.ndarray
    Phi_of_t: np.ndarray
    Phi_r: np.ndarray
    integrator_stats: dict


def fundamental_solution(path: CoefficientPath, grid_resolution=None, rtol=DEFAULT_RTOL,
                         store_points=65) -> FundamentalSolution:
    """Integrate the fundamental matrix with an RK4 step-halving error estimate.

    The error estimate for the ``N``-step result is the Richardson value
    ``||Φ_N - Φ_{N/2}|| / 15`` plus a rounding floor ``N ε ||Φ_N||``.

    Raises
    ------
    NonConvergenceError
        If the relative estimate exceeds ``rtol`` (skip the check with
        ``rtol=None``).
    """
    N = default_resolution(path) if grid_resolution is None else int(grid_resolution)
    if N < 2 or N % 2:
        raise ValueError("grid_resolution must be an even integer ≥ 2")
    n = path.dim
    eye = np.eye(n, dtype=complex)
    store_every = max(1, N // max(1, store_points - 1))
    fine, stored = integrate(path, 0.0, path.r, N, eye, store_every=store_every)
    coarse, _ = integrate(path, 0.0, path.r, N // 2, eye)
    norm = float(np.linalg.norm(fine, 2))
    est = float(np.linalg.norm(fine - coarse, 2)) / 15.0 + N * np.finfo(float).eps * norm
    rel = est / norm
    stats = {"steps": N, "coarse_steps": N // 2, "error_estimate": float(est),
             "relative_error": float(rel)}
    if rtol is not None and rel > rtol:
        raise NonConvergenceError("step halving disagreement above tolerance", stats)
    grid = np.array([t for t, _ in stored])
    return FundamentalSolution(grid=grid, Phi_of_t=np.array([X for _, X in stored]),
                               Phi_r=fine, integrator_stats=stats)


def solution_section(path: CoefficientPath, x0, N=None, points=65) -> GridSection:
    """Trajectory of ``σ(0) = x0`` on ``[0, r]`` sampled at ``points`` times."""
    N = default_resolution(path) if N is None else N
    _, stored = integrate(path, 0.0, path.r, N, np.asarray(x0, dtype=complex)[:, None],
                          store_every=max(1, N // (points - 1)))
    return GridSection(np.array([t for t, _ in stored]), np.array([X[:, 0] for _, X in stored]))
