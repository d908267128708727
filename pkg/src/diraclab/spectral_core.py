"""Finite-dimensional Dirac triples and their spectral calculus.

A Dirac triple here is ``(C^n, A, γ)`` with ``A`` Hermitian, ``γ`` unitary,
``γ* = -γ = γ^{-1}`` and ``Aγ + γA = 0``.  An optional Hermitian involution
``α`` commuting with ``A`` and anticommuting with ``γ`` encodes a
supersymmetric splitting.

The anticommutation forces the spectrum of ``A`` to be symmetric about zero
and ``γ`` to map the ``a``-eigenspace onto the ``-a``-eigenspace, so that
``γ* Q_J γ = Q_{-J}`` for every spectral projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import unitary_group

from .errors import DimensionError, EigenSolverError, SpectralCutError, ValidationError
from .subspace import DEFAULT_RANK_TOL, Subspace
from . import io as _io


def _norm(M):
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def default_tol(*mats):
    """Validation tolerance ``1e-8 (1 + max ||M||)``."""
    return 1e-8 * (1.0 + max((_norm(np.asarray(M)) for M in mats), default=0.0))


def normal_form_gamma(dim):
    """``γ = [[0, -I], [I, 0]]`` in dimension ``dim`` (even)."""
    if dim <= 0 or dim % 2:
        raise DimensionError("normal form needs a positive even dimension", {"dim": dim})
    m = dim // 2
    g = np.zeros((dim, dim), dtype=complex)
    g[:m, m:] = -np.eye(m)
    g[m:, :m] = np.eye(m)
    return g


@dataclass(frozen=True, eq=False)
class DiracData:
    """A validated Dirac triple; build it with :func:`validate_dirac_data`.

    Attributes
    ----------
    dim : int
    a0 : ndarray
        Hermitian matrix ``A``.
    gamma : ndarray
        The unitary ``γ``.
    alpha : ndarray or None
        Optional supersymmetry involution.
    tol : float
        Tolerance the relations were checked against.
    """

    dim: int
    a0: np.ndarray
    gamma: np.ndarray
    alpha: Optional[np.ndarray]
    tol: float

    def __post_init__(self):
        for name in ("a0", "gamma", "alpha"):
            M = getattr(self, name)
            if M is not None:
                M = np.array(M, dtype=complex)
                M.setflags(write=False)
                object.__setattr__(self, name, M)

    def __repr__(self):
        return f"DiracData(dim={self.dim}, alpha={'yes' if self.alpha is not None else 'no'})"

    @property
    def has_alpha(self) -> bool:
        return self.alpha is not None

    def with_a(self, a) -> "DiracData":
        """Same ``γ``/``α`` with a different operator (validated)."""
        return validate_dirac_data(a, self.gamma, self.alpha, tol=self.tol)

    def to_dict(self):
        out = {"dim": self.dim, "a0": _io.encode_matrix(self.a0),
               "gamma": _io.encode_matrix(self.gamma), "tol": self.tol}
        if self.alpha is not None:
            out["alpha"] = _io.encode_matrix(self.alpha)
        return out

    @classmethod
    def from_dict(cls, obj):
        a0 = _io.decode_matrix(obj["a0"])
        gamma = _io.decode_matrix(obj["gamma"])
        alpha = _io.decode_matrix(obj["alpha"]) if obj.get("alpha") is not None else None
        d = validate_dirac_data(a0, gamma, alpha, tol=obj.get("tol"))
        if "dim" in obj and int(obj["dim"]) != d.dim:
            raise DimensionError("declared dim does not match the matrices",
                                 {"declared": obj["dim"], "actual": d.dim})
        return d


@dataclass(frozen=True)
class ValidationReport:
    """Residual of every relation that was checked, plus the violated ones."""

    residuals: dict
    violations: list
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {"ok": self.ok, "tol": self.tol,
                "residuals": dict(self.residuals),
                "violations": [{"relation": n, "residual": r} for n, r in self.violations]}


def check_dirac_data(a0, gamma, alpha=None, tol=None, require_even=True) -> ValidationReport:
    """Evaluate every structural relation without raising.

    Raises only for inputs that are not square matrices of a common size
    (or an odd size when ``require_even``); everything else is reported.
    """
    a0 = np.asarray(a0, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    mats = [a0, gamma] + ([np.asarray(alpha, dtype=complex)] if alpha is not None else [])
    for M in mats:
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError("matrices must be square", {"shape": list(M.shape)})
    if len({M.shape[0] for M in mats}) != 1:
        raise DimensionError("dimension mismatch", {"shapes": [list(M.shape) for M in mats]})
    n = a0.shape[0]
    if n == 0 or (require_even and n % 2):
        raise DimensionError("dimension must be a positive even integer", {"dim": n})
    tol = default_tol(*mats) if tol is None else float(tol)
    eye = np.eye(n)
    res = {
        "A Hermitian": _norm(a0 - a0.conj().T),
        "gamma*≠−gamma": _norm(gamma.conj().T + gamma),
        "gamma²≠−I": _norm(gamma @ gamma + eye),
        "A·gamma+gamma·A≠0": _norm(a0 @ gamma + gamma @ a0),
    }
    herm = 0.5 * (a0 + a0.conj().T)
    ev = np.linalg.eigvalsh(herm)
    res["spectrum not symmetric"] = float(np.max(np.abs(np.sort(ev) + np.sort(ev)[::-1])))
    if alpha is not None:
        al = np.asarray(alpha, dtype=complex)
        res["alpha Hermitian"] = _norm(al - al.conj().T)
        res["alpha²≠I"] = _norm(al @ al - eye)
        res["alpha·gamma+gamma·alpha≠0"] = _norm(al @ gamma + gamma @ al)
        res["A·alpha−alpha·A≠0"] = _norm(a0 @ al - al @ a0)
    violations = [(k, v) for k, v in res.items() if v > tol]
    return ValidationReport(residuals=res, violations=violations, tol=tol)


def validate_dirac_data(a0, gamma, alpha=None, tol=None) -> DiracData:
    """Validate candidate matrices and return a :class:`DiracData`.

    Raises
    ------
    DimensionError
        Non-square, mismatched or odd-dimensional input.
    ValidationError
        One or more relations fail; ``err.violations`` lists them with the
        residual norms.
    """
    rep = check_dirac_data(a0, gamma, alpha, tol)
    if not rep.ok:
        names = ", ".join(n for n, _ in rep.violations)
        raise ValidationError(f"invalid Dirac data: {names}", rep.violations,
                              {"tol": rep.tol, "residuals": rep.residuals})
    a0 = np.asarray(a0, dtype=complex)
    return DiracData(dim=a0.shape[0], a0=0.5 * (a0 + a0.conj().T),
                     gamma=np.asarray(gamma, dtype=complex),
                     alpha=None if alpha is None else np.asarray(alpha, dtype=complex),
                     tol=rep.tol)


# ---------------------------------------------------------------------------
# eigendecomposition and spectral projections

class Cluster(NamedTuple):
    value: float
    frame: np.ndarray
    members: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (ascending) and eigenvector frames grouped into clusters."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    clusters: tuple
    cluster_tol: float

    @property
    def dim(self):
        return self.vectors.shape[0]

    @property
    def frames(self):
        return [c.frame for c in self.clusters]

    @property
    def cluster_values(self):
        return np.array([c.value for c in self.clusters])

    def reconstruct(self):
        """``Σ a_j P_j`` over the clusters."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for c in self.clusters:
            out += c.value * (c.frame @ c.frame.conj().T)
        return out

    def function(self, f):
        """``f(A)`` evaluated eigenvalue-wise (``f`` vectorized)."""
        vals = np.asarray(f(self.eigenvalues))
        return (self.vectors * vals) @ self.vectors.conj().T


def _matrix_of(d_or_matrix):
    a = getattr(d_or_matrix, "a0", d_or_matrix)
    return np.asarray(a, dtype=complex)


def eigendecompose(d, cluster_tol=None) -> SpectralDecomposition:
    """Hermitian eigendecomposition with clustering of near-equal eigenvalues.

    Parameters
    ----------
    d : DiracData or ndarray
        The triple (its ``a0`` is used) or a Hermitian matrix.
    cluster_tol : float, optional
        Eigenvalues whose consecutive gaps are at most this value are merged;
        default ``1e-9 (1 + ||A||)``.
    """
    a = _matrix_of(d)
    a = 0.5 * (a + a.conj().T)
    if cluster_tol is None:
        cluster_tol = 1e-9 * (1.0 + _norm(a))
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenSolverError("eigensolver did not converge", {"reason": str(exc)}) from exc
    resid = _norm(a @ v - v * w)
    if resid > 1e3 * np.finfo(float).eps * (1.0 + _norm(a)) * max(1, a.shape[0]):
        raise EigenSolverError("eigendecomposition residual too large", {"residual": resid})
    clusters = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > cluster_tol:
            members = w[start:i].copy()
            clusters.append(Cluster(float(np.mean(members)), v[:, start:i], members))
            start = i
    return SpectralDecomposition(eigenvalues=w, vectors=v, clusters=tuple(clusters),
                                 cluster_tol=float(cluster_tol))


class Interval(NamedTuple):
    """Real interval with open or closed ends (infinite ends are open)."""

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def negate(self) -> "Interval":
        return Interval(-self.hi, -self.lo, self.hi_closed, self.lo_closed)

    def __str__(self):
        return (("[" if self.lo_closed else "(") + f"{self.lo:g}, {self.hi:g}"
                + ("]" if self.hi_closed else ")"))


def interval(text: str) -> Interval:
    """Parse ``"(0, inf)"``, ``"(-inf, 0]"``, ``"[-1, 1]"`` and similar."""
    text = text.strip()
    if text[0] not in "([" or text[-1] not in ")]":
        raise ValueError(f"cannot parse interval {text!r}")
    lo, hi = (float(p.strip().replace("∞", "inf")) for p in text[1:-1].split(","))
    return Interval(lo, hi, text[0] == "[", text[-1] == "]")


_RELATIONS = {
    ">": lambda lam: Interval(lam, math.inf, False, False),
    ">=": lambda lam: Interval(lam, math.inf, True, False),
    "<": lambda lam: Interval(-math.inf, lam, False, False),
    "<=": lambda lam: Interval(-math.inf, lam, False, True),
    "=": lambda lam: Interval(lam, lam, True, True),
}


def relation_interval(rel: str, lam: float = 0.0) -> Interval:
    """Interval for ``Q_{>Λ}``, ``Q_{≥Λ}``, ``Q_{<Λ}``, ``Q_{≤Λ}``, ``Q_{=Λ}``."""
    try:
        return _RELATIONS[rel](float(lam))
    except KeyError:
        raise ValueError(f"unknown relation {rel!r}") from None


def _endpoint_side(c, endpoint, closed, tol, on_tol, lower):
    """Membership of a cluster with respect to one endpoint.

    The cluster sits on the endpoint when the endpoint is within ``on_tol``
    (roundoff, or the spread of the cluster members) of the cluster value;
    then ``closed`` decides.  An endpoint that is only within ``tol`` of a
    member, or that separates members, is ambiguous and raises.
    """
    if math.isinf(endpoint):
        return True
    spread = float(c.members[-1] - c.members[0])
    if abs(c.value - endpoint) <= max(on_tol, spread):
        return closed
    if np.any(np.abs(c.members - endpoint) <= tol) or c.members[0] < endpoint < c.members[-1]:
        raise SpectralCutError("spectral cut through eigenvalue",
                               {"endpoint": endpoint, "cluster": c.members.tolist(),
                                "cluster_tol": tol})
    return c.value > endpoint if lower else c.value < endpoint


def spectral_projection(dec: SpectralDecomposition, J, rank_tol=DEFAULT_RANK_TOL):
    """Orthogonal spectral projection ``Q_J``.

    Parameters
    ----------
    dec : SpectralDecomposition
    J : Interval or str
        The interval; strings are parsed by :func:`interval`.

    Returns
    -------
    (Subspace, ndarray)
        Range of ``Q_J`` and the projection matrix.

    Notes
    -----
    An endpoint that coincides with a cluster up to roundoff counts as
    sitting on it, so the open/closed flag decides.  An endpoint within
    ``cluster_tol`` of an eigenvalue without coinciding with its cluster
    raises :class:`SpectralCutError`.
    """
    if isinstance(J, str):
        J = interval(J)
    tol = dec.cluster_tol
    scale = 1.0 + (float(np.max(np.abs(dec.eigenvalues))) if dec.eigenvalues.size else 0.0)
    on_tol = 1e3 * np.finfo(float).eps * scale
    cols = []
    for c in dec.clusters:
        inside = (_endpoint_side(c, J.lo, J.lo_closed, tol, on_tol, lower=True)
                  and _endpoint_side(c, J.hi, J.hi_closed, tol, on_tol, lower=False))
        if inside:
            cols.append(c.frame)
    frame = np.hstack(cols) if cols else np.zeros((dec.dim, 0), dtype=complex)
    return Subspace(frame, rank_tol), frame @ frame.conj().T


def spectral_subspace(dec, rel, lam=0.0, rank_tol=DEFAULT_RANK_TOL) -> Subspace:
    """Range of ``Q_{rel Λ}``, e.g. ``spectral_subspace(dec, "<=", 0)``."""
    return spectral_projection(dec, relation_interval(rel, lam), rank_tol)[0]


def spectral_projector(dec, rel, lam=0.0) -> np.ndarray:
    return spectral_projection(dec, relation_interval(rel, lam))[1]


# ---------------------------------------------------------------------------
# Sobolev scale

@dataclass(frozen=True, eq=False)
class SobolevWeight:
    """The weight ``(I + A²)^{s/2}``."""

    s: float
    weight: np.ndarray


def sobolev_weight(d, s, dec=None) -> SobolevWeight:
    dec = eigendecompose(d) if dec is None else dec
    w = dec.function(lambda a: (1.0 + a ** 2) ** (0.5 * s))
    return SobolevWeight(float(s), 0.5 * (w + w.conj().T))


def _vec(x, n):
    x = np.asarray(x, dtype=complex).ravel()
    if x.shape[0] != n:
        raise DimensionError("vector has the wrong length", {"expected": n, "got": x.shape[0]})
    return x


def sobolev_inner(d, x, y, s, dec=None) -> complex:
    """``<x, y>_s = <W_s x, W_s y>``."""
    W = sobolev_weight(d, s, dec).weight
    n = W.shape[0]
    return complex(np.vdot(W @ _vec(x, n), W @ _vec(y, n)))


def sobolev_pair(d, x, y, s, dec=None) -> complex:
    """Duality pairing ``B_s(x, y) = <W_s x, W_{-s} y>`` of ``H^s`` and ``H^{-s}``."""
    dec = eigendecompose(d) if dec is None else dec
    Wp = sobolev_weight(d, s, dec).weight
    Wm = sobolev_weight(d, -s, dec).weight
    n = Wp.shape[0]
    return complex(np.vdot(Wp @ _vec(x, n), Wm @ _vec(y, n)))


def sobolev_norm(d, x, s, dec=None) -> float:
    W = sobolev_weight(d, s, dec).weight
    return float(np.linalg.norm(W @ _vec(x, W.shape[0])))


# ---------------------------------------------------------------------------
# chirality

def chirality_split(d, rank_tol=DEFAULT_RANK_TOL):
    """Eigenspaces ``H^± = {iγx = ±x}``.

    ``d`` may be a :class:`DiracData` or a bare ``γ`` (any dimension, with
    ``γ* = -γ = γ^{-1}``), which allows odd-dimensional checks in which no
    anticommuting operator is involved.
    """
    gamma = np.asarray(getattr(d, "gamma", d), dtype=complex)
    h = 1j * gamma
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    plus = w > 0
    return Subspace(v[:, plus], rank_tol), Subspace(v[:, ~plus], rank_tol)


def chiral_index(d) -> int:
    """``dim H⁺ - dim H⁻``."""
    hp, hm = chirality_split(d)
    return hp.dim - hm.dim


# ---------------------------------------------------------------------------
# random generators

def _gamma_eigenbasis(m):
    """Unitary ``W`` with ``W* γ W = diag(iI, -iI)`` for the normal form."""
    eye = np.eye(m)
    return np.block([[eye, eye], [-1j * eye, 1j * eye]]) / math.sqrt(2.0)


def haar_unitary(n, rng):
    """Haar-distributed unitary (``scipy.stats.unitary_group`` needs ``n > 1``)."""
    if n == 1:
        return np.exp(2j * np.pi * rng.random()) * np.eye(1, dtype=complex)
    return unitary_group.rvs(n, random_state=rng)


def random_gamma_unitary(dim, rng):
    """Random unitary commuting with the normal-form ``γ``."""
    m = dim // 2
    W = _gamma_eigenbasis(m)
    u1 = haar_unitary(m, rng)
    u2 = haar_unitary(m, rng)
    D = np.zeros((dim, dim), dtype=complex)
    D[:m, :m] = u1
    D[m:, m:] = u2
    return W @ D @ W.conj().T


def half_spectrum(spectrum, tol=1e-9):
    """Non-negative half of a spectrum symmetric about zero.

    Returns the positive values with multiplicity together with half of the
    zeros.
    """
    spec = np.sort(np.asarray(spectrum, dtype=float))
    scale = 1.0 + (np.max(np.abs(spec)) if spec.size else 0.0)
    if spec.size % 2 or np.max(np.abs(spec + spec[::-1]), initial=0.0) > tol * scale:
        raise ValueError("spectrum is not symmetric about 0")
    zeros = int(np.count_nonzero(np.abs(spec) <= tol * scale))
    pos = spec[spec > tol * scale]
    return np.concatenate([pos, np.zeros(zeros // 2)])


def random_system(dim, spectrum, seed, with_alpha=False) -> DiracData:
    """Random Dirac triple in block normal form.

    ``γ = [[0, -I], [I, 0]]`` and ``A = U diag(B, -B) U*`` with ``B`` carrying
    the non-negative half of ``spectrum`` and ``U`` a random unitary commuting
    with ``γ``.  With ``with_alpha`` the involution ``α = U diag(I, -I) U*``
    is attached.  Deterministic in ``seed``.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.size != dim:
        raise ValueError("spectrum must have exactly dim entries")
    if dim <= 0 or dim % 2:
        raise DimensionError("dimension must be a positive even integer", {"dim": dim})
    half = half_spectrum(spectrum)
    rng = np.random.default_rng(seed)
    m = dim // 2
    U = random_gamma_unitary(dim, rng)
    core = np.diag(np.concatenate([half, -half])).astype(complex)
    a0 = U @ core @ U.conj().T
    alpha = None
    if with_alpha:
        alpha = U @ np.diag(np.concatenate([np.ones(m), -np.ones(m)])) @ U.conj().T
    return validate_dirac_data(a0, normal_form_gamma(dim), alpha)


def random_spectrum(dim, kernel_pairs, rng, scale=3.0, gap=0.1):
    """Symmetric spectrum with ``2 kernel_pairs`` zeros and values in ``[gap, scale]``."""
    m = dim // 2
    kernel_pairs = min(kernel_pairs, m)
    pos = np.sort(rng.uniform(gap, scale, size=m - kernel_pairs))
    half = np.concatenate([pos, np.zeros(kernel_pairs)])
    return np.concatenate([half, -half])


def anticommuting_part(X, gamma):
    """Hermitian part of ``X`` anticommuting with ``γ``: ``(H + γHγ)/2``."""
    H = 0.5 * (X + X.conj().T)
    return 0.5 * (H + gamma @ H @ gamma)


def random_chiral_gamma(n_plus, n_minus, rng):
    """Random ``γ`` whose ``iγ`` has ``n_plus`` eigenvalues ``+1``."""
    n = n_plus + n_minus
    W = haar_unitary(n, rng)
    signs = np.concatenate([np.ones(n_plus), -np.ones(n_minus)])
    return -1j * (W * signs) @ W.conj().T


def random_chiral_system(n_plus, n_minus, seed) -> DiracData:
    """Random triple with prescribed chirality dimensions.

    For ``n_plus != n_minus`` the operator necessarily has a kernel of
    dimension at least ``|n_plus - n_minus|``.
    """
    rng = np.random.default_rng(seed)
    gamma = random_chiral_gamma(n_plus, n_minus, rng)
    n = n_plus + n_minus
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return validate_dirac_data(anticommuting_part(X, gamma), gamma)
