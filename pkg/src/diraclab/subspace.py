"""Subspace arithmetic and the index calculus of Fredholm pairs.

Subspaces of ``C^n`` are stored as orthonormal frames.  Every rank decision
is taken from singular values relative to the largest one, so the results do
not depend on the scale of the input vectors.

In finite dimension any two subspaces ``F, G`` form a Fredholm pair with

    null(F, G) = dim(F ∩ G),  def(F, G) = n - dim(F + G),
    ind(F, G) = null(F, G) - def(F, G) = dim F + dim G - n.

The functions below compute nullity and deficiency from intersections and
sums directly (never from the dimension formula), so that index identities
checked with them are genuine numerical statements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import DimensionError, ProjectionError, VerificationError
from . import io as _io

DEFAULT_RANK_TOL = 1e-8


def _numerical_rank(s, rank_tol, scale=None):
    """Count singular values above ``rank_tol`` times the largest one.

    ``scale`` replaces the largest singular value as the reference size when
    the matrix is known to be roundoff relative to some other quantity.
    """
    ref = (s[0] if s.size else 0.0) if scale is None else max(scale, s[0] if s.size else 0.0)
    if s.size == 0 or ref == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * ref))


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of ``C^n`` given by an orthonormal frame.

    Parameters
    ----------
    frame : array_like, shape (n, k)
        Matrix with orthonormal columns.
    rank_tol : float
        Relative singular-value threshold used by every operation that
        derives a new subspace from this one.
    """

    frame: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        frame = np.array(self.frame, dtype=complex)
        if frame.ndim != 2:
            raise DimensionError("frame must be a 2-d array", {"ndim": frame.ndim})
        n, k = frame.shape
        if k > n:
            raise DimensionError("frame has more columns than rows", {"shape": [n, k]})
        if k:
            defect = np.linalg.norm(frame.conj().T @ frame - np.eye(k), 2)
            if defect > max(self.rank_tol, 1e-12):
                raise DimensionError("frame columns are not orthonormal",
                                     {"orthonormality_defect": float(defect)})
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"

    def projector(self) -> np.ndarray:
        """Orthogonal projection onto the subspace."""
        return self.frame @ self.frame.conj().T

    def perp(self) -> "Subspace":
        """Orthogonal complement in the ambient space."""
        n, k = self.frame.shape
        if k == 0:
            return Subspace(np.eye(n, dtype=complex), self.rank_tol)
        q, _ = np.linalg.qr(self.frame, mode="complete")
        return Subspace(q[:, k:], self.rank_tol)

    def contains(self, x, tol=None) -> bool:
        x = np.asarray(x, dtype=complex)
        tol = 10 * self.rank_tol if tol is None else tol
        nx = np.linalg.norm(x)
        if nx == 0:
            return True
        resid = x - self.frame @ (self.frame.conj().T @ x)
        return bool(np.linalg.norm(resid) <= tol * nx)

    def distance(self, other: "Subspace") -> float:
        """Spectral norm of the difference of the orthogonal projections."""
        _check_ambient(self, other)
        return float(np.linalg.norm(self.projector() - other.projector(), 2))

    def equals(self, other: "Subspace", tol=None) -> bool:
        """Frame-independent equality: ``||P_F - P_G|| <= 10 rank_tol``."""
        tol = 10 * max(self.rank_tol, other.rank_tol) if tol is None else tol
        return self.dim == other.dim and self.distance(other) <= tol

    def to_dict(self):
        return {"ambient_dim": self.ambient_dim,
                "frame": _io.encode_matrix(self.frame, order="col"),
                "rank_tol": self.rank_tol}

    @classmethod
    def from_dict(cls, obj):
        n = int(obj["ambient_dim"])
        frame = _io.decode_matrix(obj["frame"], order="col", shape=(n, None))
        return span(frame, obj.get("rank_tol", DEFAULT_RANK_TOL), ambient_dim=n)


def _check_ambient(*spaces):
    dims = {s.ambient_dim for s in spaces}
    if len(dims) != 1:
        raise DimensionError("ambient dimension mismatch", {"dims": sorted(dims)})


def _tol(*spaces):
    return max(s.rank_tol for s in spaces)


def span(vectors, rank_tol=DEFAULT_RANK_TOL, ambient_dim=None, scale=None) -> Subspace:
    """Orthonormal frame for the span of ``vectors``.

    Parameters
    ----------
    vectors : array_like
        Either an ``(n, m)`` matrix whose columns are the spanning vectors, or
        a sequence of length-``n`` vectors.  An empty input yields the zero
        subspace (``ambient_dim`` is then required).
    rank_tol : float
        Relative singular-value threshold.
    ambient_dim : int, optional
        Needed only when ``vectors`` is empty.
    scale : float, optional
        Reference size for the rank decision in place of the largest
        singular value (used when the vectors are images under a known map).
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        mat = vectors.astype(complex, copy=False)
    else:
        vecs = [np.asarray(v, dtype=complex).ravel() for v in vectors]
        if not vecs:
            if ambient_dim is None:
                raise DimensionError("ambient_dim required for an empty span")
            return Subspace(np.zeros((ambient_dim, 0), dtype=complex), rank_tol)
        mat = np.column_stack(vecs)
    if ambient_dim is not None and mat.shape[0] != ambient_dim:
        raise DimensionError("vectors do not live in the stated ambient space",
                             {"rows": mat.shape[0], "ambient_dim": ambient_dim})
    n, m = mat.shape
    if m == 0:
        return Subspace(np.zeros((n, 0), dtype=complex), rank_tol)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    r = _numerical_rank(s, rank_tol, scale)
    return Subspace(u[:, :r], rank_tol)


def zero(n, rank_tol=DEFAULT_RANK_TOL) -> Subspace:
    return Subspace(np.zeros((n, 0), dtype=complex), rank_tol)


def full(n, rank_tol=DEFAULT_RANK_TOL) -> Subspace:
    return Subspace(np.eye(n, dtype=complex), rank_tol)


def image(P, rank_tol=DEFAULT_RANK_TOL, scale=None) -> Subspace:
    """Range of a matrix."""
    return span(np.asarray(P, dtype=complex), rank_tol, scale=scale)


def kernel(P, rank_tol=DEFAULT_RANK_TOL, scale=None) -> Subspace:
    """Null space of a square or rectangular matrix.

    ``scale`` sets the reference size for the rank decision (defaults to the
    largest singular value of ``P``).
    """
    P = np.asarray(P, dtype=complex)
    n = P.shape[1]
    if P.shape[0] == 0:
        return full(n, rank_tol)
    _, s, vh = np.linalg.svd(P, full_matrices=True)
    r = _numerical_rank(s, rank_tol, scale)
    return Subspace(vh[r:].conj().T, rank_tol)


def apply(M, F: Subspace, scale=None) -> Subspace:
    """Image ``M(F)`` of a subspace under a linear map.

    Rank is decided relative to ``scale`` (default ``||M||``), so a map that
    annihilates ``F`` up to roundoff yields the zero subspace.
    """
    M = np.asarray(M, dtype=complex)
    if M.shape[1] != F.ambient_dim:
        raise DimensionError("matrix does not act on the subspace's ambient space")
    if scale is None:
        scale = float(np.linalg.norm(M, 2)) if M.size else 0.0
    return span(M @ F.frame, F.rank_tol, ambient_dim=M.shape[0], scale=scale)


def direct_sum(F: Subspace, G: Subspace) -> Subspace:
    """``F ⊕ G`` inside ``C^n ⊕ C^m`` (block order: F first)."""
    n, m = F.ambient_dim, G.ambient_dim
    frame = np.zeros((n + m, F.dim + G.dim), dtype=complex)
    frame[:n, :F.dim] = F.frame
    frame[n:, F.dim:] = G.frame
    return Subspace(frame, _tol(F, G))


def _concat_svd(F, G):
    mat = np.hstack([F.frame, G.frame])
    if mat.shape[1] == 0:
        return mat, np.zeros((F.ambient_dim, 0)), np.zeros(0), np.zeros((0, 0)), 0
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return mat, u, s, vh, _numerical_rank(s, _tol(F, G))


def subspace_sum(F: Subspace, G: Subspace) -> Subspace:
    """``F + G``."""
    _check_ambient(F, G)
    _, u, _, _, r = _concat_svd(F, G)
    return Subspace(u[:, :r], _tol(F, G))


def intersection(F: Subspace, G: Subspace) -> Subspace:
    """``F ∩ G`` from the null space of the concatenated frames."""
    _check_ambient(F, G)
    tol = _tol(F, G)
    mat = np.hstack([F.frame, G.frame])
    if mat.shape[1] == 0:
        return zero(F.ambient_dim, tol)
    _, s, vh = np.linalg.svd(mat, full_matrices=True)
    k = mat.shape[1] - _numerical_rank(s, tol)
    if k == 0:
        return zero(F.ambient_dim, tol)
    # null vectors (a; b) of [F G] give F a = -G b in F ∩ G
    null = vh[vh.shape[0] - k:].conj().T
    vecs = F.frame @ null[:F.dim]
    u, _, _ = np.linalg.svd(vecs, full_matrices=False)
    return Subspace(u[:, :k], tol)


def complement_within(F: Subspace, G: Subspace) -> Subspace:
    """Orthogonal complement of ``F ∩ G`` inside ``G``, i.e. ``F^⊥ ∩ G``."""
    return intersection(F.perp(), G)


def principal_angles(F: Subspace, G: Subspace) -> np.ndarray:
    """Principal angles (ascending) between two nonzero subspaces."""
    _check_ambient(F, G)
    if F.dim == 0 or G.dim == 0:
        return np.zeros(0)
    return np.sort(sla.subspace_angles(F.frame, G.frame))


@dataclass(frozen=True)
class PairReport:
    """Nullity, deficiency and index of a pair of subspaces."""

    nullity: int
    deficiency: int
    index: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "index", self.nullity - self.deficiency)

    def to_dict(self):
        return {"nullity": self.nullity, "deficiency": self.deficiency, "index": self.index}


def pair_report(F: Subspace, G: Subspace) -> PairReport:
    """Kato's nullity/deficiency/index of the pair ``(F, G)``.

    Both numbers come from one SVD of the concatenated frames: the nullity
    counts the numerically vanishing singular values, the deficiency is the
    codimension of the resulting column space.
    """
    _check_ambient(F, G)
    mat, _, _, _, r = _concat_svd(F, G)
    return PairReport(nullity=mat.shape[1] - r, deficiency=F.ambient_dim - r)


def pair_index(F: Subspace, G: Subspace) -> int:
    return pair_report(F, G).index


@dataclass(frozen=True)
class DualityReport:
    """Orthogonal-complement duality of a pair ``(F, G)``.

    ``meet_residual`` compares ``(F ∩ G)^⊥`` with ``F^⊥ + G^⊥`` and
    ``sum_residual`` compares ``(F + G)^⊥`` with ``F^⊥ ∩ G^⊥`` (projector
    distances, ``inf`` on a dimension mismatch).  ``pair`` and ``dual`` are the
    reports of ``(F, G)`` and ``(F^⊥, G^⊥)``.
    """

    meet_residual: float
    sum_residual: float
    pair: PairReport
    dual: PairReport

    @property
    def holds(self) -> bool:
        tol = 1e-6
        return (self.meet_residual <= tol and self.sum_residual <= tol
                and self.dual.nullity == self.pair.deficiency
                and self.dual.deficiency == self.pair.nullity)


def _dist(S, T):
    return S.distance(T) if S.dim == T.dim else float("inf")


def duality_report(F: Subspace, G: Subspace) -> DualityReport:
    """Check ``(F∩G)^⊥ = F^⊥+G^⊥``, ``(F+G)^⊥ = F^⊥∩G^⊥`` and the swapped counts."""
    _check_ambient(F, G)
    Fp, Gp = F.perp(), G.perp()
    return DualityReport(
        meet_residual=_dist(intersection(F, G).perp(), subspace_sum(Fp, Gp)),
        sum_residual=_dist(subspace_sum(F, G).perp(), intersection(Fp, Gp)),
        pair=pair_report(F, G),
        dual=pair_report(Fp, Gp),
    )


def _gamma_of(d_or_gamma):
    gamma = getattr(d_or_gamma, "gamma", d_or_gamma)
    return np.asarray(gamma, dtype=complex)


def omega_annihilator(B: Subspace, d) -> Subspace:
    """Annihilator of ``B`` for the form ``ω(x, y) = <x, γ y>``.

    Returns ``B^a = γ(B^⊥)``.  ``d`` is either a :class:`DiracData` or the
    matrix ``γ`` itself (useful for doubled systems).
    """
    gamma = _gamma_of(d)
    if gamma.shape[0] != B.ambient_dim:
        raise DimensionError("gamma does not act on the ambient space of B")
    # γ is unitary, so the image of an orthonormal frame stays orthonormal
    return Subspace(gamma @ B.perp().frame, B.rank_tol)


def omega(x, y, d):
    """Boundary form ``<x, γ y>`` (inner product conjugate-linear in ``x``)."""
    return np.vdot(x, _gamma_of(d) @ y)


def check_idempotent(P, tol=1e-8):
    """Raise :class:`ProjectionError` unless ``P @ P ≈ P``."""
    P = np.asarray(P, dtype=complex)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ProjectionError("projection must be a square matrix", {"shape": list(P.shape)})
    norm = np.linalg.norm(P, 2) if P.size else 0.0
    defect = float(np.linalg.norm(P @ P - P, 2)) if P.size else 0.0
    if defect > tol * (1.0 + norm) ** 2:
        raise ProjectionError("matrix is not idempotent", {"idempotency_defect": defect})
    return P


@dataclass(frozen=True)
class ReductionReport:
    """Outcome of :func:`reduce_by_projection`.

    Attributes
    ----------
    subspace : Subspace
        ``(I - P)(B)``.
    rhs : Subspace
        ``ker P ∩ (B + im P)``, computed independently.
    codim_in_kernel : int
        Codimension of ``(I - P)(B)`` in ``ker P``.
    codim_of_sum : int
        Codimension of ``B + im P`` in the ambient space.
    residual : float
        Projection distance between ``subspace`` and ``rhs``.
    """

    subspace: Subspace
    rhs: Subspace
    codim_in_kernel: int
    codim_of_sum: int
    residual: float

    @property
    def holds(self) -> bool:
        return (self.subspace.equals(self.rhs)
                and self.codim_in_kernel == self.codim_of_sum)


def reduce_by_projection(B: Subspace, P, check=True) -> ReductionReport:
    """Reduce ``B`` along an (oblique) projection ``P``.

    Computes ``(I - P)(B)`` together with ``ker P ∩ (B + im P)`` and the two
    codimensions that must coincide.  With ``check=True`` a mismatch raises
    :class:`VerificationError`.
    """
    P = check_idempotent(P)
    n = B.ambient_dim
    if P.shape[0] != n:
        raise DimensionError("projection does not act on the ambient space of B")
    tol = B.rank_tol
    # I - P and P are both measured against the size of the splitting
    scale = max(1.0, float(np.linalg.norm(P, 2)) if P.size else 0.0)
    lhs = apply(np.eye(n) - P, B, scale)
    kerP = kernel(P, tol, scale)
    both = subspace_sum(B, image(P, tol, scale))
    rhs = intersection(kerP, both)
    rep = ReductionReport(
        subspace=lhs, rhs=rhs,
        codim_in_kernel=kerP.dim - lhs.dim,
        codim_of_sum=n - both.dim,
        residual=lhs.distance(rhs) if lhs.dim == rhs.dim else float("inf"),
    )
    if check and not rep.holds:
        raise VerificationError("reduction identity failed",
                                {"dim_lhs": lhs.dim, "dim_rhs": rhs.dim,
                                 "codim_in_kernel": rep.codim_in_kernel,
                                 "codim_of_sum": rep.codim_of_sum})
    return rep


@dataclass(frozen=True)
class StabilityReport:
    """The three indices of the stability identity for projection pairs."""

    ind_B_imP: int
    ind_B_imQ: int
    ind_kerQ_imP: int

    @property
    def residual(self) -> int:
        return self.ind_B_imP - self.ind_B_imQ - self.ind_kerQ_imP

    def as_tuple(self):
        return self.ind_B_imP, self.ind_B_imQ, self.ind_kerQ_imP


def stability_shift(B: Subspace, P, Q, check=True) -> StabilityReport:
    """Compare ``ind(B, im P)`` with ``ind(B, im Q) + ind(ker Q, im P)``."""
    P = check_idempotent(P)
    Q = check_idempotent(Q)
    tol = B.rank_tol
    sp = max(1.0, float(np.linalg.norm(P, 2)) if P.size else 0.0)
    sq = max(1.0, float(np.linalg.norm(Q, 2)) if Q.size else 0.0)
    imP = image(P, tol, sp)
    rep = StabilityReport(
        ind_B_imP=pair_index(B, imP),
        ind_B_imQ=pair_index(B, image(Q, tol, sq)),
        ind_kerQ_imP=pair_index(kernel(Q, tol, sq), imP),
    )
    if check and rep.residual != 0:
        raise VerificationError("stability identity failed", {"indices": list(rep.as_tuple())})
    return rep


def random_subspace(n, k, rng, rank_tol=DEFAULT_RANK_TOL) -> Subspace:
    """Haar-like random ``k``-dimensional subspace of ``C^n``."""
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return span(g, rank_tol, ambient_dim=n)


def random_projection(n, rank, rng, oblique=True):
    """Random projection of the given rank; oblique by default.

    The oblique case is ``S Π S^{-1}`` with ``Π`` a random orthogonal
    projection and ``S = I + G/(2||G||)``, so ``cond(S) ≤ 3`` and the rank
    decisions downstream stay well separated.
    """
    x = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    q, _ = np.linalg.qr(x)
    Pi = q @ q.conj().T
    if not oblique:
        return Pi
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    S = np.eye(n) + G / (2 * np.linalg.norm(G, 2))
    return S @ Pi @ np.linalg.inv(S)
