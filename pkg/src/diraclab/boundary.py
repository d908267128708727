"""Boundary conditions for Dirac systems on the half-line.

A boundary condition is a subspace ``B`` of ``H = C^n`` (the trace space at
``t = 0``).  In finite dimension every subspace is closed, regular and
elliptic; the flags are still reported so that results use the usual
vocabulary.  The module builds conditions from each of the standard data
forms (spectral cuts, elliptic data, Lagrangian data, transmission, and
projections) and computes their ``ω``-adjoints ``B^a = γ(B^⊥)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EllipticDataError, SymplecticObstructionError, VerificationError
from .spectral_core import chirality_split, eigendecompose, haar_unitary, spectral_subspace
from .subspace import (DEFAULT_RANK_TOL, Subspace, apply, check_idempotent, complement_within,
                       intersection, kernel, omega_annihilator, span, zero)
from . import io as _io


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """A subspace ``B ⊂ H`` together with a label recording how it was built."""

    space: Subspace
    label: str = "raw"

    @property
    def dim(self) -> int:
        return self.space.dim

    # Every finite-dimensional condition is closed, regular and elliptic.
    regular = True
    elliptic = True

    def __repr__(self):
        return f"BoundaryCondition({self.label}, dim={self.dim}, ambient={self.space.ambient_dim})"

    def to_dict(self):
        return {"label": self.label, "space": self.space.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(Subspace.from_dict(obj["space"]), obj.get("label", "raw"))


def _space(B):
    return B.space if isinstance(B, BoundaryCondition) else B


def _dec(d, dec=None):
    return eigendecompose(d) if dec is None else dec


def aps_condition(d, lam=0.0, closed=True, dec=None) -> BoundaryCondition:
    """Spectral condition ``B = H_{≤Λ}`` (``closed``) or ``H_{<Λ}``."""
    rel = "<=" if closed else "<"
    B = spectral_subspace(_dec(d, dec), rel, lam)
    return BoundaryCondition(B, f"APS({'<=' if closed else '<'}{lam:g})")


def adjoint_condition(B, d) -> BoundaryCondition:
    """``B^a = γ(B^⊥)``; an involution with ``dim B + dim B^a = n``."""
    label = B.label if isinstance(B, BoundaryCondition) else "raw"
    return BoundaryCondition(omega_annihilator(_space(B), d), f"adjoint({label})")


def is_self_adjoint(B, d) -> bool:
    return _space(B).equals(omega_annihilator(_space(B), d))


# ---------------------------------------------------------------------------
# elliptic data

@dataclass(frozen=True, eq=False)
class EllipticData:
    """Data ``(Λ, F, E, g)`` describing a boundary condition.

    With ``H_{≤Λ} = E ⊕ U`` and ``H_{<-Λ} = F ⊕ V`` (orthogonal sums), the
    condition is ``B = γF ⊕ {u + γ g u : u ∈ U}``.

    Attributes
    ----------
    lam : float
    F : Subspace
        Inside ``H_{<-Λ}``.
    E : Subspace
        Inside ``H_{≤Λ}``.
    g : ndarray, shape (n, n)
        Ambient matrix of the map ``U -> V``; it satisfies ``g = P_V g P_U``.
    """

    lam: float
    F: Subspace
    E: Subspace
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=complex)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    def to_dict(self):
        return {"lambda": self.lam, "F": self.F.to_dict(), "E": self.E.to_dict(),
                "g": _io.encode_matrix(self.g)}

    @classmethod
    def from_dict(cls, obj):
        return cls(float(obj["lambda"]), Subspace.from_dict(obj["F"]),
                   Subspace.from_dict(obj["E"]), _io.decode_matrix(obj["g"]))


def _inside(S: Subspace, T: Subspace, tol):
    if S.dim == 0:
        return True
    resid = S.frame - T.frame @ (T.frame.conj().T @ S.frame)
    return np.linalg.norm(resid, 2) <= tol


def elliptic_pieces(d, data: EllipticData, dec=None):
    """Return ``(H_{≤Λ}, H_{<-Λ}, U, V)`` for the data, checking containments."""
    dec = _dec(d, dec)
    le = spectral_subspace(dec, "<=", data.lam)
    lt = spectral_subspace(dec, "<", -data.lam)
    tol = 10 * max(data.F.rank_tol, data.E.rank_tol)
    if not _inside(data.F, lt, tol):
        raise EllipticDataError("F is not contained in H_{<-Λ}", {"lambda": data.lam})
    if not _inside(data.E, le, tol):
        raise EllipticDataError("E is not contained in H_{≤Λ}", {"lambda": data.lam})
    U = complement_within(data.E, le)
    V = complement_within(data.F, lt)
    return le, lt, U, V


def from_elliptic_data(d, data: EllipticData, dec=None) -> BoundaryCondition:
    """``B = γF ⊕ {u + γ g u : u ∈ U}`` with ``dim B = dim F + dim U``."""
    n = d.dim
    g = data.g
    if g.shape != (n, n):
        raise EllipticDataError("g must be an ambient n×n matrix", {"shape": list(g.shape)})
    _, _, U, V = elliptic_pieces(d, data, dec)
    PU, PV = U.projector(), V.projector()
    scale = 1.0 + np.linalg.norm(g, 2)
    if np.linalg.norm(g - PV @ g @ PU, 2) > 1e-8 * scale:
        raise EllipticDataError("g does not map U into V", {
            "defect": float(np.linalg.norm(g - PV @ g @ PU, 2))})
    gamma = d.gamma
    cols = [gamma @ data.F.frame, U.frame + gamma @ (g @ U.frame)]
    B = span(np.hstack(cols), data.F.rank_tol, ambient_dim=n)
    if B.dim != data.F.dim + U.dim:  # pragma: no cover - guaranteed by the geometry
        raise VerificationError("elliptic data produced a degenerate span",
                                {"dim": B.dim, "expected": data.F.dim + U.dim})
    return BoundaryCondition(B, f"elliptic-data({data.lam:g})")


def elliptic_data_of(B, d, lam=0.0, dec=None) -> EllipticData:
    """Recover ``(Λ, F, E, g)`` from a boundary condition.

    ``F = γ(B ∩ H_{>Λ})``, ``U = Q_{≤Λ}(B)``, ``E = U^⊥ ∩ H_{≤Λ}``, and ``g`` is
    read off the part of ``B`` orthogonal to ``γF``.
    """
    Bs = _space(B)
    dec = _dec(d, dec)
    gamma = d.gamma
    gt = spectral_subspace(dec, ">", lam)
    le = spectral_subspace(dec, "<=", lam)
    Qle = le.projector()
    tol = Bs.rank_tol
    top = intersection(Bs, gt)
    F = Subspace(gamma @ top.frame, tol)  # γ² = -I, so γ(γF) = F
    U = apply(Qle, Bs)
    E = complement_within(U, le)
    G = complement_within(top, Bs)
    X = Qle @ G.frame
    Y = G.frame - X
    g = -gamma @ Y @ np.linalg.pinv(X, rcond=tol) if G.dim else np.zeros((d.dim, d.dim))
    return EllipticData(float(lam), F, E, g)


def elliptic_adjoint_space(d, data: EllipticData, dec=None) -> Subspace:
    """``γE ⊕ {v + γ g* v : v ∈ V}``, built without taking orthogonal complements of B."""
    _, _, _, V = elliptic_pieces(d, data, dec)
    gamma = d.gamma
    gs = data.g.conj().T
    return span(np.hstack([gamma @ data.E.frame, V.frame + gamma @ (gs @ V.frame)]),
                data.E.rank_tol, ambient_dim=d.dim)


def elliptic_dims(B, d, lam=0.0, dec=None):
    """``(dim F, dim E)`` of the elliptic data of ``B`` at level ``Λ``."""
    data = elliptic_data_of(B, d, lam, dec)
    return data.F.dim, data.E.dim


def random_elliptic_data(d, lam, rng, dim_F=None, dim_E=None, dec=None) -> EllipticData:
    """Random elliptic data at level ``Λ`` with the requested piece dimensions."""
    dec = _dec(d, dec)
    le = spectral_subspace(dec, "<=", lam)
    lt = spectral_subspace(dec, "<", -lam)
    dim_F = int(rng.integers(0, lt.dim + 1)) if dim_F is None else dim_F
    dim_E = int(rng.integers(0, le.dim + 1)) if dim_E is None else dim_E
    if dim_F > lt.dim or dim_E > le.dim:
        raise EllipticDataError("requested dimensions exceed the spectral pieces",
                                {"dim_F": dim_F, "dim_E": dim_E, "lt": lt.dim, "le": le.dim})

    def sub(T, k):
        c = rng.standard_normal((T.dim, k)) + 1j * rng.standard_normal((T.dim, k))
        return span(T.frame @ c, ambient_dim=d.dim) if k else zero(d.dim)

    F, E = sub(lt, dim_F), sub(le, dim_E)
    U, V = complement_within(E, le), complement_within(F, lt)
    core = rng.standard_normal((V.dim, U.dim)) + 1j * rng.standard_normal((V.dim, U.dim))
    g = V.frame @ core @ U.frame.conj().T
    return EllipticData(float(lam), F, E, g)


# ---------------------------------------------------------------------------
# self-adjoint conditions

def _lagrangian_defects(d, L: Subspace, H0: Subspace):
    gamma = d.gamma
    tol = 10 * max(L.rank_tol, H0.rank_tol)
    inside = _inside(L, H0, tol)
    gL = gamma @ L.frame
    ortho = float(np.linalg.norm(L.frame.conj().T @ gL, 2)) if L.dim else 0.0
    filling = 2 * L.dim == H0.dim
    return inside, ortho, filling


def is_lagrangian(d, L: Subspace, dec=None) -> bool:
    """``L ⊂ ker A``, ``L ⊥ γL`` and ``L ⊕ γL = ker A``."""
    H0 = spectral_subspace(_dec(d, dec), "=", 0.0)
    inside, ortho, filling = _lagrangian_defects(d, L, H0)
    return inside and filling and ortho <= 10 * L.rank_tol


def lagrangian_subspace(d, rng=None, dec=None) -> Subspace:
    """A Lagrangian subspace of ``(ker A, ω)``.

    It exists iff ``iγ`` has balanced ± eigenspaces on ``ker A``, which is
    equivalent to ``chiral_index(d) = 0``.  The construction is the graph
    ``{x + W x : x ∈ H_0^+}`` of a unitary ``W : H_0^+ -> H_0^-`` (random when
    ``rng`` is given, otherwise the one determined by the eigenframes).
    """
    dec = _dec(d, dec)
    H0 = spectral_subspace(dec, "=", 0.0)
    # iγ restricted to ker A
    h = H0.frame.conj().T @ (1j * d.gamma) @ H0.frame
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    plus = H0.frame @ v[:, w > 0]
    minus = H0.frame @ v[:, w <= 0]
    if plus.shape[1] != minus.shape[1]:
        raise SymplecticObstructionError("Hermitian symplectic obstruction", {
            "dim_kernel_plus": plus.shape[1], "dim_kernel_minus": minus.shape[1]})
    k = plus.shape[1]
    if k == 0:
        return zero(d.dim)
    if rng is None:
        W = np.eye(k)
    else:
        W = haar_unitary(k, rng)
    return span(plus + minus @ W, ambient_dim=d.dim)


def self_adjoint_from_lagrangian(d, L: Subspace, F: Subspace = None, g=None,
                                 dec=None) -> BoundaryCondition:
    """Self-adjoint condition ``B = γF ⊕ {w + γ g w : w ∈ V ⊕ L}``.

    Parameters
    ----------
    d : DiracData
    L : Subspace
        Lagrangian subspace of ``ker A``.
    F : Subspace, optional
        Subspace of ``H_<``; ``V`` is its orthogonal complement in ``H_<``.
    g : ndarray, optional
        Hermitian ambient matrix supported on ``W = V ⊕ L`` (``g = P_W g P_W``).

    Raises
    ------
    SymplecticObstructionError
        If ``L`` is not Lagrangian (message "Hermitian symplectic obstruction").
    """
    n = d.dim
    dec = _dec(d, dec)
    H0 = spectral_subspace(dec, "=", 0.0)
    inside, ortho, filling = _lagrangian_defects(d, L, H0)
    if not (inside and filling and ortho <= 10 * L.rank_tol):
        raise SymplecticObstructionError("Hermitian symplectic obstruction", {
            "inside_kernel": bool(inside), "orthogonality_defect": ortho,
            "dim_L": L.dim, "dim_kernel": H0.dim,
            "chiral_index": chirality_index_of_kernel(d, H0)})
    lt = spectral_subspace(dec, "<", 0.0)
    F = zero(n) if F is None else F
    if not _inside(F, lt, 10 * F.rank_tol):
        raise EllipticDataError("F is not contained in H_<")
    V = complement_within(F, lt)
    W = span(np.hstack([V.frame, L.frame]), ambient_dim=n)
    if g is None:
        g = np.zeros((n, n), dtype=complex)
    g = np.asarray(g, dtype=complex)
    if g.shape != (n, n):
        raise DimensionError("g must be an ambient n×n matrix", {"shape": list(g.shape)})
    PW = W.projector()
    scale = 1.0 + np.linalg.norm(g, 2)
    if np.linalg.norm(g - g.conj().T, 2) > 1e-8 * scale:
        raise EllipticDataError("g is not Hermitian")
    if np.linalg.norm(g - PW @ g @ PW, 2) > 1e-8 * scale:
        raise EllipticDataError("g is not supported on V ⊕ L")
    gamma = d.gamma
    B = span(np.hstack([gamma @ F.frame, W.frame + gamma @ (g @ W.frame)]), ambient_dim=n)
    if not B.equals(omega_annihilator(B, d)):  # pragma: no cover - theorem
        raise VerificationError("constructed condition is not self-adjoint")
    return BoundaryCondition(B, "Lagrangian")


def chirality_index_of_kernel(d, H0=None) -> int:
    """``dim(H_0 ∩ H⁺) - dim(H_0 ∩ H⁻)`` which equals the chiral index."""
    if H0 is None:
        H0 = spectral_subspace(eigendecompose(d), "=", 0.0)
    hp, hm = chirality_split(d)
    return intersection(H0, hp).dim - intersection(H0, hm).dim


def random_hermitian_on(S: Subspace, rng, scale=1.0):
    """Random Hermitian ambient matrix supported on ``S``."""
    k = S.dim
    X = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    H = 0.5 * scale * (X + X.conj().T)
    return S.frame @ H @ S.frame.conj().T


# ---------------------------------------------------------------------------
# transmission and projection conditions

def transmission_condition(dim) -> BoundaryCondition:
    """Diagonal ``{(x, x)} ⊂ H ⊕ H``."""
    eye = np.eye(dim, dtype=complex)
    return BoundaryCondition(Subspace(np.vstack([eye, eye]) / np.sqrt(2.0)), "transmission")


def from_projection(P, d):
    """Condition ``B_P = ker P`` and the projection ``P_γ = γ*(I - P*)γ``.

    Also checks that ``(B_P)^a = ker P_γ``.

    Returns
    -------
    (BoundaryCondition, ndarray)
    """
    P = check_idempotent(P)
    n = d.dim
    if P.shape != (n, n):
        raise DimensionError("projection does not act on H", {"shape": list(P.shape)})
    gamma = d.gamma
    scale = max(1.0, float(np.linalg.norm(P, 2)))
    B = kernel(P, DEFAULT_RANK_TOL, scale)
    Pg = gamma.conj().T @ (np.eye(n) - P.conj().T) @ gamma
    if not omega_annihilator(B, d).equals(kernel(Pg, DEFAULT_RANK_TOL, scale)):  # pragma: no cover
        raise VerificationError("adjoint of a projection condition mismatch")
    return BoundaryCondition(B, "projection"), Pg
