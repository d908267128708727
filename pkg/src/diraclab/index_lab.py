"""Extended indices and integer-exact checks of the index formulas.

All indices are computed from subspace intersections.  For a boundary
condition ``B`` and the Calderón pair ``(C_max, C_ext)`` at ``t = 0``

    ker  D_{B,ext} ≅ B ∩ C_ext,      coker D_{B,ext} ≅ B^a ∩ C_max,

and every ``verify_*`` function returns integer residuals that vanish when
the corresponding formula holds.  The batch runners draw random systems and
boundary conditions with per-draw seeds spawned from one master seed by
:class:`numpy.random.SeedSequence`, so a draw can be replayed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import (
    BoundaryCondition,
    aps_condition,
    from_elliptic_data,
    from_projection,
    lagrangian_subspace,
    random_elliptic_data,
    random_hermitian_on,
    elliptic_dims,
    self_adjoint_from_lagrangian,
    transmission_condition,
)
from .calderon import CalderonPair, calderon_subspaces, direct_sum_pair
from .errors import DimensionError, InvarianceError, PathError, SymplecticObstructionError
from .evolution import CoefficientPath
from .spectral_core import (
    DiracData,
    anticommuting_part,
    chiral_index,
    eigendecompose,
    spectral_subspace,
    validate_dirac_data,
)
from .subspace import (
    Subspace,
    complement_within,
    intersection,
    omega_annihilator,
    pair_report,
    random_projection,
    random_subspace,
    span,
    zero,
)


def _space(B):
    return B.space if isinstance(B, BoundaryCondition) else B


@dataclass(frozen=True)
class IndexReport:
    """Kernel and cokernel dimensions plus per-formula residuals."""

    kernel_dim: int
    cokernel_dim: int
    method: str = "kernel-counting"
    residuals: dict = field(default_factory=dict)

    @property
    def index(self) -> int:
        return self.kernel_dim - self.cokernel_dim

    @property
    def ok(self) -> bool:
        return all(v == 0 for v in self.residuals.values())

    def with_residuals(self, **res) -> "IndexReport":
        return IndexReport(self.kernel_dim, self.cokernel_dim, self.method,
                           {**self.residuals, **res})

    def to_dict(self):
        return {"kernel_dim": self.kernel_dim, "cokernel_dim": self.cokernel_dim,
                "index": self.index, "method": self.method, "residuals": dict(self.residuals)}


def ext_index(B, pair: CalderonPair, d) -> IndexReport:
    """``dim(B ∩ C_ext) - dim(B^a ∩ C_max)``."""
    Bs = _space(B)
    if Bs.ambient_dim != pair.dim:
        raise DimensionError("boundary condition and Calderón pair live in different spaces")
    ker = intersection(Bs, pair.c_ext).dim
    coker = intersection(omega_annihilator(Bs, d), pair.c_max).dim
    return IndexReport(ker, coker, "kernel-counting")


def max_kernel_dim(B, pair: CalderonPair) -> int:
    """``dim(B ∩ C_max)``, the square integrable part of the kernel."""
    return intersection(_space(B), pair.c_max).dim


def verify_windgen(B, pair, d) -> int:
    """``ind D_{B,ext} - ind(B, C_ext)``."""
    return ext_index(B, pair, d).index - pair_report(_space(B), pair.c_ext).index


def _relation_index(d, pair, rel, lam):
    B = spectral_subspace(eigendecompose(d), rel, lam)
    return ext_index(B, pair, d).index


def agranovic_dynin(B, pair, d, lam=0.0) -> dict:
    """Residuals of the relative index formula at level ``Λ``.

    ``residual = ind D_{B,ext} - ind D_{≤Λ,ext} - ind(B, H_{>Λ})`` and
    ``elliptic_dims = ind(B, H_{>Λ}) - (dim F - dim E)`` for the elliptic data
    of ``B`` at ``Λ``.
    """
    dec = eigendecompose(d)
    Bs = _space(B)
    upper = spectral_subspace(dec, ">", lam)
    third = pair_report(Bs, upper).index
    lhs = ext_index(Bs, pair, d).index
    aps = ext_index(aps_condition(d, lam, True, dec), pair, d).index
    dim_F, dim_E = elliptic_dims(Bs, d, lam, dec)
    return {"residual": lhs - aps - third, "elliptic_dims": third - (dim_F - dim_E),
            "ind_B": lhs, "ind_aps": aps, "ind_B_upper": third, "dim_F": dim_F, "dim_E": dim_E}


def discontinuity(pair, d, lam) -> dict:
    """``ind D_{≤Λ,ext} - ind D_{<Λ,ext} - dim H_Λ``."""
    dec = eigendecompose(d)
    le = ext_index(aps_condition(d, lam, True, dec), pair, d).index
    lt = ext_index(aps_condition(d, lam, False, dec), pair, d).index
    jump = spectral_subspace(dec, "=", lam).dim
    return {"residual": le - lt - jump, "ind_le": le, "ind_lt": lt, "dim_eigenspace": jump}


def adjoint_sum(B, pair, d) -> dict:
    """``ind D_{B,ext} + ind D_{B^a,ext} - (dim C_ext - dim C_max)``."""
    Bs = _space(B)
    a = ext_index(Bs, pair, d).index
    b = ext_index(omega_annihilator(Bs, d), pair, d).index
    gap = pair.c_ext.dim - pair.c_max.dim
    return {"residual": a + b - gap, "ind_B": a, "ind_Ba": b, "gap": gap}


# ---------------------------------------------------------------------------
# cobordism

def cobordism_check(path: CoefficientPath, pair: CalderonPair = None) -> dict:
    """Chirality balance forced by an invertible tail.

    ``residual`` is ``chiral_index`` of the data at ``t = 0``.  The report also
    records whether ``C_ext = C_max`` and whether ``ker C_ext`` is a
    self-adjoint boundary condition, the two facts the balance rests on.

    Raises
    ------
    PathError
        If the path is not of Fredholm type (``ker A(r) ≠ 0``).
    """
    if not path.is_fredholm_type():
        raise PathError("cobordism check needs an invertible tail operator")
    pair = calderon_subspaces(path) if pair is None else pair
    K = pair.c_ext.perp()
    return {"residual": chiral_index(path.d),
            "ext_equals_max": bool(pair.c_ext.equals(pair.c_max)),
            "kernel_self_adjoint": bool(K.equals(omega_annihilator(K, path.d)))}


@dataclass(frozen=True)
class SearchReport:
    """Outcome of :func:`search_anticommuting_invertible`."""

    attempts: int
    successes: int
    rank_defects: list
    expected_defect: int

    @property
    def all_failed(self):
        return self.successes == 0


def search_anticommuting_invertible(gamma, attempts=10, rng=None, tol=1e-10) -> SearchReport:
    """Try to find an invertible Hermitian ``A`` anticommuting with ``γ``.

    Each attempt projects a random Hermitian matrix onto the anticommuting
    part ``(X + γXγ)/2``.  Such an ``A`` swaps the chirality spaces, so its
    rank is at most ``2 min(n_+, n_-)`` and every attempt fails with a rank
    defect of at least ``|n_+ - n_-|`` when the chirality is unbalanced.
    """
    rng = np.random.default_rng() if rng is None else rng
    gamma = np.asarray(gamma, dtype=complex)
    n = gamma.shape[0]
    w = np.linalg.eigvalsh(0.5 * (1j * gamma + (1j * gamma).conj().T))
    expected = abs(int(np.sum(w > 0)) - int(np.sum(w < 0)))
    defects, ok = [], 0
    for _ in range(attempts):
        X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        A = anticommuting_part(X, gamma)
        s = np.linalg.svd(A, compute_uv=False)
        rank = int(np.sum(s > tol * max(1.0, s[0])))
        defects.append(n - rank)
        ok += rank == n
    return SearchReport(attempts, ok, defects, expected)


# ---------------------------------------------------------------------------
# doubled systems

@dataclass(frozen=True, eq=False)
class DoubledSystem:
    """``(d_1, V_1) ⊕ (d_2, V_2)`` glued at ``t = 0``, block order ``(1, 2)``."""

    d: DiracData
    d1: DiracData
    d2: DiracData
    pair: CalderonPair
    pair1: CalderonPair
    pair2: CalderonPair


def _blockdiag(a, b):
    n1, n2 = a.shape[0], b.shape[0]
    out = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    out[:n1, :n1] = a
    out[n1:, n1:] = b
    return out


def check_gluing(d1, d2, tol=1e-8):
    """Require ``A_2(0) = -A_1(0)`` and ``γ_2 = -γ_1``."""
    if d1.dim != d2.dim:
        raise DimensionError("glued systems need equal dimensions")
    ra = np.linalg.norm(d1.a0 + d2.a0, 2)
    rg = np.linalg.norm(d1.gamma + d2.gamma, 2)
    scale = 1 + np.linalg.norm(d1.a0, 2)
    if ra > tol * scale or rg > tol:
        raise PathError("systems do not glue at t = 0", {"A_defect": float(ra), "gamma_defect": float(rg)})
    if (d1.alpha is None) != (d2.alpha is None):
        raise PathError("only one side carries a supersymmetry")
    if d1.alpha is not None and np.linalg.norm(d1.alpha - d2.alpha, 2) > tol:
        raise PathError("supersymmetries disagree at t = 0")


def doubled_system(path1, path2, pair1=None, pair2=None) -> DoubledSystem:
    """Glue two paths; the Calderón pair is the direct sum of the two pairs."""
    d1 = path1.d if isinstance(path1, CoefficientPath) else path1
    d2 = path2.d if isinstance(path2, CoefficientPath) else path2
    check_gluing(d1, d2)
    pair1 = calderon_subspaces(path1) if pair1 is None else pair1
    pair2 = calderon_subspaces(path2) if pair2 is None else pair2
    alpha = None if d1.alpha is None else _blockdiag(d1.alpha, d2.alpha)
    d = validate_dirac_data(_blockdiag(d1.a0, d2.a0), _blockdiag(d1.gamma, d2.gamma), alpha)
    return DoubledSystem(d, d1, d2, direct_sum_pair(pair1, pair2), pair1, pair2)


def bojarski_index(ds: DoubledSystem) -> dict:
    """``ind D_{B,ext}`` (transmission condition) ``- ind(C_{1,ext}, C_{2,ext})``."""
    B = transmission_condition(ds.d1.dim)
    lhs = ext_index(B, ds.pair, ds.d).index
    rhs = pair_report(ds.pair1.c_ext, ds.pair2.c_ext).index
    return {"residual": lhs - rhs, "ind_transmission": lhs, "ind_pair": rhs,
            "windgen": verify_windgen(B, ds.pair, ds.d)}


def splitting_check(ds: DoubledSystem, B1, B2=None) -> dict:
    """Residual of the splitting formula.

    ``ind D_B - ind D_{1,B_1} - ind D_{2,B_2} + ind(H_>, B_1) + ind(H_≤, B_2)``
    with ``H_>, H_≤`` taken for ``A = A_1(0)`` and ``B_2 = B_1^⊥`` by default.
    ``cancellation`` is ``ind(H_>, B_1) + ind(H_≤, B_1^⊥)``, which vanishes for
    every ``B_1``; when ``B_2 = B_1^⊥`` the formula reduces to two terms and
    ``two_term`` records that residual.
    """
    B1 = _space(B1)
    orth = B2 is None
    B2 = B1.perp() if orth else _space(B2)
    dec = eigendecompose(ds.d1)
    gt = spectral_subspace(dec, ">", 0.0)
    le = spectral_subspace(dec, "<=", 0.0)
    B = transmission_condition(ds.d1.dim)
    ind_B = ext_index(B, ds.pair, ds.d).index
    i1 = ext_index(B1, ds.pair1, ds.d1).index
    i2 = ext_index(B2, ds.pair2, ds.d2).index
    c1 = pair_report(gt, B1).index
    c2 = pair_report(le, B2).index
    out = {"residual": ind_B - i1 - i2 + c1 + c2, "ind_B": ind_B, "ind_1": i1, "ind_2": i2,
           "ind_upper_B1": c1, "ind_lower_B2": c2,
           "cancellation": c1 + pair_report(le, B1.perp()).index}
    if orth:
        out["two_term"] = ind_B - i1 - i2
    return out


# ---------------------------------------------------------------------------
# supersymmetry

def _chiral_frames(alpha):
    w, v = np.linalg.eigh(0.5 * (alpha + alpha.conj().T))
    return v[:, w > 0], v[:, w < 0]


def invariance_defect(S: Subspace, alpha) -> float:
    """``||(I - P_S) α P_S||``."""
    if S.dim == 0:
        return 0.0
    P = S.projector()
    return float(np.linalg.norm((np.eye(S.ambient_dim) - P) @ alpha @ P, 2))


def _restrict(S: Subspace, W) -> Subspace:
    """Coordinates of ``S ∩ im W`` in the orthonormal frame ``W``."""
    if W.shape[1] == 0:
        return zero(0)
    inter = intersection(S, Subspace(W))
    return span(W.conj().T @ inter.frame, ambient_dim=W.shape[1])


def susy_parts(S: Subspace, alpha):
    """``(S^+, S^-)`` in coordinates of the ``±1`` eigenspaces of ``α``."""
    Wp, Wm = _chiral_frames(alpha)
    return _restrict(S, Wp), _restrict(S, Wm)


def _require_invariant(S, alpha, what, tol=1e-7):
    defect = invariance_defect(S, alpha)
    if defect > tol:
        raise InvarianceError(f"{what} is not alpha-invariant", {"defect": defect})


def susy_indices(B, pair: CalderonPair, d, lam=0.0) -> dict:
    """Chiral indices of an ``α``-invariant boundary condition.

    ``plus = dim(B^+ ∩ C_ext^+) - dim((B^a)^- ∩ C_max^-)`` and ``minus``
    likewise with the roles of ``±`` swapped.  Residuals:

    * ``residual``: ``ind D_{B,ext} - plus - minus``;
    * ``windgen_plus``/``windgen_minus``: ``plus - ind(B^+, C_ext^+)``;
    * ``relative_plus``/``relative_minus``:
      ``plus - ind^+ D_{H_≤^+} - ind(B^+, H_>^+)`` at level ``Λ``;
    * ``adjoint_plus``/``adjoint_minus``:
      ``plus(B) + minus(B^a) - (dim C_ext^+ - dim C_max^+)`` and the ``-`` analogue.

    Raises
    ------
    InvarianceError
        If ``B`` is not ``α``-invariant, with the defect norm.
    """
    if d.alpha is None:
        raise InvarianceError("system carries no supersymmetry")
    alpha = d.alpha
    Bs = _space(B)
    _require_invariant(Bs, alpha, "boundary condition")
    Wp, Wm = _chiral_frames(alpha)
    dec = eigendecompose(d)

    def chiral(Bx):
        Ba = omega_annihilator(Bx, d)
        bp, bm = _restrict(Bx, Wp), _restrict(Bx, Wm)
        ap, am = _restrict(Ba, Wp), _restrict(Ba, Wm)
        ep, em = _restrict(pair.c_ext, Wp), _restrict(pair.c_ext, Wm)
        mp, mm = _restrict(pair.c_max, Wp), _restrict(pair.c_max, Wm)
        plus = IndexReport(intersection(bp, ep).dim, intersection(am, mm).dim)
        minus = IndexReport(intersection(bm, em).dim, intersection(ap, mp).dim)
        return plus, minus, (bp, bm, ep, em, mp, mm)

    plus, minus, (bp, bm, ep, em, mp, mm) = chiral(Bs)
    total = ext_index(Bs, pair, d).index
    le = spectral_subspace(dec, "<=", lam)
    gt = spectral_subspace(dec, ">", lam)
    aps_plus, aps_minus, _ = chiral(le)
    gtp, gtm = _restrict(gt, Wp), _restrict(gt, Wm)
    plus_a, minus_a, _ = chiral(omega_annihilator(Bs, d))
    res = {
        "residual": total - plus.index - minus.index,
        "windgen_plus": plus.index - pair_report(bp, ep).index,
        "windgen_minus": minus.index - pair_report(bm, em).index,
        "relative_plus": plus.index - aps_plus.index - pair_report(bp, gtp).index,
        "relative_minus": minus.index - aps_minus.index - pair_report(bm, gtm).index,
        "adjoint_plus": plus.index + minus_a.index - (ep.dim - mp.dim),
        "adjoint_minus": minus.index + plus_a.index - (em.dim - mm.dim),
    }
    return {"plus": plus, "minus": minus, "total": total, "residuals": res,
            "gap_plus": ep.dim - mp.dim, "gap_minus": em.dim - mm.dim}


def susy_doubled(ds: DoubledSystem, B1, B2=None) -> dict:
    """Supersymmetric transmission and splitting residuals (``+`` parts).

    ``bojarski_plus = ind^+ D_{B^+} - ind(C_{1,ext}^+, C_{2,ext}^+)`` and
    ``splitting_plus`` is the ``+`` analogue of :func:`splitting_check`.
    """
    if ds.d1.alpha is None:
        raise InvarianceError("doubled system carries no supersymmetry")
    alpha = ds.d1.alpha
    B1 = _space(B1)
    _require_invariant(B1, alpha, "B1")
    orth = B2 is None
    B2 = B1.perp() if orth else _space(B2)
    _require_invariant(B2, alpha, "B2")
    B = transmission_condition(ds.d1.dim)
    doubled = susy_indices(B, ds.pair, ds.d)
    first = susy_indices(B1, ds.pair1, ds.d1)
    second = susy_indices(B2, ds.pair2, ds.d2)
    Wp, _ = _chiral_frames(alpha)
    e1p = _restrict(ds.pair1.c_ext, Wp)
    e2p = _restrict(ds.pair2.c_ext, Wp)
    dec = eigendecompose(ds.d1)
    gtp = _restrict(spectral_subspace(dec, ">", 0.0), Wp)
    lep = _restrict(spectral_subspace(dec, "<=", 0.0), Wp)
    ip = doubled["plus"].index
    c1 = pair_report(gtp, _restrict(B1, Wp)).index
    c2 = pair_report(lep, _restrict(B2, Wp)).index
    out = {
        "bojarski_plus": ip - pair_report(e1p, e2p).index,
        "splitting_plus": ip - first["plus"].index - second["plus"].index + c1 + c2,
        "doubled_residual": doubled["residuals"]["residual"],
    }
    if orth:
        out["two_term_plus"] = ip - first["plus"].index - second["plus"].index
    return out


# ---------------------------------------------------------------------------
# random boundary conditions

CONDITION_KINDS = ("random", "aps", "elliptic", "lagrangian", "calderon", "projection")


def _levels(dec):
    vals = dec.cluster_values
    mids = list((vals[1:] + vals[:-1]) / 2) if vals.size > 1 else []
    return [0.0] + [float(v) for v in vals] + [float(m) for m in mids]


def random_condition(d, pair, rng, kind=None, dec=None) -> BoundaryCondition:
    """Random boundary condition of a given (or random) construction kind."""
    dec = eigendecompose(d) if dec is None else dec
    n = d.dim
    kind = CONDITION_KINDS[int(rng.integers(len(CONDITION_KINDS)))] if kind is None else kind
    if kind == "random":
        return BoundaryCondition(random_subspace(n, int(rng.integers(0, n + 1)), rng), "raw")
    if kind == "aps":
        levels = _levels(dec)
        lam = levels[int(rng.integers(len(levels)))]
        return aps_condition(d, lam, bool(rng.integers(2)), dec)
    if kind == "elliptic":
        lam = [0.0] + [float(v) for v in dec.cluster_values if v > 0]
        return from_elliptic_data(d, random_elliptic_data(d, lam[int(rng.integers(len(lam)))], rng,
                                                          dec=dec), dec)
    if kind == "lagrangian":
        try:
            L = lagrangian_subspace(d, rng, dec)
        except SymplecticObstructionError:
            return aps_condition(d, 0.0, True, dec)
        lt = spectral_subspace(dec, "<", 0.0)
        k = int(rng.integers(0, lt.dim + 1))
        F = span(lt.frame @ rng.standard_normal((lt.dim, k)), ambient_dim=n) if k else zero(n)
        W = span(np.hstack([complement_within(F, lt).frame, L.frame]), ambient_dim=n)
        return self_adjoint_from_lagrangian(d, L, F, random_hermitian_on(W, rng), dec)
    if kind == "calderon":
        choice = int(rng.integers(4))
        S = [pair.c_ext, pair.c_max, pair.c_ext.perp(), pair.c_max.perp()][choice]
        return BoundaryCondition(S, ["c_ext", "c_max", "ker p_ext", "ker p_max"][choice])
    if kind == "projection":
        P = random_projection(n, int(rng.integers(0, n + 1)), rng)
        return from_projection(P, d)[0]
    raise ValueError(f"unknown condition kind {kind!r}")


def random_invariant_condition(d, rng, dec=None) -> BoundaryCondition:
    """Random ``α``-invariant condition ``B^+ ⊕ B^-`` (or an APS condition)."""
    if d.alpha is None:
        raise InvarianceError("system carries no supersymmetry")
    if rng.integers(4) == 0:
        return aps_condition(d, 0.0, bool(rng.integers(2)), dec)
    Wp, Wm = _chiral_frames(d.alpha)
    parts = []
    for W in (Wp, Wm):
        k = int(rng.integers(0, W.shape[1] + 1))
        c = rng.standard_normal((W.shape[1], k)) + 1j * rng.standard_normal((W.shape[1], k))
        parts.append(W @ c)
    return BoundaryCondition(span(np.hstack(parts), ambient_dim=d.dim), "alpha-invariant")


# ---------------------------------------------------------------------------
# randomized batches

DEFAULT_DIMS = (2, 4, 6, 8, 12)
HORIZONS = (0.5, 1.0, 2.0)


def draw_seeds(seed, draws):
    """Per-draw seeds: ``SeedSequence(seed).spawn(draws)``, one generator each."""
    return np.random.SeedSequence(seed).spawn(draws)


@dataclass(frozen=True, eq=False)
class Draw:
    """One randomized system with its parameters and Calderón pair."""

    index: int
    path: CoefficientPath
    pair: CalderonPair
    rng: np.random.Generator
    params: dict


def make_draw(index, seq, dims=DEFAULT_DIMS, alpha=False, fredholm=False) -> Draw:
    """Build draw ``index`` from its seed sequence.

    The dimension cycles through ``dims``, the number of zero-mode pairs
    through ``0, 1, 2`` (capped at ``dim/2``), the potential is switched on for
    odd indices and the horizon cycles through ``0.5, 1, 2``.  With
    ``fredholm`` the tail operator is invertible.
    """
    from .examples import random_path
    rng = np.random.default_rng(seq)
    dim = int(dims[index % len(dims)])
    kp = min((index // len(dims)) % 3, dim // 2)
    coupled = bool(index % 2)
    r = HORIZONS[(index // 2) % len(HORIZONS)]
    path_seed = int(rng.integers(2 ** 63))
    path = random_path(dim, kp, coupled, r, path_seed, alpha=alpha,
                       tail_kernel_pairs=0 if fredholm else kp)
    params = {"index": index, "dim": dim, "kernel_pairs": kp, "coupled": coupled, "r": r,
              "path_seed": path_seed, "alpha": alpha}
    return Draw(index, path, calderon_subspaces(path), rng, params)


def _check_windgen(draw):
    B = random_condition(draw.path.d, draw.pair, draw.rng)
    return {"residual": verify_windgen(B, draw.pair, draw.path.d), "condition": B.label}


def _check_agranovic(draw):
    d = draw.path.d
    dec = eigendecompose(d)
    vals = dec.cluster_values
    levels = [0.0] + [float(m) for m in (vals[1:] + vals[:-1]) / 2 if m > 0]
    B = random_condition(d, draw.pair, draw.rng, dec=dec)
    out = {"formula": 0, "elliptic_dims": 0, "condition": B.label, "levels": levels}
    for lam in levels:
        r = agranovic_dynin(B, draw.pair, d, lam)
        out["formula"] += abs(r["residual"])
        out["elliptic_dims"] += abs(r["elliptic_dims"])
    out["residual"] = out["formula"] + out["elliptic_dims"]
    return out


def _check_discontinuity(draw):
    d = draw.path.d
    total = 0
    for lam in eigendecompose(d).cluster_values:
        total += abs(discontinuity(draw.pair, d, float(lam))["residual"])
    return {"residual": total}


def _check_adjoint(draw):
    B = random_condition(draw.path.d, draw.pair, draw.rng)
    r = adjoint_sum(B, draw.pair, draw.path.d)
    return {"residual": r["residual"], "condition": B.label}


def _check_cobordism(draw):
    return cobordism_check(draw.path, draw.pair)


def _doubled(draw, partner_seed_bits=63):
    from .examples import partner_path
    seed = int(draw.rng.integers(2 ** partner_seed_bits))
    coupled2 = bool(draw.rng.integers(2))
    p2 = partner_path(draw.path, seed, coupled2, tail_kernel_pairs=draw.params["kernel_pairs"])
    return doubled_system(draw.path, p2, draw.pair, calderon_subspaces(p2))


def _check_bojarski(draw):
    ds = _doubled(draw)
    r = bojarski_index(ds)
    B1 = random_condition(ds.d1, ds.pair1, draw.rng)
    sp = splitting_check(ds, B1)
    B2 = random_condition(ds.d2, ds.pair2, draw.rng)
    gen = splitting_check(ds, B1, B2)
    return {"residual": abs(r["residual"]) + abs(sp["residual"]) + abs(gen["residual"]),
            "bojarski": r["residual"], "windgen": r["windgen"],
            "splitting": gen["residual"], "two_term": sp["two_term"],
            "cancellation": sp["cancellation"]}


def _check_susy(draw):
    d = draw.path.d
    B = random_invariant_condition(d, draw.rng)
    r = susy_indices(B, draw.pair, d)
    ds = _doubled(draw)
    B1 = random_invariant_condition(ds.d1, draw.rng)
    dbl = susy_doubled(ds, B1)
    res = dict(r["residuals"])
    res.update(dbl)
    return {"residual": sum(abs(v) for v in res.values()), **res}


THEOREMS = {
    "windgen": (_check_windgen, {}),
    "agranovic-dynin": (_check_agranovic, {}),
    "discontinuity": (_check_discontinuity, {}),
    "adjoint-sum": (_check_adjoint, {}),
    "cobordism": (_check_cobordism, {"fredholm": True}),
    "bojarski": (_check_bojarski, {}),
    "splitting": (_check_bojarski, {}),
    "susy": (_check_susy, {"alpha": True}),
}


def run_batch(theorem, draws=200, seed=0, dims=DEFAULT_DIMS) -> dict:
    """Verify ``theorem`` over ``draws`` randomized systems.

    Returns a report with one entry per draw (its parameters and residuals)
    and ``max_abs_residual``; the run passes iff that maximum is 0 (and, for
    the cobordism check, every structural flag holds).
    """
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}; choose from {sorted(THEOREMS)}")
    check, opts = THEOREMS[theorem]
    results = []
    for i, seq in enumerate(draw_seeds(seed, draws)):
        draw = make_draw(i, seq, dims, **opts)
        res = check(draw)
        results.append({"params": draw.params, **res})
    worst = max((abs(r["residual"]) for r in results), default=0)
    flags_ok = all(r.get("ext_equals_max", True) and r.get("kernel_self_adjoint", True)
                   for r in results)
    return {"theorem": theorem, "draws": draws, "seed": seed, "dims": list(dims),
            "max_abs_residual": int(worst), "ok": bool(worst == 0 and flags_ok),
            "results": results}
