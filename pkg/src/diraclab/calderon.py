"""Calderón spaces of eventually constant Dirac-Schrödinger paths.

For a path frozen beyond ``r`` the traces at ``t = 0`` of solutions of
``(D + V)σ = 0`` are ``σ(0) = Φ(r)^{-1} σ(r)``.  Square integrable solutions
are exactly those whose value at ``r`` lies in ``H_>(A(r))``, and extended
solutions additionally allow the constant kernel modes, so

    C_max = Φ(r)^{-1} H_>(A(r)),      C_ext = Φ(r)^{-1} H_≥(A(r)).

The default computation shoots backward from ``r`` with the nested frame
``[H_> | H_0]`` and re-orthonormalizes by QR.  Backward in time the
``H_>`` modes are the growing ones, so the shooting is stable where the
explicit inverse ``Φ(r)^{-1}`` would be badly conditioned.
"""

from __future__ import annotations

import csv
import io as _stdio
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GraphUnavailableError
from .evolution import CoefficientPath, default_resolution, fundamental_solution, integrate
from .spectral_core import (
    eigendecompose,
    relation_interval,
    spectral_projection,
    spectral_subspace,
    sobolev_weight,
    Interval,
)
from .subspace import (
    DEFAULT_RANK_TOL,
    Subspace,
    complement_within,
    intersection,
    span,
)


@dataclass(frozen=True, eq=False)
class CalderonPair:
    """``C_max ⊆ C_ext`` at ``t = 0`` with their orthogonal projections.

    ``stats`` records how the spaces were computed (method, steps and, when
    requested, the distance to a half-resolution recomputation).
    """

    c_max: Subspace
    c_ext: Subspace
    p_max: np.ndarray
    p_ext: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.c_ext.ambient_dim

    @property
    def gap(self):
        return self.c_ext.dim - self.c_max.dim

    def to_dict(self):
        from . import io as _io
        return {"c_max": self.c_max.to_dict(), "c_ext": self.c_ext.to_dict(),
                "p_max": _io.encode_matrix(self.p_max), "p_ext": _io.encode_matrix(self.p_ext),
                "stats": dict(self.stats)}

    @classmethod
    def from_subspaces(cls, c_max: Subspace, c_ext: Subspace, stats=None):
        return cls(c_max, c_ext, c_max.projector(), c_ext.projector(), dict(stats or {}))


def _tail_frames(path: CoefficientPath):
    dec = eigendecompose(path.A(path.r))
    pos = spectral_subspace(dec, ">", 0.0).frame
    ker = spectral_subspace(dec, "=", 0.0).frame
    return pos, ker


def _shoot(path, N, qr_every):
    pos, ker = _tail_frames(path)
    X0 = np.hstack([pos, ker])
    X, _ = integrate(path, path.r, 0.0, N, X0, qr_every=qr_every)
    Q, _ = np.linalg.qr(X)
    p = pos.shape[1]
    return Subspace(Q[:, :p]), Subspace(Q[:, :X0.shape[1]])


def _via_fundamental(path, N):
    pos, ker = _tail_frames(path)
    fs = fundamental_solution(path, N, rtol=None)
    inv_pos = np.linalg.solve(fs.Phi_r, pos)
    inv_ker = np.linalg.solve(fs.Phi_r, ker)
    c_max = span(inv_pos, ambient_dim=path.dim)
    c_ext = span(np.hstack([inv_pos, inv_ker]), ambient_dim=path.dim)
    return c_max, c_ext, fs.integrator_stats


def calderon_subspaces(path: CoefficientPath, method="shooting", resolution=None,
                       qr_every=4, estimate_error=False) -> CalderonPair:
    """Calderón spaces of ``path`` at ``t = 0``.

    Parameters
    ----------
    path : CoefficientPath
    method : {"shooting", "fundamental"}
        Backward QR shooting (default) or explicit ``Φ(r)^{-1}``.
    resolution : int, optional
        Number of RK4 steps on ``[0, r]``; see :func:`default_resolution`.
    estimate_error : bool
        Also compute the spaces at half resolution and record the largest
        projector difference as ``stats["halving_change"]``.
    """
    N = default_resolution(path) if resolution is None else int(resolution)
    if method == "shooting":
        c_max, c_ext = _shoot(path, N, qr_every)
        stats = {"method": "shooting", "steps": N}
    elif method == "fundamental":
        c_max, c_ext, istats = _via_fundamental(path, N)
        stats = {"method": "fundamental", "steps": N, "integrator": istats}
    else:
        raise ValueError(f"unknown method {method!r}")
    pair = CalderonPair.from_subspaces(c_max, c_ext, stats)
    if estimate_error:
        coarse = calderon_subspaces(path, method, max(2, N // 2), qr_every)
        pair.stats["halving_change"] = float(max(
            np.linalg.norm(pair.p_ext - coarse.p_ext, 2),
            np.linalg.norm(pair.p_max - coarse.p_max, 2)))
    return pair


def constant_pair(d, rank_tol=DEFAULT_RANK_TOL) -> CalderonPair:
    """Closed form for constant coefficients without potential: ``(H_>, H_≥)``."""
    dec = eigendecompose(d)
    return CalderonPair.from_subspaces(spectral_subspace(dec, ">", 0.0, rank_tol),
                                       spectral_subspace(dec, ">=", 0.0, rank_tol),
                                       {"method": "constant"})


def direct_sum_pair(p1: CalderonPair, p2: CalderonPair) -> CalderonPair:
    """Calderón pair of a decoupled direct sum, block order ``(1, 2)``."""
    from .subspace import direct_sum
    return CalderonPair.from_subspaces(direct_sum(p1.c_max, p2.c_max),
                                       direct_sum(p1.c_ext, p2.c_ext),
                                       {"method": "direct_sum"})


def duality_check(pair: CalderonPair, d) -> float:
    """``||p_max - γ*(I - p_ext)γ||``, which vanishes for exact Calderón spaces."""
    g = d.gamma if hasattr(d, "gamma") else np.asarray(d)
    n = g.shape[0]
    if pair.dim != n:
        raise DimensionError("pair and system dimensions differ")
    dual = g.conj().T @ (np.eye(n) - pair.p_ext) @ g
    return float(np.linalg.norm(pair.p_max - dual, 2))


def projection_defects(pair: CalderonPair) -> dict:
    """Idempotence and self-adjointness defects of both projections."""
    out = {}
    for name, P in (("p_max", pair.p_max), ("p_ext", pair.p_ext)):
        out[name] = float(max(np.linalg.norm(P @ P - P, 2), np.linalg.norm(P - P.conj().T, 2)))
    return out


# ---------------------------------------------------------------------------
# graph representation

@dataclass(frozen=True, eq=False)
class GraphData:
    """``C_ext = K_Λ ⊕ graph(T_Λ)`` with ``K_Λ = C_ext ∩ H_{≤Λ}``.

    ``t_lambda`` is stored as an ambient matrix vanishing on ``H_{≤Λ}`` and
    taking values in ``H_{≤Λ}``.  The graph is taken over the orthogonal
    complement of ``K_Λ`` inside ``C_ext``, which fixes ``T_Λ`` uniquely.
    """

    lam: float
    k_lambda: Subspace
    t_lambda: np.ndarray
    upper: Subspace
    lower: Subspace
    reconstruction_residual: float

    def to_dict(self):
        from . import io as _io
        return {"lambda": self.lam, "k_lambda": self.k_lambda.to_dict(),
                "t_lambda": _io.encode_matrix(self.t_lambda),
                "reconstruction_residual": self.reconstruction_residual}


def surjectivity_defect(pair: CalderonPair, d, lam, dec=None) -> int:
    """``dim H_{>Λ} - rank(Q_{>Λ}|C_ext)``; zero iff the graph form exists."""
    dec = eigendecompose(d) if dec is None else dec
    upper = spectral_subspace(dec, ">", lam)
    if upper.dim == 0:
        return 0
    M = upper.frame.conj().T @ pair.c_ext.frame
    if M.size == 0:
        return upper.dim
    s = np.linalg.svd(M, compute_uv=False)
    return upper.dim - int(np.count_nonzero(s > 1e-8))


def find_lambda0(pair: CalderonPair, d, dec=None) -> float:
    """Smallest admissible level among ``0`` and the positive eigenvalues.

    The restriction ``Q_{>Λ}: C_ext -> H_{>Λ}`` only changes at eigenvalues,
    and surjectivity at one level implies it at every larger level.
    """
    dec = eigendecompose(d) if dec is None else dec
    cands = [0.0] + [float(v) for v in dec.cluster_values if v > dec.cluster_tol]
    for lam in cands:
        if surjectivity_defect(pair, d, lam, dec) == 0:
            return lam
    return cands[-1]  # pragma: no cover - H_{>max} = 0 is always reached


def graph_representation(pair: CalderonPair, d, lam, dec=None) -> GraphData:
    """Split ``C_ext`` over the level ``Λ``.

    Raises
    ------
    GraphUnavailableError
        If ``Q_{>Λ}`` does not map ``C_ext`` onto ``H_{>Λ}``.
    """
    dec = eigendecompose(d) if dec is None else dec
    defect = surjectivity_defect(pair, d, lam, dec)
    if defect:
        raise GraphUnavailableError("graph representation unavailable",
                                    {"lambda": lam, "defect": defect})
    upper = spectral_subspace(dec, ">", lam)
    lower = spectral_subspace(dec, "<=", lam)
    K = intersection(pair.c_ext, lower)
    G = complement_within(K, pair.c_ext)
    n = pair.dim
    if upper.dim == 0:
        T = np.zeros((n, n), dtype=complex)
    else:
        Y = upper.projector() @ G.frame
        X = lower.projector() @ G.frame
        T = X @ np.linalg.pinv(Y, rcond=1e-10)
    graph = span(np.hstack([K.frame, upper.frame + T @ upper.frame]), ambient_dim=n)
    resid = float(np.linalg.norm(graph.projector() - pair.p_ext, 2))
    return GraphData(float(lam), K, T, upper, lower, resid)


def block_formula_projection(gd: GraphData) -> np.ndarray:
    """Orthogonal projection onto ``C_ext`` rebuilt from ``(K_Λ, T_Λ)``.

    In the coordinates ``H = H_{>Λ} ⊕ H_{≤Λ}`` the projection onto the graph
    of ``T`` is ``[[M, M T*], [T M, T M T*]]`` with ``M = (I + T*T)^{-1}``;
    the finite piece contributes the projection onto ``(I - P_G) K_Λ``.
    """
    U, L = gd.upper.frame, gd.lower.frame
    W = np.hstack([U, L])
    Tb = L.conj().T @ gd.t_lambda @ U
    m = U.shape[1]
    M = np.linalg.inv(np.eye(m) + Tb.conj().T @ Tb)
    block = np.block([[M, M @ Tb.conj().T], [Tb @ M, Tb @ M @ Tb.conj().T]])
    PG = W @ block @ W.conj().T
    n = PG.shape[0]
    rest = span((np.eye(n) - PG) @ gd.k_lambda.frame, ambient_dim=n)
    return PG + rest.projector()


# ---------------------------------------------------------------------------
# decay of the graph map

SCAN_COLUMNS = ("lambda", "norm_mid", "norm_far", "s")


@dataclass(frozen=True)
class DecayScan:
    """Rows of the scan and fitted log-log slopes.

    A slope is ``None`` when the corresponding norms vanish identically;
    ``status`` then says ``"identically zero"``.
    """

    rows: list
    slope_mid: dict
    slope_far: dict
    status: dict

    def to_csv(self) -> str:
        buf = _stdio.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCAN_COLUMNS)
        for row in self.rows:
            w.writerow([format(row[c], ".17g") for c in SCAN_COLUMNS])
        return buf.getvalue()

    def to_dict(self):
        return {"rows": self.rows, "slope_mid": {str(k): v for k, v in self.slope_mid.items()},
                "slope_far": {str(k): v for k, v in self.slope_far.items()},
                "status": {str(k): v for k, v in self.status.items()}}


def _fit_slope(lams, norms, zero_tol):
    norms = np.asarray(norms)
    if np.all(norms <= zero_tol):
        return None
    if np.any(norms <= zero_tol):
        raise ValueError("cannot fit a power law through exact zeros")
    return float(np.polyfit(np.log(lams), np.log(norms), 1)[0])


def decay_scan(pair: CalderonPair, d, lambdas, s_values=(0.0,), zero_tol=1e-13) -> DecayScan:
    """``||W_s Q T_Λ W_{-s}||`` for the middle and far parts of ``T_Λ``.

    ``norm_mid`` uses ``Q_{[-Λ,Λ]}`` and ``norm_far`` uses ``Q_{<-Λ}``; slopes
    are least-squares fits of ``log norm`` against ``log Λ`` per ``s``.

    Raises
    ------
    ValueError
        With fewer than four levels.
    """
    lambdas = sorted(float(x) for x in lambdas)
    if len(lambdas) < 4:
        raise ValueError("decay scan needs at least four levels", )
    dec = eigendecompose(d)
    rows = []
    for lam in lambdas:
        gd = graph_representation(pair, d, lam, dec)
        _, Qmid = spectral_projection(dec, Interval(-lam, lam, True, True))
        _, Qfar = spectral_projection(dec, relation_interval("<", -lam))
        for s in s_values:
            Ws, Wm = sobolev_weight(d, s, dec).weight, sobolev_weight(d, -s, dec).weight
            rows.append({"lambda": lam, "s": float(s),
                         "norm_mid": float(np.linalg.norm(Ws @ Qmid @ gd.t_lambda @ Wm, 2)),
                         "norm_far": float(np.linalg.norm(Ws @ Qfar @ gd.t_lambda @ Wm, 2))})
    slope_mid, slope_far, status = {}, {}, {}
    for s in s_values:
        sel = [r for r in rows if r["s"] == float(s)]
        lams = [r["lambda"] for r in sel]
        slope_mid[float(s)] = _fit_slope(lams, [r["norm_mid"] for r in sel], zero_tol)
        slope_far[float(s)] = _fit_slope(lams, [r["norm_far"] for r in sel], zero_tol)
        zero = slope_mid[float(s)] is None and slope_far[float(s)] is None
        status[float(s)] = "identically zero" if zero else "fitted"
    return DecayScan(rows, slope_mid, slope_far, status)


def high_mode_defect(pair: CalderonPair, d, lam, dec=None) -> float:
    """``||(p_ext - Q_>) Q_{|a|>Λ}||``, the desk-scale compactness probe."""
    dec = eigendecompose(d) if dec is None else dec
    _, Qp = spectral_projection(dec, relation_interval(">", 0.0))
    _, Qin = spectral_projection(dec, Interval(-lam, lam, True, True))
    high = np.eye(pair.dim) - Qin
    return float(np.linalg.norm((pair.p_ext - Qp) @ high, 2))
