"""Worked hyperbolic examples and parameterized path families.

The hyperbolic systems are infinite direct sums over Fourier modes ``k``;
here they are truncated at ``|k| <= K`` and every count is reported as a
function of ``K``.  The ``μ``-model lives on ``[1, ∞)`` and is handled
analytically.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import exp1

from .calderon import calderon_subspaces, direct_sum_pair
from .evolution import (
    BlockDiag,
    CoefficientPath,
    PiecewiseLinear,
    ScaledMatrix,
    SumOf,
    constant_matrix,
    default_resolution,
    integrate,
    validate_path,
)
from .spectral_core import (
    anticommuting_part,
    eigendecompose,
    normal_form_gamma,
    random_gamma_unitary,
    spectral_subspace,
    validate_dirac_data,
)
from .subspace import intersection

J_PRIME = np.array([[0, 1j], [-1j, 0]])


def _block_gamma(blocks, size):
    g = normal_form_gamma(size)
    n = blocks * size
    out = np.zeros((n, n), dtype=complex)
    for b in range(blocks):
        out[b * size:(b + 1) * size, b * size:(b + 1) * size] = g
    return out


def _exp_decay(t):
    return np.exp(-np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# even model

def even_block(k, r):
    """4-dimensional block ``A_t(k) = diag(B_t(k), -B_t(k))``, frozen at ``r``."""
    base = np.diag([1, 1, -1, -1]).astype(complex)
    J = np.zeros((4, 4), dtype=complex)
    J[:2, :2] = k * J_PRIME
    J[2:, 2:] = -k * J_PRIME
    A = SumOf(constant_matrix(base), ScaledMatrix(_exp_decay, J))
    d = validate_dirac_data(base + J, normal_form_gamma(4))
    lip = float(abs(k))
    return CoefficientPath(d, float(r), A, None, lip, f"even-block k={k}", {"k": k})


def even_solution(k, t):
    """Exact solution ``(τ_k(t), 0)`` with ``τ_k = e^{-t + k(1-e^{-t})}(1, i)``.

    Solves ``τ' + B_t(k) τ = 0``; for ``k <= -2`` the mirrored family along
    ``(1, -i)`` is returned instead.
    """
    t = np.asarray(t, dtype=float)
    if k >= 0:
        scal = np.exp(-t + k * (1 - np.exp(-t)))
        v = np.array([1, 1j, 0, 0])
    else:
        scal = np.exp(-t - k * (1 - np.exp(-t)))
        v = np.array([1, -1j, 0, 0])
    return np.multiply.outer(scal, v)


def hyperbolic_even_model(K, r=None, check_resolution=None):
    """Truncated even hyperbolic model with a per-mode report.

    Parameters
    ----------
    K : int
        Truncation ``|k| <= K`` (``K >= 2``).
    r : float, optional
        Horizon at which the coefficients are frozen; default ``ln K + 2`` so
        that every ``B_r(k)`` is positive definite.

    Returns
    -------
    (CoefficientPath, dict)
        The full path (dimension ``4(2K + 1)``) and the report.  ``count`` is
        the number of modes ``2 <= k <= K`` whose exact solution is decaying
        with initial value in the negative spectral subspace of ``A_0`` and
        reproduced by the integrator; ``mirrored_count`` does the same for
        ``-K <= k <= -2``; ``calderon_count`` is ``dim(C_max ∩ H_<(A_0))``
        for the truncated path.
    """
    K = int(K)
    if K < 2:
        raise ValueError("K must be at least 2")
    r = math.log(K) + 2.0 if r is None else float(r)
    ks = list(range(-K, K + 1))
    blocks = [even_block(k, r) for k in ks]
    A = BlockDiag(*[b.A_of_t for b in blocks], sizes=[4] * len(ks))
    gamma = _block_gamma(len(ks), 4)
    d = validate_dirac_data(A(0.0), gamma)
    path = CoefficientPath(d, r, A, None, float(K), f"hyperbolic-even K={K}", {"K": K, "r": r})
    modes = []
    for k, blk in zip(ks, blocks):
        entry = {"k": k}
        if abs(k) >= 2:
            x0 = even_solution(k, 0.0)
            a0 = blk.d.a0
            eig = float(np.real(np.vdot(x0, a0 @ x0) / np.vdot(x0, x0)))
            eig_resid = float(np.linalg.norm(a0 @ x0 - eig * x0))
            N = check_resolution or default_resolution(blk)
            X, _ = integrate(blk, 0.0, r, N, x0[:, None])
            exact = even_solution(k, r)
            err = float(np.linalg.norm(X[:, 0] - exact) / np.linalg.norm(exact))
            decaying = True  # e^{-t} times a bounded factor
            entry.update({"eigenvalue_at_0": eig, "eigen_residual": eig_resid,
                          "integration_error": err, "decaying": decaying,
                          "negative": eig < 0,
                          "counted": bool(eig < 0 and err < 1e-8 and eig_resid < 1e-12)})
        modes.append(entry)
    count = sum(1 for m in modes if m.get("counted") and m["k"] >= 2)
    mirrored = sum(1 for m in modes if m.get("counted") and m["k"] <= -2)
    pair = block_pair([calderon_subspaces(b) for b in blocks])
    neg = spectral_subspace(eigendecompose(d), "<", 0.0)
    report = {"K": K, "r": r, "count": count, "mirrored_count": mirrored,
              "calderon_count": intersection(pair.c_max, neg).dim, "modes": modes}
    return path, report


def block_pair(pairs):
    """Calderón pair of a block-diagonal path from its blocks, in block order."""
    out = pairs[0]
    for p in pairs[1:]:
        out = direct_sum_pair(out, p)
    return out


# ---------------------------------------------------------------------------
# odd model

def odd_block(k, r):
    """2-dimensional block ``A_t(k) = diag(k e^{-t}, -k e^{-t})``, frozen at ``r``."""
    D = np.diag([k, -k]).astype(complex)
    A = ScaledMatrix(_exp_decay, D)
    d = validate_dirac_data(D, normal_form_gamma(2))
    return CoefficientPath(d, float(r), A, None, float(abs(k)), f"odd-block k={k}", {"k": k})


def odd_solution(k, t):
    """``σ_k(t) = (0, e^{-k e^{-t}})``."""
    t = np.asarray(t, dtype=float)
    return np.multiply.outer(np.exp(-k * np.exp(-t)), np.array([0, 1], dtype=complex))


def odd_energy(k, T):
    """Exact ``∫_0^T |σ_k|²``: ``E1(2k e^{-T}) - E1(2k)`` (and ``T`` for ``k = 0``)."""
    if k == 0:
        return float(T)
    return float(exp1(2 * k * math.exp(-T)) - exp1(2 * k))


def hyperbolic_odd_model(K, T=(10.0, 20.0, 40.0, 80.0), check_horizon=10.0, fit_k=1):
    """Truncated odd hyperbolic model.

    For each ``0 <= k <= K`` the exact solution is integrated on
    ``[0, check_horizon]``, its boundedness and its initial spectral position
    are recorded, and ``I(T) = ∫_0^T |σ_k|²`` is evaluated in closed form.

    The growth fit for mode ``fit_k`` reports the least-squares slope of
    ``I(T)`` against ``T`` (``growth_slope``; linear growth means slope 1)
    and, for reference, the log-log slope (``loglog_slope``).

    Returns
    -------
    (CoefficientPath, dict)
    """
    K = int(K)
    Ts = np.asarray(T, dtype=float)
    ks = list(range(-K, K + 1))
    blocks = [odd_block(k, check_horizon) for k in ks]
    A = BlockDiag(*[b.A_of_t for b in blocks], sizes=[2] * len(ks))
    d = validate_dirac_data(A(0.0), _block_gamma(len(ks), 2))
    path = CoefficientPath(d, float(check_horizon), A, None, float(K),
                           f"hyperbolic-odd K={K}", {"K": K})
    modes = []
    for k, blk in zip(ks, blocks):
        if k < 0:
            continue
        x0 = odd_solution(k, 0.0)
        N = default_resolution(blk)
        X, stored = integrate(blk, 0.0, check_horizon, N, x0[:, None],
                              store_every=max(1, N // 64))
        ts = np.array([t for t, _ in stored])
        num = np.array([S[:, 0] for _, S in stored])
        exact = odd_solution(k, ts)
        err = float(np.max(np.linalg.norm(num - exact, axis=1)))
        a0 = blk.d.a0
        dec = eigendecompose(a0)
        Qnn = spectral_subspace(dec, ">=", 0.0).projector()
        modes.append({
            "k": k,
            "initial_value": x0,
            "integration_error": err,
            "bounded": bool(np.max(np.abs(exact)) <= 1.0),
            "nonnegative_part_at_0": float(np.linalg.norm(Qnn @ x0)) if k >= 1 else None,
            "in_kernel": bool(k == 0),
            "energy": [odd_energy(k, t) for t in Ts],
        })
    I = np.array([odd_energy(fit_k, t) for t in Ts])
    growth = float(np.polyfit(Ts, I, 1)[0])
    loglog = float(np.polyfit(np.log(Ts), np.log(I), 1)[0])
    report = {"K": K, "T": Ts.tolist(), "fit_k": fit_k, "growth_slope": growth,
              "loglog_slope": loglog, "modes": modes}
    return path, report


# ---------------------------------------------------------------------------
# μ-model

def mu_model(mu, T=(10.0, 100.0, 1000.0)):
    """Closed-form report for the system on ``[1, ∞)`` with ``μ/t`` coefficients.

    Solutions are ``(a t^{-μ}, b t^{μ})``.  ``t^{-μ}`` is square integrable
    iff ``μ > 1/2`` and ``t^{μ}`` iff ``μ < -1/2``.  For ``|μ| > 1/2`` the
    extended and maximal Calderón spaces coincide with the span of the
    square integrable branch; ``argument`` names why (``"hardy"`` for
    ``|μ| > 1`` through the ``∫|σ/t|²`` bound, ``"refined"`` otherwise).
    For ``μ = 0`` both branches are constant: ``C_max = 0`` and
    ``C_ext = C²``.  Other values leave ``C_ext`` undetermined here.
    """
    mu = float(mu)

    def branch(p):
        # t^p on [1, ∞): L² iff 2p < -1
        in_l2 = 2 * p < -1
        return {"exponent": p, "in_L2": bool(in_l2),
                "norm_sq": 1.0 / (-2 * p - 1) if in_l2 else math.inf}

    minus = branch(-mu)
    plus = branch(mu)
    c_max = []
    if minus["in_L2"]:
        c_max.append([1, 0])
    if plus["in_L2"]:
        c_max.append([0, 1])
    if abs(mu) > 0.5:
        c_ext, argument = list(c_max), "hardy" if abs(mu) > 1 else "refined"
    elif mu == 0:
        c_ext, argument = [[1, 0], [0, 1]], "constant solutions"
    else:
        c_ext, argument = None, "undetermined"
    # non-L² branch against the weight 1/t²: ∫_1^T t^{2p-2}
    def partial(p, Tv):
        e = 2 * p - 1
        return math.log(Tv) if e == 0 else (Tv ** e - 1) / e
    grow = (plus if abs(mu) > 0 and mu > 0 else minus)["exponent"]
    return {
        "mu": mu,
        "branch_t_minus_mu": minus,
        "branch_t_mu": plus,
        "c_max": c_max,
        "dim_c_max": len(c_max),
        "c_ext": c_ext,
        "dim_c_ext": None if c_ext is None else len(c_ext),
        "argument": argument,
        "weighted_partial_integrals": {"T": list(T), "values": [partial(grow, Tv) for Tv in T]},
    }


# ---------------------------------------------------------------------------
# families

def neighbor_coupling(K):
    """Tridiagonal ``K x K`` matrix with ones next to the diagonal."""
    return np.eye(K, k=1) + np.eye(K, k=-1)


def cylinder_family(K, coupling=0.5, r=1.0):
    """Truncated half-cylinder over a circle with a banded coupling.

    ``A = diag(1..K, -1..-K)`` with ``γ`` in normal form and
    ``V(t) = coupling (1 - t/r) diag(N, N)`` on ``[0, r]``, ``N`` the nearest
    neighbour matrix.  ``γV`` couples the positive mode ``k`` with the
    negative modes ``k ± 1``.
    """
    K = int(K)
    B = np.arange(1, K + 1, dtype=float)
    A0 = np.diag(np.concatenate([B, -B])).astype(complex)
    d = validate_dirac_data(A0, normal_form_gamma(2 * K))
    Nb = neighbor_coupling(K)
    V0 = np.zeros((2 * K, 2 * K), dtype=complex)
    V0[:K, :K] = Nb
    V0[K:, K:] = Nb
    V = PiecewiseLinear([0.0, float(r)], np.array([coupling * V0, 0 * V0])) if coupling else None
    return CoefficientPath(d, float(r), constant_matrix(A0), V, 0.0,
                           f"cylinder K={K}", {"K": K, "coupling": coupling, "r": r})


def coupled_two_dim_path(a=1.0, v=0.5, r=1.0):
    """``A = diag(a, -a)`` with ``V = diag(v, -v)`` on ``[0, r]``."""
    A0 = np.diag([a, -a]).astype(complex)
    d = validate_dirac_data(A0, normal_form_gamma(2))
    V0 = np.diag([v, -v]).astype(complex)
    return CoefficientPath(d, float(r), constant_matrix(A0), PiecewiseLinear([0.0], V0[None]),
                           0.0, "coupled-2d", {"a": a, "v": v, "r": r})


def _hermitian(rng, m, scale=1.0):
    X = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * 0.5 * (X + X.conj().T)


def _half_operator(rng, m, kernel):
    """Hermitian ``m x m`` matrix with ``kernel`` zero eigenvalues and gap ≥ 0.2."""
    W = np.linalg.qr(rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))[0]
    vals = rng.uniform(0.2, 3.0, size=m) * rng.choice([-1.0, 1.0], size=m)
    vals[:kernel] = 0.0
    return (W * vals) @ W.conj().T


def random_path(dim, kernel_pairs=0, coupled=True, r=1.0, seed=0, alpha=False,
                tail_kernel_pairs=None, strength=0.5):
    """Random eventually constant path in block normal form.

    ``A(t) = U diag(B(t), -B(t)) U*`` with ``B`` piecewise linear through
    ``B_0, B_0 + Δ, B_r`` at ``t = 0, r/2, r``; ``B_0`` has ``kernel_pairs``
    and ``B_r`` has ``tail_kernel_pairs`` zero eigenvalues (default: same).
    Without ``alpha`` a generic term anticommuting with ``γ`` is added at
    ``r/2`` and ``V`` is a random Hermitian matrix; with ``alpha`` the
    involution ``α = U diag(I, -I) U*`` is attached and ``V`` is taken of the
    form ``U [[0, W], [W*, 0]] U*`` so that it anticommutes with ``α``.  The
    potential follows the profile ``1 -> 2 -> 0`` on the same knots.
    """
    if dim <= 0 or dim % 2:
        raise ValueError("dim must be a positive even integer")
    rng = np.random.default_rng(seed)
    m = dim // 2
    U = random_gamma_unitary(dim, rng)
    B0 = _half_operator(rng, m, kernel_pairs)
    return _block_path(rng, U, B0, normal_form_gamma(dim), coupled, r, alpha,
                       kernel_pairs if tail_kernel_pairs is None else tail_kernel_pairs,
                       strength, {"dim": dim, "kernel_pairs": kernel_pairs, "coupled": coupled,
                                  "r": r, "seed": seed, "alpha": alpha})


def partner_path(path, seed=0, coupled=True, r=None, tail_kernel_pairs=0, strength=0.5):
    """Random path glued to ``path`` at ``t = 0``: ``A_2(0) = -A_1(0)``, ``γ_2 = -γ_1``.

    ``path`` must come from :func:`random_path` (its unitary frame is reused,
    so a supersymmetry of ``path`` is also one of the partner).
    """
    meta = path.meta
    if "frame" not in meta:
        raise ValueError("partner_path needs a path built by random_path")
    rng = np.random.default_rng(seed)
    U = meta["frame"]
    B0 = -meta["half_table"][0]
    r = meta["r"] if r is None else r
    return _block_path(rng, U, B0, -path.gamma, coupled, r, path.d.alpha is not None,
                       tail_kernel_pairs, strength,
                       {"partner_of": path.name, "r": r, "seed": seed, "coupled": coupled,
                        "alpha": path.d.alpha is not None, "dim": path.dim})


def _block_path(rng, U, B0, gamma, coupled, r, alpha, tail_kernel_pairs, strength, meta):
    dim = U.shape[0]
    m = dim // 2
    Br = _half_operator(rng, m, tail_kernel_pairs)
    Bmid = B0 + _hermitian(rng, m, 0.3)
    Z = np.zeros((m, m))

    def lift(B):
        return U @ np.block([[B, Z], [Z, -B]]) @ U.conj().T

    As = [lift(B0), lift(Bmid), lift(Br)]
    al = None
    if alpha:
        al = U @ np.diag(np.concatenate([np.ones(m), -np.ones(m)])) @ U.conj().T
        Wm = strength * (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / 2
        V0 = U @ np.block([[Z, Wm], [Wm.conj().T, Z]]) @ U.conj().T
    else:
        X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        As[1] = As[1] + 0.3 * anticommuting_part(X, gamma)
        V0 = _hermitian(rng, dim, strength / 2)
    knots = [0.0, r / 2, r]
    d = validate_dirac_data(As[0], gamma, al)
    Vt = PiecewiseLinear(knots, np.array([V0, 2 * V0, 0 * V0])) if coupled else None
    A = PiecewiseLinear(knots, np.array(As))
    meta = dict(meta, frame=U, half_table=[B0, Bmid, Br])
    name = "random " + " ".join(f"{k}={meta[k]}" for k in ("dim", "seed") if k in meta)
    return CoefficientPath(d, float(r), A, Vt, A.lipschitz(), name, meta)


def shipped_paths():
    """The named example paths used by the integrator honesty check."""
    return {
        "coupled-2d": coupled_two_dim_path(),
        "cylinder-4": cylinder_family(4, 0.5),
        "cylinder-64": cylinder_family(64, 0.5),
        "even-block-3": even_block(3, math.log(3) + 2.0),
        "odd-block-2": odd_block(2, 10.0),
        "random-6": random_path(6, 1, True, 1.0, seed=11),
        "random-8-alpha": random_path(8, 0, True, 2.0, seed=12, alpha=True),
    }


def validate_all(paths=None):
    """Run :func:`validate_path` on every shipped path."""
    paths = shipped_paths() if paths is None else paths
    return {name: validate_path(p) for name, p in paths.items()}


FAMILIES = {
    "cylinder": cylinder_family,
    "coupled-2d": coupled_two_dim_path,
    "random": random_path,
    "even-block": even_block,
    "odd-block": odd_block,
}


def build_family(name, **params):
    """Instantiate a named family with keyword parameters.

    ``even-block`` and ``odd-block`` take ``k`` and ``r``; the defaults for
    ``r`` are ``ln|k| + 2`` and ``10``.
    """
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    if name == "even-block":
        k = int(params.pop("k", 2))
        r = float(params.pop("r", math.log(max(abs(k), 1)) + 2.0))
        return even_block(k, r)
    if name == "odd-block":
        return odd_block(int(params.pop("k", 1)), float(params.pop("r", 10.0)))
    return FAMILIES[name](**params)
