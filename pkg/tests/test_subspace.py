import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diraclab.errors import DimensionError, ProjectionError
from diraclab.spectral_core import eigendecompose, normal_form_gamma, random_spectrum, \
    random_system, spectral_projector, spectral_subspace
from diraclab.subspace import (Subspace, apply, complement_within, duality_report, full,
                               image, intersection, kernel, omega, omega_annihilator,
                               pair_report, principal_angles, random_projection,
                               random_subspace, reduce_by_projection, span, stability_shift,
                               subspace_sum, zero)

from conftest import normal_form

E = np.eye(4)


def _rank_oracle(*frames):
    """Brute-force rank through numpy's matrix_rank."""
    M = np.hstack(frames)
    return int(np.linalg.matrix_rank(M)) if M.size else 0


def test_span_examples(rng):
    e = np.eye(3)
    assert span(np.column_stack([e[0], 2 * e[0]])).dim == 1
    assert span(np.column_stack([e[0] + e[1], e[0] - e[1]])).dim == 2
    V = rng.standard_normal((10, 50)) + 1j * rng.standard_normal((10, 50))
    assert span(V).dim == _rank_oracle(V) == 10


def test_empty_span_is_zero():
    S = span(np.zeros((5, 0)), ambient_dim=5)
    assert S.dim == 0 and S.ambient_dim == 5


def test_frame_is_orthonormal(rng):
    S = random_subspace(7, 3, rng)
    assert np.allclose(S.frame.conj().T @ S.frame, np.eye(3))


def test_pair_report_examples():
    F = span(E[:, [0, 1]])
    G = span(E[:, [1, 2]])
    rep = pair_report(F, G)
    assert (rep.nullity, rep.deficiency, rep.index) == (1, 1, 0)
    rep = pair_report(F, F)
    assert (rep.nullity, rep.deficiency, rep.index) == (2, 2, 0)
    with pytest.raises(DimensionError):
        pair_report(F, span(np.eye(3)[:, [0]]))


def test_pair_report_against_rank_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        F = random_subspace(n, int(rng.integers(0, n + 1)), rng)
        G = random_subspace(n, int(rng.integers(0, n + 1)), rng)
        rep = pair_report(F, G)
        r = _rank_oracle(F.frame, G.frame)
        assert rep.nullity == F.dim + G.dim - r
        assert rep.deficiency == n - r
        if r == n:
            assert rep.index == F.dim + G.dim - n


def test_pair_report_symmetric(rng):
    for _ in range(50):
        F, G = random_subspace(6, 2, rng), random_subspace(6, 3, rng)
        assert pair_report(F, G) == pair_report(G, F)


def test_intersection_sum_dimensions(rng):
    shared = rng.standard_normal((6, 2))
    F = span(np.hstack([shared, rng.standard_normal((6, 1))]))
    G = span(np.hstack([shared, rng.standard_normal((6, 2))]))
    assert intersection(F, G).dim == 2
    assert subspace_sum(F, G).dim == 5
    assert np.allclose(principal_angles(F, G)[:2], 0, atol=1e-7)


def test_complement_and_apply(rng):
    F = random_subspace(6, 2, rng)
    G = subspace_sum(F, random_subspace(6, 2, rng))
    C = complement_within(F, G)
    assert C.dim == 2 and np.allclose(F.frame.conj().T @ C.frame, 0, atol=1e-12)
    M = rng.standard_normal((6, 6))
    assert apply(M, F).dim == 2


def test_kernel_and_image(rng):
    P = random_projection(6, 2, rng)
    assert image(P).dim == 2 and kernel(P).dim == 4
    assert kernel(np.zeros((0, 4))).dim == 4


def test_kernel_scale():
    P = np.eye(3) + 1e-17
    Pc = np.eye(3) - P  # pure roundoff
    assert kernel(Pc).dim < 3
    assert kernel(Pc, scale=1.0).dim == 3


def test_serialization(rng):
    S = random_subspace(5, 2, rng)
    assert Subspace.from_dict(S.to_dict()).equals(S)


def test_omega_annihilator_example():
    g = normal_form_gamma(4)
    # the normal form sends e1 -> e3, e2 -> e4, e3 -> -e1, e4 -> -e2
    assert np.allclose(g @ E[:, 0], E[:, 2]) and np.allclose(g @ E[:, 2], -E[:, 0])
    B = span(E[:, [0]])
    Ba = omega_annihilator(B, g)
    assert Ba.equals(span(E[:, [0, 1, 3]]))
    for x in B.frame.T:
        for y in Ba.frame.T:
            assert abs(omega(x, y, g)) < 1e-14


def test_annihilator_of_full_space():
    assert omega_annihilator(full(4), normal_form_gamma(4)).dim == 0


def test_annihilator_of_negative_spectral_space(rng):
    for seed in range(10):
        d = random_system(6, random_spectrum(6, 0, rng), seed=seed)
        lt = spectral_subspace(eigendecompose(d), "<", 0.0)
        assert omega_annihilator(lt, d).equals(lt)


def test_annihilator_with_kernel_is_not_negative_space(aps4):
    lt = spectral_subspace(eigendecompose(aps4), "<", 0.0)
    Ba = omega_annihilator(lt, aps4)
    assert Ba.dim == 3
    assert Ba.equals(spectral_subspace(eigendecompose(aps4), "<=", 0.0))


def test_annihilator_involution(rng):
    g = normal_form_gamma(8)
    for k in range(9):
        B = random_subspace(8, k, rng)
        Ba = omega_annihilator(B, g)
        assert B.dim + Ba.dim == 8
        assert omega_annihilator(Ba, g).equals(B)


@st.composite
def pairs(draw):
    n = draw(st.integers(1, 8))
    kf = draw(st.integers(0, n))
    kg = draw(st.integers(0, n))
    shared = draw(st.integers(0, min(kf, kg)))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    common = rng.standard_normal((n, shared))
    F = span(np.hstack([common, rng.standard_normal((n, kf - shared))]), ambient_dim=n)
    G = span(np.hstack([common, rng.standard_normal((n, kg - shared))]), ambient_dim=n)
    return F, G


@settings(max_examples=150, deadline=None)
@given(pairs())
def test_duality_property(pair):
    rep = duality_report(*pair)
    assert rep.holds


def test_reduce_examples():
    P = np.diag([1.0, 0, 0, 0])
    B = span((E[:, 0] + E[:, 1])[:, None])
    rep = reduce_by_projection(B, P)
    assert rep.subspace.equals(span(E[:, [1]]))
    assert rep.holds
    assert reduce_by_projection(span(E[:, [0]]), P).subspace.dim == 0


def test_reduce_random_oblique(rng):
    for _ in range(100):
        n = int(rng.integers(2, 8))
        P = random_projection(n, int(rng.integers(0, n + 1)), rng)
        B = random_subspace(n, int(rng.integers(0, n + 1)), rng)
        assert reduce_by_projection(B, P).holds


def test_non_idempotent_is_rejected():
    with pytest.raises(ProjectionError):
        reduce_by_projection(span(E[:, [0]]), 2 * np.eye(4))
    with pytest.raises(ProjectionError):
        stability_shift(span(E[:, [0]]), np.eye(4), np.ones((4, 4)))


def test_stability_examples(aps4, rng):
    B = random_subspace(4, 2, rng)
    P = random_projection(4, 2, rng)
    rep = stability_shift(B, P, P)
    assert rep.ind_kerQ_imP == (4 - 2) + 2 - 4
    dec = eigendecompose(aps4)
    rep = stability_shift(B, spectral_projector(dec, ">", 0), spectral_projector(dec, ">=", 0))
    # oracle: ind(ker Q_>=, im Q_>) = ind(H_<, H_>) = 0 - (4 - 2)
    assert rep.ind_kerQ_imP == pair_report(spectral_subspace(dec, "<", 0),
                                           spectral_subspace(dec, ">", 0)).index == -2


def test_stability_random(rng):
    for _ in range(100):
        n = int(rng.integers(2, 8))
        B = random_subspace(n, int(rng.integers(0, n + 1)), rng)
        P = random_projection(n, int(rng.integers(0, n + 1)), rng)
        Q = random_projection(n, int(rng.integers(0, n + 1)), rng)
        assert stability_shift(B, P, Q).residual == 0


def test_zero_and_full():
    assert zero(3).perp().equals(full(3))
