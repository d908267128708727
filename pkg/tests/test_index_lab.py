import numpy as np
import pytest

from diraclab.boundary import (BoundaryCondition, aps_condition, from_elliptic_data,
                               random_elliptic_data, transmission_condition)
from diraclab.calderon import calderon_subspaces, constant_pair
from diraclab.errors import DimensionError, InvarianceError, PathError
from diraclab.evolution import CoefficientPath
from diraclab.examples import partner_path, random_path
from diraclab.index_lab import (CONDITION_KINDS, THEOREMS, adjoint_sum, agranovic_dynin,
                                bojarski_index, check_gluing, cobordism_check, discontinuity,
                                doubled_system, draw_seeds, ext_index, invariance_defect,
                                max_kernel_dim, random_condition, random_invariant_condition,
                                run_batch, search_anticommuting_invertible, splitting_check,
                                susy_doubled, susy_indices, verify_windgen)
from diraclab.spectral_core import eigendecompose, spectral_subspace
from diraclab.subspace import random_subspace, span

from conftest import normal_form


@pytest.mark.parametrize("rel, closed, expected", [
    ("<=", True, (2, 0)),   # H_≤ meets C_ext = H_≥ in ker A; B^a = H_<
    ("<", False, (0, 0)),
])
def test_aps_examples(aps4, rel, closed, expected):
    pair = constant_pair(aps4)
    rep = ext_index(aps_condition(aps4, 0.0, closed), pair, aps4)
    assert (rep.kernel_dim, rep.cokernel_dim) == expected
    assert rep.index == expected[0] - expected[1]


def test_spectral_conditions_by_hand(aps4):
    pair = constant_pair(aps4)
    dec = eigendecompose(aps4)
    # B = H_> : kernel H_> (dim 1); B^a = γ(H_≤) = H_≥ meets C_max = H_> in dim 1
    up = ext_index(spectral_subspace(dec, ">", 0.0), pair, aps4)
    assert (up.kernel_dim, up.cokernel_dim) == (1, 1)
    # B = H_≥ : kernel dim 3; B^a = γ(H_<) = H_> gives cokernel dim 1
    ge = ext_index(spectral_subspace(dec, ">=", 0.0), pair, aps4)
    assert (ge.kernel_dim, ge.cokernel_dim) == (3, 1)
    assert max_kernel_dim(spectral_subspace(dec, ">=", 0.0), pair) == 1


def test_ext_index_dimension_mismatch(aps4):
    with pytest.raises(DimensionError):
        ext_index(random_subspace(2, 1, np.random.default_rng(0)), constant_pair(aps4), aps4)


def test_index_report_serialization(aps4):
    rep = ext_index(aps_condition(aps4), constant_pair(aps4), aps4).with_residuals(windgen=0)
    assert rep.ok
    assert rep.to_dict() == {"kernel_dim": 2, "cokernel_dim": 0, "index": 2,
                             "method": "kernel-counting", "residuals": {"windgen": 0}}


@pytest.mark.parametrize("kind", CONDITION_KINDS)
def test_formulas_per_condition_kind(kind):
    rng = np.random.default_rng(hash(kind) % 2 ** 32)
    path = random_path(6, 1, True, 1.0, seed=5)
    pair = calderon_subspaces(path)
    d = path.d
    B = random_condition(d, pair, rng, kind)
    assert verify_windgen(B, pair, d) == 0
    assert adjoint_sum(B, pair, d)["residual"] == 0
    for lam in (0.0,):
        out = agranovic_dynin(B, pair, d, lam)
        assert out["residual"] == 0 and out["elliptic_dims"] == 0


def test_unknown_condition_kind(aps4):
    with pytest.raises(ValueError):
        random_condition(aps4, constant_pair(aps4), np.random.default_rng(0), "bogus")


def test_elliptic_dims_identity(rng):
    path = random_path(8, 1, True, 1.0, seed=8)
    pair = calderon_subspaces(path)
    d = path.d
    for _ in range(10):
        data = random_elliptic_data(d, 0.0, rng)
        out = agranovic_dynin(from_elliptic_data(d, data), pair, d, 0.0)
        assert out["elliptic_dims"] == 0 and out["residual"] == 0


def test_discontinuity_jump(aps4):
    pair = constant_pair(aps4)
    out = discontinuity(pair, aps4, 0.0)
    assert out == {"residual": 0, "ind_le": 2, "ind_lt": 0, "dim_eigenspace": 2}


def test_adjoint_sum_gap(aps4):
    out = adjoint_sum(aps_condition(aps4), constant_pair(aps4), aps4)
    assert out["gap"] == 2 and out["residual"] == 0


def test_cobordism_invertible_tail():
    path = random_path(6, 2, True, 1.0, seed=2, tail_kernel_pairs=0)
    out = cobordism_check(path)
    assert out == {"residual": 0, "ext_equals_max": True, "kernel_self_adjoint": True}
    with pytest.raises(PathError):
        cobordism_check(random_path(6, 1, True, 1.0, seed=2))


def test_search_fails_for_unbalanced_gamma():
    gamma = 1j * np.diag([1.0, 1.0, 1.0, -1.0])
    rep = search_anticommuting_invertible(gamma, 10, np.random.default_rng(1))
    assert rep.all_failed and rep.expected_defect == 2
    assert all(k >= 2 for k in rep.rank_defects)
    balanced = search_anticommuting_invertible(normal_form([1.0, -1.0]).gamma, 10,
                                               np.random.default_rng(1))
    assert balanced.successes == 10


def test_doubled_system_checks():
    p1 = random_path(4, 1, True, 1.0, seed=4)
    p2 = partner_path(p1, seed=5, tail_kernel_pairs=1)
    ds = doubled_system(p1, p2)
    assert ds.d.dim == 8
    assert bojarski_index(ds)["residual"] == 0
    rng = np.random.default_rng(6)
    for _ in range(5):
        B1 = random_condition(ds.d1, ds.pair1, rng)
        sp = splitting_check(ds, B1)
        assert sp["residual"] == 0 and sp["two_term"] == 0 and sp["cancellation"] == 0
        B2 = random_condition(ds.d2, ds.pair2, rng)
        assert splitting_check(ds, B1, B2)["residual"] == 0
    with pytest.raises(PathError):
        check_gluing(p1.d, p1.d)


def test_transmission_is_diagonal():
    B = transmission_condition(2).space
    assert B.dim == 2 and B.contains(np.array([1.0, 2.0, 1.0, 2.0]))


def test_susy_indices_and_invariance():
    path = random_path(8, 1, True, 1.0, seed=3, alpha=True)
    pair = calderon_subspaces(path)
    d = path.d
    rng = np.random.default_rng(0)
    for _ in range(5):
        B = random_invariant_condition(d, rng)
        assert invariance_defect(B.space, d.alpha) < 1e-10
        out = susy_indices(B, pair, d)
        assert all(v == 0 for v in out["residuals"].values())
        assert out["plus"].index + out["minus"].index == out["total"]
    ds = doubled_system(path, partner_path(path, seed=1, tail_kernel_pairs=1))
    res = susy_doubled(ds, random_invariant_condition(ds.d1, rng))
    assert all(v == 0 for v in res.values())
    # a generic subspace is not invariant
    bad = BoundaryCondition(span(rng.standard_normal((8, 1)), ambient_dim=8))
    with pytest.raises(InvarianceError) as info:
        susy_indices(bad, pair, d)
    assert info.value.details["defect"] > 1e-3


def test_susy_needs_alpha(aps4):
    with pytest.raises(InvarianceError):
        susy_indices(aps_condition(aps4), constant_pair(aps4), aps4)
    with pytest.raises(InvarianceError):
        random_invariant_condition(aps4, np.random.default_rng(0))


def test_draw_seeds_are_reproducible():
    a = [s.generate_state(2).tolist() for s in draw_seeds(3, 4)]
    b = [s.generate_state(2).tolist() for s in draw_seeds(3, 4)]
    assert a == b and len({tuple(x) for x in a}) == 4


@pytest.mark.parametrize("theorem", sorted(THEOREMS))
def test_small_batches(theorem):
    out = run_batch(theorem, draws=10, seed=1)
    assert out["ok"], out["max_abs_residual"]
    assert len(out["results"]) == 10


def test_batch_is_deterministic():
    a = run_batch("windgen", draws=5, seed=2)
    b = run_batch("windgen", draws=5, seed=2)
    assert [r["params"] for r in a["results"]] == [r["params"] for r in b["results"]]
    with pytest.raises(ValueError):
        run_batch("nope")
