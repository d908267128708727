import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from diraclab.errors import NonConvergenceError, NotRepresentedError, PathError
from diraclab.evolution import (CoefficientPath, GridSection, KernelComponentWarning,
                                PiecewiseLinear, ScaledMatrix, default_resolution,
                                dirac_apply, extension_grid, extension_section,
                                fundamental_solution, integrate, representation_decompose,
                                solution_section, solve_inhomogeneous,
                                solve_inhomogeneous_grid, trace_bound_report,
                                trace_inequality_report, validate_path)
from diraclab.examples import odd_block, odd_solution
from diraclab.spectral_core import (eigendecompose, normal_form_gamma, random_spectrum,
                                    random_system, sobolev_norm, spectral_projector,
                                    validate_dirac_data)

from conftest import normal_form


def test_extension_examples(aps4):
    d = normal_form([2.0, -2.0])
    x = np.array([1.0, 0.0])
    assert np.allclose(extension_section(d, x, 0.5), math.exp(-1) * x)
    k = np.array([0.0, 1.0, 0.0, 0.0])  # kernel vector of diag(1,0,-1,0)
    assert np.allclose(extension_section(aps4, k, 1.0), math.exp(-1) * k)
    with pytest.raises(ValueError):
        extension_section(d, x, -1.0)


@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("s", [-0.5, 0.0, 0.5])
def test_extension_mode_l2_identity(a, s):
    d = normal_form([a, -a])
    x = np.array([1.0, 0.0])
    f = lambda t: (a ** s * np.linalg.norm(extension_section(d, x, t))) ** 2
    val, _ = quad(f, 0, np.inf)
    assert np.isclose(val, a ** (2 * s - 1) / 2, rtol=1e-8)


def test_extension_is_norm_decreasing(rng):
    d = random_system(6, random_spectrum(6, 1, rng), seed=0)
    for _ in range(20):
        x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        for s in (-0.5, 0.0, 0.5):
            for t in np.linspace(0, 5, 11):
                assert sobolev_norm(d, extension_section(d, x, t), s) <= sobolev_norm(d, x, s) * (1 + 1e-12)


def test_extension_derivative(rng):
    d = random_system(4, random_spectrum(4, 1, rng), seed=1)
    dec = eigendecompose(d)
    rate = dec.function(lambda a: np.where(np.abs(a) <= dec.cluster_tol, 1.0, np.abs(a)))
    x = rng.standard_normal(4) + 0j
    errs = []
    for h in (1e-2, 5e-3):
        fd = (extension_section(d, x, 1 + h) - extension_section(d, x, 1 - h)) / (2 * h)
        errs.append(np.linalg.norm(fd + rate @ extension_section(d, x, 1.0)))
    assert errs[1] < errs[0] / 3.5  # second order


@pytest.mark.parametrize("a", [0.7, 2.0])
def test_inhomogeneous_single_mode(a):
    d = normal_form([a, -a])
    grid = np.linspace(0.0, 1.0, 11)
    e1 = np.array([1.0, 0.0])
    # γ* τ = e₁ on [0, 1], i.e. τ = γ e₁
    tau = GridSection(grid, np.tile(d.gamma @ e1, (grid.size, 1)))
    for t in (0.0, 0.3, 0.77, 1.0):
        assert np.allclose(solve_inhomogeneous(d, tau, t), (1 - math.exp(-a * t)) / a * e1)


def test_inhomogeneous_zero(aps4):
    tau = GridSection(np.linspace(0, 2, 5), np.zeros((5, 4)))
    assert np.allclose(solve_inhomogeneous_grid(aps4, tau).values, 0)


def test_inhomogeneous_finite_difference(rng):
    d = random_system(4, random_spectrum(4, 0, rng), seed=2)
    c = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    errs = []
    for m in (401, 801):
        grid = np.linspace(0, 3, m)
        vals = sum(np.outer(np.cos((k + 1) * grid), c[k]) for k in range(3))
        tau = GridSection(grid, vals)
        sigma = solve_inhomogeneous_grid(d, tau)
        assert np.linalg.norm(spectral_projector(eigendecompose(d), ">", 0) @ sigma.values[0]) < 1e-12
        Dsig = dirac_apply(d, sigma)
        errs.append(np.max(np.abs(Dsig.values[5:-5] - tau.values[5:-5])))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 3.5


def test_inhomogeneous_warns_on_kernel(aps4):
    grid = np.linspace(0, 1, 5)
    tau = GridSection(grid, np.tile([0, 1.0, 0, 0], (5, 1)))
    with pytest.warns(KernelComponentWarning):
        out = solve_inhomogeneous_grid(aps4, tau)
    assert np.allclose(out.values, 0)


def test_inhomogeneous_rejects_outside():
    d = normal_form([1.0, -1.0])
    tau = GridSection([0.0, 1.0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        solve_inhomogeneous(d, tau, 2.0)


def test_representation_examples(aps4):
    grid = np.linspace(0, 4, 2001)
    x = np.array([1.0, 0, 0, 0])
    rep = representation_decompose(aps4, extension_grid(aps4, x, grid))
    assert np.allclose(rep.x, x)
    assert np.max(np.abs(rep.tau.values)) < 1e-5 and np.allclose(rep.sigma0.values, 0)
    k = np.array([0, 1.0, 0, 1.0])
    rep = representation_decompose(aps4, GridSection(grid, np.tile(k, (grid.size, 1))))
    assert np.allclose(rep.x, 0) and np.allclose(rep.tau.values, 0)
    assert np.allclose(rep.sigma0.values, k)


def test_representation_round_trip(rng):
    d = normal_form([1.0, 2.0, 0.0, -1.0, -2.0, 0.0])
    dec = eigendecompose(d)
    grid = np.linspace(0, 6, 6001)
    Qp = spectral_projector(dec, ">", 0)
    Qne = np.eye(6) - spectral_projector(dec, "=", 0)
    x = Qp @ (rng.standard_normal(6) + 1j * rng.standard_normal(6))
    bump = np.exp(-((grid - 2.0) ** 2))[:, None]
    tau = GridSection(grid, bump * (Qne @ rng.standard_normal(6))[None, :])
    s0 = spectral_projector(dec, "=", 0) @ rng.standard_normal(6)
    sigma = extension_grid(d, x, grid) + solve_inhomogeneous_grid(d, tau) \
        + GridSection(grid, np.tile(s0, (grid.size, 1)))
    rep = representation_decompose(d, sigma)
    assert rep.residual < 1e-6
    assert np.allclose(rep.x, x, atol=1e-6)
    assert np.allclose(rep.sigma0.values[0], s0)


def test_representation_rejects_foreign_section():
    d = normal_form([1.0, -1.0])
    grid = np.linspace(0, 2, 201)
    sigma = GridSection(grid, np.column_stack([np.sign(grid - 1.0), grid]))
    with pytest.raises(NotRepresentedError):
        representation_decompose(d, sigma, tol=1e-8)


def test_dirac_norm_identity(rng):
    d = random_system(4, random_spectrum(4, 0, rng), seed=5)
    grid = np.linspace(0, 1, 50)
    sigma = GridSection(grid, np.outer(np.sin(grid), rng.standard_normal(4)))
    L = GridSection(grid, np.gradient(sigma.values, grid, axis=0, edge_order=2) + sigma.values @ d.a0.T)
    assert np.allclose(np.linalg.norm(dirac_apply(d, sigma).values, axis=1),
                       np.linalg.norm(L.values, axis=1))


def test_constant_fundamental_solution():
    b, r = 1.3, 0.8
    d = normal_form([b, -b])
    fs = fundamental_solution(CoefficientPath.constant(d, r))
    assert np.allclose(fs.Phi_of_t[0], np.eye(2))
    assert np.linalg.norm(fs.Phi_r - np.diag([math.exp(-b * r), math.exp(b * r)])) < 1e-10


def test_commuting_family_fundamental_solution(rng):
    d = random_system(4, random_spectrum(4, 0, rng), seed=3)
    f = lambda t: 1.0 + 0.5 * np.sin(3 * t)
    F = lambda t: t - (np.cos(3 * t) - 1) / 6.0  # ∫₀ᵗ f
    path = CoefficientPath(d, 1.5, ScaledMatrix(f, d.a0), None, 3.0)
    fs = fundamental_solution(path)
    exact = expm(-F(1.5) * d.a0)
    assert np.linalg.norm(fs.Phi_r - exact) < 1e-10 * np.linalg.norm(exact)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_odd_block_solution(k):
    path = odd_block(k, 5.0)
    sec = solution_section(path, odd_solution(k, 0.0))
    exact = np.array([odd_solution(k, t) for t in sec.grid])
    assert np.max(np.abs(sec.values - exact)) < 1e-10


def test_back_integration_inverts(rng):
    from diraclab.examples import random_path
    path = random_path(6, 1, True, 1.0, seed=2)
    fs = fundamental_solution(path)
    N = int(fs.integrator_stats["steps"])
    back, _ = integrate(path, path.r, 0.0, N, fs.Phi_r)
    assert np.linalg.norm(back - np.eye(6)) < 1e-9


def test_error_estimate_and_nonconvergence():
    d = normal_form([4.0, -4.0])
    path = CoefficientPath.constant(d, 3.0)
    with pytest.raises(NonConvergenceError) as info:
        fundamental_solution(path, grid_resolution=8)
    assert info.value.details["relative_error"] > 1e-9
    fs = fundamental_solution(path)
    assert fs.integrator_stats["relative_error"] <= 1e-9
    assert default_resolution(path) >= 2048


def test_path_invariants():
    d = normal_form([1.0, -1.0])
    bad = np.array([[[1.0, 0], [0, -1.0]], [[1.0, 0], [0, 1.0]]])
    path = CoefficientPath.from_tables(d, [0.0, 1.0], bad)
    with pytest.raises(PathError):
        validate_path(path)
    good = np.array([[[1.0, 0], [0, -1.0]], [[2.0, 0], [0, -2.0]]])
    path = CoefficientPath.from_tables(d, [0.0, 1.0], good)
    assert validate_path(path)
    assert np.allclose(path.A(5.0), np.diag([2.0, -2.0]))
    assert np.allclose(path.V(0.5), 0)
    assert path.is_fredholm_type()
    with pytest.raises(PathError):
        CoefficientPath.from_tables(d, [0.5, 1.0], good)


def test_piecewise_linear_batch_matches_scalar(rng):
    vals = rng.standard_normal((4, 3, 3))
    f = PiecewiseLinear([0.0, 0.5, 1.2, 2.0], vals)
    ts = np.linspace(-0.5, 2.5, 31)
    assert np.allclose(f.batch(ts), np.array([f(t) for t in ts]))
    G = rng.standard_normal((3, 3))
    assert np.allclose(f.left_multiply(G).batch(ts), G @ f.batch(ts))


def test_grid_section_validation():
    from diraclab.errors import DimensionError
    with pytest.raises(DimensionError):
        GridSection([0.0, 0.0], np.zeros((2, 1)))
    s = GridSection([0.0, 1.0], [[1.0], [3.0]])
    assert np.allclose(s.at(0.5), [2.0]) and np.allclose(s.at(3.0), [0.0])
    assert np.allclose(GridSection.from_dict(s.to_dict()).values, s.values)


def test_trace_examples():
    const = GridSection([0.0, 1.0], [[2.0], [2.0]])
    rep = trace_inequality_report([const], 1.0)
    assert rep.ok and rep.worst_ratio == 0.0
    hat = GridSection([0.0, 1.0], [[1.0], [0.0]])
    rep = trace_inequality_report([hat], 1.0, half_line=True)
    # exact: lhs 1, rhs ∫|σ'|² + ∫|σ|² = 1 + 1/3
    assert rep.ok and np.isclose(rep.worst_ratio, 1 / (1 + 1 / 3))


def test_trace_random_sections(rng):
    secs, avals = [], []
    for _ in range(300):
        m = int(rng.integers(2, 12))
        grid = np.sort(rng.uniform(0, 5, m))
        grid = grid[np.concatenate([[True], np.diff(grid) > 1e-6])]
        if grid.size < 2:
            continue
        secs.append(GridSection(grid, rng.standard_normal((grid.size, 2))))
        avals.append(rng.uniform(1e-3, 10))
    assert trace_inequality_report(secs, avals).ok


def test_trace_bound(rng):
    d = random_system(4, random_spectrum(4, 1, rng), seed=9)
    grid = np.linspace(0, 3, 61)
    vals = rng.standard_normal((61, 4))
    vals[-1] = 0
    lhs, rhs = trace_bound_report(d, GridSection(grid, vals))
    assert lhs <= rhs
