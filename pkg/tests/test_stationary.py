import numpy as np
import pytest

import _mms
from oddflow.stationary import (
    BoundaryData,
    EtaFunction,
    PicardError,
    RectDomain,
    StationaryProblem,
    assemble_A,
    assemble_L,
    boundary_data_from_g,
    clamped_embedding,
    ellipticity_check,
    eta_affine,
    eta_table,
    homogeneous_boundary,
    nonlinear_rhs,
    picard_solve,
    recover_velocity,
    residual_weak_stationary,
)


def test_domain_validation():
    with pytest.raises(ValueError):
        RectDomain(4, 4)
    with pytest.raises(ValueError):
        RectDomain(16, 16, 1.0, 2.0)  # non-square cells
    dom = RectDomain(15, 31, 1.0, 2.0)
    assert dom.h == pytest.approx(1.0 / 16.0)


def test_eta_validation_and_tables():
    with pytest.raises(ValueError):
        EtaFunction(lambda s: s, 2.0)  # negative on [-3, 0)
    eta = eta_affine(1.0, 0.3, 2.0)
    assert eta(0.0) == pytest.approx(1.0)
    assert eta(10.0) == pytest.approx(2.0)  # clipped at rho_max
    tab = eta_table([0.0, 1.0], [0.5, 1.5], 2.0)
    assert tab(0.5) == pytest.approx(1.0)
    assert tab(-4.0) == pytest.approx(0.5)  # constant outside the table


# -------------------------------------------------- operator-level oracles

def _margin_fields(dom, seed, margin=3):
    """Random extended-grid field supported margin cells inside, plus its
    interior restriction (for pairing with operator output)."""
    rng = np.random.default_rng(seed)
    ext = np.zeros((dom.nx + 4, dom.ny + 4))
    ext[2 + margin:-(2 + margin), 2 + margin:-(2 + margin)] = rng.standard_normal(
        (dom.nx - 2 * margin + 2, dom.ny - 2 * margin + 2)
    )[1:-1, 1:-1]
    interior = ext[2:-2, 2:-2].copy()
    return ext, interior


def test_constant_odd_coefficient_assembles_to_zero():
    dom = RectDomain(16, 16)
    a = assemble_A(dom, np.full((18, 18), 0.7))
    assert a.nnz == 0
    rng = np.random.default_rng(0)
    phi = rng.standard_normal((20, 20)).ravel()
    assert np.max(np.abs(a @ phi)) == 0.0


def test_odd_form_is_antisymmetric_for_interior_fields():
    # for variable coefficients the odd bilinear form psi . A(mu) phi
    # changes sign under swapping the arguments whenever both fields
    # vanish near the boundary (no boundary terms in the discrete
    # integration by parts)
    dom = RectDomain(20, 20)
    xm, ym = dom.mid_coords()
    mu = 0.8 + 0.5 * np.sin(2.0 * np.pi * xm) * np.cos(np.pi * ym)
    a = assemble_A(dom, mu)
    phi_ext, phi_int = _margin_fields(dom, seed=1)
    psi_ext, psi_int = _margin_fields(dom, seed=2)
    f1 = float(psi_int.ravel() @ (a @ phi_ext.ravel()))
    f2 = float(phi_int.ravel() @ (a @ psi_ext.ravel()))
    scale = max(abs(f1), abs(f2), 1.0)
    assert abs(f1 + f2) / scale < 1e-10
    assert abs(f1) > 1e-3  # the form itself is not trivially zero


def test_even_form_is_symmetric_for_interior_fields():
    dom = RectDomain(20, 20)
    xm, ym = dom.mid_coords()
    mu = 1.0 + 0.4 * np.cos(2.0 * np.pi * (xm + ym))
    ell = assemble_L(dom, mu)
    phi_ext, phi_int = _margin_fields(dom, seed=3)
    psi_ext, psi_int = _margin_fields(dom, seed=4)
    f1 = float(psi_int.ravel() @ (ell @ phi_ext.ravel()))
    f2 = float(phi_int.ravel() @ (ell @ psi_ext.ravel()))
    assert abs(f1 - f2) / max(abs(f1), 1.0) < 1e-10


def test_assembled_operator_consistency_against_sympy():
    # apply L[mu_e] + A[mu_o] to the sampled manufactured stream function
    # and compare with the exact symbolic image: second order in h
    phi_fn, _, _, rhs_fn = _mms.build()
    law, eta = _mms.law(), _mms.eta()
    errs = []
    for nx in (31, 63):
        dom = RectDomain(nx, nx)
        xe, ye = dom.ext_coords()
        xm, ym = dom.mid_coords()
        rho = eta(phi_fn(xm, ym))
        op = assemble_L(dom, law.mu_e(rho)) + assemble_A(dom, law.mu_o(rho))
        img = (op @ phi_fn(xe, ye).ravel()).reshape(nx, nx)
        exact = rhs_fn(xm, ym)[1:-1, 1:-1]
        errs.append(np.max(np.abs(img - exact)))
    assert np.log2(errs[0] / errs[1]) > 1.7


def test_nonlinear_rhs_against_sympy():
    phi_fn, f1_fn, f2_fn, rhs_fn = _mms.build()
    eta = _mms.eta()
    errs = []
    for nx in (31, 63):
        dom = RectDomain(nx, nx)
        xe, ye = dom.ext_coords()
        xm, ym = dom.mid_coords()
        force1 = f1_fn(xm, ym) + np.zeros_like(xm)
        force2 = f2_fn(xm, ym) + np.zeros_like(xm)
        rhs = nonlinear_rhs(dom, phi_fn(xe, ye), eta, force1, force2)
        # by construction conv - curl f equals the viscous image
        exact = rhs_fn(xm, ym)[1:-1, 1:-1]
        errs.append(np.max(np.abs(rhs - exact)))
    assert np.log2(errs[0] / errs[1]) > 1.7


def test_ellipticity_bounds():
    law = _mms.law()
    rng = np.random.default_rng(5)
    rho = rng.uniform(0.5, 1.5, 40)
    xi = rng.standard_normal((60, 4))
    rep = ellipticity_check(law, rho, xi)
    assert rep["rayleigh_min"] >= rep["lower_bound"] - 1e-12
    assert rep["rayleigh_max"] <= rep["upper_bound"] + 1e-12
    assert rep["odd_form_max"] <= 1e-12


# ----------------------------------------------------------- boundary data

def test_boundary_data_tangential_field():
    # perp-grad of psi = sin(pi x) sin(pi y): the normal component of g
    # vanishes pointwise on the whole boundary, so phi0 is the constant
    # c0 and phi1 is the tangential trace g.tau
    dom = RectDomain(16, 16)
    g = lambda x, y: (
        -np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
        np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
    )
    bd = boundary_data_from_g(dom, g, c0=1.0)
    assert abs(bd.flux) < 1e-12
    xb = np.arange(18) * dom.h
    assert np.allclose(bd.phi1_bottom, -np.pi * np.sin(np.pi * xb))
    assert np.allclose(bd.phi1_top, -np.pi * np.sin(np.pi * xb))
    assert np.allclose(bd.phi1_left, -np.pi * np.sin(np.pi * xb))
    ring = np.concatenate([bd.phi0[0], bd.phi0[-1], bd.phi0[:, 0], bd.phi0[:, -1]])
    assert np.allclose(ring, 1.0)


def test_boundary_data_rejects_net_flux():
    dom = RectDomain(16, 16)
    g = lambda x, y: (2.0 * x - 1.0, 2.0 * y - 1.0)  # g.n = 1 on all sides
    with pytest.raises(ValueError, match="flux"):
        boundary_data_from_g(dom, g)


def test_clamped_embedding_ghost_convention():
    dom = RectDomain(8, 8)
    bd = homogeneous_boundary(dom)
    bd.phi1_left[:] = 2.0
    emb, shift = clamped_embedding(dom, bd)
    rng = np.random.default_rng(6)
    phi_int = rng.standard_normal(64)
    ext = (emb @ phi_int + shift).reshape(12, 12)
    assert np.allclose(ext[1, :], 0.0)  # boundary ring carries phi0 = 0
    # left ghost column mirrors the first interior column shifted by
    # 2 h phi1 (outward-normal derivative convention)
    assert np.allclose(ext[0, 1:-1], ext[2, 1:-1] + 2.0 * dom.h * 2.0)


# ------------------------------------------------------------------ solver

def test_picard_zero_problem_converges_immediately():
    dom = RectDomain(10, 10)
    z = np.zeros((12, 12))
    prob = StationaryProblem(dom, _mms.law(), _mms.eta(), z, z,
                             homogeneous_boundary(dom))
    sol = picard_solve(prob)
    assert sol.iterations == 1
    assert np.max(np.abs(sol.phi)) == 0.0


def test_picard_rejects_bad_damping_and_reports_failure():
    prob, _ = _mms.problem(15)
    with pytest.raises(ValueError):
        picard_solve(prob, damping=0.0)
    with pytest.raises(PicardError) as exc:
        picard_solve(prob, max_iter=1)
    assert exc.value.last_update > 0.0


def test_manufactured_solution_second_order():
    errs = [_mms.solve_error(nx)[0] for nx in (15, 31)]
    order = np.log2(errs[0] / errs[1])
    assert order > 1.7


def test_recovered_velocity_is_divergence_free():
    _, sol = _mms.solve_error(15)
    rho, (u1, u2), divmax = recover_velocity(sol)
    assert divmax < 1e-10
    assert rho.min() >= 0.99  # eta = 1 + phi with phi >= 0


def test_weak_residual_shrinks_under_refinement():
    phi_fn, _, _, _ = _mms.build()
    res = []
    for nx in (15, 31):
        prob, _ = _mms.problem(nx)
        err, sol = _mms.solve_error(nx)
        xm, ym = prob.domain.mid_coords()
        # polynomial bump test functions with clamped support
        psis = [
            (xm * (1 - xm) * ym * (1 - ym)) ** 2,
            (xm * (1 - xm)) ** 2 * (ym * (1 - ym)) ** 3,
        ]
        res.append(residual_weak_stationary(sol, prob, psis))
    # the boundary-layer quadrature of the midpoint rule limits the weak
    # defect to first order; it must at least halve per refinement
    assert res[0] / res[1] > 1.8


def test_weak_residual_rejects_nonvanishing_tests():
    prob, _ = _mms.problem(15)
    _, sol = _mms.solve_error(15)
    bad = np.ones((17, 17))
    with pytest.raises(ValueError):
        residual_weak_stationary(sol, prob, [bad])
