import numpy as np
import pytest

from oddflow.evolve import (  # noqa: the weak-form test field gets an alias
    EnergyLedger,
    EvolveConfig,
    InitialData,
    TestField as WeakTestField,
    bump,
    odd_limit_sweep,
    residual_weak_momentum,
    run,
    stable_dt,
)
from oddflow.fields import (
    Grid2D,
    ScalarField,
    VectorField,
    curl2d,
    norms,
    random_divfree_field,
    random_scalar_field,
)
from oddflow.viscosity import DensityBounds, make_law


def taylor_green(grid, amp=1.0):
    x1, x2 = grid.coords()
    return VectorField(grid, amp * np.sin(x1) * np.cos(x2),
                       -amp * np.cos(x1) * np.sin(x2))


def unit_density(grid):
    return ScalarField(grid, np.ones((grid.n1, grid.n2)))


def perturbed_density(grid, seed, lo=0.5, hi=1.5):
    mid, amp = 0.5 * (lo + hi), 0.45 * (hi - lo)
    return ScalarField(grid, mid + amp * random_scalar_field(grid, seed, 3).values)


def make_config(grid, dt, t_end, nu_e="const:1.0", nu_o="const:0.0",
                lo=0.5, hi=1.5, mu_star=0.5, mu_upper=2.0):
    bounds = DensityBounds(lo, hi)
    law = make_law(nu_e, nu_o, mu_star, mu_upper, bounds)
    return EvolveConfig(grid, dt, t_end, law, bounds)


def test_config_validation():
    g = Grid2D(16, 16)
    with pytest.raises(ValueError):
        make_config(g, -0.1, 1.0)
    with pytest.raises(ValueError):
        EvolveConfig(g, 0.01, 1.0,
                     make_law("const:1.0", "const:0.0", 0.5, 2.0,
                              DensityBounds(0.5, 1.5)),
                     DensityBounds(0.5, 1.5), mode_cutoff=10)


def test_initial_data_validation():
    g = Grid2D(16, 16)
    bounds = DensityBounds(0.9, 1.1)
    x1, _ = g.coords()
    data = InitialData(ScalarField(g, np.full((16, 16), 2.0)), taylor_green(g))
    with pytest.raises(ValueError):
        data.validate(bounds)
    bad_u = VectorField(g, np.sin(x1), np.zeros((16, 16)))
    with pytest.raises(ValueError):
        InitialData(unit_density(g), bad_u).validate(bounds)


def test_stable_dt_respects_cfl_and_viscous_limits():
    g = Grid2D(32, 32)
    cfg = make_config(g, 1.0, 1.0)
    u = taylor_green(g, amp=4.0)
    dt = stable_dt(cfg, u)
    h = g.h1
    assert dt <= h * h / (8.0 * cfg.law.mu_upper) + 1e-15
    assert dt <= 0.5 * h / 4.0 + 1e-15


def test_zero_initial_data_stays_zero():
    g = Grid2D(16, 16)
    cfg = make_config(g, 0.01, 0.05, lo=0.9, hi=1.1)
    z = np.zeros((16, 16))
    data = InitialData(unit_density(g), VectorField(g, z, z))
    states, ledger = run(cfg, data)
    assert np.max(np.abs(states[-1].u.comp1)) == 0.0
    assert ledger.kinetic[-1] == 0.0
    assert ledger.balance_defect() == 0.0


def test_taylor_green_decay():
    # rho = 1, nu_o = 0: exact solution decays like e^(-2 nu t)
    g = Grid2D(32, 32)
    nu = 1.0
    cfg = make_config(g, 1e-3, 0.2, lo=0.9, hi=1.1, mu_star=0.5, mu_upper=2.0)
    data = InitialData(unit_density(g), taylor_green(g))
    states, _ = run(cfg, data)
    final = states[-1]
    exact = taylor_green(g, amp=np.exp(-2.0 * nu * final.t))
    err = max(
        np.max(np.abs(final.u.comp1 - exact.comp1)),
        np.max(np.abs(final.u.comp2 - exact.comp2)),
    )
    assert err < 1e-5 * np.exp(-2.0 * nu * final.t)


def test_constant_odd_viscosity_neutrality():
    # variable density, variable nu_e; switching nu_o between 0 and a
    # constant must leave the velocity path unchanged and shift the
    # pressure by nu_o * vorticity
    g = Grid2D(32, 32)
    data = InitialData(perturbed_density(g, seed=7),
                       random_divfree_field(g, seed=8, cutoff=4))
    finals = []
    for vo in ("const:0.0", "const:0.5"):
        cfg = make_config(g, 2e-3, 0.2, nu_e="affine:0.75,0.5", nu_o=vo)
        states, _ = run(cfg, data)
        finals.append(states[-1])
    a, b = finals
    du = VectorField(g, a.u.comp1 - b.u.comp1, a.u.comp2 - b.u.comp2)
    assert norms(du)["l2"] < 1e-9
    # the constant odd stress is the gradient -nu_o grad(omega), so the
    # run without it carries the extra pressure +nu_o omega
    dp = a.pressure.values - b.pressure.values
    target = 0.5 * curl2d(a.u).values
    defect = dp - target
    defect = defect - np.mean(defect)
    assert np.max(np.abs(defect)) < 1e-6


def test_energy_inequality_and_defect_halving():
    g = Grid2D(32, 32)
    data = InitialData(perturbed_density(g, seed=1),
                       random_divfree_field(g, seed=2, cutoff=4))
    defects = []
    for dt in (2e-3, 1e-3):  # both below the 32^2 viscous stability cap
        cfg = make_config(g, dt, 0.25, nu_e="affine:0.75,0.5", nu_o="prop:0.5")
        _, ledger = run(cfg, data)
        e0 = ledger.kinetic[0]
        diffs = np.diff(ledger.kinetic)
        assert np.all(diffs <= 1e-6 * e0)
        defects.append(abs(ledger.balance_defect()))
    # first-order-in-dt energy balance defect: halving dt halves it
    assert defects[1] <= 0.65 * defects[0]


def test_density_bounds_and_mass_conservation():
    g = Grid2D(32, 32)
    rho0 = perturbed_density(g, seed=3)
    lo, hi = rho0.values.min(), rho0.values.max()
    cfg = make_config(g, 5e-3, 0.25, nu_o="prop:0.5")
    data = InitialData(rho0, random_divfree_field(g, seed=4, cutoff=4))
    states, _ = run(cfg, data, store_every=1)
    mass0 = np.sum(rho0.values) * g.cell_area
    for st in states:
        assert st.rho.values.min() >= lo - 1e-14
        assert st.rho.values.max() <= hi + 1e-14
    drift = abs(np.sum(states[-1].rho.values) * g.cell_area - mass0)
    assert drift <= 1e-6 * abs(mass0)


def test_weak_residual_shrinks_with_dt():
    g = Grid2D(32, 32)
    data = InitialData(perturbed_density(g, seed=5),
                       random_divfree_field(g, seed=6, cutoff=4))
    a, a_dot = bump(0.05, 0.45)
    tf = WeakTestField(random_divfree_field(g, seed=9, cutoff=4), a, a_dot)
    res = []
    for dt in (2e-3, 1e-3):
        cfg = make_config(g, dt, 0.5, nu_e="affine:0.75,0.5", nu_o="prop:0.5")
        states, ledger = run(cfg, data, store_every=1)
        res.append(residual_weak_momentum(ledger.times, states, cfg, None, [tf]))
    assert res[1] < 0.6 * res[0]


def test_odd_limit_sweep_monotone():
    g = Grid2D(16, 16)
    cfg = make_config(g, 1e-2, 0.25)
    data = InitialData(perturbed_density(g, seed=10),
                       random_divfree_field(g, seed=11, cutoff=3))
    rows = odd_limit_sweep(cfg, data, [0.4, 0.1], c0=0.5)
    assert rows[0][1] > rows[1][1] > 0.0


def test_energy_ledger_defect_indexing():
    led = EnergyLedger([0.0, 1.0], [2.0, 1.5], [0.0, 0.4], [0.0, 0.0])
    assert led.balance_defect(0) == 0.0
    assert led.balance_defect() == pytest.approx(-0.1)
