"""Smoke test for the bubblespec Python bindings.

Build and install the extension first, e.g.

    pip install --no-build-isolation ./crates/bubblespec-py

then run `python python/smoke_test.py`.
"""

import math

import bubblespec_py as bs


def main() -> None:
    params = bs.PhysicalParams.air_water()
    mass = bs.mass_for_radius(params, 1e-5)
    eq = bs.solve_equilibrium(params, mass)
    assert abs(eq.r_star / 1e-5 - 1.0) < 1e-10, eq
    assert max(eq.identity_residuals()) < 1e-12

    try:
        bs.PhysicalParams(0.0262, 1.3, 717.5, 287.0, 293.15, 101325.0, 0.0728, 1e-3, 998.2)
    except ValueError:
        pass
    else:
        raise AssertionError("inconsistent gamma accepted")

    bound = bs.rate_lower_bound(eq)
    roots = bs.find_roots(eq)
    assert roots and all(r.real < -bound.beta for r in roots)
    top = max(roots, key=lambda r: r.real)
    abscissa = bs.spectral_abscissa(eq, 128)
    assert abs(top.real - abscissa) < 1e-6 * eq.kappa_bar, (top, abscissa)

    iso, adi = bs.regime_bounds(eq)
    p91_iso, p91_adi = bs.prosperetti_rates(eq, eq.omega0)
    assert abs(p91_iso / iso - 2.25) < 1e-12
    assert p91_adi > 0.0
    assert abs(bs.quartic_sum(0.0) - math.pi**4 / 90.0) < 1e-14

    times = [k * 2e-7 for k in range(20)]
    radius, energy = bs.evolve_linear(eq, 16, 1e-8, times)
    assert len(radius) == 20
    assert all(b <= a * (1 + 1e-12) for a, b in zip(energy, energy[1:]))

    t, r, m = bs.evolve_nonlinear(eq, 8, 1e-8, 2e-5, 10)
    assert len(t) == 11
    assert max(abs(x / mass - 1.0) for x in m) < 1e-8

    sol = bs.find_periodic(eq, 8, 1e-6 * params.p_inf_star, omega=0.8 * eq.omega0)
    assert sol.residual < 1e-8
    assert abs(sol.floquet[0]) < 1.0

    grid = [eq.chi * 10.0**k for k in range(-3, 4)]
    report = bs.sweep_chi(params, mass, grid)
    assert len(report) == len(grid)
    assert all(-a >= b for a, b in zip(report.spectral_abscissa, report.beta_bound))
    assert report.to_csv().startswith("chi,beta_bound,")

    print("bubblespec_py smoke test passed")


if __name__ == "__main__":
    main()
