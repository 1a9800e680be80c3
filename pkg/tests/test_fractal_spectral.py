import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from aplab.constructions import SelfSimilarMeasure, discretize
from aplab.fractal_spectral import (
    POLAR_CONSTANT,
    GaussianMixture,
    PowerLawSpectrum,
    QuadratureError,
    ResolutionError,
    SphericalAverageTable,
    ap_length_measure,
    ap_step_profile,
    calibrate_polar_constant,
    comparison_bins,
    decay_constant,
    decay_report,
    energy,
    energy_transition,
    lattice_sigma_table,
    lq_norm_continuous,
    measured_beta,
    mollify,
    polar_ap_density,
    polar_bin_masses,
    relative_l1_gap,
    sigma_abs,
    sigma_abs_1d,
    sigma_spherical,
    sl_decompose,
    spherical_average_table,
    torus_radius,
    weighted_sigma_integral,
)
from aplab.group_fourier import GridDensity, lambda3, lambda3_direct
from aplab.verify import decay_to_lq_chain

MT = SelfSimilarMeasure.middle_thirds()
ALPHA0 = math.log(2) / math.log(3)


# ------------------------------------------------------------------ mollify


@pytest.mark.parametrize("n", [1, 3, 5])
def test_mollify_lebesgue_is_one(n):
    f = mollify(SelfSimilarMeasure.lebesgue(2), n, 128)
    assert np.allclose(f.values, 1.0, atol=1e-9)


def test_mollify_identity_above_nyquist():
    f = discretize(MT, 81, 4)
    assert mollify(f, 6) is f


@pytest.mark.parametrize("n", [2, 4, 6])
def test_mollify_mass_and_nonnegativity(n):
    f = mollify(MT, n, 3**6)
    assert f.l1_mass() == pytest.approx(1.0, abs=1e-10)
    assert f.values.min() >= -1e-9
    g = mollify(SelfSimilarMeasure.middle_thirds(2), n, 3**4 if n < 6 else 3**5)
    assert g.l1_mass() == pytest.approx(1.0, abs=1e-10)


def test_mollify_resolution_error():
    with pytest.raises(ResolutionError):
        mollify(MT, 8, 300)


def _sup_growth():
    sups = [mollify(MT, n, 3**8).lp_norm(np.inf) for n in range(3, 11)]
    return np.polyfit(np.arange(3, 11), np.log2(sups), 1)[0]


def test_mollified_sup_growth_matches_lattice_count():
    # the Cauchy-Schwarz route keeps the 2^{nd} frequency count: growth (2d - alpha)/2 in the
    # worst case; for middle-thirds the measured rate is the box-counting rate 1 - alpha
    assert _sup_growth() == pytest.approx(1 - ALPHA0, abs=0.03)


@pytest.mark.xfail(strict=True, reason="the square-root energy bound drops the lattice count; measured growth "
                   "is about 1 - alpha = 0.369 bits/level, above (d - alpha)/2 + 0.1 = 0.285")
def test_mollified_sup_growth_energy_rate():
    assert _sup_growth() <= (1 - ALPHA0) / 2 + 0.1


# ------------------------------------------------------------------ energy / decay


def test_energy_growth_and_transition():
    lo = energy(MT, 0.3, 2000)
    hi = energy(MT, 0.9, 2000)
    assert lo.growth_exponent == pytest.approx(0.0, abs=0.02)
    assert hi.growth_exponent > 0.1
    a = energy_transition(MT, 2000, np.arange(0.4, 0.85, 0.05))
    assert abs(a - ALPHA0) <= 0.05


def test_energy_lebesgue_and_monotone_in_cutoff():
    leb = SelfSimilarMeasure.lebesgue(2)
    assert energy(leb, 0.5, 512).value == pytest.approx(1.0, abs=1e-12)
    vals = [energy(MT, 0.6, c).value for c in (16, 64, 256, 1024)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        energy(MT, 1.0, 10)


def test_energy_two_dimensional_transition():
    m2 = SelfSimilarMeasure.middle_thirds(2)
    assert energy(m2, 1.0, 160).growth_exponent == pytest.approx(0.0, abs=0.05)
    assert energy(m2, 1.6, 160).growth_exponent > 0.1


def test_decay_constant_cases():
    assert decay_constant(MT, 0.0, 500) == pytest.approx(1.0)
    leb = SelfSimilarMeasure.lebesgue(2)
    assert decay_report(leb, 2.0, 64).admissible
    bad = decay_report(MT, 0.8, 256)
    assert not bad.admissible and bad.value_doubled > bad.value
    assert measured_beta(PowerLawSpectrum(1.0, 16384), 256) == pytest.approx(1.1)


def test_decay_to_lq_chain_holds():
    for mu, a in ((MT, 0.55), (SelfSimilarMeasure(4, (0, 1, 3), (1 / 3,) * 3), 0.7)):
        b = measured_beta(mu, 64) or 0.1
        chain = decay_to_lq_chain(mu, a, b, 256)
        assert chain["holds"], chain


# ------------------------------------------------------------------ AP length measure


def test_ap_length_uniform_d1():
    N = 64
    f = GridDensity.constant(N)
    edges = np.array([0.0, 0.1, 0.25, 0.4, 0.51])
    m = ap_length_measure(f, edges)
    assert m.total_mass == pytest.approx(1.0)
    r = torus_radius(N, 1)
    frac = [np.mean((r >= a) & (r < b)) for a, b in zip(edges[:-1], edges[1:])]
    assert np.allclose(m.masses, frac)
    assert np.allclose(m.masses[:-1], 2 * np.diff(edges)[:-1], atol=2 / N)


def test_ap_length_point_mass():
    m = ap_length_measure(GridDensity.point_mass(32), np.linspace(0, 0.6, 7))
    assert m.masses[0] == pytest.approx(m.total_mass) and np.all(m.masses[1:] == 0)


def test_ap_length_total_mass_middle_thirds():
    f = discretize(MT, 3**6, 6)
    edges = np.concatenate([[0.0, 0.5 / f.N], np.linspace(0.01, 0.5, 20), [0.51]])
    m = ap_length_measure(f, edges)
    assert m.total_mass == pytest.approx(lambda3_direct(f, f, f), rel=1e-12)
    assert math.fsum(m.masses) == pytest.approx(m.total_mass, rel=1e-12)
    assert m.masses[0] == pytest.approx(np.sum(f.values**3) / f.N**2, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_ap_length_mass_equals_lambda3_of_mollified(seed, n):
    r = np.random.default_rng(seed)
    f = mollify(GridDensity(r.random((16, 16))), n)
    f = GridDensity(np.maximum(f.values, 0))
    m = ap_length_measure(f, np.linspace(0, 0.75, 16))
    assert m.total_mass == pytest.approx(lambda3(f), rel=1e-9)


def test_ap_length_errors(tmp_path):
    with pytest.raises(ValueError):
        ap_length_measure(GridDensity.constant(8), [0.0, 0.3])
    with pytest.raises(ValueError):
        ap_length_measure(GridDensity(np.array([1.0, -1.0, 1.0])), [0, 1])
    m = ap_length_measure(GridDensity.constant(8), [0, 0.25, 0.6], level=3)
    m.write_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().startswith("# ap_length_measure level=3")


# ------------------------------------------------------------------ spherical averages


def test_sigma_lebesgue_lattice_vanishes():
    tab = lattice_sigma_table(GridDensity.constant(32))
    far = tab.rho_grid >= 1
    assert np.allclose(tab.sigma_values[far], 0, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 6.0), st.floats(0.04, 0.1))
def test_sigma_abs_dominates(rho, width):
    g = GaussianMixture([[0.2], [0.3]], [width, 0.07], [1.0, 0.5])
    s = sigma_spherical(g, rho, freq_cutoff=10.0, step=0.25)
    assert sigma_abs(g, rho, freq_cutoff=10.0, step=0.25) >= abs(s) - 1e-14


def test_sigma_two_dimensional_table_invariants(tmp_path):
    g = GaussianMixture([[0.25, 0.25]], [0.08], [1.0])
    tab = spherical_average_table(g, np.arange(0.0, 4.0, 0.5), 6.0, 0.5)
    assert tab.angular_nodes >= 16
    assert np.all(tab.sigma_abs_values >= np.abs(tab.sigma_values) - 1e-14)
    tab.write_csv(tmp_path / "s.csv")
    assert "angular_nodes=" in (tmp_path / "s.csv").read_text().splitlines()[0]


def test_sigma_quadrature_error_carries_estimates():
    # two well separated bumps: cross terms oscillate in eta and alias at step 4
    g = GaussianMixture([[0.05], [0.45]], [0.01, 0.01], [1.0, 1.0])
    with pytest.raises(QuadratureError) as info:
        spherical_average_table(g, [0.0, 1.0, 5.0], 40.0, 4.0)
    assert info.value.coarse is not None and info.value.fine is not None


# ------------------------------------------------------------------ polar route


def test_polar_zero_table():
    tab = SphericalAverageTable(1, np.linspace(0, 5, 101), np.zeros(101, complex), np.zeros(101), 2, 5.0, 0.05)
    assert np.all(polar_ap_density(tab, [0.1, 0.3]) == 0)


def test_polar_resolution_guard():
    tab = SphericalAverageTable(1, np.arange(0, 10, 1.0), np.ones(10, complex), np.ones(10), 2, 10.0, 1.0)
    with pytest.raises(ResolutionError):
        polar_ap_density(tab, [0.4])


@pytest.mark.parametrize("d", [1, 2])
def test_polar_constant_calibration(d):
    # the least-squares constant from a Gaussian lands on the analytic value
    assert calibrate_polar_constant(d) == pytest.approx(POLAR_CONSTANT[d], rel=0.01)


def test_polar_gaussian_d1():
    g = GaussianMixture([[0.25]], [0.06], [1.0])
    N = 512
    edges, lo, hi = comparison_bins(N, 1)
    direct = ap_length_measure(g.sample(N), edges).masses[lo:hi]
    tab = spherical_average_table(g, np.arange(0, 16, 0.05), 10.0, 0.5)
    assert relative_l1_gap(direct, polar_bin_masses(tab, edges[lo : hi + 1])) <= 0.05


@pytest.mark.parametrize("d,N", [(1, 256), (2, 64)])
def test_polar_constant_density(d, N):
    f = GridDensity.constant(N, d)
    edges, lo, hi = comparison_bins(N, d)
    direct = ap_length_measure(f, edges).masses[lo:hi]
    polar = polar_bin_masses(lattice_sigma_table(f), edges[lo : hi + 1])
    assert relative_l1_gap(direct, polar) <= 0.05
    # pointwise density: 2 in d = 1, the annulus profile 2 pi r in d = 2
    r = np.array([0.1, 0.2, 0.3])
    expect = 2.0 if d == 1 else 2 * np.pi * r
    assert np.allclose(polar_ap_density(lattice_sigma_table(f), r), expect, rtol=1e-9)


# ------------------------------------------------------------------ S + L


def _bump(s, c=5.0, w=1.0):
    return np.exp(-((s - c) ** 2) / w)


def test_sl_d1_identity_exact():
    s = np.linspace(0, 20, 401)
    res = sl_decompose(_bump(s), s, 1, 0.75)
    assert np.all(res.L_part == 0) and np.all(res.K_kernel == 0)
    assert np.max(np.abs(res.frak_D - res.S_part)) <= 1e-12 * np.max(np.abs(res.frak_D))
    assert np.allclose(res.S_part, res.S_direct, atol=1e-12)


def test_sl_d2_identity_and_norm_ratio():
    s = np.linspace(0, 30, 601)
    ratios = []
    for c, w in ((3, 0.5), (5, 1.0), (8, 2.0), (12, 4.0), (15, 0.3)):
        res = sl_decompose(_bump(s, c, w), s, 2, 1.25)
        assert res.identity_gap <= 1e-10
        assert np.allclose(res.S_part, res.S_direct, atol=1e-10 * np.max(np.abs(res.S_part)))
        ratios.append(res.norm_S / res.norm_frak_S)
    C = max(max(ratios), 1 / min(ratios))
    assert C <= 10


def test_sl_remainder_bound_near_zero():
    d = 2
    alpha = (d + 1) / 2 - 0.25
    s = np.linspace(0, 10, 1001)
    frak = np.where(np.abs(s - 4) < 2, np.cos(np.pi * (s - 4) / 4) ** 2, 0.0)
    res = sl_decompose(frak, s, d, alpha)
    r = res.r_grid
    small = (r > 0) & (r <= 1)
    bound = r[small] ** (alpha - (d + 1) / 2) * res.energy
    C = np.max(np.abs(res.L_part[small]) / bound)
    assert np.isfinite(C) and C < 10
    assert res.energy > 0


def test_sl_rejects_negative():
    s = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        sl_decompose(-np.ones(11), s, 2, 1.0)


# ------------------------------------------------------------------ weighted integral


def test_weighted_integral_zero_and_tail_guard():
    r = np.linspace(0, 50, 501)
    assert weighted_sigma_integral(r, np.zeros_like(r), 0.5, 1) == 0.0
    with pytest.raises(QuadratureError):
        weighted_sigma_integral(r, np.ones_like(r), 0.5, 1)


def test_weighted_integral_lebesgue_cutoff_doubling():
    leb = SelfSimilarMeasure.lebesgue(2)
    vals = []
    for R in (256.0, 512.0):
        r = np.arange(0, R, 0.5)
        S = sigma_abs_1d(leb, r, 2 * R, 0.5)
        vals.append(weighted_sigma_integral(r, S, 0.75, 1))
    assert vals[1] == pytest.approx(vals[0], rel=0.02)


def test_weighted_integral_gaussian_d2_doubling():
    g = GaussianMixture([[0.25, 0.25]], [0.12], [1.0])
    vals = []
    for R in (4.0, 8.0):
        tab = spherical_average_table(g, np.arange(0.0, R, 0.25), 6.0, 0.5, angular_nodes=32)
        vals.append(weighted_sigma_integral(tab.rho_grid, tab.sigma_abs_values, 1.5, 2))
    assert vals[1] == pytest.approx(vals[0], rel=0.02)


def test_weighted_integral_bounded_by_lq_cube():
    ratios = []
    for b in (1.2, 1.5, 2.0, 3.0):
        mu = PowerLawSpectrum(b, 4096)
        q = 2.5
        r = np.arange(0, 512, 0.5)
        S = sigma_abs_1d(mu, r, 2048, 0.5)
        val = weighted_sigma_integral(r, S, 0.9, 1)
        ratios.append(val / lq_norm_continuous(mu, q, 4096) ** 3)
    assert max(ratios) / min(ratios) <= 10


# ------------------------------------------------------------------ geometry properties


def test_spherical_vs_annular_domination():
    def F(p):
        return np.prod(np.sinc(p) ** 2, axis=-1)

    th = np.linspace(0, 2 * np.pi, 721)[:-1]
    U = np.stack([np.cos(th), np.sin(th)], 1)
    ratios = []
    for r in (1.0, 3.0, 10.0, 30.0, 60.0):
        sph = np.mean(F(r * U))
        s = np.linspace(r - 1, r + 1, 201)
        ann = trapezoid([np.mean(F(si * U)) * 2 * np.pi * si for si in s], s)
        ratios.append(sph / (ann / r))
    assert max(ratios) <= 1.0


def test_histogram_l2_stable_under_refinement():
    g = GaussianMixture([[0.25, 0.25]], [0.06], [1.0])
    f = g.sample(64)
    P = ap_step_profile(f)
    norms = []
    for w in (0.05, 0.025, 0.0125):
        e = np.arange(0, 0.75 + w / 2, w)
        m = ap_length_measure(f, e, profile=P)
        c = (e[:-1] + e[1:]) / 2
        D = c ** -0.5 * m.density
        norms.append(math.sqrt(np.sum(D**2 * w)))
    assert max(norms) / min(norms) <= 1.1


# ------------------------------------------------------------------ pointwise decay


@pytest.mark.xfail(strict=True, reason="middle-thirds Sigma(r) decays like r^-0.23 on [2, 1024]; the claimed exponent "
                   "at q = 2/0.3 is 1.75")
def test_pointwise_decay_middle_thirds():
    from aplab.verify import check_pointwise_decay

    assert check_pointwise_decay(MT).passed
