import numpy as np
import pytest

from z2lab.gauge import GaugeConfig, chessboard_background, gauge_transform, pi_flux_background
from z2lab.spectral import (
    BlochCell,
    BlochModel,
    Twist,
    assemble,
    band_formula,
    bloch_bands,
    bloch_matrix,
    bloch_spectrum,
    brillouin_zone,
    diagonalize,
    e_minus,
    exp_fit,
    fourier_decay,
    fourier_energy_coefficient,
    ground_energies,
    poisson_sum,
    real_space_fermi_decay,
    zone_average,
)
from z2lab.topology import DUAL, Chain, Lattice, coboundary, cocycle_c1, cocycle_c2

from _chains import random_vertex_set

MASSES = [0.0, 0.5, 1.0, 3.0]
HOL = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def kgrid(n=64):
    k = 2 * np.pi * np.arange(n) / n
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return np.stack([k1.ravel(), k2.ravel()], axis=1)


@pytest.fixture(scope="module")
def pi8():
    return diagonalize(assemble(pi_flux_background(8), 1.0, 1.0))


def test_assemble_entries():
    L = 4
    g = pi_flux_background(L)
    h = assemble(g, t=0.7, m=0.3).matrix
    lat = Lattice(L)
    t, hd = lat.edge_endpoints()
    for e in range(lat.n_edges):
        assert h[t[e], hd[e]] == pytest.approx(-0.7 * g.sigma[e])
    assert np.allclose(np.diag(h), 0.3 * lat.sublattice())
    assert np.allclose(h, h.conj().T)


@pytest.mark.parametrize("m", MASSES)
def test_particle_hole_symmetry(rng, m):
    L = 6
    g = GaugeConfig(L, 1 - 2 * rng.integers(0, 2, 2 * L * L))
    eps = diagonalize(assemble(g, 1.0, m)).eigenvalues
    assert np.max(np.abs(eps + eps[::-1])) < 1e-10


def test_fermion_gap_and_projector(pi8):
    assert pi8.fermion_gap == pytest.approx(2.0, abs=1e-12)
    P = pi8.fermi_projector
    assert np.abs(P @ P - P).max() < 1e-10
    assert np.trace(P).real == pytest.approx(32, abs=1e-10)


def test_projector_diagonal_is_sublattice_resolved(pi8):
    # the staggered mass breaks the particle-hole map between sublattices,
    # so only the sum over an A-B pair is pinned to one
    d = np.diag(pi8.fermi_projector).real
    sub = Lattice(8).sublattice()
    assert np.allclose(d[sub == 1], d[sub == 1][0])
    assert np.allclose(d[sub == 1][0] + d[sub == -1][0], 1.0)
    assert d[sub == 1][0] < 0.5


def test_gapless_projector_flagged():
    s = diagonalize(assemble(GaugeConfig.trivial(4), 1.0, 0.0))
    assert not s.projector_defined
    assert np.isfinite(s.E0_half_filling)


def test_pi_flux_beats_zero_flux():
    e_pi = diagonalize(assemble(pi_flux_background(8), 1.0, 0.0)).E0_half_filling
    e_0 = diagonalize(assemble(GaugeConfig.trivial(8), 1.0, 0.0)).E0_half_filling
    assert e_pi < e_0


def test_gauge_covariance(rng):
    L = 8
    g = GaugeConfig(L, 1 - 2 * rng.integers(0, 2, 2 * L * L))
    base = diagonalize(assemble(g, 1.0, 0.7)).eigenvalues
    for _ in range(5):
        g2 = gauge_transform(g, random_vertex_set(rng, L))
        assert np.abs(diagonalize(assemble(g2, 1.0, 0.7)).eigenvalues - base).max() < 1e-10


def test_ground_energies_batch_matches_single(rng):
    L = 4
    sig = 1 - 2 * rng.integers(0, 2, (7, 2 * L * L))
    batch = ground_energies(sig, L, 1.0, 0.4)
    single = [diagonalize(assemble(GaugeConfig(L, s), 1.0, 0.4)).E0_half_filling for s in sig]
    assert np.allclose(batch, single, atol=1e-12)


@pytest.mark.parametrize("cell", list(BlochCell))
@pytest.mark.parametrize("m", MASSES)
def test_bloch_matches_closed_form(cell, m):
    model = BlochModel(cell, m, 1.0)
    ks = kgrid()
    h = bloch_matrix(model, ks)
    assert np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max() < 1e-14
    assert np.abs(bloch_bands(model, ks) - band_formula(model, ks)).max() < 1e-10


def test_bloch_t_scaling():
    ks = kgrid(16)
    for cell in BlochCell:
        a = bloch_bands(BlochModel(cell, 0.6, 2.5), ks)
        b = band_formula(BlochModel(cell, 0.6, 2.5), ks)
        assert np.abs(a - b).max() < 1e-10


def test_bloch_values_at_origin():
    e = bloch_bands(BlochModel(BlochCell.PI_FLUX_4SITE, 0.0), np.zeros(2))
    assert np.allclose(e, [-2 * np.sqrt(2)] * 2 + [2 * np.sqrt(2)] * 2)
    e = bloch_bands(BlochModel(BlochCell.CHESSBOARD_8SITE, 0.0), np.zeros(2))
    hi, lo = 2 * np.sqrt(1 + np.sqrt(3) / 2), 2 * np.sqrt(1 - np.sqrt(3) / 2)
    assert np.allclose(e, [-hi, -hi, -lo, -lo, lo, lo, hi, hi])


@pytest.mark.parametrize("m", [0.3, 1.0, 2.0])
def test_min_band_magnitude_is_m(m):
    e = bloch_bands(BlochModel(BlochCell.PI_FLUX_4SITE, m), kgrid())
    assert np.abs(e).min() == pytest.approx(m, abs=1e-10)


@pytest.mark.parametrize("L", [4, 8, 12])
@pytest.mark.parametrize("a, b", HOL)
def test_real_space_equals_bloch_union(L, a, b):
    m = 0.8
    real = diagonalize(assemble(pi_flux_background(L, a, b), 1.0, m)).eigenvalues
    theta, phi = (np.pi if a == -1 else 0.0), (np.pi if b == -1 else 0.0)
    bloch = bloch_spectrum(BlochModel(BlochCell.PI_FLUX_4SITE, m, 1.0, theta, phi), L)
    assert np.abs(real - bloch).max() < 1e-9


def test_chessboard_real_space_equals_bloch_union():
    L = 8
    real = diagonalize(assemble(chessboard_background(L), 1.0, 0.6)).eigenvalues
    bloch = bloch_spectrum(BlochModel(BlochCell.CHESSBOARD_8SITE, 0.6, 1.0), L)
    assert np.abs(real - bloch).max() < 1e-9


def test_brillouin_zone():
    assert len(brillouin_zone(BlochCell.PI_FLUX_4SITE, 8)) == 16
    assert len(brillouin_zone(BlochCell.CHESSBOARD_8SITE, 8)) == 8
    a = brillouin_zone(BlochCell.PI_FLUX_4SITE, 8, 2 * np.pi, 0.0)
    b = brillouin_zone(BlochCell.PI_FLUX_4SITE, 8)
    # shifting by 2π moves every momentum by one grid step: same set mod the zone
    e_a = np.sort(e_minus(a[:, 0], a[:, 1], 1.0))
    e_b = np.sort(e_minus(b[:, 0], b[:, 1], 1.0))
    assert np.allclose(e_a, e_b)
    with pytest.raises(ValueError):
        brillouin_zone(BlochCell.CHESSBOARD_8SITE, 6)


def test_half_filling_count():
    s = diagonalize(assemble(pi_flux_background(8), 1.0, 1.0))
    assert np.count_nonzero(s.eigenvalues < 0) == 32


def test_fourier_origin_is_band_mean():
    c0 = fourier_energy_coefficient(1.0, 1.0, (0, 0))
    ks = kgrid(256)
    assert c0 < 0
    assert c0 == pytest.approx(e_minus(ks[:, 0], ks[:, 1], 1.0).mean(), abs=1e-12)


def test_fourier_odd_components_vanish():
    c = fourier_energy_coefficient(1.0, 1.0, np.array([[1, 0], [3, 0], [1, 2]]))
    assert np.abs(c).max() < 1e-14


def test_fourier_m0_warns():
    with pytest.warns(RuntimeWarning):
        fourier_energy_coefficient(0.0, 1.0, (0, 0), tol=1e-6)


def test_fourier_decay_fit():
    fit = fourier_decay(1.0)
    assert fit.rate > 0 and fit.r2 > 0.99
    assert fit.rate == pytest.approx(0.6773065649584341, rel=1e-6)


@pytest.mark.parametrize("theta, phi", [(0, 0), (np.pi, 0), (0, np.pi), (np.pi, np.pi), (0.7, 2.1)])
def test_poisson_identity(theta, phi):
    lhs = zone_average(8, theta, phi, 1.0)
    rhs = poisson_sum(8, theta, phi, 1.0)
    assert abs(lhs - rhs) < 1e-8


def test_real_space_decay_rate_grows_with_m():
    rates = [real_space_fermi_decay(assemble(pi_flux_background(12), 1.0, m)).rate for m in (0.5, 1.0, 2.0)]
    assert rates[0] > 0
    assert rates[0] < rates[1] < rates[2]


def test_real_space_decay_rejects_gapless():
    with pytest.raises(ValueError):
        real_space_fermi_decay(assemble(pi_flux_background(8), 1.0, 0.0))


@pytest.mark.parametrize("phi", [np.pi / 4, np.pi / 2, np.pi])
def test_coboundary_twist_is_trivial(rng, phi):
    L = 8
    g = pi_flux_background(L)
    base = diagonalize(assemble(g, 1.0, 1.0)).eigenvalues
    cs = coboundary(random_vertex_set(rng, L))
    tw = diagonalize(assemble(g, 1.0, 1.0, Twist(cs, phi))).eigenvalues
    assert np.abs(tw - base).max() < 1e-10


@pytest.mark.parametrize("cocycle, target", [(cocycle_c2, (-1, 1)), (cocycle_c1, (1, -1))])
def test_pi_twist_flips_holonomy(cocycle, target):
    L = 4
    tw = diagonalize(assemble(pi_flux_background(L), 1.0, 1.0, Twist(cocycle(L), np.pi))).eigenvalues
    ref = diagonalize(assemble(pi_flux_background(L, *target), 1.0, 1.0)).eigenvalues
    assert np.abs(tw - ref).max() < 1e-10


def test_twist_rejects_open_support():
    with pytest.raises(ValueError):
        assemble(pi_flux_background(4), 1.0, 1.0, Twist(Chain.from_indices(4, 1, DUAL, [0]), 0.5))


def test_exp_fit_guards():
    with pytest.raises(ValueError):
        exp_fit([1.0], [1.0])
    with pytest.raises(ValueError):
        exp_fit([1.0, 2.0], [1.0, 0.0])
    f = exp_fit([0, 1, 2], np.exp(-0.5 * np.arange(3)))
    assert f.rate == pytest.approx(0.5) and f.r2 == pytest.approx(1.0)
