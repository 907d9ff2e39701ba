import numpy as np
import pytest

from z2lab.flux import (
    adiabatic_generator,
    braiding_phase_free,
    flipped_background,
    gauge_between,
    generator_profile,
    kato_step,
    loop_operator_action,
    parallel_transport,
    square_disk,
    threading_check,
    twisted_family,
)
from z2lab.gauge import GaugeConfig, gauge_transform, pi_flux_background
from z2lab.spectral import assemble
from z2lab.topology import DUAL, Chain, Lattice, coboundary, cocycle_c1, cocycle_c2, vertex_set

from _chains import random_vertex_set

COCYCLES = {
    "C1": cocycle_c1,
    "C2": cocycle_c2,
    "C1C2": lambda L: cocycle_c1(L) + cocycle_c2(L),
}
HOL = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def spectrum(h):
    return np.linalg.eigvalsh(h.matrix)


@pytest.fixture(scope="module")
def transport_c2():
    return parallel_transport(pi_flux_background(4), cocycle_c2(4), 32)


def test_twisted_family_endpoints():
    L = 4
    g = pi_flux_background(L)
    base = assemble(g, 1.0, 1.0).matrix
    assert np.allclose(twisted_family(g, cocycle_c2(L), 0.0).matrix, base)
    e0 = spectrum(twisted_family(g, cocycle_c2(L), 0.0))
    e2pi = spectrum(twisted_family(g, cocycle_c2(L), 2 * np.pi))
    assert np.abs(e0 - e2pi).max() < 1e-10


@pytest.mark.parametrize("phi", [0.3, 1.1, np.pi])
def test_coboundary_family_is_isospectral(rng, phi):
    L = 4
    g = pi_flux_background(L)
    cs = coboundary(random_vertex_set(rng, L))
    assert np.abs(spectrum(twisted_family(g, cs, phi)) - spectrum(twisted_family(g, cs, 0.0))).max() < 1e-10


def test_kato_step_intertwines(rng):
    n = 8
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    p0 = diagonalize_proj(h)
    p1 = diagonalize_proj(h + 0.05 * (a - a.conj().T) * 1j)
    u = kato_step(p0, p1)
    assert np.abs(u.conj().T @ u - np.eye(n)).max() < 1e-12
    assert np.abs(u @ p0 @ u.conj().T - p1).max() < 1e-12


def diagonalize_proj(h):
    w, v = np.linalg.eigh(h)
    occ = v[:, w < 0]
    return occ @ occ.conj().T


def test_transport_path_invariants(transport_c2):
    p = transport_c2
    assert p.phis[0] == 0.0 and p.phis[-1] == pytest.approx(np.pi)
    assert p.unitarity_error < 1e-9
    assert np.all(p.idempotency < 1e-9)
    assert np.allclose(p.traces, 8.0, atol=1e-9)
    assert p.min_gap > 0
    assert p.projector_drift.max() < 1e-9
    assert np.abs(p.transported_projector - p.P_end).max() < 1e-9


def test_transport_refinement_converges():
    p = parallel_transport(pi_flux_background(4), cocycle_c2(4), 16, tol=1e-9)
    assert p.refinement_change < 1e-9
    # the unitary itself converges at second order in the step
    v = [parallel_transport(pi_flux_background(4), cocycle_c2(4), n).V for n in (32, 64, 128)]
    r = np.abs(v[1] - v[0]).max() / np.abs(v[2] - v[1]).max()
    assert 3.5 < r < 4.5
    coarse = parallel_transport(pi_flux_background(4), cocycle_c2(4), 64)
    fine = parallel_transport(pi_flux_background(4), cocycle_c2(4), 128)
    assert np.abs(coarse.transported_projector - fine.transported_projector).max() < 1e-9


def test_transport_coboundary_closed_form(rng):
    # along ∂Λ the twist is the gauge rotation e^{-iφN_Λ} H e^{iφN_Λ}
    L = 4
    g = pi_flux_background(L)
    lam = random_vertex_set(rng, L)
    chi = lam.bits.astype(float)
    p = parallel_transport(g, coboundary(lam), 32)
    d = np.exp(-1j * np.pi * chi)
    expected = d[:, None] * p.P0 * d.conj()[None, :]
    assert np.abs(p.P_end - expected).max() < 1e-9
    assert np.abs(p.transported_projector - expected).max() < 1e-9


def test_transport_gap_closure_error():
    with pytest.raises(ValueError, match="gap closed at phi="):
        parallel_transport(GaugeConfig.trivial(4), cocycle_c2(4), 8, m=0.0)


def test_transport_rejects_non_cycle():
    with pytest.raises(ValueError):
        parallel_transport(pi_flux_background(4), Chain.from_indices(4, 1, DUAL, [0]), 8)


def test_generator_solves_projector_equation():
    L = 4
    g = pi_flux_background(L)
    cs = cocycle_c2(L)
    phi, h = 0.9, 1e-5
    k = adiabatic_generator(g, cs, phi)
    pp = diagonalize_proj(twisted_family(g, cs, phi + h).matrix)
    pm = diagonalize_proj(twisted_family(g, cs, phi - h).matrix)
    p = diagonalize_proj(twisted_family(g, cs, phi).matrix)
    dp = (pp - pm) / (2 * h)
    assert np.abs(k - k.conj().T).max() < 1e-12
    assert np.abs(dp - 1j * (k @ p - p @ k)).max() < 1e-7


def test_generator_profile_decays():
    ds, amp = generator_profile(pi_flux_background(12), cocycle_c2(12))
    assert ds[0] == 0
    assert amp[-1] < 0.05 * amp[0]
    assert np.all(np.diff(amp) < 0)


@pytest.mark.parametrize("name", list(COCYCLES))
def test_threading_flips_labels(name):
    L = 8
    cs = COCYCLES[name](L)
    res = threading_check(L, 1, 1, cs)
    a2, b2, _ = loop_operator_action(1, 1, cs)
    assert res.labels_out == (a2, b2)
    assert res.deviation < 1e-8
    assert res.unitarity_error < 1e-9


@pytest.mark.parametrize("a, b", HOL)
def test_threading_from_every_sector(a, b):
    res = threading_check(4, a, b, cocycle_c1(4))
    assert res.labels_out == (a, -b)
    assert res.deviation < 1e-8


@pytest.mark.parametrize("a, b", HOL)
def test_loop_operator_action_table(rng, a, b):
    L = 6
    assert loop_operator_action(a, b, cocycle_c2(L)) == (-a, b, False)
    assert loop_operator_action(a, b, cocycle_c1(L)) == (a, -b, False)
    assert loop_operator_action(a, b, cocycle_c1(L) + cocycle_c2(L)) == (-a, -b, False)
    assert loop_operator_action(a, b, coboundary(random_vertex_set(rng, L))) == (a, b, False)
    # Z2: two applications restore the label
    a1, b1, _ = loop_operator_action(a, b, cocycle_c2(L))
    assert loop_operator_action(a1, b1, cocycle_c2(L))[:2] == (a, b)


def test_loop_operator_action_errors():
    with pytest.raises(ValueError):
        loop_operator_action(1, 1, Chain.from_indices(4, 1, DUAL, [0]))
    with pytest.raises(ValueError):
        loop_operator_action(1, 1, Chain.zero(4, 0, DUAL))


def test_flipped_background_holonomy():
    g = flipped_background(pi_flux_background(8), cocycle_c2(8))
    assert g.holonomies() == (-1, 1)
    assert np.all(g.fluxes() == -1)


def test_gauge_between(rng):
    L = 6
    g = pi_flux_background(L)
    lam = random_vertex_set(rng, L)
    h = gauge_transform(g, lam.indices.tolist())
    chi = gauge_between(g, h)
    assert chi is not None
    assert gauge_transform(g, np.flatnonzero(chi).tolist()) == h
    assert gauge_between(g, pi_flux_background(L, -1, 1)) is None


@pytest.mark.parametrize("r, size", [(1, 1), (2, 9), (3, 25)])
def test_square_disk(r, size):
    L = 8
    lat = Lattice(L)
    disk = square_disk(L, lat.vertex(0, 0), r)
    assert len(disk) == size
    assert lat.vertex(0, 0) in disk
    assert len(coboundary(vertex_set(L, disk))) == 4 * (2 * r - 1)


@pytest.fixture(scope="module")
def braid8():
    L = 8
    lat = Lattice(L)
    return braiding_phase_free(lat.vertex(0, 0), lat.vertex(L // 2, 0), pi_flux_background(L))


def test_braiding_free_sign(braid8):
    assert braid8.factor == -1
    assert braid8.crossing_parity == 1
    assert braid8.ratio.real < 0
    assert abs(braid8.ratio) <= 1 + 1e-9
    assert braid8.ratio == pytest.approx(braid8.factor * braid8.correction)


def test_braiding_free_snapshot(braid8):
    assert braid8.ratio == pytest.approx(-0.9745090689201903 - 0.005499688515651477j, abs=1e-8)


def test_braiding_rejects_short_distance():
    lat = Lattice(8)
    with pytest.raises(ValueError):
        braiding_phase_free(lat.vertex(0, 0), lat.vertex(2, 0), pi_flux_background(8))
