import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from dqpt_sim.constants import DEFAULT_CONSTANTS, TWO_PI
from dqpt_sim.hamiltonian import (
    MAGIC_ANGLE,
    CarbonSite,
    FieldQuenchBuilder,
    FieldSchedule,
    PairGeometry,
    QuenchSpec,
    build_central_quench_h1,
    build_conditioned_hamiltonian,
    build_dipolar_full,
    build_dipolar_secular,
    build_field_quench_pair,
    build_full_hamiltonian,
    check_eigenstate,
    dipolar_prefactor,
    field_at,
    literature_dataset,
    make_chain_geometry,
    nuclear_zeeman,
    point_dipole_tensor,
    position_from_row,
)
from dqpt_sim.spin import SpinRegister, basis_state, spin_half_operators, total_iz

GAMMA_N = TWO_PI * 1.07e3
BETA12 = TWO_PI * 2e3
# beta at r = 0.154 nm, theta = 0 from CODATA mu0, hbar and gamma_n; frozen
BETA_0154NM = 26101.8498


def hermitian_defect(h):
    return np.max(np.abs(h - h.conj().T)) / max(1.0, np.max(np.abs(h)))


def pair_ops():
    ix, iy, iz, ip, im = spin_half_operators()
    e = np.eye(2)
    one = [np.kron(o, e) for o in (ix, iy, iz, ip, im)]
    two = [np.kron(e, o) for o in (ix, iy, iz, ip, im)]
    return one, two


def eq8(beta12, bx, bz):
    """Two-spin secular Hamiltonian plus Zeeman, written out directly."""
    (x1, y1, z1, p1, m1), (x2, y2, z2, p2, m2) = pair_ops()
    return 0.5 * beta12 * (p1 @ m2 + m1 @ p2 - 4 * z1 @ z2) + GAMMA_N * (bx * (x1 + x2) + bz * (z1 + z2))


def cartesian_dipolar(r, theta, phi):
    """Point-dipole coupling k[I1.I2 - 3(I1.u)(I2.u)] built from Cartesian components."""
    (x1, y1, z1, _, _), (x2, y2, z2, _, _) = pair_ops()
    u = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    k = sc.mu_0 / (4 * math.pi) * sc.hbar * (GAMMA_N * 1e4) ** 2 / r ** 3
    i1, i2 = (x1, y1, z1), (x2, y2, z2)
    dot = sum(a @ b for a, b in zip(i1, i2))
    proj1 = sum(c * a for c, a in zip(u, i1))
    proj2 = sum(c * a for c, a in zip(u, i2))
    return k * (dot - 3 * proj1 @ proj2)


# ---------------------------------------------------------------- geometry

def test_prefactor_frozen_value():
    beta = dipolar_prefactor(0.154e-9, 0.0)
    assert beta == pytest.approx(BETA_0154NM, rel=1e-9)
    assert beta / TWO_PI == pytest.approx(4.2e3, rel=0.02)


def test_prefactor_independent_arithmetic():
    r = 0.3e-9
    expected = 2 * sc.mu_0 / (4 * math.pi) * sc.hbar * (GAMMA_N * 1e4) ** 2 / r ** 3
    assert dipolar_prefactor(r, 0.0) == pytest.approx(expected, rel=1e-12)


def test_prefactor_magic_angle_and_sign():
    assert abs(dipolar_prefactor(0.2e-9, MAGIC_ANGLE)) < 1e-9
    assert dipolar_prefactor(0.2e-9, MAGIC_ANGLE - 0.1) > 0
    assert dipolar_prefactor(0.2e-9, MAGIC_ANGLE + 0.1) < 0


def test_prefactor_scaling():
    r = 0.25e-9
    assert dipolar_prefactor(r, 0.3) / dipolar_prefactor(2 * r, 0.3) == pytest.approx(8.0, rel=1e-12)


def test_prefactor_rejects_bad_r():
    with pytest.raises(ValueError):
        dipolar_prefactor(0.0, 0.0)
    with pytest.raises(ValueError):
        PairGeometry(1, 2, -1e-10)


def test_from_coupling_round_trip():
    p = PairGeometry.from_coupling(1, 2, BETA12)
    assert p.beta12 == pytest.approx(BETA12, rel=1e-12)
    assert p.r == pytest.approx(1.5595e-10, rel=1e-4)
    q = PairGeometry.from_coupling(1, 2, -BETA12)
    assert q.beta12 == pytest.approx(-BETA12, rel=1e-12)


def test_from_positions():
    p = PairGeometry.from_positions(1, 2, (0, 0, 0), (0, 1e-10, 0))
    assert p.r == pytest.approx(1e-10)
    assert p.theta == pytest.approx(math.pi / 2)
    assert p.phi == pytest.approx(math.pi / 2)


def test_chain_geometry():
    assert len(make_chain_geometry(2, BETA12)) == 1
    pairs = make_chain_geometry(3, BETA12)
    assert [(p.i, p.j) for p in pairs] == [(1, 2), (2, 3)]
    eight = make_chain_geometry(8, BETA12)
    assert len(eight) == 7
    assert build_dipolar_secular(eight, SpinRegister(8)).shape == (256, 256)
    assert all(p.beta12 == pytest.approx(BETA12) for p in eight)
    with pytest.raises(ValueError):
        make_chain_geometry(1, BETA12)


def test_three_spin_chain_matches_written_out_form():
    ix, iy, iz, ip, im = spin_half_operators()
    e = np.eye(2)

    def at(op, k):
        mats = [e, e, e]
        mats[k] = op
        return np.kron(np.kron(mats[0], mats[1]), mats[2])

    expected = sum(0.5 * BETA12 * (at(ip, a) @ at(im, b) + at(im, a) @ at(ip, b) - 4 * at(iz, a) @ at(iz, b))
                   for a, b in ((0, 1), (1, 2)))
    got = build_dipolar_secular(make_chain_geometry(3, BETA12), SpinRegister(3))
    assert np.allclose(got, expected, rtol=0, atol=1e-9)


# ---------------------------------------------------------------- dipolar builders

def test_full_dipolar_matches_cartesian_oracle():
    rng = np.random.default_rng(11)
    reg = SpinRegister(2)
    for _ in range(20):
        r, th, ph = rng.uniform(1e-10, 5e-10), rng.uniform(0, math.pi), rng.uniform(-math.pi, math.pi)
        got = build_dipolar_full([PairGeometry(1, 2, r, th, ph)], reg)
        ref = cartesian_dipolar(r, th, ph)
        assert hermitian_defect(got) < 1e-12
        assert np.max(np.abs(got - ref)) < 1e-12 * np.max(np.abs(ref))


def test_full_dipolar_magic_angle_keeps_only_cdef():
    reg = SpinRegister(2)
    h = build_dipolar_full([PairGeometry(1, 2, 2e-10, MAGIC_ANGLE, 0.0)], reg)
    diag = np.diag(h)
    # A and B are the only terms acting within the total-Iz sector
    sectors = np.diag(total_iz(reg))
    block = h[np.ix_(sectors == 0, sectors == 0)]
    assert np.max(np.abs(diag)) < 1e-9 and np.max(np.abs(block)) < 1e-9
    assert np.max(np.abs(h)) > 1.0


def test_full_equals_secular_at_theta_zero():
    pairs = [PairGeometry(1, 2, 1.8e-10), PairGeometry(2, 3, 2.2e-10)]
    reg = SpinRegister(3)
    full = build_dipolar_full(pairs, reg)
    sec = build_dipolar_secular(pairs, reg)
    assert np.max(np.abs(full - sec)) < 1e-12 * np.max(np.abs(sec))


def test_secular_spectrum_and_conservation():
    reg = SpinRegister(2)
    h = build_dipolar_secular([PairGeometry.from_coupling(1, 2, BETA12)], reg)
    up, dn = np.array([1, 0]), np.array([0, 1])
    states = {
        "dd": np.kron(dn, dn), "uu": np.kron(up, up),
        "singlet": (np.kron(up, dn) - np.kron(dn, up)) / math.sqrt(2),
        "triplet0": (np.kron(up, dn) + np.kron(dn, up)) / math.sqrt(2),
    }
    expected = {"dd": -BETA12 / 2, "uu": -BETA12 / 2, "singlet": 0.0, "triplet0": BETA12}
    for k, v in states.items():
        assert np.allclose(h @ v, expected[k] * v, atol=1e-9)
    assert np.max(np.abs(h @ total_iz(reg) - total_iz(reg) @ h)) < 1e-12


def test_invalid_pair_index():
    with pytest.raises(IndexError):
        build_dipolar_secular([PairGeometry(1, 3, 2e-10)], SpinRegister(2))
    with pytest.raises(IndexError):
        build_dipolar_full([PairGeometry(0, 1, 2e-10)], SpinRegister(2))


# ---------------------------------------------------------------- conditioned Hamiltonians

def test_conditioned_ms0_zero_field_is_secular():
    pairs = make_chain_geometry(2, BETA12)
    reg = SpinRegister(2)
    assert np.allclose(build_conditioned_hamiltonian(0, (), (0, 0), pairs, reg), build_dipolar_secular(pairs, reg))


def test_conditioned_ms0_is_written_out_form():
    pairs = make_chain_geometry(2, BETA12)
    got = build_conditioned_hamiltonian(0, (), (100.0, 50.0), pairs, SpinRegister(2))
    assert np.max(np.abs(got - eq8(BETA12, 100.0, 50.0))) < 1e-9


def test_field_quench_pair():
    pairs = make_chain_geometry(2, BETA12)
    reg = SpinRegister(2)
    h0, h1 = build_field_quench_pair(pairs, (0.0, 0.0), reg)
    assert np.allclose(h1, 0)
    h0, h1 = build_field_quench_pair(pairs, (100.0, 50.0), reg)
    assert np.array_equal(h0 + h1, build_conditioned_hamiltonian(0, (), (100.0, 50.0), pairs, reg))
    # largest eigenvalue of gamma_n B.(I1 + I2) is gamma_n |B|
    assert np.max(np.linalg.eigvalsh(h1)) == pytest.approx(GAMMA_N * math.hypot(100, 50), rel=1e-12)
    dd = basis_state("↓↓", reg)
    assert np.allclose(h0 @ dd, -BETA12 / 2 * dd)
    with pytest.raises(ValueError):
        build_field_quench_pair([], (1, 1), SpinRegister(1))


def test_conditioned_bx0_commutes_with_total_iz():
    reg = SpinRegister(3)
    h = build_conditioned_hamiltonian(0, (), (0.0, 37.0), make_chain_geometry(3, BETA12), reg)
    assert np.max(np.abs(h @ total_iz(reg) - total_iz(reg) @ h)) < 1e-12 * np.max(np.abs(h))


def test_conditioned_errors():
    reg = SpinRegister(2)
    with pytest.raises(ValueError):
        build_conditioned_hamiltonian(2, (), (0, 0), [], reg)
    with pytest.raises(ValueError):
        build_conditioned_hamiltonian(1, (), (0, 0), [], reg)


def test_central_h1_matches_per_site_form():
    ds = literature_dataset("dreau")
    reg = SpinRegister(2)
    (x1, y1, z1, p1, m1), (x2, y2, z2, p2, m2) = pair_ops()
    s1, s2 = ds.site(1), ds.site(2)
    expected = (s1.hyperfine_zz * z1 + 0.5 * s1.a_ani * (p1 * np.exp(-1j * s1.phi) + m1 * np.exp(1j * s1.phi))
                + s2.hyperfine_zz * z2 + 0.5 * s2.a_ani * (p2 * np.exp(-1j * s2.phi) + m2 * np.exp(1j * s2.phi)))
    assert np.allclose(build_central_quench_h1(ds.sites, 1, reg), expected)
    assert np.allclose(build_central_quench_h1(ds.sites, -1, reg), -expected)
    # ms = +1 conditioned Hamiltonian carries the same hyperfine part
    cond = build_conditioned_hamiltonian(1, ds.sites, (0, 0), [], reg)
    assert np.allclose(cond, expected)


def test_central_h1_without_transverse_part_is_diagonal():
    sites = (CarbonSite(1, hyperfine_row=(0.0, 0.0, -1e5)), CarbonSite(2, hyperfine_row=(0.0, 0.0, 2e5)))
    h = build_central_quench_h1(sites, 1, SpinRegister(2))
    assert np.allclose(h, np.diag(np.diag(h)))
    assert check_eigenstate(h, basis_state("↓↓", SpinRegister(2))) == pytest.approx(np.diag(h)[3].real)


def test_central_h1_rejects_ms0():
    with pytest.raises(ValueError):
        build_central_quench_h1(literature_dataset("dreau").sites, 0, SpinRegister(2))


# ---------------------------------------------------------------- full model

def test_full_hamiltonian_zero_field_spectrum():
    reg = SpinRegister(2, include_electron=True)
    far = (CarbonSite(1, hyperfine_row=(0.0, 0.0, 0.0)),)
    h = build_full_hamiltonian(far, (0.0, 0.0), [], reg)
    w = np.sort(np.linalg.eigvalsh(h))
    assert np.allclose(w[:4], 0) and np.allclose(w[4:], DEFAULT_CONSTANTS.D)


def test_full_hamiltonian_ms0_block_is_conditioned_form():
    reg = SpinRegister(2, include_electron=True)
    pairs = [PairGeometry.from_positions(1, 2, (3e-10, 0, 1e-9), (3e-10, 1e-10, 1.1e-9))]
    sites = (CarbonSite(1, position=(3e-10, 0, 1e-9)), CarbonSite(2, position=(3e-10, 1e-10, 1.1e-9)))
    h = build_full_hamiltonian(sites, (100.0, 50.0), pairs, reg)
    assert hermitian_defect(h) < 1e-12
    block = h[4:8, 4:8]
    nuc = SpinRegister(2)
    expected = nuclear_zeeman((100.0, 50.0), nuc) + build_dipolar_full(pairs, nuc)
    assert np.max(np.abs(block - expected)) < 1e-9


def test_full_hamiltonian_needs_electron():
    with pytest.raises(ValueError):
        build_full_hamiltonian((), (0, 0), [], SpinRegister(2))


# ---------------------------------------------------------------- hyperfine geometry and data

def test_point_dipole_tensor_traceless_symmetric():
    t = point_dipole_tensor((1e-9, 2e-10, -4e-10))
    assert abs(np.trace(t)) < 1e-9 * np.max(np.abs(t))
    assert np.allclose(t, t.T)


@settings(max_examples=100, deadline=None)
@given(r=st.floats(3e-10, 3e-9), theta=st.floats(0.05, math.pi / 2 - 0.05), phi=st.floats(-3.1, 3.1))
def test_position_from_row_round_trip(r, theta, phi):
    pos = (r * math.sin(theta) * math.cos(phi), r * math.sin(theta) * math.sin(phi), r * math.cos(theta))
    row = point_dipole_tensor(pos)[2]
    back = position_from_row(row)
    assert np.allclose(point_dipole_tensor(back)[2], row, rtol=1e-8, atol=1e-6 * np.max(np.abs(row)))


def test_literature_dataset_values():
    dreau = literature_dataset("dreau")
    assert dreau.site(1).a_ani == pytest.approx(TWO_PI * 128e3)
    assert dreau.site(2).a_ani == pytest.approx(TWO_PI * 19e3)
    assert dreau.site(1).hyperfine_zz == pytest.approx(TWO_PI * -27e3)
    assert dreau.site(2).hyperfine_zz == pytest.approx(TWO_PI * -28e3)
    niz = literature_dataset("nizovtsev")
    assert niz.site(2).hyperfine_zz == pytest.approx(TWO_PI * 1.884e6)
    assert niz.site(1).hyperfine_zz == pytest.approx(TWO_PI * 2.281e6)
    assert niz.site(1).a_ani == pytest.approx(TWO_PI * 0.240e6)
    assert niz.site(2).a_ani == pytest.approx(TWO_PI * 0.208e6)
    assert len(niz) == 2
    assert set(literature_dataset()) >= {"dreau", "nizovtsev"}
    with pytest.raises(KeyError):
        literature_dataset("nope")


def test_site_from_position_gives_tensor_row():
    pos = (1e-9, 0.0, 1e-9)
    site = CarbonSite(1, position=pos)
    assert np.allclose(site.row(), point_dipole_tensor(pos)[2])
    assert site.a_ani == pytest.approx(math.hypot(*site.row()[:2]))


# ---------------------------------------------------------------- field schedules

def test_field_at_examples():
    osc = FieldSchedule.oscillating(50.0, 50.0, 4e-6, 50.0)
    assert field_at(osc, 0.0) == (pytest.approx(100.0), 50.0)
    g = FieldSchedule.gaussian(200.0, 7e-6, 3.5e-6, 50.0)
    assert field_at(g, 7e-6)[0] == pytest.approx(200.0)
    assert field_at(g, 7e-6 + 10 * 3.5e-6)[0] <= 200.0 * math.exp(-50) * (1 + 1e-12)
    const = FieldSchedule.constant(100.0, 50.0)
    bx, bz = field_at(const, np.linspace(0, 1e-6, 5))
    assert np.allclose(bx, 100.0) and bz == 50.0
    assert const.is_static and not g.is_static


def test_schedule_validation():
    with pytest.raises(ValueError):
        FieldSchedule.oscillating(50, 50, 0.0, 50)
    with pytest.raises(ValueError):
        FieldSchedule.gaussian(200, 1e-6, -1.0, 50)
    with pytest.raises(ValueError):
        FieldSchedule("sawtooth", 50)


def test_builder_batch_matches_call():
    reg = SpinRegister(3)
    b = FieldQuenchBuilder(make_chain_geometry(3, BETA12), FieldSchedule.oscillating(50, 50, 5e-6, 50), reg)
    ts = np.linspace(0, 10e-6, 7)
    stack = b.batch(ts)
    for t, h in zip(ts, stack):
        assert np.allclose(h, b(t))
        assert hermitian_defect(h) < 1e-12


def test_gaussian_builder_with_zero_amplitude_is_field_free():
    reg = SpinRegister(2)
    pairs = make_chain_geometry(2, BETA12)
    b = FieldQuenchBuilder(pairs, FieldSchedule.gaussian(0.0, 1e-6, 1e-6, 0.0), reg)
    assert np.allclose(b(0.7e-6), build_dipolar_secular(pairs, reg))


# ---------------------------------------------------------------- quench specs

def test_quench_spec_validation():
    spec = QuenchSpec("central", sites=literature_dataset("dreau").sites)
    assert spec.kind.value == "central"
    with pytest.raises(ValueError):
        QuenchSpec("central", ms_target=0)
    with pytest.raises(ValueError):
        QuenchSpec("field")
    with pytest.raises(ValueError):
        QuenchSpec("unknown")


def test_check_eigenstate_detects_non_eigenstate():
    reg = SpinRegister(2)
    h = eq8(BETA12, 100.0, 50.0)
    with pytest.raises(ValueError):
        check_eigenstate(h, basis_state("↓↓", reg))
    w, v = np.linalg.eigh(h)
    assert check_eigenstate(h, v[:, 0]) == pytest.approx(w[0])
