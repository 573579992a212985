import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from heatline.errors import ConfigurationError, ValidationError
from heatline.heat import (
    HeatDistribution,
    ProtocolInstance,
    average_heat,
    characteristic_direct,
    characteristic_from_distribution,
    landauer_report,
    moment,
    random_instance,
    relative_entropy,
    swap_unitary,
    tpm_distribution,
    von_neumann_entropy,
)
from heatline.operators import (
    HermitianOperator,
    HilbertSpace,
    UnitaryOperator,
    basis_state,
    evolution,
    identity,
    maximally_mixed,
    random_density,
    random_hermitian,
    tensor,
)

P_SWAP = 1 / (1 + math.exp(-1))


def swap_instance():
    h = HermitianOperator(np.diag([0.0, 1.0]), HilbertSpace.single(2, "R"))
    return ProtocolInstance(swap_unitary(2), h, 1.0, basis_state(HilbertSpace.single(2, "S"), 1))


def local_instance(seed=0, s=0.8):
    rng = np.random.default_rng(seed)
    h = random_hermitian(3, rng, HilbertSpace.single(3, "R"))
    u = tensor(evolution(h, s), identity(HilbertSpace.single(2, "S")))
    return ProtocolInstance(u, h, 0.9, random_density(2, rng, HilbertSpace.single(2, "S")))


def identity_instance(seed=0):
    rng = np.random.default_rng(seed)
    h = random_hermitian(3, rng, HilbertSpace.single(3, "R"))
    return ProtocolInstance(identity(HilbertSpace.of(("R", 3), ("S", 2))), h, 1.3,
                            random_density(2, rng, HilbertSpace.single(2, "S")))


def test_identity_single_atom():
    dist = tpm_distribution(identity_instance())
    assert dist.atoms == [(0.0, pytest.approx(1.0, abs=1e-12))]
    assert average_heat(identity_instance()) == pytest.approx(0.0, abs=1e-14)


def test_swap_example_enumerated():
    # four (m, n) outcomes by hand: the reservoir always ends in |1>
    dist = tpm_distribution(swap_instance())
    q = [a[0] for a in dist.atoms]
    assert q == pytest.approx([0.0, 1.0])
    assert dist.probability_at(1.0) == pytest.approx(P_SWAP, abs=1e-12)
    assert dist.probability_at(0.0) == pytest.approx(1 - P_SWAP, abs=1e-12)
    assert average_heat(swap_instance()) == pytest.approx(P_SWAP, abs=1e-12)
    assert moment(dist, 1) == pytest.approx(P_SWAP, abs=1e-12)


def brute_force_distribution(inst):
    """Non-degenerate TPM by enumerating eigenvectors; no projector completion."""
    e, v = np.linalg.eigh(inst.reservoir_h.matrix)
    w = np.exp(-inst.beta * (e - e.min()))
    w /= w.sum()
    d_r, d_s = inst.dim_r, inst.dim_s
    u = inst.protocol.matrix
    rho_s = inst.system_state.matrix
    atoms = {}
    for m in range(d_r):
        pm = np.outer(v[:, m], v[:, m].conj())
        out = u @ np.kron(pm, rho_s) @ u.conj().T
        red = np.einsum("iaja->ij", out.reshape(d_r, d_s, d_r, d_s))
        for n in range(d_r):
            prob = w[m] * np.real(v[:, n].conj() @ red @ v[:, n])
            atoms[(e[n] - e[m])] = atoms.get(e[n] - e[m], 0.0) + prob
    return atoms


def test_random_instance_matches_brute_force():
    inst = random_instance(np.random.default_rng(42), 3, 2, beta=0.8)
    dist = tpm_distribution(inst)
    atoms = brute_force_distribution(inst)
    assert len(dist) == len([p for p in atoms.values() if p > 1e-12])
    for q, p in atoms.items():
        assert dist.probability_at(q) == pytest.approx(p, abs=1e-12)


def test_degenerate_spectrum_is_normalized():
    h = HermitianOperator(np.diag([0.0, 1.0, 1.0]), HilbertSpace.single(3, "R"))
    rng = np.random.default_rng(5)
    u = UnitaryOperator(scipy.stats.unitary_group.rvs(6, random_state=rng), HilbertSpace.of(("R", 3), ("S", 2)))
    inst = ProtocolInstance(u, h, 0.4, maximally_mixed(HilbertSpace.single(2, "S")))
    dist = tpm_distribution(inst)
    assert dist.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert sorted(a[0] for a in dist.atoms) == pytest.approx([-1.0, 0.0, 1.0])
    assert moment(dist, 1) == pytest.approx(average_heat(inst), abs=1e-12)


def test_reservoir_local_protocol_has_no_heat():
    assert average_heat(local_instance()) == pytest.approx(0.0, abs=1e-12)


def test_characteristic_basics():
    inst = random_instance(np.random.default_rng(7), 3, 3)
    assert characteristic_direct(inst, 0.0) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(characteristic_direct(identity_instance(), np.linspace(-3, 3, 7)), 1.0,
                               atol=1e-12)


def test_characteristic_matches_fourier_sum():
    inst = random_instance(np.random.default_rng(9), 4, 2)
    theta = characteristic_direct(inst, 0.3)
    expected = sum(p * np.exp(1j * 0.3 * q) for q, p in brute_force_distribution(inst).items())
    assert abs(theta - expected) < 1e-10


def test_characteristic_from_distribution_examples():
    assert characteristic_from_distribution(HeatDistribution([0.0], [1.0]), 2.7) == pytest.approx(1.0)
    sym = HeatDistribution([-1.0, 1.0], [0.5, 0.5])
    ts = np.linspace(0, 5, 11)
    np.testing.assert_allclose(characteristic_from_distribution(sym, ts), np.cos(ts), atol=1e-15)
    swap = tpm_distribution(swap_instance())
    assert characteristic_from_distribution(swap, 1.0) == pytest.approx(
        (1 - P_SWAP) + P_SWAP * np.exp(1j), abs=1e-12)


def test_moments():
    assert moment(tpm_distribution(identity_instance()), 3) == pytest.approx(0.0, abs=1e-14)
    sym = HeatDistribution([-1.0, 1.0], [0.5, 0.5])
    assert moment(sym, 1) == pytest.approx(0.0)
    assert moment(sym, 2) == pytest.approx(1.0)


def test_first_moment_by_finite_difference():
    inst = random_instance(np.random.default_rng(11), 3, 2)
    d = 1e-5
    fd = (characteristic_direct(inst, d) - characteristic_direct(inst, -d)).imag / (2 * d)
    assert moment(tpm_distribution(inst), 1) == pytest.approx(fd, abs=1e-6)


def test_distribution_validation():
    with pytest.raises(ValidationError):
        HeatDistribution([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValidationError):
        HeatDistribution([0.0, 1.0], [1.1, -0.1])
    # float noise below 1e-12 is clipped
    dist = HeatDistribution([0.0, 1.0], [1.0 + 5e-13, -5e-13])
    assert dist.p.min() == 0.0


def test_dimension_mismatch():
    h = HermitianOperator(np.diag([0.0, 1.0]))
    with pytest.raises(ConfigurationError):
        ProtocolInstance(identity(6), h, 1.0, basis_state(2, 0))


def test_landauer_identity_protocol_zero():
    rep = landauer_report(identity_instance())
    for value in (rep.average_heat, rep.beta_q, rep.entropy_decrease, rep.slack,
                  rep.mutual_information, rep.relative_entropy):
        assert abs(value) < 1e-10


def test_landauer_local_protocol_zero():
    rep = landauer_report(local_instance())
    assert rep.entropy_decrease == pytest.approx(0.0, abs=1e-10)
    assert rep.slack == pytest.approx(rep.relative_entropy, abs=1e-10)
    assert rep.slack == pytest.approx(0.0, abs=1e-10)


def _entropy(m):
    w = np.linalg.eigvalsh(m)
    w = w[w > 1e-15]
    return float(-(w * np.log(w)).sum())


def test_landauer_swap_independent_arithmetic():
    # rho' = SWAP (rho_R (x) |1><1|) SWAP = |1><1| (x) rho_R
    p = P_SWAP
    rho_r = np.diag([p, 1 - p])
    out = np.kron(np.diag([0.0, 1.0]), rho_r)
    r_out = np.einsum("iaja->ij", out.reshape(2, 2, 2, 2))
    s_out = np.einsum("aiaj->ij", out.reshape(2, 2, 2, 2))
    mi = _entropy(r_out) + _entropy(s_out) - _entropy(out)
    # D(|1><1| || rho_R) = -log(1 - p)
    d = -math.log(1 - p)
    rep = landauer_report(swap_instance())
    assert rep.mutual_information == pytest.approx(mi, abs=1e-12)
    assert rep.relative_entropy == pytest.approx(d, abs=1e-12)
    assert rep.slack == pytest.approx(mi + d, abs=1e-10)
    assert rep.entropy_decrease == pytest.approx(0.0 - _entropy(rho_r), abs=1e-12)
    assert rep.holds()


def test_landauer_infinite_temperature_flag():
    inst = random_instance(np.random.default_rng(2), 2, 2, beta=0.0)
    rep = landauer_report(inst)
    assert rep.infinite_temperature
    assert abs(rep.decomposition_residual) < 1e-8


def test_entropy_helpers():
    assert von_neumann_entropy(maximally_mixed(4)) == pytest.approx(math.log(4))
    assert relative_entropy(basis_state(2, 0), basis_state(2, 1)) == math.inf


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d_r=st.integers(2, 4), d_s=st.integers(2, 4),
       beta=st.floats(0.0, 5.0))
def test_random_instance_properties(seed, d_r, d_s, beta):
    inst = random_instance(np.random.default_rng(seed), d_r, d_s, beta=beta)
    dist = tpm_distribution(inst)
    assert abs(dist.p.sum() - 1) < 1e-10
    assert abs(moment(dist, 1) - average_heat(inst)) < 1e-10
    ts = np.linspace(-4, 4, 9)
    theta = characteristic_direct(inst, ts)
    assert np.max(np.abs(theta)) <= 1 + 1e-12
    np.testing.assert_allclose(theta[::-1], theta.conj(), atol=1e-12)
    rep = landauer_report(inst)
    assert rep.slack >= -1e-9
    assert abs(rep.decomposition_residual) < 1e-8
