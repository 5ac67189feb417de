"""Tests for backend.noise_models"""
import math

import numpy as np
import pytest

from backend.channels import (DensityMatrix, apply_channel, compose_channels, kraus_to_chi, numerical_rank,
                              process_fidelity)
from backend.errors import ConfigError
from backend.noise_models import (NoiseSpec, amplitude_damping_channel, dephasing_channel, depolarizing_channel,
                                  noise_channel, noisy_gate, rotation_gate)

ZERO = DensityMatrix.from_ket([1, 0])
ONE = DensityMatrix.from_ket([0, 1])
PLUS = DensityMatrix.from_ket([1, 1])


def chi_distance(a, b):
    return np.linalg.norm(kraus_to_chi(a).matrix - kraus_to_chi(b).matrix)


class TestStandardChannels:

    def test_zero_depolarizing_is_identity(self, identity_chi):
        assert np.allclose(kraus_to_chi(depolarizing_channel(0.0)).matrix, identity_chi.matrix)

    def test_weak_depolarizing_on_ground_state(self):
        out = apply_channel(depolarizing_channel(0.01), ZERO)
        assert np.allclose(out.matrix, np.diag([0.995, 0.005]))

    def test_depolarizing_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            depolarizing_channel(1.5)

    def test_damping_population(self):
        out = apply_channel(amplitude_damping_channel(20.0, 1.0), ONE)
        assert out.matrix[1, 1].real == pytest.approx(math.exp(-0.05))

    def test_damping_needs_positive_t1(self):
        with pytest.raises(ValueError, match="T1 must be positive"):
            amplitude_damping_channel(0.0, 1.0)

    def test_dephasing_keeps_populations(self):
        rho = DensityMatrix(np.diag([0.3, 0.7]).astype(complex))
        out = apply_channel(dephasing_channel(50.0, 100.0, 1.0), rho)
        assert np.allclose(out.matrix, rho.matrix)

    def test_dephasing_coherence(self):
        out = apply_channel(dephasing_channel(50.0, 100.0, 1.0), PLUS)
        assert out.matrix[0, 1].real == pytest.approx(0.5 * math.exp(-0.015))

    def test_unphysical_t2(self):
        with pytest.raises(ValueError, match="unphysical"):
            dephasing_channel(250.0, 100.0, 1.0)

    def test_relaxation_decays_coherence_at_t2(self):
        out = apply_channel(noise_channel(NoiseSpec.relaxation(100.0, 50.0)), PLUS)
        assert out.matrix[0, 1].real == pytest.approx(0.5 * math.exp(-1.0 / 50.0))

    @pytest.mark.parametrize("channel", [
        depolarizing_channel(0.3),
        amplitude_damping_channel(10.0, 2.0),
        dephasing_channel(40.0, 100.0, 3.0),
        rotation_gate(0.7, (0.0, 0.6, 0.8)),
    ])
    def test_trace_preserving(self, channel):
        assert channel.tp_residual() < 1e-10


class TestRotations:

    def test_zero_angle_is_identity(self, identity_chi):
        assert np.allclose(kraus_to_chi(rotation_gate(0.0, (0, 0, 1))).matrix, identity_chi.matrix)

    def test_pi_about_xz_is_hadamard(self, hadamard):
        r2 = 1 / math.sqrt(2)
        chi = kraus_to_chi(rotation_gate(math.pi, (r2, 0.0, r2)))
        assert process_fidelity(chi, kraus_to_chi(hadamard)) == pytest.approx(1.0)

    def test_pi_about_x_flips(self):
        out = apply_channel(rotation_gate(math.pi, (1, 0, 0)), ZERO)
        assert out.matrix[1, 1].real == pytest.approx(1.0)

    def test_rotation_and_inverse(self, identity_chi):
        axis = (0.0, 0.6, 0.8)
        k = compose_channels(rotation_gate(0.9, axis), rotation_gate(-0.9, axis))
        assert process_fidelity(kraus_to_chi(k), identity_chi) == pytest.approx(1.0)

    def test_axis_must_be_unit(self):
        with pytest.raises(ValueError, match="unit 3-vector"):
            rotation_gate(1.0, (1, 1, 0))


class TestNoisyGate:

    def test_identity_spec_returns_ideal(self, hadamard):
        assert noisy_gate(hadamard, NoiseSpec.identity()) is hadamard

    def test_relaxed_hadamard(self, hadamard):
        noisy = noisy_gate(hadamard, NoiseSpec.relaxation(100.0, 50.0))
        assert numerical_rank(kraus_to_chi(noisy)) > 1
        assert process_fidelity(kraus_to_chi(noisy), kraus_to_chi(hadamard)) < 1.0
        assert noisy.tp_residual() < 1e-10

    def test_depolarizing_commutes_with_unitaries(self):
        gate = rotation_gate(1.1, (0.0, 0.6, 0.8))
        after = noisy_gate(gate, NoiseSpec.depolarizing(0.1))
        before = noisy_gate(gate, NoiseSpec(kind="depolarizing", gamma=0.1, order="before"))
        assert chi_distance(after, before) < 1e-10

    def test_damping_order_matters(self, hadamard):
        after = noisy_gate(hadamard, NoiseSpec.damping(5.0))
        before = noisy_gate(hadamard, NoiseSpec(kind="amplitude_damping", t1=5.0, order="before"))
        assert chi_distance(after, before) > 1e-3

    def test_two_qubit_gate_gets_local_noise(self, cnot):
        noisy = noisy_gate(cnot, NoiseSpec.depolarizing(0.05))
        assert noisy.dim == 4
        assert noisy.rank == 16


class TestNoiseSpec:

    def test_validate_reports_field_paths(self):
        spec = NoiseSpec(kind="composite", children=(NoiseSpec.depolarizing(1.5),))
        assert spec.validate("scenario.init_noise") == [
            "scenario.init_noise.children[0].gamma: depolarizing probability must lie in [0, 1]"
        ]

    def test_t2_above_twice_t1(self):
        spec = NoiseSpec(kind="dephasing", t1=10.0, t2=30.0)
        assert any("unphysical" in issue for issue in spec.validate())

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="unknown fields"):
            NoiseSpec.from_dict({"kind": "depolarizing", "gamma": 0.1, "strength": 2})

    def test_composite_from_dict(self):
        spec = NoiseSpec.from_dict({
            "kind": "composite",
            "children": [{"kind": "amplitude_damping", "t1": 100}, {"kind": "dephasing", "t1": 100, "t2": 50}],
        })
        assert chi_distance(noise_channel(spec), noise_channel(NoiseSpec.relaxation(100.0, 50.0))) < 1e-12

    def test_composite_kraus_set_stays_minimal(self):
        spec = NoiseSpec(kind="composite", children=(NoiseSpec.depolarizing(0.1), NoiseSpec.depolarizing(0.2)))
        channel = noise_channel(spec)
        assert channel.rank == 4
        assert channel.tp_residual() < 1e-10

    def test_empty_mapping_is_identity(self):
        assert NoiseSpec.from_dict(None).is_identity
        assert not NoiseSpec.depolarizing(0.01).is_identity

    def test_invalid_spec_cannot_build(self):
        with pytest.raises(ConfigError, match="kind"):
            noise_channel(NoiseSpec(kind="bitflip"))
