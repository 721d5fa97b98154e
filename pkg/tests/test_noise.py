import numpy as np
import pytest

from helpers import random_state
from qbpm.ansatz import build_pqc1
from qbpm.circuit import run_circuit
from qbpm.exceptions import BindingError, ConfigError
from qbpm.gradient import evaluate_expectations
from qbpm.noise import (
    NoiseConfig,
    add_pixel_noise,
    inject_phase_noise,
    perturb_gate_angles,
    pixel_noise_draws,
    stream,
)
from qbpm.statevector import PhaseNoise, Statevector


class TestConfig:
    def test_defaults(self):
        cfg = NoiseConfig()
        assert (cfg.pixel_sigma, cfg.pixel_factor, cfg.gate_sigma, cfg.phase_sigma) == (0.01, 0.5, 0.01, 0.01)
        assert not cfg.any_enabled

    def test_modes(self):
        cfg = NoiseConfig().with_modes("phase", "gate")
        assert cfg.gate_enabled and cfg.phase_enabled and not cfg.pixel_enabled

    def test_round_trip(self):
        cfg = NoiseConfig(gate_sigma=0.2, modes=("gate",), seed=7)
        assert NoiseConfig.from_dict(cfg.to_dict()) == cfg

    def test_modes_string(self):
        assert NoiseConfig.from_dict({"modes": "pixel, gate"}).modes == ("gate", "pixel")

    @pytest.mark.parametrize("bad", [{"modes": ["thermal"]}, {"gate_sigma": -1.0}, {"colour": 1}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            NoiseConfig.from_dict(bad)


class TestPixelNoise:
    def test_zero_sigma_is_identity(self):
        x = np.linspace(0, 1, 20)
        out = add_pixel_noise(x, NoiseConfig(pixel_sigma=0.0), stream(0))
        np.testing.assert_array_equal(out, x)
        assert out is not x

    def test_formula(self):
        x = np.full(1000, 0.5)
        cfg = NoiseConfig(pixel_sigma=0.1, pixel_factor=0.5)
        draws = pixel_noise_draws(x.shape, cfg, stream(3, 1))
        np.testing.assert_array_equal(add_pixel_noise(x, cfg, stream(3, 1)), np.clip(x + 0.5 * draws, 0, 1))

    def test_clamped(self):
        x = np.array([0.0, 1.0] * 500)
        out = add_pixel_noise(x, NoiseConfig(pixel_sigma=0.5, pixel_factor=1.0), stream(0))
        assert out.min() >= 0 and out.max() <= 1

    def test_draw_statistics(self):
        draws = pixel_noise_draws(1_000_000, NoiseConfig(), stream(11))
        assert abs(draws.std() - 0.01) / 0.01 < 0.01
        assert abs(draws.mean()) < 1e-4

    def test_deterministic(self):
        x = np.random.default_rng(0).random(50)
        a = add_pixel_noise(x, NoiseConfig(), stream(5, 2))
        b = add_pixel_noise(x, NoiseConfig(), stream(5, 2))
        np.testing.assert_array_equal(a, b)
        c = add_pixel_noise(x, NoiseConfig(), stream(6, 2))
        assert not np.array_equal(a, c)


class TestGateNoise:
    def test_zero_sigma_unchanged(self):
        angles = np.array([[0.1, 0.2, 0.3]])
        np.testing.assert_array_equal(perturb_gate_angles(angles, "U3", NoiseConfig(gate_sigma=0), stream(0)), angles)

    def test_zero_sigma_circuit_equals_noiseless(self):
        rng = np.random.default_rng(1)
        prog = build_pqc1(3, 1)
        theta = rng.uniform(0, 6, 9)
        psi = random_state(rng, 3)
        cfg = NoiseConfig(gate_sigma=0.0, modes=("gate",))
        noisy = evaluate_expectations(prog, theta, psi, rng=stream(0), noise=cfg)
        np.testing.assert_array_equal(noisy, evaluate_expectations(prog, theta, psi))

    def test_fresh_draws_per_row(self):
        prog = build_pqc1(2, 1)
        cfg = NoiseConfig(gate_sigma=0.1, modes=("gate",))
        angles = prog.resolve_angles(np.zeros(6), rows=4, rng=stream(0), noise=cfg)
        assert len({tuple(r) for r in angles.round(12)}) == 4
        assert np.all(angles.std(axis=0) > 0)

    def test_shared_slot_gets_independent_draws(self):
        prog = build_pqc1(2, 1)
        cfg = NoiseConfig(gate_sigma=0.1, modes=("gate",))
        angles = prog.resolve_angles(np.zeros(6), rows=1, rng=stream(0), noise=cfg)[0]
        cols = [prog.column_of(gi, pos) for gi, pos in prog.occurrences(0)]
        assert len(set(angles[cols])) == 3

    def test_needs_generator(self):
        cfg = NoiseConfig(gate_sigma=0.1, modes=("gate",))
        with pytest.raises(BindingError):
            build_pqc1(2, 1).resolve_angles(np.zeros(6), noise=cfg)

    def test_seeded_reproducible(self):
        prog = build_pqc1(3, 1)
        cfg = NoiseConfig(gate_sigma=0.05, modes=("gate",))
        psi = Statevector(3, random_state(np.random.default_rng(2), 3))
        a = run_circuit(prog, np.ones(9), psi, rng=stream(4, 0), noise=cfg)
        b = run_circuit(prog, np.ones(9), psi, rng=stream(4, 0), noise=cfg)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)


class TestPhaseNoise:
    def test_insertion_sites(self):
        prog = build_pqc1(3, 1)
        noisy = inject_phase_noise(prog, NoiseConfig(phase_sigma=0.02))
        entanglers = sum(prog.count(k) for k in ("CX", "CY", "CCX"))
        assert len(noisy) == len(prog) + entanglers
        for i, g in enumerate(noisy.gates[:-1]):
            if g.kind in ("CX", "CY", "CCX"):
                nxt = noisy.gates[i + 1]
                assert nxt.kind == "RZ" and nxt.qubits == (g.target,)
                assert nxt.angles == (PhaseNoise(0.02),)

    def test_zero_sigma_equals_noiseless(self):
        rng = np.random.default_rng(3)
        prog = build_pqc1(3, 1)
        theta = rng.uniform(0, 6, 9)
        psi = random_state(rng, 3)
        noisy = inject_phase_noise(prog, NoiseConfig(phase_sigma=0.0))
        np.testing.assert_allclose(evaluate_expectations(noisy, theta, psi),
                                   evaluate_expectations(prog, theta, psi), atol=1e-13)

    def test_sampled_per_evaluation(self):
        prog = inject_phase_noise(build_pqc1(2, 1), NoiseConfig(phase_sigma=0.1))
        rng = stream(0)
        a = prog.resolve_angles(np.zeros(6), rng=rng)
        b = prog.resolve_angles(np.zeros(6), rng=rng)
        assert not np.array_equal(a, b)

    def test_phase_angles_skip_gate_noise(self):
        prog = inject_phase_noise(build_pqc1(2, 1), NoiseConfig(phase_sigma=0.0))
        cfg = NoiseConfig(gate_sigma=0.3, modes=("gate",))
        angles = prog.resolve_angles(np.zeros(6), rng=stream(0), noise=cfg)[0]
        for gi, g in enumerate(prog.gates):
            if g.kind == "RZ":
                assert angles[prog.column_of(gi, 0)] == 0.0


class TestStreams:
    def test_keys_separate_streams(self):
        assert stream(0, 1).random() != stream(0, 2).random()
        assert stream(0, 1).random() == stream(0, 1).random()

    def test_negative_seed_accepted(self):
        stream(-1, 0).random()
