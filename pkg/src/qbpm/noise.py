"""Seeded noise injection: Gaussian pixel noise and gate-level noise.

Random streams are derived from one master seed with
``numpy.random.SeedSequence([seed, *keys])``; each evaluation that draws
noise owns its generator, so results do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .circuit import CircuitProgram
from .exceptions import ConfigError
from .statevector import ENTANGLING, GateOp, PhaseNoise

MODES = ("pixel", "gate", "phase")


@dataclass(frozen=True)
class NoiseConfig:
    """Noise settings. A mode only acts when listed in ``modes``."""

    pixel_sigma: float = 0.01
    pixel_factor: float = 0.5
    gate_sigma: float = 0.01
    phase_sigma: float = 0.01
    modes: tuple = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        modes = tuple(sorted(set(self.modes)))
        bad = set(modes) - set(MODES)
        if bad:
            raise ConfigError(f"unknown noise mode(s): {sorted(bad)}")
        object.__setattr__(self, "modes", modes)
        for name in ("pixel_sigma", "gate_sigma", "phase_sigma", "pixel_factor"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite value >= 0, got {value}")

    @property
    def pixel_enabled(self) -> bool:
        return "pixel" in self.modes

    @property
    def gate_enabled(self) -> bool:
        return "gate" in self.modes

    @property
    def phase_enabled(self) -> bool:
        return "phase" in self.modes

    @property
    def any_enabled(self) -> bool:
        return bool(self.modes)

    def with_modes(self, *modes) -> "NoiseConfig":
        return replace(self, modes=tuple(modes))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modes"] = list(self.modes)
        return d

    @classmethod
    def from_dict(cls, d) -> "NoiseConfig":
        if d is None:
            return cls()
        if isinstance(d, NoiseConfig):
            return d
        known = {"pixel_sigma", "pixel_factor", "gate_sigma", "phase_sigma", "modes", "seed"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown noise key(s): {sorted(extra)}")
        kw = dict(d)
        if isinstance(kw.get("modes"), str):
            kw["modes"] = [m for m in kw["modes"].replace(",", " ").split() if m]
        kw["modes"] = tuple(kw.get("modes", ()))
        return cls(**kw)


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in keys]]))


def pixel_noise_draws(shape, config: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Raw pre-clamp Gaussian draws g ~ N(0, pixel_sigma**2)."""
    return rng.normal(0.0, config.pixel_sigma, size=shape)


def add_pixel_noise(image, config: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Return ``clip(image + pixel_factor * g, 0, 1)``."""
    image = np.asarray(image, dtype=np.float64)
    if config.pixel_factor == 0 or config.pixel_sigma == 0:
        return image.copy()
    g = pixel_noise_draws(image.shape, config, rng)
    return np.clip(image + config.pixel_factor * g, 0.0, 1.0)


def perturb_gate_angles(resolved_angles, gate_kind: str, config: NoiseConfig, rng: np.random.Generator):
    """Add fresh N(0, gate_sigma**2) draws to each angle of a parameterised gate."""
    angles = np.asarray(resolved_angles, dtype=np.float64)
    if config.gate_sigma == 0:
        return angles.copy()
    return angles + rng.normal(0.0, config.gate_sigma, size=angles.shape)


def inject_phase_noise(program: CircuitProgram, config: NoiseConfig) -> CircuitProgram:
    """Insert ``RZ(eps)`` on the target after every CX/CY/CCX.

    ``eps`` is a :class:`PhaseNoise` binding, so it is sampled each time the
    circuit is evaluated rather than fixed here.
    """
    gates = []
    for g in program.gates:
        gates.append(g)
        if g.kind in ENTANGLING:
            gates.append(GateOp("RZ", (g.target,), (PhaseNoise(float(config.phase_sigma)),)))
    return CircuitProgram(program.n_qubits, tuple(gates))
