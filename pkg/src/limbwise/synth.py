"""Synthetic labeled accelerometer streams for dataset-free testing.

Each non-null class gets a distinct triaxial signature: its own sinusoid
frequency, amplitude, and axis mixing direction.  The null class is
low-amplitude noise around a resting gravity vector.  Subjects perturb
amplitude, frequency, and phase with seeded jitter, so grouped
cross-validation sees realistic between-subject variation while classes
stay separable.
"""

from __future__ import annotations

import numpy as np

from .core import ConfigError, Limb, Side
from .ingest import SensorStream

_GOLDEN = 2.399963229728653  # golden angle, spreads axis mixes around the sphere


def _class_signatures(classes: tuple[str, ...]) -> list[dict]:
    sigs = []
    rank = 0
    for name in classes:
        if name.lower() == "null":
            sigs.append({"name": name, "null": True})
            continue
        freq = 2.0 + (1.7 * rank) % 21.0
        amp = 0.6 + 0.25 * (rank % 5)
        theta = _GOLDEN * (rank + 1)
        mix = np.array([np.cos(theta), np.sin(theta), 0.6 + 0.1 * (rank % 3)])
        mix /= np.linalg.norm(mix)
        sigs.append({"name": name, "null": False, "freq": freq, "amp": amp, "mix": mix})
        rank += 1
    return sigs


def synth_generate(
    n_subjects: int,
    classes: tuple[str, ...] | list[str],
    rate: float = 50.0,
    seconds_per_class: float = 60.0,
    seed: int = 0,
) -> list[SensorStream]:
    """Generate labeled streams for every subject, limb, and side.

    Every stream concatenates one block per class, each
    rate * seconds_per_class samples long, with continuous timestamps.
    The same arguments always produce identical streams.
    """
    if n_subjects < 1:
        raise ConfigError("n_subjects must be at least 1")
    classes = tuple(classes)
    if not classes:
        raise ConfigError("at least one class is required")
    n_block = int(round(rate * seconds_per_class))
    if n_block < 1:
        raise ConfigError("rate * seconds_per_class must be at least 1")

    rng = np.random.default_rng(seed)
    sigs = _class_signatures(classes)
    gravity = np.array([0.0, 0.0, 1.0])
    total = n_block * len(classes)
    times = np.arange(total, dtype=np.float64) / float(rate)

    streams: list[SensorStream] = []
    for s in range(n_subjects):
        subject = f"subj{s:02d}"
        amp_jitter = 1.0 + 0.05 * rng.uniform(-1.0, 1.0)
        freq_jitter = 0.1 * rng.uniform(-1.0, 1.0)
        for limb in (Limb.ARM, Limb.LEG):
            limb_gain = 1.0 if limb == Limb.ARM else 0.8
            for side in (Side.LEFT, Side.RIGHT):
                side_gain = 1.0 + 0.03 * rng.uniform(-1.0, 1.0)
                xyz = np.empty((total, 3), dtype=np.float64)
                labels: list[str] = []
                for ci, sig in enumerate(sigs):
                    lo = ci * n_block
                    hi = lo + n_block
                    t = times[lo:hi]
                    if sig["null"]:
                        block = gravity + rng.normal(0.0, 0.05, size=(n_block, 3))
                    else:
                        phase = rng.uniform(0.0, 2.0 * np.pi)
                        freq = sig["freq"] + freq_jitter
                        amp = sig["amp"] * amp_jitter * limb_gain * side_gain
                        wave = amp * np.sin(2.0 * np.pi * freq * t + phase)
                        block = (
                            gravity
                            + wave[:, None] * sig["mix"][None, :]
                            + rng.normal(0.0, 0.03, size=(n_block, 3))
                        )
                    xyz[lo:hi] = block
                    labels.extend([sig["name"]] * n_block)
                streams.append(
                    SensorStream(
                        subject=subject,
                        limb=limb,
                        side=side,
                        times=times,
                        xyz=xyz,
                        labels=tuple(labels),
                    )
                )
    return streams
