from __future__ import annotations

import numpy as np
import pytest

from limbwise.core import Limb, Provenance, Side, TriaxialWindow, WindowMeta


def make_window(
    xyz,
    subject: str = "s00",
    limb: Limb = Limb.ARM,
    side: Side = Side.LEFT,
    label: str = "null",
    rate: float = 50.0,
    t0: float = 0.0,
    provenance: Provenance = Provenance.ORIGINAL,
) -> TriaxialWindow:
    xyz = np.asarray(xyz, dtype=np.float64)
    times = t0 + np.arange(xyz.shape[0]) / rate
    meta = WindowMeta(subject, limb, side, label, provenance)
    return TriaxialWindow(meta, times, xyz)


def random_windows(n: int, length: int = 50, seed: int = 0, limb: Limb = Limb.ARM):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        xyz = rng.normal(scale=1.5, size=(length, 3))
        out.append(
            make_window(
                xyz,
                subject=f"s{i % 7:02d}",
                limb=limb,
                side=Side.LEFT if i % 2 == 0 else Side.RIGHT,
                label="null" if i % 3 == 0 else "jogging",
                t0=float(i),
            )
        )
    return out


@pytest.fixture
def window_factory():
    return make_window
