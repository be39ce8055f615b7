"""Placement-variant window copies: wrong-side wear and upside-down wear.

Axis inversion mirrors the motion signal the way swapping the device to
the contralateral limb does: the x axis flips for arm-worn data and the y
axis flips for leg-worn data.  Sensor rotation simulates upside-down wear
as a 180-degree rotation about the sensor x axis, mapping (x, y, z) to
(x, -y, -z).  Both transforms are involutions and commute.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable, Sequence

from .core import Limb, Provenance, TriaxialWindow, compose_provenance
from .ingest import WindowedDataset

DEFAULT_POLICY: tuple[Provenance, ...] = (Provenance.INVERTED, Provenance.ROTATED)

# Canonical block order of augmented copies in a dataset.
_POLICY_ORDER: tuple[Provenance, ...] = (
    Provenance.INVERTED,
    Provenance.ROTATED,
    Provenance.INVERTED_ROTATED,
)


def invert_axis(w: TriaxialWindow) -> TriaxialWindow:
    """Flip the wrong-side-wear axis: x for arm windows, y for leg windows."""
    xyz = w.xyz.copy()
    axis = 0 if w.meta.limb == Limb.ARM else 1
    xyz[:, axis] = -xyz[:, axis]
    prov = w.meta.provenance
    meta = replace(
        w.meta, provenance=compose_provenance(not prov.is_inverted, prov.is_rotated)
    )
    return TriaxialWindow(meta, w.times, xyz)


def rotate_180_x(w: TriaxialWindow) -> TriaxialWindow:
    """Rotate the sensor frame half a turn about x: (x, y, z) -> (x, -y, -z)."""
    xyz = w.xyz.copy()
    xyz[:, 1] = -xyz[:, 1]
    xyz[:, 2] = -xyz[:, 2]
    prov = w.meta.provenance
    meta = replace(
        w.meta, provenance=compose_provenance(prov.is_inverted, not prov.is_rotated)
    )
    return TriaxialWindow(meta, w.times, xyz)


def transform_window(w: TriaxialWindow, variant: Provenance) -> TriaxialWindow:
    """Produce the named placement variant of an original window."""
    if variant == Provenance.ORIGINAL:
        return w
    out = w
    if variant.is_rotated:
        out = rotate_180_x(out)
    if variant.is_inverted:
        out = invert_axis(out)
    return out


def normalize_policy(policy: Iterable[Provenance | str] | None) -> tuple[Provenance, ...]:
    """Canonicalize a policy: drop Original, dedupe, fixed block order."""
    if policy is None:
        return DEFAULT_POLICY
    wanted = {Provenance(p) for p in policy}
    return tuple(p for p in _POLICY_ORDER if p in wanted)


def augment_dataset(
    d: WindowedDataset, policy: Sequence[Provenance | str] | None = None
) -> WindowedDataset:
    """Append one transformed copy of every window per enabled variant.

    Output order is the original block followed by one block per variant
    in the order inverted, rotated, inverted_rotated.  Labels, subjects,
    limbs, and sides are preserved, so grouped cross-validation keeps a
    window's variants in the same fold as the window itself.
    """
    variants = normalize_policy(policy)
    windows = list(d.windows)
    for variant in variants:
        windows.extend(transform_window(w, variant) for w in d.windows)
    return WindowedDataset(tuple(windows), d.label_set, d.expected_length)
