"""Rank tests that decide which loss applies to which model regime.

First-order distinguishability asks whether h0 stays linearly independent of
the bump density and its parameter gradients; it holds for a Cauchy reference
against a Gaussian bump and fails when h0 equals the bump at some point.
Second-order strong identifiability additionally needs the second derivatives
independent; the Gaussian location-scale family fails it through the heat
identity d2f/dmu2 = 2 df/dsigma, and the test recovers that null direction.
"""

import numpy as np

from deviate import (
    GaussianFamily,
    StudentTFamily,
    check_first_order_distinguishability,
    check_preset_names,
    check_second_order_identifiability,
    cosine_alignment,
    gaussian_density,
    preset_check,
    standard_cauchy_density,
)

fam = GaussianFamily(1)

rep = check_first_order_distinguishability(
    standard_cauchy_density(1), fam, [fam.point(2.5, 0.25)]
)
print(f"cauchy h0 vs gaussian bump : {rep.verdict} "
      f"(s_min={rep.singular_values[-1]:.2e})")

rep = check_first_order_distinguishability(
    gaussian_density(0.0, 1.0), fam, [fam.point(0.0, 1.0)]
)
print(f"h0 equal to bump at anchor : {rep.verdict} "
      f"(s_min={rep.singular_values[-1]:.2e})")

second = check_second_order_identifiability(fam, [fam.point(0.0, 1.0)])
pattern = np.zeros(len(second.column_labels))
for i, label in enumerate(second.column_labels):
    if label.startswith("df/dsigma"):
        pattern[i] = 2.0
    elif label.startswith("d2f/dmu2"):
        pattern[i] = -1.0
cos = cosine_alignment(second.null_direction, pattern)
print(f"gaussian loc-scale order 2 : {second.verdict} "
      f"(heat-null cosine {cos:.6f})")

t3 = check_second_order_identifiability(StudentTFamily(1, 3), [fam.point(0.0, 1.0)])
print(f"student-t3 loc-scale order 2: {t3.verdict}")

print()
print("shipped presets:")
for name in check_preset_names():
    cfg = preset_check(name)
    rep = (
        check_first_order_distinguishability(cfg["h0"], cfg["family"], cfg["points"])
        if cfg["order"] == 1
        else check_second_order_identifiability(cfg["family"], cfg["points"])
    )
    print(f"  {name:18s} order {cfg['order']} -> {rep.verdict}")
