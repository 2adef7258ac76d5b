#!/usr/bin/env python3
"""Independent pixel-coverage oracle for the rasterizer tests.

Counts, with plain Python interval arithmetic and no rasterization at
all, how many half-integer pixel centers fall inside an axis-aligned
rectangle framed exactly the way the renderer frames geometry:

    scale = (1 - 2 * margin) * resolution / max(width, height)
    px    = (x - cx) * scale + resolution / 2
    py    = resolution / 2 - (y - cy) * scale

For every case below the rectangle edges land strictly between pixel
centers, so the count is fill-rule independent: strict-interior and
closed-boundary counts agree, which is asserted.  Output is frozen to
tests/oracles/pixel_coverage.json; rerun this script only to
regenerate.
"""

import json
import math
import os


def centers_in_interval(lo: float, hi: float, resolution: int) -> tuple[int, int]:
    """(strictly inside, inside-or-on-boundary) pixel-center counts."""
    strict = 0
    loose = 0
    for i in range(resolution):
        c = i + 0.5
        if lo < c < hi:
            strict += 1
        if lo <= c <= hi:
            loose += 1
    return strict, loose


def framed_rect_coverage(width: float, height: float, resolution: int, margin: float) -> dict:
    scale = (1.0 - 2.0 * margin) * resolution / max(width, height)
    half = resolution / 2.0
    # Rectangle centered on its own midpoint, so image-space edges are
    # symmetric around resolution/2 on both axes.
    x_lo, x_hi = half - scale * width / 2.0, half + scale * width / 2.0
    y_lo, y_hi = half - scale * height / 2.0, half + scale * height / 2.0
    xs_strict, xs_loose = centers_in_interval(x_lo, x_hi, resolution)
    ys_strict, ys_loose = centers_in_interval(y_lo, y_hi, resolution)
    assert xs_strict == xs_loose and ys_strict == ys_loose, (
        "an edge landed on a pixel center; pick different dimensions"
    )
    covered = xs_strict * ys_strict
    return {
        "width": width,
        "height": height,
        "resolution": resolution,
        "margin": margin,
        "covered": covered,
        "fraction": covered / float(resolution * resolution),
        "analytic_fraction": (width * height * scale * scale)
        / float(resolution * resolution),
    }


def main() -> None:
    cases = {
        "unit_square_512_margin05": framed_rect_coverage(1.0, 1.0, 512, 0.05),
        "rect_2x1_512_margin05": framed_rect_coverage(1.0, 0.5, 512, 0.05),
        "unit_square_128_margin05": framed_rect_coverage(1.0, 1.0, 128, 0.05),
        "unit_square_512_margin10": framed_rect_coverage(1.0, 1.0, 512, 0.10),
    }
    # The headline number: (1 - 2*0.05)^2 = 0.81 of the frame area.
    assert abs(cases["unit_square_512_margin05"]["analytic_fraction"] - 0.81) < 1e-12
    assert abs(cases["unit_square_512_margin05"]["fraction"] - 0.81) < 0.01

    out = os.path.join(
        os.path.dirname(__file__), "..", "..", "tests", "oracles", "pixel_coverage.json"
    )
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(cases, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {os.path.normpath(out)}")
    for name, case in sorted(cases.items()):
        print(f"  {name}: covered={case['covered']} fraction={case['fraction']:.6f}")


if __name__ == "__main__":
    main()
