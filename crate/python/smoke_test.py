#!/usr/bin/env python3
"""Smoke test for the `ictus` extension module.

Build the module first, then run this script:

    cargo build -p ictus-py
    python3 python/smoke_test.py
"""

import math
import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_ictus():
    for profile in ("debug", "release"):
        built = os.path.join(REPO, "target", profile, "libictus.so")
        if os.path.exists(built):
            stage = tempfile.mkdtemp(prefix="ictus-py-")
            shutil.copy(built, os.path.join(stage, "ictus.so"))
            sys.path.insert(0, stage)
            import ictus

            return ictus
    sys.exit("libictus.so not found; run `cargo build -p ictus-py` first")


def approx_equal(a, b, tol=1e-10):
    return abs(a - b) <= tol


def main():
    ictus = import_ictus()

    # Hand-checkable encoder matrices.
    rp = ictus.recurrence_plot([0.0, 0.5, 1.0])
    assert rp == [[0.0, 0.5, 1.0], [0.5, 0.0, 0.5], [1.0, 0.5, 0.0]], rp

    gaf = ictus.gramian_angular_field([1.0, 0.0, -1.0])
    assert approx_equal(gaf[0][0], 1.0) and approx_equal(gaf[0][2], -1.0), gaf
    assert approx_equal(gaf[1][1], -1.0), gaf

    mtf = ictus.markov_transition_field([0.0, 1.0, 0.0, 1.0], 2)
    assert mtf == [
        [0.0, 1.0, 0.0, 1.0],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [1.0, 0.0, 1.0, 0.0],
    ], mtf

    size, pixels = ictus.encode_image([0.0, 0.5, 1.0], "rp")
    assert size == 3 and len(pixels) == 27 and pixels[0] == 0, (size, pixels[:9])

    # Filtering: a 10 Hz tone passes the band, DC is blocked.
    fs = 256.0
    tone = [math.sin(2 * math.pi * 10 * t / fs) for t in range(int(fs) * 8)]
    out = ictus.bandpass_filter(tone, 0.5, 100.0, 4, fs)
    tail = out[-int(fs) :]
    rms = math.sqrt(sum(v * v for v in tail) / len(tail))
    assert abs(rms - 1 / math.sqrt(2)) < 0.05, rms
    dc = ictus.bandpass_filter([1.0] * int(fs) * 8, 0.5, 100.0, 4, fs)
    assert abs(dc[-1]) < 1e-3, dc[-1]

    notched = ictus.notch_filter(
        [math.sin(2 * math.pi * 50 * t / fs) for t in range(int(fs) * 8)], 50.0, 2.0, fs
    )
    assert abs(notched[-1]) < 1e-2, notched[-1]

    assert ictus.normalize([2.0, -4.0, 1.0]) == [0.5, -1.0, 0.25]

    # Forecast math on a step stream: quiet minute, then certainty.
    probs = [0.0] * 60 + [1.0] * 240
    first, likelihood = ictus.smooth_likelihood(probs)
    assert first == 59 and approx_equal(likelihood[-1], 1.0)
    binary = [1.0 if v > 0.5 else 0.0 for v in likelihood]
    ffirst, fp = ictus.firing_power(binary, first, 1)
    assert ffirst == first + 59 and approx_equal(fp[-1], 1.0), (ffirst, fp[-1])
    alarms = ictus.forecast_alarms(probs, 0.5, 0.5, 1)
    assert len(alarms) == 1 and alarms[0][0] == 121.0, alarms

    assert approx_equal(ictus.sensitivity(2, 1), 2 / 3)
    assert approx_equal(ictus.fpr_per_hour(3, 1.5), 2.0)

    zs, ys = ictus.threshold_grids()
    assert len(zs) == 18 and len(ys) == 8
    assert approx_equal(zs[0], 0.05) and approx_equal(ys[-1], 0.9)

    try:
        ictus.encode_image([1.0, 2.0], "xyz")
    except ValueError:
        pass
    else:
        raise AssertionError("bad encoder kind should raise ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
