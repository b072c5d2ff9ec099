"""Regenerate the bundled NYCC-like and SC03-like speed traces.

The official EPA traces are not redistributed here. These stand-ins are
stitched from micro-trips (idle, smooth acceleration, cruise with ripple,
smooth braking) and rescaled so that each matches the public summary of its
namesake: duration, mean speed over 600 s and peak speed. Drop the official
CSVs into ``src/battcool/data/cycles`` to replace them.

    python scripts/make_synthetic_cycles.py
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "battcool" / "data" / "cycles"

# (idle before trip [s], peak [km/h], accel [s], cruise [s], decel [s])
NYCC_TRIPS = [
    (12, 18, 9, 6, 8), (20, 30, 12, 10, 10), (14, 44.6, 16, 14, 14), (25, 22, 9, 7, 9),
    (18, 33, 12, 12, 11), (11, 16, 7, 5, 7), (22, 38, 14, 16, 12), (16, 26, 10, 8, 9),
    (19, 20, 8, 6, 8), (15, 35, 13, 14, 12), (17, 24, 9, 9, 9), (20, 14, 6, 4, 6),
]
SC03_TRIPS = [
    (15, 52, 20, 38, 16), (18, 88.2, 38, 62, 28), (20, 45, 16, 33, 14),
    (16, 68, 26, 50, 20), (14, 40, 15, 26, 13), (10, 58, 22, 36, 18),
]
TARGETS = {
    # name: (trips, duration, mean km/h over 600 s, peak km/h, ripple km/h, seed)
    "nycc": (NYCC_TRIPS, 598, 11.40, 44.6, 4.0, 1),
    "sc03": (SC03_TRIPS, 596, 34.58, 88.2, 8.0, 3),
}


def ramp(v0, v1, n):
    s = np.arange(1, n + 1) / n
    return v0 + (v1 - v0) * 0.5 * (1 - np.cos(np.pi * s))


def build(trips, duration, ripple, seed):
    rng = np.random.default_rng(seed)
    v = [0.0]
    for idle, peak, acc, cruise, dec in trips:
        v += [0.0] * idle
        v += list(ramp(0.0, peak, acc))
        phase = rng.uniform(0, 2 * np.pi)
        k = np.arange(cruise)
        v += list(peak - ripple * (1 - np.cos(2 * np.pi * k / max(cruise, 1) + phase)) / 2)
        v += list(ramp(v[-1], 0.0, dec))
    v = np.array(v)
    if len(v) > duration:
        raise ValueError(f"trips last {len(v)} s, longer than {duration} s")
    return np.concatenate([v, np.zeros(duration - len(v))])


def fit(trips, duration, mean600, peak, ripple, seed):
    v = build(trips, duration, ripple, seed)
    # stretch speeds above zero so the 600 s mean matches while the peak stays put
    target_sum = mean600 * 600
    lo, hi = 0.0, 3.0
    for _ in range(200):
        g = 0.5 * (lo + hi)
        w = peak * (v / peak) ** g
        if w.sum() > target_sum:
            lo = g
        else:
            hi = g
    return np.round(peak * (v / peak) ** (0.5 * (lo + hi)), 4)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (trips, duration, mean600, peak, ripple, seed) in TARGETS.items():
        v = fit(trips, duration, mean600, peak, ripple, seed)
        with (OUT / f"{name}.csv").open("w") as f:
            f.write(
                f"# Synthetic {name.upper()}-like trace, not the official EPA schedule. "
                f"Matched to duration {duration} s, 600 s mean {mean600} km/h, peak {peak} km/h. "
                "Generated by scripts/make_synthetic_cycles.py\n"
            )
            f.write("time_s,speed_kmh\n")
            for i, x in enumerate(v):
                f.write(f"{i},{x:.4f}\n")
        print(name, len(v), v.sum() / 600, v.max())


if __name__ == "__main__":
    main()
