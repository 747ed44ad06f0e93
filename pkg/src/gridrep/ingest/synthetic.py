"""Deterministic synthetic stand-in for a satellite archive plus event labels.

Each event is switched on for a randomly chosen ``round(f * n_days)`` days,
where ``f`` is its frequency in the 2013-2016 record. Every day gets an
analytic brightness scene with one signature per active event:

* NWPTC: compact bright vortex (core plus ring) over the south-east ocean
* FT: a bright SW-NE oriented linear band across mid latitudes
* NE: brightness ramp increasing towards the northern edge
* SWF: broad brightening of the south-west quadrant
* HR: 6-12 small bright convective cells around the central region

Scene parameters depend only on (seed, day), so generating the same seed
at two resolutions yields the same weather sampled on two grids.
"""

from datetime import datetime, timedelta, timezone

import numpy as np

from ..errors import InvalidInputError
from ..numerics import SeededRng
from .frames import GridFrame
from .labels import EVENTS, LabelTable

RESOLUTIONS = (64, 128, 256, 512)
# counts / 1461 days
EVENT_FREQUENCIES = {"FT": 244 / 1461, "NE": 471 / 1461, "SWF": 406 / 1461,
                     "HR": 520 / 1461, "NWPTC": 702 / 1461}
BOX = (0.0, 60.0, 100.0, 160.0)  # lat_min, lat_max, lon_min, lon_max
START = datetime(2013, 1, 1, tzinfo=timezone.utc)
NOISE_SD = 0.03


def _blob(u, v, cu, cv, radius):
    return np.exp(-((u - cu) ** 2 + (v - cv) ** 2) / (2.0 * radius ** 2))


def _scene(params, res, noise_rng):
    centers = (np.arange(res) + 0.5) / res
    u = centers[None, :]
    v = centers[::-1][:, None]
    img = 0.18 + 0.12 * v + np.zeros((res, res))
    for cu, cv, r, amp in params["clouds"]:
        img += amp * _blob(u, v, cu, cv, r)
    if "NWPTC" in params:
        cu, cv, r = params["NWPTC"]
        dist = np.sqrt((u - cu) ** 2 + (v - cv) ** 2)
        img += 0.55 * np.exp(-(dist / r) ** 2) + 0.2 * np.exp(-((dist - 1.8 * r) / (0.5 * r)) ** 2)
    if "FT" in params:
        offset, angle, width = params["FT"]
        # signed distance from the line through (0.5, offset) at the given angle
        d = (v - offset - np.tan(angle) * (u - 0.5)) * np.cos(angle)
        img += 0.4 * np.exp(-(d / width) ** 2)
    if "NE" in params:
        img += params["NE"] * np.clip((v - 0.45) / 0.55, 0.0, 1.0)
    if "SWF" in params:
        img += params["SWF"] * _blob(u, v, 0.25, 0.25, 0.2)
    if "HR" in params:
        for cu, cv in params["HR"]:
            img += 0.45 * _blob(u, v, cu, cv, 0.025)
    img += noise_rng.normal((res, res)) * NOISE_SD
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _day_params(rng, flags):
    p = {"clouds": [(rng.uniform(), rng.uniform(), rng.uniform(0.05, 0.15), rng.uniform(0.0, 0.12))
                    for _ in range(4)]}
    if flags["NWPTC"]:
        p["NWPTC"] = (rng.uniform(0.5, 0.9), rng.uniform(0.15, 0.45), rng.uniform(0.04, 0.07))
    if flags["FT"]:
        p["FT"] = (rng.uniform(0.45, 0.6), rng.uniform(0.3, 0.6), rng.uniform(0.03, 0.05))
    if flags["NE"]:
        p["NE"] = rng.uniform(0.2, 0.3)
    if flags["SWF"]:
        p["SWF"] = rng.uniform(0.25, 0.35)
    if flags["HR"]:
        count = int(rng.integers(6, 13))
        p["HR"] = [(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)) for _ in range(count)]
    return p


def generate_synthetic(n_days, resolution, seed):
    """Return ``(frames, labels)`` for ``n_days`` consecutive 00Z days."""
    if n_days < 20:
        raise InvalidInputError(f"n_days must be >= 20, got {n_days}")
    if resolution not in RESOLUTIONS:
        raise InvalidInputError(f"resolution must be one of {RESOLUTIONS}, got {resolution}")
    root = SeededRng(seed)
    flags = np.zeros((n_days, len(EVENTS)), dtype=np.uint8)
    for j, name in enumerate(EVENTS):
        count = int(round(EVENT_FREQUENCIES[name] * n_days))
        flags[root.child(0, j).permutation(n_days)[:count], j] = 1
    frames, dates = [], []
    for day in range(n_days):
        when = START + timedelta(days=day)
        day_flags = dict(zip(EVENTS, flags[day]))
        params = _day_params(root.child(1, day), day_flags)
        values = _scene(params, resolution, root.child(2, day, resolution))
        frames.append(GridFrame(when.strftime("%Y-%m-%dT%H:%M:%SZ"), *BOX, values, scaled=True))
        dates.append(when.strftime("%Y-%m-%d"))
    return frames, LabelTable(tuple(dates), flags)
