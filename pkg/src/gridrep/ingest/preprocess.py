"""Crop, unit rescaling and bilinear resizing of frames."""

import numpy as np

from ..errors import InvalidInputError


def _centers(lo, hi, count, descending=False):
    step = (hi - lo) / count
    centers = lo + (np.arange(count) + 0.5) * step
    return centers[::-1] if descending else centers


def crop_to_box(frame, lat0, lat1, lon0, lon1):
    """Keep the rows/columns whose cell centers lie in the closed box.

    The returned frame's bounds are the outer edges of the retained cells.
    """
    lat0, lat1 = sorted((lat0, lat1))
    lon0, lon1 = sorted((lon0, lon1))
    h, w = frame.values.shape
    lat_c = _centers(frame.lat_min, frame.lat_max, h, descending=True)
    lon_c = _centers(frame.lon_min, frame.lon_max, w)
    rows = np.flatnonzero((lat_c >= lat0) & (lat_c <= lat1))
    cols = np.flatnonzero((lon_c >= lon0) & (lon_c <= lon1))
    if rows.size == 0 or cols.size == 0:
        raise InvalidInputError(
            f"box lat [{lat0}, {lat1}] lon [{lon0}, {lon1}] contains no cell centers of "
            f"frame {frame.timestamp}")
    dlat = (frame.lat_max - frame.lat_min) / h
    dlon = (frame.lon_max - frame.lon_min) / w
    values = frame.values[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    return frame.with_values(
        values,
        lat_max=frame.lat_max - rows[0] * dlat,
        lat_min=frame.lat_max - (rows[-1] + 1) * dlat,
        lon_min=frame.lon_min + cols[0] * dlon,
        lon_max=frame.lon_min + (cols[-1] + 1) * dlon,
    )


def rescale_unit(frame):
    """Divide raw 0-255 brightness values by 255.

    Not idempotent; callers track ``frame.scaled`` and apply it once.
    """
    v = frame.values
    bad = np.flatnonzero(~np.isfinite(v) | (v < 0) | (v > 255))
    if bad.size:
        r, c = divmod(int(bad[0]), v.shape[1])
        raise InvalidInputError(
            f"frame {frame.timestamp}: value {v[r, c]!r} at row {r}, col {c} outside [0, 255]")
    return frame.with_values(v.astype(np.float64) / 255.0, scaled=True)


def _axis_weights(n_in, n_out):
    # align-corners: source = i * (n_in - 1) / (n_out - 1)
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(pos).astype(np.intp), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_array(values, out_h, out_w):
    """Align-corners bilinear resampling of a 2-D array (float64 result)."""
    if out_h < 1 or out_w < 1:
        raise InvalidInputError(f"output size must be positive, got {out_h}x{out_w}")
    src = np.asarray(values, dtype=np.float64)
    if src.shape == (out_h, out_w):
        return src.copy()
    r0, r1, fr = _axis_weights(src.shape[0], out_h)
    c0, c1, fc = _axis_weights(src.shape[1], out_w)
    top = src[r0][:, c0] * (1 - fc) + src[r0][:, c1] * fc
    bottom = src[r1][:, c0] * (1 - fc) + src[r1][:, c1] * fc
    out = top * (1 - fr)[:, None] + bottom * fr[:, None]
    # convex combinations can overshoot by an ulp
    return np.clip(out, src.min(), src.max())


def bilinear_resize(frame, out_h, out_w):
    return frame.with_values(resize_array(frame.values, out_h, out_w))
