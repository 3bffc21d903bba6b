"""Pure-numpy fallback for the compiled ball-sum kernel."""

import numpy as np

_CHUNK_ELEMENTS = 4_000_000


def ball_sums(weights, centers, offsets, breaks):
    """For each center, sums of ``weights`` over the first ``breaks[j]`` offsets.

    Uses a sequential cumulative sum along the offset axis, which reproduces
    the summation order of the compiled kernel.
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.int64)
    breaks = np.asarray(breaks, dtype=np.int64)
    nmax = int(breaks.max()) if breaks.size else 0
    offsets = np.asarray(offsets, dtype=np.int64)[:nmax]
    shape = np.array(weights.shape, dtype=np.int64)
    flat = weights.ravel()
    out = np.zeros((len(centers), len(breaks)))
    if nmax == 0:
        return out
    chunk = max(1, _CHUNK_ELEMENTS // nmax)
    for start in range(0, len(centers), chunk):
        c = centers[start:start + chunk]
        idx = (c[:, None, :] + offsets[None, :, :]) % shape
        lin = (idx[..., 0] * shape[1] + idx[..., 1]) * shape[2] + idx[..., 2]
        csum = np.cumsum(flat[lin], axis=1)
        for b, cnt in enumerate(breaks):
            if cnt > 0:
                out[start:start + chunk, b] = csum[:, cnt - 1]
    return out
