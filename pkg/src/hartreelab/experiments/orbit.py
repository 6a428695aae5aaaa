"""Distance to the symmetry orbit (phase x grid translations) of a reference field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GridMismatch
from ..model import Field
from ..spectral import SpectralEngine, _fftn, _ifftn


@dataclass(frozen=True)
class OrbitDistanceResult:
    distance_h1: float
    best_shift: tuple[int, int, int]
    best_phase: float


def orbit_distance(f: Field, u: Field, engine: SpectralEngine) -> OrbitDistanceResult:
    """min over integer grid shifts y and phases theta of ||f - e^{i theta} u(. - y)||_{H^1}.

    The H^1 cross-correlation over all n^3 shifts is one inverse transform of
    (1 + |k|^2) fhat conj(uhat); the optimal phase at the winning shift is the
    argument of that inner product.
    """
    if f.grid != u.grid or f.grid != engine.grid:
        raise GridMismatch("orbit_distance requires a common grid")
    h3 = engine.grid.cell_volume
    n3 = engine.grid.n**3
    fh = _fftn(f.values)
    uh = _fftn(u.values)
    w = 1.0 + engine.k_sq
    corr = _ifftn(w * fh * np.conj(uh)) * h3  # <f, u(.-y)>_{H^1} over all shifts
    idx = int(np.argmax(np.abs(corr)))
    shift = np.unravel_index(idx, engine.grid.shape)
    c = corr.flat[idx]
    theta = float(np.angle(c))
    norm_f = float(np.vdot(fh, w * fh).real) * h3 / n3
    norm_u = float(np.vdot(uh, w * uh).real) * h3 / n3
    dist_sq = max(norm_f + norm_u - 2.0 * abs(c), 0.0)
    return OrbitDistanceResult(distance_h1=float(np.sqrt(dist_sq)),
                               best_shift=tuple(int(s) for s in shift),
                               best_phase=theta)
