"""Curve sets behind the PER figures.

Each figure is a list of ``(label, SimConfig)`` curves.  Grids are wide
enough to bracket the PER 1e-3 crossings under the per-sample SNR
definition used by :mod:`doublechirp.channel`.
"""
from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from .harness import SimConfig

Curve = Tuple[str, SimConfig]


def _grid(lo, hi, step=1.0):
    return [float(x) for x in np.arange(lo, hi + step / 2, step)]


def fig8(trials: int = 2000, seed: int = 0) -> List[Curve]:
    """Threshold trade-off: N_thr = 4 against N_thr = 8, 5 EDs."""
    base = SimConfig(n_users=5, trials=trials, master_seed=seed,
                     snr_grid_db=_grid(-26, -16))
    return [(f"nthr{k}", base.replace(n_thr=k)) for k in (4, 8)]


def fig9(trials: int = 2000, seed: int = 0) -> List[Curve]:
    """Number of EDs: 1, 5, 10, 15 at L = 32."""
    base = SimConfig(trials=trials, master_seed=seed, snr_grid_db=_grid(-26, -10))
    return [(f"users{u}", base.replace(n_users=u)) for u in (1, 5, 10, 15)]


def fig10(trials: int = 2000, seed: int = 0) -> List[Curve]:
    """Antenna count: L = 32 against L = 64, 5 EDs."""
    base = SimConfig(n_users=5, trials=trials, master_seed=seed,
                     snr_grid_db=_grid(-30, -14))
    return [(f"l{l}", base.replace(l_antennas=l)) for l in (32, 64)]


def fig11(trials: int = 2000, seed: int = 0) -> List[Curve]:
    """Preamble length: N = 6, 8, 10 with N_thr = 4, 5 EDs."""
    base = SimConfig(n_users=5, trials=trials, master_seed=seed,
                     snr_grid_db=_grid(-28, -12))
    return [(f"n{n}", base.replace(n_preamble=n)) for n in (6, 8, 10)]


def fig4(trials: int = 2000, seed: int = 0) -> List[Curve]:
    """Assigned (unique distance) chirp pairs against pairs sharing one distance."""
    base = SimConfig(n_users=5, trials=trials, master_seed=seed,
                     snr_grid_db=_grid(-20, 0, 4))
    return [("assigned", base), ("same-delta", base.replace(policy="same-delta"))]


FIGURES: Dict[str, object] = {
    "fig4": fig4,
    "fig8": fig8,
    "fig9": fig9,
    "fig10": fig10,
    "fig11": fig11,
}
