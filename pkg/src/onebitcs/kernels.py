"""Backend selection for the hot kernels.

The compiled extension ``_kernels`` is used when it imports; otherwise, or
when ``ONEBITCS_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the numpy fallback ``_pykernels`` is used. ``BACKEND`` names the active one.
"""
import os

from . import _pykernels

python = _pykernels

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("ONEBITCS_PURE_PYTHON", "0") in ("", "0"):
    active = compiled
    BACKEND = "cython"
else:
    active = _pykernels
    BACKEND = "python"

STATUS_INACTIVE = _pykernels.STATUS_INACTIVE
STATUS_FOUND = _pykernels.STATUS_FOUND
STATUS_DEGENERATE = _pykernels.STATUS_DEGENERATE

project_l1_ball = active.project_l1_ball
project_l2_ball = active.project_l2_ball
project_ellipsoid = active.project_ellipsoid
dykstra_l1_l2 = active.dykstra_l1_l2
dykstra_l1_ellipsoid = active.dykstra_l1_ellipsoid
soft_threshold_level = active.soft_threshold_level
hamming = active.hamming
pair_disagreements = active.pair_disagreements


def backends():
    """Available backend modules keyed by name."""
    out = {"python": _pykernels}
    if compiled is not None:
        out["cython"] = compiled
    return out
