"""Kernel backend selection.

The hot kernels (tensor contraction cascades, chain stepping) have two
implementations: numba-jitted loops (default) and a pure-numpy fallback.
Set the environment variable ``PSPIN_BACKEND=numpy`` to force the fallback,
``PSPIN_BACKEND=numba`` to require numba (ImportError if unavailable).
With no flag, numba is used when importable and numpy otherwise.

Either backend is deterministic given the same seeds; across backends,
results agree to rounding error (summation order differs).
"""

from __future__ import annotations

import os
import warnings

_choice = os.environ.get("PSPIN_BACKEND", "").strip().lower()
if _choice not in ("", "numba", "numpy"):
    raise ValueError(f"PSPIN_BACKEND must be 'numba' or 'numpy', got {_choice!r}")

if _choice == "numpy":
    from . import _numpy as _impl
else:
    try:
        from . import _numba as _impl
    except ImportError:
        if _choice == "numba":
            raise
        warnings.warn("numba unavailable; falling back to the pure-numpy backend")
        from . import _numpy as _impl

BACKEND = _impl.NAME
cascade = _impl.cascade
grad_energy = _impl.grad_energy
energy_many = _impl.energy_many
vv_grad = _impl.vv_grad
mala_block = _impl.mala_block
langevin_block = _impl.langevin_block
