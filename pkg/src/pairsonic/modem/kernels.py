"""Kernel backend selection, done once at import.

``PAIRSONIC_KERNELS`` picks the backend:

* ``auto`` (default): compiled Reed-Solomon when the extension is built,
  numpy tone energies.  The BLAS-backed matrix product beats the compiled
  Goertzel recurrence on every window/tone mix we benchmarked.
* ``cython``: every kernel from the compiled extension (error if missing).
* ``python``: the pure-Python/numpy reference only.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None  # type: ignore[assignment]

MODE = os.environ.get("PAIRSONIC_KERNELS", "auto").lower()

if MODE == "cython":
    if _ckernels is None:
        raise ImportError("PAIRSONIC_KERNELS=cython but pairsonic.modem._ckernels is not built")
    _rs: ModuleType = _ckernels
    _dsp: ModuleType = _ckernels
elif MODE == "python" or _ckernels is None:
    _rs = _dsp = _pykernels
else:
    _rs, _dsp = _ckernels, _pykernels

BACKEND = f"rs={_rs.__name__.rsplit('.', 1)[-1]},dsp={_dsp.__name__.rsplit('.', 1)[-1]}"

rs_encode = _rs.rs_encode
rs_decode = _rs.rs_decode
rs_syndromes = _rs.rs_syndromes
tone_energies = _dsp.tone_energies


def available_backends() -> dict[str, ModuleType]:
    found: dict[str, ModuleType] = {"python": _pykernels}
    if _ckernels is not None:
        found["cython"] = _ckernels
    return found
