"""Backend selection for the subset scans.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``SPACEIV_PURE_PYTHON`` is set to a non-empty value,
the numpy implementation is used. ``BACKENDS`` lists every backend that
can be imported, whichever one is active.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels

    BACKENDS["cython"] = _ckernels
except ImportError:  # pragma: no cover - depends on the build
    pass

if os.environ.get("SPACEIV_PURE_PYTHON") or "cython" not in BACKENDS:
    BACKEND = "python"
else:
    BACKEND = "cython"
_impl = BACKENDS[BACKEND]

liml_scan = _impl.liml_scan
tsls_scan = _impl.tsls_scan
ls_scan = _impl.ls_scan
