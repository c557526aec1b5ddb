"""Backend selection for the fused elementwise kernels.

The compiled extension is used when it was built; otherwise, or when
``LADDERLID_PURE_PYTHON=1`` is set, the numpy versions are used.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_ext
except ImportError:
    _kernels_ext = None

_BACKENDS = {"python": _kernels_py}
if _kernels_ext is not None:
    _BACKENDS["compiled"] = _kernels_ext

combinator_forward = None
combinator_backward = None
bn_backward = None
BACKEND = None


def available():
    return sorted(_BACKENDS)


def use_backend(name):
    global combinator_forward, combinator_backward, bn_backward, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable, have {available()}")
    mod = _BACKENDS[name]
    combinator_forward = mod.combinator_forward
    combinator_backward = mod.combinator_backward
    bn_backward = mod.bn_backward
    BACKEND = name


if os.environ.get("LADDERLID_PURE_PYTHON") == "1" or _kernels_ext is None:
    use_backend("python")
else:
    use_backend("compiled")
