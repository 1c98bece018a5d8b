# Copyright (c) 2026 poselift contributors
# SPDX-License-Identifier: Apache-2.0
"""Monocular 3D human pose numerics: camera geometry, synthetic data,
lifting, flow prior, and evaluation metrics."""

try:
    from . import _core as _c
except ImportError:
    # Build-tree layout: the extension lives in the CMake binary dir, put on
    # sys.path by the test harness.
    import _core as _c

_names = [n for n in dir(_c) if not n.startswith("_")]
globals().update({n: getattr(_c, n) for n in _names})
__all__ = _names
__version__ = _c.__version__
