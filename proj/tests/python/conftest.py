# Copyright (c) 2026 poselift contributors
# SPDX-License-Identifier: Apache-2.0
import os
import sys


def _prepend(var):
    path = os.environ.get(var)
    if path and path not in sys.path:
        sys.path.insert(0, path)


# Build-tree runs: package sources and the compiled extension live in
# different directories, both exported by CTest.
_prepend("POSELIFT_PACKAGE_DIR")
_prepend("POSELIFT_EXTENSION_DIR")
