"""Build the optional compiled kernels.

The package imports and runs without them (numpy fallback); set
``FIBERMI_NO_EXT=1`` to skip compilation entirely.
"""
import os
import sys

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("FIBERMI_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build without Cython
        print("Cython not available, skipping compiled kernels", file=sys.stderr)
    else:
        # No fp contraction: distances must round exactly like the reference scan.
        compile_args = ["-O3", "-ffp-contract=off"]
        link_args = []
        if os.environ.get("FIBERMI_OPENMP", "1") != "0" and sys.platform.startswith("linux"):
            compile_args.append("-fopenmp")
            link_args.append("-fopenmp")
        ext_modules = cythonize(
            [
                Extension(
                    "fibermi._kernels",
                    ["src/fibermi/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=compile_args,
                    extra_link_args=link_args,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
