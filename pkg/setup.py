"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time), so compilation failures degrade
to a source-only install instead of aborting.

Set HECG_NO_EXTENSION=1 to skip the compiled kernels entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HECG_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        # -ffp-contract=off: the logistic iteration must stay two rounded
        # multiplies and a subtract, byte-identical to the pure-Python path.
        flags = ["-O2"]
        if os.name != "nt":
            flags.append("-ffp-contract=off")
        ext_modules = cythonize(
            [
                Extension(
                    "hecg._kernels",
                    ["src/hecg/_kernels.pyx"],
                    extra_compile_args=flags,
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
