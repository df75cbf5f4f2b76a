"""Build the optional compiled propagation kernel.

The package works without it: ``miurakdv.kernels`` falls back to the
numpy implementation when the extension is missing.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("MIURAKDV_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "miurakdv._propagate",
                    ["src/miurakdv/_propagate.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"miurakdv: skipping compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
