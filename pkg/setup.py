"""Builds the optional compiled physics kernel.

Without Cython or a C compiler the package installs as pure Python and
falls back to the numpy kernel at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("MORPHOCOMP_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("morphocomp.physics._kernel",
                       ["src/morphocomp/physics/_kernel.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
