"""Build script: compiles the optional simulation kernel.

The package works without the extension (a pure-Python kernel with identical
semantics is selected at import time), so any build failure here downgrades
to a warning instead of aborting the install.
"""

import warnings

from setuptools import setup


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"simulation kernel not compiled ({exc}); using pure-Python fallback")
        return []
    ext = Extension(
        "abgames.simkernel._simcore",
        ["src/abgames/simkernel/_simcore.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


try:
    setup(ext_modules=extensions())
except Exception as exc:  # compiler missing, etc.
    warnings.warn(f"extension build failed ({exc}); retrying pure-Python install")
    setup(ext_modules=[])
