"""Build script: compiles the optional C extension holding the hot kernels.

The package works without the extension (a NumPy fallback is selected at
import time); the build therefore degrades gracefully when no compiler or
Cython is available.
"""

import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"markov-admm: skipping C kernels ({exc}); "
              "the pure-Python backend will be used", file=sys.stderr)
        return []
    ext = Extension(
        "markov_admm._kernels",
        ["src/markov_admm/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
