from setuptools import setup, Extension

import numpy as np

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "makeuplab._native",
                ["src/makeuplab/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: the package still works on the pure-numpy
    # fallback kernels, selected at import in makeuplab.kernels.
    pass

setup(ext_modules=ext_modules)
