import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "phasestar._stencils",
                ["src/phasestar/_stencils.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Without Cython the package still installs; the numpy fallback kernels
    # are selected at import time.
    extensions = []

setup(ext_modules=extensions)
