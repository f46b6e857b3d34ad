import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# The compiled kernels are optional: if the build fails (no compiler), the
# package falls back to the numpy/scipy implementation at import time.
ext = Extension(
    "mrtensor.kernels._coo_kernels",
    sources=["src/mrtensor/kernels/_coo_kernels.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level="3"))
