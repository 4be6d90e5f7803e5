import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are optional at runtime: mimodet._kernels falls back to
# the pure-numpy implementation if this extension is absent.
ext = Extension(
    "mimodet._kernels._cext",
    sources=["src/mimodet/_kernels/_cext.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
