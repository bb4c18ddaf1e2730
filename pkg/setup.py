from setuptools import Extension, setup
from Cython.Build import cythonize
import numpy as np

ext = Extension(
    "tcnn.kernels._native",
    ["src/tcnn/kernels/_native.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3", "-fopenmp"],
    extra_link_args=["-fopenmp"],
)

setup(
    ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}),
)
