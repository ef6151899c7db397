import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("stumpfungus._kern", ["src/stumpfungus/_kern.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # The package falls back to the pure-python kernels at import time.
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[numpy.get_include()],
)
