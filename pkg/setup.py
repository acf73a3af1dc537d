"""Build script: compiles the order-matching kernel when Cython is available.

The package works without the extension -- `lemsim._kernels` falls back to
the pure-Python twin at import time -- so any build failure here downgrades
to a plain install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/lemsim/_kernels/_matching.pyx"],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
