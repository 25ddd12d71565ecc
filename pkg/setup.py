"""Build script for the optional C parsing kernel.

The package works without the extension: ipactivity._kernels falls back to a
pure Python implementation at import time. Building is best effort so that
environments without a C toolchain can still install the package.
"""

import logging
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger("ipactivity.setup")


def _extensions():
    if os.environ.get("IPACTIVITY_SKIP_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        log.warning("skipping C kernel build (%s)", exc)
        return []
    ext = Extension(
        "ipactivity._kernels._native",
        ["src/ipactivity/_kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


class optional_build_ext(build_ext):
    """Degrade to the pure Python backend when compilation fails."""

    def run(self):
        try:
            build_ext.run(self)
        except Exception as exc:
            log.warning("C kernel build failed, using pure Python backend: %s", exc)

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as exc:
            log.warning("could not compile %s: %s", ext.name, exc)


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
