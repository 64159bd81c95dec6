"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); a failed native build therefore only warns.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-python fallback on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"native kernel build failed ({exc}); "
                          "falling back to numpy kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"building {ext.name} failed ({exc}); "
                          "falling back to numpy kernels")


def extensions():
    from Cython.Build import cythonize

    ext = Extension(
        "tgrasp.kernels._native",
        ["src/tgrasp/kernels/_native.pyx"],
        # -ffp-contract=off keeps float results bit-identical to the numpy
        # backend (no FMA fusion), so backends are interchangeable.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
