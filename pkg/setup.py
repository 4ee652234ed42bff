"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a NumPy reference
backend is selected at import time), so any build failure here downgrades
to a pure-Python install instead of aborting.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the accelerator extension if possible, otherwise skip it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler/toolchain missing
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "warning: building the helimag Cython kernels failed "
            f"({exc!r}); falling back to the NumPy backend",
            file=sys.stderr,
        )


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: {exc!r}; skipping Cython kernels", file=sys.stderr)
        return []
    ext = Extension(
        "helimag._kernels._cyops",
        ["src/helimag/_kernels/_cyops.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
