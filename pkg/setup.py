import os

from setuptools import Extension, setup

try:
    if not os.path.exists("src/veriauction/_kernels.pyx"):
        raise ImportError("kernel source not present")
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "veriauction._kernels",
                ["src/veriauction/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    # Pure-Python fallback in veriauction.kernels is used when the
    # compiled module is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
