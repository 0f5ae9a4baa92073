import os

from setuptools import setup

ext_modules = []
if os.environ.get("FUSEPLAN_PURE_PY") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "fuseplan._kernels_cy",
                    ["src/fuseplan/_kernels_cy.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython available: the package falls back to the pure-Python kernels
        ext_modules = []

setup(ext_modules=ext_modules)
