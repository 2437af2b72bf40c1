"""Build script for the optional compiled kernel extension.

The package works without the extension (pure-Python fallback); a failed
compile must not fail the install, hence optional=True.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "susreq.kernels._ck",
                ["src/susreq/kernels/_ck.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
