"""Build the optional compiled kernels.

    python setup.py build_ext --inplace

Without Cython (or a compiler) the package still installs and falls back to
the numpy kernels.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("STRONGWEAK_NO_EXT", "") in ("", "0"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("strongweak._ckernels", ["src/strongweak/_ckernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
