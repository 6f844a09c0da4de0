import os

import numpy as np
from setuptools import Extension, setup

# `pip install -e . --no-build-isolation` builds the extension in place;
# DEGENSYS_NO_EXT=1 skips it and the NumPy kernels are used instead.
ext_modules = []
if not os.environ.get("DEGENSYS_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "degensys._ckernels",
                ["src/degensys/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
