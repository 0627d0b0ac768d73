import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the simulator falls back to _pykernel
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("DCF_ANALYZER_NO_EXT"):
    random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext_modules = cythonize(
        [Extension(
            "dcf_analyzer.sim._kernel",
            ["src/dcf_analyzer/sim/_kernel.pyx"],
            include_dirs=[np.get_include()],
            library_dirs=[random_lib],
            libraries=["npyrandom"],
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
