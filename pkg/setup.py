import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CRITWAVE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "critwave._ckernels",
                ["src/critwave/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no fp contraction: keeps results close to the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
