import sys

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: everything falls back to the numpy
# implementations in normlab._kernels._numpy_backend when the extension
# is missing, so a failed cythonize must not break installation.
ext_modules = []
try:
    from Cython.Build import cythonize

    extensions = [
        Extension(
            "normlab._kernels._cy_backend",
            ["src/normlab/_kernels/_cy_backend.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
except Exception as exc:  # pragma: no cover
    print(f"normlab: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
