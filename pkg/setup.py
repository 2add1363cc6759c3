"""Build hook for the optional compiled kernels.

The package is pure Python plus one Cython extension with the per-element
loops (assembly, gradient scatter, point location).  If the extension cannot
be built the package still works through the numpy fallback in
``twoscale_heat.kernels``.
"""

from setuptools import Extension, setup

extensions = []
try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "twoscale_heat.kernels._ckernels",
                ["src/twoscale_heat/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=extensions)
