import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]

extensions = [
    Extension(
        "epiopt.kernels._ssa_cy",
        ["src/epiopt/kernels/_ssa_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=macros,
    ),
    Extension(
        "epiopt.kernels._ode_cy",
        ["src/epiopt/kernels/_ode_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=macros,
    ),
]

setup(ext_modules=cythonize(extensions, language_level=3))
