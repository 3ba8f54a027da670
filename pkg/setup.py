"""Build hook for the compiled evolution kernel.

The extension is optional: without Cython or a compiler the package still
installs and falls back to the numpy stepper.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("localdecay.evolve._kernel", ["src/localdecay/evolve/_kernel.pyx"],
                   include_dirs=[np.get_include()],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:  # pragma: no cover
    pass

setup(ext_modules=ext_modules)
