import os

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("ladderlid._kernels", ["src/ladderlid/_kernels.pyx"],
                   include_dirs=[numpy.get_include()], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

if os.environ.get("LADDERLID_PURE_PYTHON") == "1":
    ext_modules = []

setup(ext_modules=ext_modules)
