"""Build the optional compiled kernels; the package falls back to numpy without them."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("LEVY_ISAMP_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "levy_isamp._kernels",
                    ["src/levy_isamp/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    library_dirs=[os.path.join(os.path.dirname(np.get_include()), "..", "random", "lib")],
                    libraries=["npyrandom"],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
