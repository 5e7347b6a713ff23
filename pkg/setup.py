"""Build script for the optional compiled evaluation kernels.

The package is fully functional without the extension: ``mpqptree.evaluator``
falls back to the pure-Python kernels in ``mpqptree._evalcore_py`` when
``mpqptree._evalcore`` is not importable.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the Cython kernels if possible, keep going otherwise."""

    def run(self):
        try:
            build_ext.run(self)
        except Exception as exc:  # compiler or Cython missing
            print(f"warning: skipping compiled kernels ({exc}); "
                  "pure-Python evaluator will be used")

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "pure-Python evaluator will be used")


def extensions():
    import os
    if not os.path.exists("src/mpqptree/_evalcore.pyx"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "mpqptree._evalcore",
        ["src/mpqptree/_evalcore.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
