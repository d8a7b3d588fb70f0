import sys

from setuptools import setup, find_packages

if sys.version_info < (3, 8, 0):
    sys.exit("ERROR: You need Python 3.8 or later to use lighthash.")


try:
    import pypandoc

    long_description = pypandoc.convert_file("README.md", "rst")
except (ImportError, OSError):
    long_description = ""

install_requires = [
    "click",
    "numpy",
    "pyyaml",
    "scipy"
]

setup(
    name="lighthash",
    version="0.1.0",
    description=(
        "Optical proof of work: a matrix-vector hash for photonic "
        "accelerators, with a simulated mesh, error model and toy chain."
    ),
    long_description=long_description,
    license="MIT License",

    python_requires=">=3.8",
    install_requires=install_requires,
    packages=find_packages(
        exclude=["*.tests", "*.tests.*", "tests.*", "tests"]
    ),
    entry_points={
        "console_scripts": [
            "lighthash = lighthash.cli:cli"
        ]
    },

    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: POSIX",
        "Programming Language :: Python :: 3.8",
        "Topic :: Scientific/Engineering :: Physics"
    ]
)
