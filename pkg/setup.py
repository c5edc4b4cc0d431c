from setuptools import setup, find_packages
import pathlib

here = pathlib.Path(__file__).parent.resolve()

VERSION = "0.1.0"
SHORT_DESCRIPTION = "Discrete Hadamard walk of a Bose-Einstein condensate: lattice engine and pulse-level simulator"
LONG_DESCRIPTION = (here / "README.md").read_text(encoding="utf-8")


setup(
    name="bec_walk_library",
    version=VERSION,
    description=SHORT_DESCRIPTION,
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.8, <4",
    license="LICENSE.txt",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.5",
        "python-dotenv",
    ],
    extras_require={
        "dev": [
            "pytest",
            "pre-commit",
            "black",
        ],
    },
    entry_points={
        "console_scripts": [
            "bec-walk=bec_walk_library.command_line_utils:main",
        ],
    },
)
