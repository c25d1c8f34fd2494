import re

from setuptools import find_packages, setup

with open("momentlab/__init__.py") as f:
    version = re.search(r'__version__ = "(.*?)"', f.read()).group(1)

setup(
    name="momentlab",
    version=version,
    description="Positive moment sequences, Hankel tests and constant-coefficient recurrences.",
    packages=find_packages(include=["momentlab", "momentlab.*"]),
    install_requires=["mpmath", "numpy", "scipy"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["momentlab = momentlab.cli:main"]},
    license="GNU GPLv3",
)
