from setuptools import setup, find_packages

setup(
    name="cellgeo",
    version="0.1",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.21.0",
        "scipy>=1.8.0",
        "pandas>=1.5.0",
        "matplotlib>=3.4.0",
        "python-dotenv>=0.19.0",
    ],
    entry_points={
        "console_scripts": [
            "cellgeo=src.main:main",
        ],
    },
)
