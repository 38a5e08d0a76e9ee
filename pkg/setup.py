from setuptools import setup, find_packages

setup(
    name="kepler_averaging",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    description="periodic orbits of the time-periodically perturbed planar Kepler problem by averaging",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    author="IvanDe",
    author_email="ivande83@gmail.com",
    license="MIT",
    python_requires=">=3.11",
    install_requires=[
        "numpy~=2.1.3",
        "scipy~=1.14.1",
        "pandas~=2.2.3",
        "scikit-learn~=1.5.2",
    ],
    entry_points={
        "console_scripts": [
            "kepler-averaging=kepler_averaging.cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Astronomy",
    ],
)
