import os

from setuptools import find_packages, setup

about = {}
here = os.path.abspath(os.path.dirname(__file__))
with open(os.path.join(here, "nona_jdd", "__version__.py"), "r", encoding="utf-8") as f:
    exec(f.read(), about)

README = open(os.path.join(os.path.dirname(__file__), "README.rst")).read()

os.chdir(os.path.normpath(os.path.join(os.path.abspath(__file__), os.pardir)))

setup(
    name="nona_jdd",
    version=about["__version__"],
    description="Joint demosaicing and denoising of Nona-Bayer captures with spatial-asymmetric attention",
    keywords="python demosaicing denoising nona-bayer quad-bayer cfa attention gan",
    long_description=README,
    long_description_content_type="text/x-rst",
    install_requires=["numpy>=1.20", "scipy>=1.6", "Pillow>=8.0"],
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"": ["LICENSE"]},
    include_package_data=True,
    entry_points={"console_scripts": ["nona-jdd=nona_jdd.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Image Processing",
    ],
    python_requires=">=3.7",
)
