from setuptools import find_packages, setup

# read the contents of README file
from os import path
from io import open

this_directory = path.abspath(path.dirname(__file__))


# read the contents of README.rst
def readme():
    with open(path.join(this_directory, 'README.rst'), encoding='utf-8') as f:
        return f.read()


# read the contents of requirements.txt
with open(path.join(this_directory, 'requirements.txt'),
          encoding='utf-8') as f:
    requirements = f.read().splitlines()

# keep in sync with pycmc.__version__
VERSION = "0.3.0"

setup(
    name='pycmc',
    version=VERSION,
    description='Loop group constructions of CMC surfaces with Delaunay ends',
    long_description=readme(),
    long_description_content_type='text/x-rst',
    keywords=['constant mean curvature', 'loop groups', 'Iwasawa factorization',
              'Delaunay surfaces', 'dressing', 'differential geometry'],
    packages=find_packages(exclude=['test']),
    include_package_data=True,
    package_data={'pycmc': ['schemas/*.json']},
    install_requires=requirements,
    setup_requires=['setuptools>=38.6.0'],
    entry_points={'console_scripts': ['pycmc=pycmc.cli:main']},
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Education',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Programming Language :: Python :: 3.8',
    ],
)
