#!/usr/bin/env python

import re
import pathlib

from setuptools import setup


requirements = [
    'numpy<2.0',
    'scipy',
    'nibabel>=2.1',
    'Pillow',
    'xxhash',
    'torch',
    'pandas',
    'matplotlib',
]

test_requirements = [
    'pytest',
    'hypothesis',
]

packages = [
    'predix',
    'predix.core',
    'predix.io',
    'predix.sim',
    'predix.data',
    'predix.model',
    'predix.stats',
    'predix.attribution',
    'predix.experiment',
]

# base source directory
base_dir = pathlib.Path(__file__).parent.resolve()

# extract the current version
init_file = base_dir.joinpath('predix/__init__.py')
init_text = open(init_file, 'rt').read()
pattern = r"^__version__ = ['\"]([^'\"]*)['\"]"
match = re.search(pattern, init_text, re.M)
if not match:
    raise RuntimeError(f'Unable to find __version__ in {init_file}.')
version = match.group(1)

long_description = '''Predix benchmarks image-based estimators of predictive
biomarkers. It simulates randomized trials with known prognostic and predictive
image features, trains two-headed conditional average treatment effect networks
and single-headed baselines, evaluates their biomarker candidates with
treatment-interaction regressions, and explains them with attribution maps.
'''

# run setup
setup(
    name='predix',
    version=version,
    description='Benchmarking image-based predictive biomarker discovery.',
    long_description=long_description,
    python_requires='>=3.8',
    packages=packages,
    install_requires=requirements,
    extras_require={'test': test_requirements},
    entry_points={'console_scripts': ['predix=predix.cli:main']},
    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Natural Language :: English',
        'Topic :: Scientific/Engineering',
    ],
)
