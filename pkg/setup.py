#!/usr/bin/env python
# -*- coding: utf-8 -*-
import re

from setuptools import setup, find_packages

version = None
with open('nvbench/__init__.py', 'r') as f:
    for line in f:
        m = re.match(r'^__version__\s*=\s*(["\'])([^"\']+)\1', line)
        if m:
            version = m.group(2)
            break

assert version is not None, \
    'Could not determine version number from nvbench/__init__.py'

setup(
    name='nvbench',
    version=version,
    description='Spiking, recurrent and LSTM networks on neuromorphic vision data, '
                'with hand-derived BPTT and temporal-resolution analyses',
    author='The nvbench Authors',
    packages=find_packages(exclude=['tests', 'tests.*']),
    include_package_data=True,
    license='Apache License 2.0',
    zip_safe=False,
    keywords='spiking neural networks, bptt, lstm, neuromorphic, event camera',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    python_requires='>=3.7',
    install_requires=[
        'numpy>=1.17',
        'PyYAML>=5.1',
        'opentracing>=2.2,<3.0',
    ],
    entry_points={
        'console_scripts': [
            'nvbench = nvbench.cli:main',
        ],
    },
    test_suite='tests',
    extras_require={
        'prometheus': [
            'prometheus_client>=0.3.1',
        ],
        'tests': [
            'mock',
            'pytest',
            'pytest-cov',
            'coverage',
            'pytest-timeout',
            'flake8',
            'flake8-quotes',
            'prometheus_client>=0.3.1',
        ]
    },
)
