#!/usr/bin/env python3

import os
import shutil
import subprocess
import distutils.cmd
import distutils.log
from distutils.command.clean import clean as _clean
from setuptools import setup, find_packages

with open('python/sbnar/version.py', 'r') as f:
    version = next(filter(lambda x: x.startswith('__version__ = '),
                          f.readlines()), '__version__ = "?.?.?"').split('"')[1]

target_dir = os.getcwd() + "/target"
py_target_dir = target_dir + "/python"


def read(fname):
    with open(os.path.join(os.path.dirname(__file__), fname)) as f:
        return f.read()


class clean(_clean):
    def run(self):
        _clean.run(self)
        shutil.rmtree(py_target_dir, ignore_errors=True)


class SlowTestCommand(distutils.cmd.Command):
    """A custom command to run the nose tests including the slow acceptance
    tests."""

    description = 'run nose tests including the slow acceptance tests'
    user_options = []

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        env = os.environ.copy()
        env['SBNAR_SLOW_TESTS'] = '1'
        command = ['python3', 'setup.py', 'test']
        self.announce(
            'Running command: %s' % ' '.join(command),
            level=distutils.log.INFO)
        subprocess.check_call(command, env=env)


setup(
    name='sbnar',
    version=version,

    author='The sbnar developers',
    description='Data-driven NAR closures for the stochastic Burgers equation',
    license="Apache-2.0",

    long_description=read('README.md'),
    long_description_content_type='text/markdown',

    classifiers=[
        "License :: OSI Approved :: Apache Software License",

        "Operating System :: POSIX :: Linux",
        "Operating System :: MacOS",

        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",

        "Topic :: Scientific/Engineering"
    ],

    packages=find_packages('python'),
    package_dir={
        '': 'python',
    },

    cmdclass={
        'clean': clean,
        'slowtest': SlowTestCommand,
    },

    entry_points={
        'console_scripts': [
            'sbnar = sbnar.cli:main',
        ],
    },

    python_requires='>=3.8',

    install_requires=[
        'cbor',
        'numpy>=1.20',
        'plumbum',
        'scipy>=1.6',
    ],

    tests_require=[
        'nose'
    ],
    test_suite='nose.collector',

    zip_safe=False,
)
