#!/usr/bin/env python
""" sdgsc is a desk-scale laboratory for goal-oriented semantic video
communication over fading channels.

A clip is encoded to variational latents, a latency budget picks the
keyframes, the latents cross a noisy channel and a guided latent
diffusion removes the channel noise before the receiver decodes the
keyframes and interpolates the frames in between.

from sdgsc.config import PipelineConfig
from sdgsc.pipeline import run_training_pipeline, run_experiment
cfg = PipelineConfig({'data.clips': 16})
bundle, report = run_training_pipeline(cfg)
rows = run_experiment(cfg, bundle, 'psd').rows
"""
import sys
from setuptools import setup, Command
import sdgsc


class TestCommand(Command):
    user_options = [ ]

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        '''
        Finds all the tests modules in tests/, and runs them.
        '''
        from sdgsc import tests
        import unittest
        unittest.main(tests, argv=sys.argv[:1])

cmdclass = { 'test': TestCommand }


classifiers = [
    'Development Status :: 3 - Alpha',
    'License :: OSI Approved :: BSD License',
    'Operating System :: OS Independent',
    'Programming Language :: Python',
    'Programming Language :: Python :: 3',
    'Topic :: Scientific/Engineering',
    'Topic :: Communications',
]

setup(name='sdgsc',
        version=sdgsc.__version__,
        description = 'Diffusion-denoised semantic video communication laboratory.',
        classifiers=classifiers,
        keywords=['semantic communication', 'diffusion', 'video'],
        license='BSD',
        packages = ['sdgsc', 'sdgsc.tests'],
        install_requires = ['numpy', 'scipy'],
        tests_require = ['hypothesis'],
        extras_require = {'test': ['hypothesis']},
        entry_points = {'console_scripts': ['sdgsc = sdgsc.cli:main']},
        long_description=__doc__,
        cmdclass = cmdclass,
)
