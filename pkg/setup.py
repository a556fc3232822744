#! /usr/bin/env python3
# -*- coding: utf-8 -*-

"""
**Note**
Backward-compatibility shim for tooling that still calls 'setup.py' directly.
Every piece of metadata (dependencies, console script, pytest markers)
lives in pyproject.toml.
"""

#----------------#
# Import modules #
#----------------#

from setuptools import setup

# Defer to pyproject.toml for all configuration
setup()
