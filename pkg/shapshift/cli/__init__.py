#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/cli/__init__.py

# Define what should be available when using 'from shapshift.cli import *'
__all__ = [
    'main',
    'run_config'
]
