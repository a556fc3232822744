#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/__init__.py

__version__ = "0.3.0"

# Define what should be available when using 'from shapshift import *'
__all__ = [
    'attribution',
    'benchmarking',
    'cli',
    'data_handling',
    'general',
    'models',
    'selection',
    'synthetic'
]
