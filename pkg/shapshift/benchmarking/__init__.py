#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/benchmarking/__init__.py

# Define what should be available when using 'from shapshift.benchmarking import *'
__all__ = [
    'harness',
    'lasso'
]
