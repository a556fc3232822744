#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/selection/__init__.py

# Define what should be available when using 'from shapshift.selection import *'
__all__ = [
    'error_partition',
    'metrics',
    'selector'
]
