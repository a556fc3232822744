#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/data_handling/__init__.py

# Define what should be available when using 'from shapshift.data_handling import *'
__all__ = [
    'dataset',
    'file_io'
]
