#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/general/__init__.py

# Define what should be available when using 'from shapshift.general import *'
__all__ = [
    'validation_utils'
]
