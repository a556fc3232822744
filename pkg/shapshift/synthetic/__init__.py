#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/synthetic/__init__.py

# Define what should be available when using 'from shapshift.synthetic import *'
__all__ = [
    'concept_shift'
]
