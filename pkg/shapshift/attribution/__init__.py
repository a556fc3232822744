#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/attribution/__init__.py

# Define what should be available when using 'from shapshift.attribution import *'
__all__ = [
    'shapley'
]
