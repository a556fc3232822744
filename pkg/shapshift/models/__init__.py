#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/models/__init__.py

# Define what should be available when using 'from shapshift.models import *'
__all__ = [
    'gbdt',
    'model_io'
]
