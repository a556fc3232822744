#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# shapshift/__main__.py

import sys

from shapshift.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
