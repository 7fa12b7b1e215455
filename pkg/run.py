#!/usr/bin/env python
"""Simple entry point to run the arff command line during development."""

import sys

from adaptive_rff.cli import main

if __name__ == "__main__":
    sys.exit(main())
