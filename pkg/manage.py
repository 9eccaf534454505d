#!/usr/bin/env python
"""
CLI to run morphrl experiments.
"""

from morphrl.cli import manager

if __name__ == '__main__':
    manager()
