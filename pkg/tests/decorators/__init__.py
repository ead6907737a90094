# This file marks the decorators test directory as a Python package.