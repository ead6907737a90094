# This file marks the sampling test directory as a Python package.