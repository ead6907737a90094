# This file marks the detection test directory as a Python package.