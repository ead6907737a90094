# This file marks the cli test directory as a Python package.