# This file marks the experiments test directory as a Python package.