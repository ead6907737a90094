# This file marks the simulation test directory as a Python package.