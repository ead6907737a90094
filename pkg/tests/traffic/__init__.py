# This file marks the traffic test directory as a Python package.