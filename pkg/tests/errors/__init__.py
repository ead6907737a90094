# This file marks the errors test directory as a Python package.