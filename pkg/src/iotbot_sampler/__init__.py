"""
iotbot_sampler

Detection of Mirai-like IoT bots from sub-sampled device traffic, with the Monte Carlo
machinery used to relate average detection delay to per-class sampling frequency.
"""

__version__ = "0.1.0"
