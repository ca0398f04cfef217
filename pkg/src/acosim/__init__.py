"""Autonomous coverage optimization for LTE macro clusters.

Modules: ``geometry`` (ideal coverage and angle-distance maps), ``array``
(AoA estimation and steering), ``radio`` (link budget and measurements),
``engine`` (the optimization decision tree), ``sim`` (cluster simulator)
and ``scenario``/``cli`` (configuration and command line).
"""
__version__ = "0.1.0"
