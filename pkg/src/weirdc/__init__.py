"""Exploits and weird machines across a four-language toy compiler stack.

IMP compiles to Toy^C (a small C), Toy^C to Toy^A (an assembly-like machine
with code in memory) and Toy^A to Toy^H (a host that can observe step
counts). Bounded oracles classify attacks against compiled components.
"""

__version__ = "0.1.0"
