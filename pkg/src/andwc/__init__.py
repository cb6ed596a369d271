"""ANDWC: fast handoff through AP-maintained real-neighbour lists, with a discrete-event simulator."""

__version__ = "0.1.0"
