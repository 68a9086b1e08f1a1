"""fanetsim: packet-level FANET routing simulator and topology analytics."""

__version__ = "0.1.0"
