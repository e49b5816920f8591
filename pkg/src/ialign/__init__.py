"""Linear transceiver design and DoF feasibility on MIMO interference channels."""

__version__ = "0.1.0"
