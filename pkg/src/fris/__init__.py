"""Pattern-reconfigurable RIS: spherical-harmonic element patterns co-designed
with BS beamforming for multiuser weighted sum rate."""

__version__ = "0.1.0"
