"""3D U-Net reduced-order model companion package for meltpath.

Consumes exported VOI datasets and the simulator's file formats; produces
reward tables in the identical CSV schema.
"""

from .unet import UNet3D

__version__ = "0.1.0"
