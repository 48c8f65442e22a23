"""drumgen: conditional GAN workbench for drum one-shot synthesis and resynthesis."""

__version__ = "0.1.0"
