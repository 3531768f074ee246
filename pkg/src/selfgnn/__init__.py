"""SelfGNN: sequential recommendation from short-term interval graphs,
multi-level long-term sequence encoders and personalized self-augmented
denoising."""

__version__ = "0.1.0"
