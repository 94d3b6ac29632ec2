"""pald: a desk-scale lab for perceptually aligned latent noising.

Trains small noised-latent autoencoders under weighted reconstruction
losses, estimates per-frame information content with autoregressive
rectified flows at arbitrary noise levels, and evaluates the results with
rank correlations and a synthetic-EEG temporal-response-function pipeline.
"""

__version__ = "0.1.0"
