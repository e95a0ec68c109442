"""cycinv: invariant representation learning with cyclic adversarial training.

The package trains an encoder-decoder generator against a multi-class
discriminator so that the latent representation drops a specified factor of
variation while keeping the remaining factors, then measures both sides of
that bargain: latent probes (CCR / MAE against chance and median baselines)
and generator label scores computed by estimators pretrained on real images.
"""

from .backend import available_backends, backend_name

__version__ = "0.1.0"

__all__ = ["available_backends", "backend_name", "__version__"]
