"""Evidential Dirichlet classification toolkit.

Closed-form Dirichlet information geometry, a Fisher-weighted evidential
loss with analytic gradients, a small dense evidential network trained by
plain backprop, and evaluation protocols for confidence ranking and
out-of-distribution detection.
"""

__version__ = "0.1.0"
