"""beliefkit: risk-neutral logit jump-diffusion tooling for event contracts."""

__version__ = "0.3.0"
