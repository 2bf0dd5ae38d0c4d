"""Deterministic simulator for durable/ephemeral serverless container provisioning."""

__version__ = "0.1.0"
