"""Encoder, vocoder, vector quantizer and the shared training loop."""
