"""Desk-scale textless speech toolkit.

Feature extraction, learned upsampling, learning-rate schedules, a small
numpy autograd core, a VQ-CPC encoder with an LSTM mu-law vocoder, and
zero-resource evaluation metrics, tied together by the ``textless`` CLI.
"""
__version__ = "0.1.0"
