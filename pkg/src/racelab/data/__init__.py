"""Packaged artifacts: the lookahead policy trained on the ``training`` corpus track
with the default experiment config (seed 0, best checkpoint)."""

from pathlib import Path

DEFAULT_POLICY = Path(__file__).with_name("lookahead_policy.npz")
