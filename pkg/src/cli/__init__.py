"""Command-line surface: ``avse synth|run|sweep|report|serve``."""
