"""Collective-emotion flocking engine.

Core pieces:

- :mod:`emoflock.flock` — deterministic 2D boids simulation on a torus.
- :mod:`emoflock.emotions` — the eight basic emotions and their motion configs.
- :mod:`emoflock.physio` — RR-interval ingestion, HR/RMSSD/LF-HF metrics and
  footprint-based emotion classification.
- :mod:`emoflock.render` — headless trail renderer producing PPM frames.
- :mod:`emoflock.analysis` — confusion-matrix normalization for perception studies.
- :mod:`emoflock.engine` — deterministic session engine (live + replay).
- :mod:`emoflock.api` — FastAPI service exposing sessions over HTTP/WebSocket.
- :mod:`emoflock.cli` — operator command line.
"""

__version__ = "0.1.0"
