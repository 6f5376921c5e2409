"""Head-mounted microphone array steering and weighted delay-and-sum beamforming.

Submodules: ``geometry`` (array layout and plane-wave delays), ``scenesim``
(moving-robot scene synthesis), ``servo`` (visual head servo loop),
``wdsbf`` (the beamformer), ``metrics`` (SNR / SI-SDR / beam patterns) and
``cli`` (batch front-end).
"""

__version__ = "0.1.0"
