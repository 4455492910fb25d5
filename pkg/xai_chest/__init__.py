# xai-chest: OFDM link simulator and explainability lab

__version__ = "0.1.0"
