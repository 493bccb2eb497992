"""vitalnet: vital-sign time-series classification of COVID-19 test status
in ARDS cohorts — statistics, a from-scratch CNN+LSTM, day-windowed
evaluation, t-SNE feature maps, and a calibrated synthetic cohort generator.
"""

__version__ = "0.1.0"
