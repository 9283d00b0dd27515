"""Sidescan sonar terrain characterisation toolkit.

Pipelines: seafloor simulation, Monte-Carlo detection-performance mapping
via synthetic contact insertion, operator-led terrain classification from
online K-means clustering, and revisit planning over low-performance areas.
"""

__version__ = "0.1.0"
