"""FGSM robustness benchmark for small FNNs and CNNs on MNIST.

Numerical core (``ndcore``, ``autonet``), the model catalog (``zoo``), data
loading (``mnist``), SGD training (``trainer``), the attack (``attack``), the
accuracy-trend analysis (``trend``) and file formats (``runio``).
"""

__version__ = "0.1.0"
