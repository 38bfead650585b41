"""Cell-cluster screening and phenotyping toolkit.

Two-stage pipeline for imaging flow cytometry frames: a brightfield stage
that finds and segments circulating cell clusters, and a fluorescence stage
that reads CD61/CD45 staining to call the cluster phenotype. Ships with an
evaluation harness, a synthetic scene generator with exact ground truth,
and an annotation review service.
"""

__version__ = "0.1.0"
