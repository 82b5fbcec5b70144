"""Cluster-then-mine analysis of automated-vehicle crash reports.

Crash records are cleaned into a categorical feature table, partitioned with
K-means over label codes (K picked at the elbow of the WCSS curve), and each
cluster is mined with Apriori for ranked association rules.
"""

__version__ = "0.1.0"

from crashrules.arm import Itemset, Rule, Thresholds, apriori, generate_rules, rank_rules, support
from crashrules.cluster import ClusterModel, ElbowCurve, kmeans_fit, lloyd_step, select_elbow, wcss_sweep
from crashrules.encode import LabelEncodedMatrix, TransactionSet, label_encode, one_hot
from crashrules.ingest import BinSpec, ColumnSpec, FeatureTable, IngestConfig, RawRecord, ingest
from crashrules.pipeline import PipelineConfig, RunReport, run_pipeline

__all__ = [
    "BinSpec",
    "ClusterModel",
    "ColumnSpec",
    "ElbowCurve",
    "FeatureTable",
    "IngestConfig",
    "Itemset",
    "LabelEncodedMatrix",
    "PipelineConfig",
    "RawRecord",
    "Rule",
    "RunReport",
    "Thresholds",
    "TransactionSet",
    "apriori",
    "generate_rules",
    "ingest",
    "kmeans_fit",
    "label_encode",
    "lloyd_step",
    "one_hot",
    "rank_rules",
    "run_pipeline",
    "select_elbow",
    "support",
    "wcss_sweep",
]
