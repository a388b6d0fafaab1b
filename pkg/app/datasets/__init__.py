"""
Labelled datasets, task construction and adaptation splits.
"""

from app.datasets.generate import generate_dataset, label_ratio, verify_labels
from app.datasets.records import DatasetFile, SamplePair, canonicalize, merge_datasets
from app.datasets.tasks import TaskDataset, build_tasks, split_adaptation, tasks_from_index

__all__ = [
    "DatasetFile",
    "SamplePair",
    "TaskDataset",
    "build_tasks",
    "canonicalize",
    "generate_dataset",
    "label_ratio",
    "merge_datasets",
    "split_adaptation",
    "tasks_from_index",
    "verify_labels",
]
