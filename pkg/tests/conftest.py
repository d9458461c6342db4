import json

import numpy as np
import pytest

from causeq.diagnostics import simulate
from causeq.events import ingest
from causeq.hawkes import HawkesModel, KernelBank


def jsonl(rows):
    return "\n".join(json.dumps({"seq": s, "type": t, "t": ts}) for s, t, ts in rows)


def make_dataset(rows, sidecar=None):
    return ingest(jsonl(rows), "jsonl", sidecar=sidecar)


@pytest.fixture(scope="session")
def small_bank():
    return KernelBank(centers=(1.0, 3.0), sigma=1.0)


@pytest.fixture(scope="session")
def poisson_dataset(small_bank):
    """Independent streams: no cross-excitation anywhere."""
    truth = HawkesModel(mu=np.array([0.3, 0.25, 0.2]), a=np.zeros((3, 3, 2)),
                        kernels=small_bank)
    return truth, simulate(truth, 150, 40.0, seed=3)


@pytest.fixture(scope="session")
def planted_dataset(small_bank):
    """Single strong A -> B excitation planted in 3-type noise."""
    a = np.zeros((3, 3, 2))
    a[1, 0] = [0.35, 0.25]
    truth = HawkesModel(mu=np.array([0.25, 0.15, 0.2]), a=a, kernels=small_bank)
    return truth, simulate(truth, 150, 40.0, seed=4)
