"""Generate a demo dataset + ground-truth files under ./demo for the CLI.

    python scripts/make_demo.py
    causeq fit --data demo/events.jsonl --alpha 30 --out demo/model.json
    causeq graph --data demo/events.jsonl --model demo/model.json
"""

import json
from pathlib import Path

import numpy as np

from causeq.diagnostics import simulate
from causeq.events import write_dataset
from causeq.hawkes import HawkesModel, KernelBank


def main():
    out = Path("demo")
    out.mkdir(exist_ok=True)
    bank = KernelBank(centers=(1.0, 3.0), sigma=1.0)
    a = np.zeros((4, 4, 2))
    a[1, 0] = [0.35, 0.25]   # A -> B
    a[2, 1] = [0.3, 0.2]     # B -> C
    a[3, 2] = [0.25, 0.15]   # C -> D
    a[0, 3] = [0.1, 0.05]    # D -> A, weak loop closure
    truth = HawkesModel(mu=np.full(4, 0.08), a=a, kernels=bank)
    data = simulate(truth, 200, 40.0, seed=17)

    # demo cohort attributes for the query filters
    rng = np.random.default_rng(17)
    for seq in data.sequences:
        seq.metadata["age"] = int(rng.integers(30, 90))
        seq.metadata["gender"] = str(rng.choice(["f", "m"]))
    data.attribute_schema = {"age": "numeric", "gender": "categorical"}

    write_dataset(data, out / "events.jsonl")
    (out / "truth_model.json").write_text(json.dumps(truth.to_json(), indent=1))
    (out / "truth_graph.json").write_text(json.dumps(
        {"edges": [["A", "B"], ["B", "C"], ["C", "D"], ["D", "A"]]}, indent=1))
    print(f"wrote demo dataset: {len(data.sequences)} sequences, "
          f"{data.total_events()} events -> {out}/")


if __name__ == "__main__":
    main()
