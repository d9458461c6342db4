"""Start the HTTP service with the demo dataset pre-loaded and a session
already fitted, then serve the UI (if frontend/dist exists).

    python scripts/make_demo.py
    python scripts/serve_demo.py
    # open http://127.0.0.1:8700 and attach the printed session id
"""

import os
from pathlib import Path

import uvicorn
from fastapi.testclient import TestClient

from causeq.service import create_app


def main():
    root = Path(__file__).resolve().parents[1]
    demo = root / "demo" / "events.jsonl"
    if not demo.exists():
        raise SystemExit("run scripts/make_demo.py first")

    static = root / "frontend" / "dist"
    app = create_app(data_dir=root / "demo" / "workspace",
                     static_dir=static if static.is_dir() else None)

    seed_client = TestClient(app)
    sidecar_path = Path(str(demo) + ".sidecar.json")
    body = {"format": "jsonl", "content": demo.read_text()}
    if sidecar_path.exists():
        import json
        body["sidecar"] = json.loads(sidecar_path.read_text())
    ds = seed_client.post("/datasets", json=body).json()
    session = seed_client.post("/sessions", json={
        "dataset_id": ds["id"],
        "query": {},
        "fit": {"alpha": 30.0, "max_iters": 120},
        "outcome": "D",
    }).json()
    print(f"dataset {ds['id']} loaded ({ds['sequences']} sequences)")
    print(f"session ready: {session['id']} (outcome D revealed; expand from there)")

    port = int(os.environ.get("CAUSEQ_PORT", 8700))
    uvicorn.run(app, host="127.0.0.1", port=port)


if __name__ == "__main__":
    main()
