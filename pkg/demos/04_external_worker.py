"""Drive the search through an out-of-process extractor.

Real pretrained models attach to the engine over a stdin/stdout protocol:
8-byte little-endian length, JSON header, then float32 payloads. This demo
writes a minimal Python worker to a temp file (the same wire format the
bundled TypeScript reference adapter speaks), spawns it, and runs a search
with it as the frozen extractor. The worker here is an identity model, so
the search degenerates to the fallback everywhere, but the bytes crossing
the pipe are exactly what a DPRNN or SpEx+ wrapper would see.
"""

import sys
import tempfile
import textwrap
from pathlib import Path

import numpy as np

from tse_search import QualityScorer, SearchConfig, make_external, run_search, synthesize_scene

WORKER_SOURCE = textwrap.dedent(
    '''
    import json, struct, sys
    import numpy as np

    def read_exact(n):
        data = b""
        while len(data) < n:
            chunk = sys.stdin.buffer.read(n - len(data))
            if not chunk:
                return None
            data += chunk
        return data

    def respond(header, payloads=None):
        blob = json.dumps(header).encode()
        sys.stdout.buffer.write(struct.pack("<Q", len(blob)) + blob)
        for entry in header.get("payloads", []):
            sys.stdout.buffer.write(payloads[entry["name"]].astype("<f4").tobytes())
        sys.stdout.buffer.flush()

    while True:
        raw = read_exact(8)
        if raw is None:
            break
        (n,) = struct.unpack("<Q", raw)
        header = json.loads(read_exact(n))
        payloads = {p["name"]: np.frombuffer(read_exact(4 * p["len"]), dtype="<f4")
                    for p in header.get("payloads", [])}
        if header["op"] == "hello":
            respond({"ok": True, "ops": ["extract"]})
        elif header["op"] == "extract":
            est = payloads["input"]  # identity model: echo the mixture back
            respond({"ok": True, "payloads": [{"name": "estimate", "len": int(est.size)}]},
                    {"estimate": est})
        else:
            respond({"ok": False, "error": "unsupported op"})
    '''
)


def main():
    worker_path = Path(tempfile.mkdtemp(prefix="tse_worker_")) / "identity_worker.py"
    worker_path.write_text(WORKER_SOURCE)

    scene = synthesize_scene(seed=5, duration=1.0, snr_db=0.0)
    with make_external([sys.executable, str(worker_path)], timeout=10.0) as extractor:
        print(f"worker up, declared ops: {extractor.worker.ops}")

        out = extractor.extract(scene.mixture, scene.enrollment)
        f32 = scene.mixture.samples.astype(np.float32).astype(np.float64)
        print(f"round trip bit-exact at float32 precision: {np.array_equal(out.samples, f32)}")

        trajectory = run_search(
            extractor, QualityScorer(), scene, SearchConfig(steps=2, candidates=4, seed=0)
        )
        print(f"search ran {len(trajectory.steps)} steps through the subprocess; "
              f"scores: {[round(r.selected_score, 4) for r in trajectory.steps]}")
    print("worker shut down cleanly")


if __name__ == "__main__":
    main()
