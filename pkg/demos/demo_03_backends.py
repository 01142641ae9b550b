"""Backends: the registry, reference extractors, and external processes.

The two bundled reference models are deterministic stand-ins for pretrained
networks. Anything that can speak the length-prefixed float32 wire protocol
can join the registry as an external process; here the bundled loopback child
plays that role.
"""

import sys

import numpy as np

from echomap import registry_list
from echomap.audio import SegmentBatch
from echomap.backends import (ModelSpec, open_backend, register_external,
                              unregister)

print("registry:")
for spec in registry_list():
    head = f"{len(spec.class_list)}-class head" if spec.has_classifier else "no head"
    print(f"  {spec.name:<10} sr={spec.sample_rate:>6} window={spec.window_s}s "
          f"dim={spec.embedding_dim:<5} {head}")

spec = next(s for s in registry_list() if s.name == "mel-small")
rng = np.random.default_rng(0)


def tone(freq):
    t = np.arange(spec.window_samples) / spec.sample_rate
    return 0.4 * np.sin(2 * np.pi * freq * t)


batch = SegmentBatch(np.stack([tone(440), tone(440), tone(4400)]),
                     [(0, 1), (1, 2), (2, 3)], source="demo")
with open_backend("mel-small") as backend:
    emb = backend.embed(batch)
print(f"\nmel-small embeddings: {emb.shape}, row norms "
      f"{np.linalg.norm(emb, axis=1).round(3)}")
print(f"cos(440 Hz, 440 Hz)  = {float(emb[0] @ emb[1]):+.3f}")
print(f"cos(440 Hz, 4400 Hz) = {float(emb[0] @ emb[2]):+.3f}  "
      "(disjoint mel energy lands farther apart)")

with open_backend("mel-large") as backend:
    silence = backend.embed(SegmentBatch(
        np.zeros((1, backend.spec.window_samples)), [(0, 3)], "demo"))
    scores = backend.classify(silence)
print(f"\nmel-large toy head on the silence vector: "
      f"{scores.round(3).tolist()[0][:5]}... (deterministic)")

# external process: echo child returning each frame's first dim samples
echo_spec = ModelSpec("echo-demo", sample_rate=16000, window_s=64 / 16000,
                      embedding_dim=16)
register_external(echo_spec, [
    sys.executable, "-m", "echomap.loopback", "--dim", "16",
    "--sample-rate", "16000", "--window-samples", "64"])
try:
    frames = rng.standard_normal((3, 64))
    with open_backend("echo-demo") as backend:
        out = backend.embed(SegmentBatch(frames, [(0, 1), (1, 2), (2, 3)], "x"))
    print(f"\nexternal echo backend round-trip exact: "
          f"{np.array_equal(out, frames[:, :16].astype(np.float32))}")
finally:
    unregister("echo-demo")
