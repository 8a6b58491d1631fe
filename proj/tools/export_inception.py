#!/usr/bin/env python3
"""Export torchvision Inception-v3 weights for `--extractor pretrained-inception`.

The native extractor feeds [-1, 1] images straight into Conv2d_1a_3x3, so the
torchvision `transform_input` remap is not applied. Batch-norm statistics are stored
unfolded; the loader folds them with eps 1e-3.

    python tools/export_inception.py --out inception.rsit            # pretrained
    python tools/export_inception.py --out rand.rsit --random-init   # offline, for tests
"""

import argparse
import json
import struct
import sys

import numpy as np

MAGIC = b"RSITCKPT"
VERSION = 1
FORMAT = "rsit-inception-v3"


def write_container(path, meta, tensors):
    entries, offset = [], 0
    for name, arr in tensors:
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "f64", "offset": offset})
        offset += arr.size
    manifest = json.dumps({"meta": meta, "tensors": entries}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for _, arr in tensors:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def build_model(random_init, seed):
    import torch
    from torchvision.models import inception_v3

    if random_init:
        torch.manual_seed(seed)
        model = inception_v3(weights=None, aux_logits=False, init_weights=True)
        # Non-trivial running statistics so the folding path is exercised.
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.running_mean.uniform_(-0.1, 0.1)
                m.running_var.uniform_(0.5, 1.5)
                m.weight.data.uniform_(0.5, 1.5)
                m.bias.data.uniform_(-0.1, 0.1)
    else:
        from torchvision.models import Inception_V3_Weights

        model = inception_v3(weights=Inception_V3_Weights.IMAGENET1K_V1)
    return model.eval()


def state_tensors(model):
    out = []
    for name, t in model.state_dict().items():
        if name.startswith("AuxLogits") or name.endswith("num_batches_tracked"):
            continue
        out.append((name, t.detach().double().cpu().numpy()))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", required=True, help="output weight file")
    ap.add_argument("--random-init", action="store_true", help="random weights instead of the ImageNet download")
    ap.add_argument("--seed", type=int, default=0, help="torch seed for --random-init")
    args = ap.parse_args(argv)
    try:
        model = build_model(args.random_init, args.seed)
    except Exception as e:  # missing torch/torchvision or no network for the download
        print(f"export_inception: {e}", file=sys.stderr)
        return 2
    tensors = state_tensors(model)
    meta = {"format": FORMAT, "source": "torchvision", "random_init": args.random_init, "bn_eps": 1e-3}
    write_container(args.out, meta, tensors)
    print(f"wrote {len(tensors)} tensors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
