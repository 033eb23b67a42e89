#!/usr/bin/env python3
"""
Convert a torchvision MobileNetV2 checkpoint into an LWT weight file.

Offline helper; lungline itself never imports torch. Usage::

    python scripts/convert_torchvision.py mobilenet_v2-b0353104.pth mobilenet_v2.lwt

The name mapping is documented in docs/weight_names.md.
"""
import argparse
import re
import sys

import numpy as np

BN_SUFFIX = {"weight": "gamma", "bias": "beta", "running_mean": "running_mean", "running_var": "running_var"}


def torchvision_name(name: str):
    """Map one torchvision state_dict key to a lungline name (None = drop)."""
    if name.endswith("num_batches_tracked"):
        return None
    m = re.fullmatch(r"classifier\.1\.(weight|bias)", name)
    if m:
        return f"head.{m.group(1)}"
    m = re.fullmatch(r"features\.0\.0\.weight", name)
    if m:
        return "stem.conv.weight"
    m = re.fullmatch(r"features\.0\.1\.(\w+)", name)
    if m:
        return f"stem.bn.{BN_SUFFIX[m.group(1)]}"
    m = re.fullmatch(r"features\.18\.0\.weight", name)
    if m:
        return "last.conv.weight"
    m = re.fullmatch(r"features\.18\.1\.(\w+)", name)
    if m:
        return f"last.bn.{BN_SUFFIX[m.group(1)]}"
    m = re.fullmatch(r"features\.(\d+)\.conv\.(.+)", name)
    if not m:
        raise KeyError(f"unrecognised torchvision key {name!r}")
    block = int(m.group(1)) - 1
    rest = m.group(2)
    if block == 0:
        # expansion 1: conv.0 = dw+bn, conv.1 = pw, conv.2 = bn
        table = {"0.0.weight": "dw.weight", "1.weight": "pw.weight"}
        bn = {"0.1": "bn1", "2": "bn2"}
    else:
        table = {"0.0.weight": "conv.weight", "1.0.weight": "dw.weight", "2.weight": "pw.weight"}
        bn = {"0.1": "bn1", "1.1": "bn2", "3": "bn3"}
    if rest in table:
        return f"block{block}.{table[rest]}"
    prefix, field = rest.rsplit(".", 1)
    return f"block{block}.{bn[prefix]}.{BN_SUFFIX[field]}"


def convert_state_dict(state_dict) -> dict:
    out = {}
    for key, value in state_dict.items():
        name = torchvision_name(key)
        if name is not None:
            out[name] = np.asarray(value.detach().cpu().numpy() if hasattr(value, "detach") else value,
                                   dtype=np.float32)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("checkpoint", help="torchvision .pth state_dict")
    ap.add_argument("output", help="destination .lwt file")
    args = ap.parse_args(argv)

    import torch
    from lungline.weights import save_lwt

    state = torch.load(args.checkpoint, map_location="cpu")
    if "state_dict" in state:
        state = state["state_dict"]
    n = save_lwt(convert_state_dict(state), args.output)
    print(f"wrote {n} bytes to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
