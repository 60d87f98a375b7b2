#!/usr/bin/env python3
"""Fit a small tanh network to the third rule-based obstacle controller and
write it in the weight-file format read by the mlp controller."""
import argparse
import json

import numpy as np


def pi3(y):
    left = ((y[:, 1] <= 15 - y[:, 0]) & (y[:, 1] >= y[:, 0])) | (y[:, 0] <= 10)
    return np.where(left, -1.2, 1.2)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="configs/mlp_pi3.json")
    ap.add_argument("--hidden", type=int, default=24)
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    lo, hi = np.array([-5.0, -5.0]), np.array([25.0, 25.0])
    y = rng.uniform(lo, hi, size=(8000, 2))
    t = pi3(y)[:, None] / 1.2

    mid, half = (lo + hi) / 2, (hi - lo) / 2
    z = (y - mid) / half
    sizes = [2, args.hidden, args.hidden, 1]
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        params.append([rng.normal(0, 1 / np.sqrt(a), (a, b)), np.zeros(b)])
    m = [[np.zeros_like(p) for p in layer] for layer in params]
    v = [[np.zeros_like(p) for p in layer] for layer in params]
    lr, b1, b2 = 0.01, 0.9, 0.999

    for step in range(1, args.steps + 1):
        acts = [z]
        for W, b in params:
            acts.append(np.tanh(acts[-1] @ W + b))
        g = 2 * (acts[-1] - t) / len(z)
        for i in reversed(range(len(params))):
            g = g * (1 - acts[i + 1] ** 2)
            grads = [acts[i].T @ g, g.sum(0)]
            g = g @ params[i][0].T
            for j in range(2):
                m[i][j] = b1 * m[i][j] + (1 - b1) * grads[j]
                v[i][j] = b2 * v[i][j] + (1 - b2) * grads[j] ** 2
                mh = m[i][j] / (1 - b1 ** step)
                vh = v[i][j] / (1 - b2 ** step)
                params[i][j] -= lr * mh / (np.sqrt(vh) + 1e-8)

    out = acts[-1][:, 0] * 1.2
    agree = np.mean(np.sign(out) == np.sign(pi3(y)))
    print(f"sign agreement on training points: {agree:.4f}")

    # Fold the input normalization into the first layer.
    W0, b0 = params[0]
    W0f = W0 / half[:, None]
    b0f = b0 - (mid / half) @ W0
    layers = [{"w": W0f.T.tolist(), "b": b0f.tolist(), "act": "tanh"}]
    for W, b in params[1:]:
        layers.append({"w": W.T.tolist(), "b": b.tolist(), "act": "tanh"})
    layers.append({"w": [[1.2]], "b": [0.0], "act": "id"})
    with open(args.out, "w") as f:
        json.dump({"layers": layers}, f)
        f.write("\n")


if __name__ == "__main__":
    main()
