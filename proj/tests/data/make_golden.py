"""Regenerates small/golden_embed.csv with a plain numpy implementation.

Run from this directory: python3 make_golden.py
"""
import json
import os

import numpy as np


def load_graph(d):
    x = np.loadtxt(os.path.join(d, "features.csv"), delimiter=",", ndmin=2)
    n = x.shape[0]
    nbrs = [set() for _ in range(n)]
    for line in open(os.path.join(d, "edges.tsv")):
        a, b = map(int, line.split("\t"))
        if a != b:
            nbrs[a].add(b)
            nbrs[b].add(a)
    return x, [sorted(s) for s in nbrs]


def em_embed(points, anchors, iters):
    theta = anchors.copy()
    for _ in range(iters):
        cost = 0.5 * ((points[:, None, :] - theta[None, :, :]) ** 2).sum(-1)
        logits = -cost - (-cost).max(axis=1, keepdims=True)
        alpha = np.exp(logits)
        alpha /= alpha.sum(axis=1, keepdims=True)
        mass = alpha.sum(axis=0)
        new = (alpha.T @ points) / np.where(mass > 0, mass, 1.0)[:, None]
        theta = np.where((mass >= 1e-12)[:, None], new, theta)
    return ((theta - anchors) / np.sqrt(anchors.shape[0])).ravel()


def main():
    x, nbrs = load_graph("small")
    model = json.load(open("small/model/model.json"))
    blocks = [x]
    h = x
    for layer in model["layers"]:
        anchors = np.loadtxt(os.path.join("small/model", layer["anchors"]), delimiter=",", ndmin=2)
        out = []
        for v in range(h.shape[0]):
            ids = sorted(nbrs[v] + ([v] if layer["include_self"] else []))
            ids = ids or [v]
            e = em_embed(h[ids], anchors, layer["em_iters"])
            if layer["nonlinearity"] == "relu":
                e = np.maximum(e, 0.0)
            out.append(e)
        h = np.array(out)
        blocks.append(h)
    np.savetxt("small/golden_embed.csv", np.hstack(blocks), delimiter=",", fmt="%.17g")


if __name__ == "__main__":
    main()
