"""File formats: model/parameter/input JSON, trace CSV, manifests, SVG.

JSON numbers are written through Python's repr, which round-trips every
double exactly; traces are RFC-4180 CSV with the time column first.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .network import DynnParams, HorizontalLayer, NeuronSpec
from .preprocess import StateSpace
from .simulate import InputSignal, derive_input_signal

PARAMS_FORMAT = "dynnet-params-v1"


def save_model(path, ss):
    doc = {
        "A": ss.a.tolist(),
        "B": ss.b.tolist(),
        "C": ss.c.tolist(),
        "D": ss.d.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return StateSpace(a=doc["A"], b=doc["B"], c=doc["C"], d=doc["D"])
    except KeyError as exc:
        raise ValueError(f"model file {path} is missing matrix {exc}") from exc


def params_to_dict(params, summary=None):
    doc = {
        "format": PARAMS_FORMAT,
        "n_inputs": params.n_inputs,
        "n_outputs": params.n_outputs,
        "layers": [
            {
                "neurons": [
                    {
                        "order": nr.order,
                        "m": nr.m,
                        "c": nr.c,
                        "k": nr.k,
                        "w": nr.w.tolist(),
                    }
                    for nr in layer.neurons
                ]
            }
            for layer in params.layers
        ],
        # output weights: d_o x 2 per second-order neuron, d_o x 1 per
        # first-order neuron (the dropped column is identically zero)
        "phi": [
            [p.tolist() for p in layer_phi] for layer_phi in params.phi
        ],
        "psi": params.psi.tolist(),
    }
    if summary is not None:
        doc["summary"] = summary
    return doc


def params_from_dict(doc):
    if doc.get("format") != PARAMS_FORMAT:
        raise ValueError(f"unknown parameter file format {doc.get('format')!r}")
    d_i = int(doc["n_inputs"])
    layers = []
    for lay in doc["layers"]:
        neurons = [
            NeuronSpec(
                order=nr["order"],
                m=float(nr["m"]),
                c=float(nr["c"]),
                k=float(nr["k"]),
                w=np.asarray(nr["w"], dtype=float),
            )
            for nr in lay["neurons"]
        ]
        layers.append(HorizontalLayer(neurons=tuple(neurons), n_inputs=d_i))
    phi = tuple(
        tuple(np.asarray(p, dtype=float) for p in layer_phi)
        for layer_phi in doc["phi"]
    )
    return DynnParams(
        layers=tuple(layers),
        phi=phi,
        psi=np.asarray(doc["psi"], dtype=float),
        n_inputs=d_i,
        n_outputs=int(doc["n_outputs"]),
    )


def save_params(path, params, summary=None):
    with open(path, "w") as fh:
        json.dump(params_to_dict(params, summary), fh)


def load_params(path):
    with open(path) as fh:
        return params_from_dict(json.load(fh))


def save_input(path, signal):
    if signal.kind != "sampled":
        raise ValueError("only sampled input signals can be written to disk")
    doc = {
        "times": signal.times.tolist(),
        "values": signal.values.tolist(),
        "mode": signal.mode,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_input(path):
    with open(path) as fh:
        doc = json.load(fh)
    return derive_input_signal(
        doc["times"], doc["values"], mode=doc.get("mode", "piecewise-linear")
    )


def write_trace(path, times, outputs):
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"y_{j + 1}" for j in range(outputs.shape[1])])
        for t, row in zip(times, outputs):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_trace(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows)
    return header, data[:, 0], data[:, 1:]


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_manifest(path):
    with open(path) as fh:
        return json.load(fh)


def write_svg(path, times, curves, labels=None, width=800, height=400, max_curves=8):
    """Raw polyline plot of up to ``max_curves`` columns against time."""
    times = np.asarray(times, dtype=float)
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    if curves.shape[0] == times.size and curves.shape[1] != times.size:
        curves = curves.T
    curves = curves[:max_curves]
    lo = min(float(curves.min()), 0.0)
    hi = max(float(curves.max()), lo + 1e-30)
    pad = 40
    sx = (width - 2 * pad) / (times[-1] - times[0] or 1.0)
    sy = (height - 2 * pad) / (hi - lo or 1.0)
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" '
        f'height="{height - 2 * pad}" fill="none" stroke="black"/>',
    ]
    for j, row in enumerate(curves):
        pts = " ".join(
            f"{pad + (t - times[0]) * sx:.2f},{height - pad - (v - lo) * sy:.2f}"
            for t, v in zip(times, row)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" '
            f'stroke="{colors[j % len(colors)]}" stroke-width="1"/>'
        )
        if labels:
            parts.append(
                f'<text x="{width - pad + 2}" y="{pad + 14 * (j + 1)}" '
                f'font-size="11" fill="{colors[j % len(colors)]}">{labels[j]}</text>'
            )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
