"""Small shared builders for the test suite."""

import numpy as np

from fedsim import ClientUpdate, ParamVector, ShapeManifest


def make_vec(values) -> ParamVector:
    """ParamVector over a single flat tensor of matching length."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    manifest = ShapeManifest.from_shapes([("w", (arr.size,))])
    return ParamVector(arr, manifest)


def make_updates(param_rows, counts=None) -> list[ClientUpdate]:
    """One ClientUpdate per row, sharing a manifest."""
    vectors = [make_vec(row) for row in param_rows]
    if counts is None:
        counts = [1] * len(vectors)
    return [
        ClientUpdate(client_id=f"client_{i}", num_examples=int(n), params=v)
        for i, (v, n) in enumerate(zip(vectors, counts))
    ]


def random_vectors(rng, num, size):
    """A list of ParamVectors with shared manifest and N(0,1) entries."""
    manifest = ShapeManifest.from_shapes([("w", (size,))])
    return [ParamVector(rng.normal(size=size), manifest) for _ in range(num)]


def finite_difference_gradient(params, spec, features, labels, h=1e-5):
    """Central-difference loss gradient, coordinate by coordinate."""
    from fedsim import loss_and_gradient

    base = params.values
    numeric = np.zeros_like(base)
    for i in range(base.size):
        bump = np.zeros_like(base)
        bump[i] = h
        plus, _ = loss_and_gradient(params.with_values(base + bump), spec, features, labels)
        minus, _ = loss_and_gradient(params.with_values(base - bump), spec, features, labels)
        numeric[i] = (plus - minus) / (2.0 * h)
    return numeric
