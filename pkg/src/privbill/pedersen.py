"""Pedersen commitments and the two homomorphic identities.

A commitment to x under blinding r is c = g^x * h^r.  Multiplying two
commitments yields a commitment to the sum of the values (and the sum of
the blindings); raising a commitment to t yields a commitment to t*x with
blinding t*r.  Both identities are what lets the back-end verify a bill
without ever seeing the consumption values.
"""

from __future__ import annotations

from .group import GroupParams


def commit(params: GroupParams, x: int, r: int) -> int:
    """c = g^x * h^r. Inputs are reduced mod q here; callers may pass raw ints."""
    return params.mul(params.exp_g(x), params.exp_h(r))


def open_commitment(params: GroupParams, c: int, x: int, r: int) -> bool:
    """Accept iff c is a commitment to (x, r)."""
    return c == commit(params, x, r)


def hom_combine(params: GroupParams, a: int, b: int) -> int:
    """Product of commitments; opens under the sums of values and blindings."""
    return params.mul(a, b)


def hom_scale(params: GroupParams, a: int, t: int) -> int:
    """Commitment raised to t; opens under (x*t, r*t)."""
    return params.exp(a, t)


def fold_commitments(params: GroupParams, comms: list[int], weights: list[int]) -> int:
    """Weighted fold: product of comms[k]^weights[k].

    This is the aggregate the verifier opens against (price, r'); the weights
    are the tariff rates.
    """
    if len(comms) != len(weights):
        raise ValueError("commitment and weight vectors differ in length")
    acc = params.identity
    for c, w in zip(comms, weights):
        acc = hom_combine(params, acc, hom_scale(params, c, w))
    return acc
