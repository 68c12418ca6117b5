"""Two-class contextual stochastic block model (CSBM) generator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .evalmodel import stratified_mask
from .exceptions import InvalidInputError
from .graphcore import LabelSet, SparseGraph

__all__ = ["CsbmParams", "generate", "homophily_sweep", "DEFAULT_P", "DEFAULT_Q"]

DEFAULT_P = 2 * math.log(100) / 100
DEFAULT_Q = math.log(100) / 100


@dataclass(frozen=True)
class CsbmParams:
    """CSBM configuration.

    ``mu1``/``mu2`` default to ``-1`` and ``+1`` times the all-ones vector of
    length ``d``. ``train_ratio`` controls the stratified training mask that
    :func:`generate` attaches to the returned labels.
    """

    N: int = 100
    p: float = DEFAULT_P
    q: float = DEFAULT_Q
    d: int = 8
    mu1: tuple | None = None
    mu2: tuple | None = None
    sigma: float = 1.0
    seed: int = 0
    train_ratio: float = 0.6

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise InvalidInputError("N must be a positive even number")
        for name in ("p", "q", "train_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")
        if not self.sigma > 0:
            raise InvalidInputError("sigma must be positive")
        if self.d <= 0:
            raise InvalidInputError("feature dimension must be positive")
        mu1 = tuple(float(v) for v in (self.mu1 if self.mu1 is not None else [-1.0] * self.d))
        mu2 = tuple(float(v) for v in (self.mu2 if self.mu2 is not None else [1.0] * self.d))
        if len(mu1) != self.d or len(mu2) != self.d:
            raise InvalidInputError("class means must have length d")
        if mu1 == mu2:
            raise InvalidInputError("class means must differ")
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)

    def to_dict(self):
        out = asdict(self)
        out["mu1"] = list(self.mu1)
        out["mu2"] = list(self.mu2)
        return out

    @classmethod
    def from_dict(cls, data):
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**fields)


def generate(params):
    """Sample ``(graph, features, labels)``.

    The first ``N/2`` nodes are class 0. Pairs are visited in lexicographic
    order, each with one uniform draw, so results depend only on the seed.
    """
    N = params.N
    edge_ss, feat_ss, mask_ss = np.random.SeedSequence(params.seed).spawn(3)
    classes = np.repeat([0, 1], N // 2)

    iu, ju = np.triu_indices(N, k=1)
    u = np.random.default_rng(edge_ss).random(len(iu))
    prob = np.where(classes[iu] == classes[ju], params.p, params.q)
    hit = u < prob
    graph = SparseGraph(N, np.stack([iu[hit], ju[hit]], axis=1))

    mu = np.array([params.mu1, params.mu2])
    noise = np.random.default_rng(feat_ss).standard_normal((N, params.d))
    X = mu[classes] + params.sigma * noise

    mask = stratified_mask(classes, params.train_ratio, np.random.default_rng(mask_ss))
    return graph, X, LabelSet(classes, mask)


def homophily_sweep(base, phi):
    """Redistribute the edge budget ``p + q`` according to ``phi`` in [-1, 1].

    ``phi = 1`` keeps only intra-class edges, ``phi = -1`` only inter-class
    edges, ``phi = 0`` splits evenly.
    """
    if not -1.0 <= phi <= 1.0:
        raise InvalidInputError("phi must lie in [-1, 1]")
    total = base.p + base.q
    p_new = total * (1 + phi) / 2
    q_new = total * (1 - phi) / 2
    if not (0.0 <= p_new <= 1.0 and 0.0 <= q_new <= 1.0):
        raise InvalidInputError(f"phi={phi} yields probabilities outside [0, 1]")
    return replace(base, p=p_new, q=q_new)
