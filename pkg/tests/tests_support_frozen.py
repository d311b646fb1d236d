"""Frozen finite state space for enumerating the sampler's transition kernel.

Shared by the unit suite and the acceptance suite.
"""

import itertools
import math
from collections import Counter

import numpy as np

from atombayes import (
    DiscreteMeasure,
    Domain,
    GaussianKernelForward,
    GaussianMark,
    NoiseModel,
    PoissonCount,
    Posterior,
    PriorSpec,
    SamplerConfig,
    SensorSet,
    UniformLocations,
)
from atombayes.sampler import (
    birth_log_acceptance,
    death_log_acceptance,
    move_probabilities,
)

UNIT = Domain([0.0], [1.0])




class FrozenSpace:
    """Discrete analogue of the sampler: 3 nodes, amplitudes {-1, +1}, K <= 2.

    Atom types are (node, amplitude) pairs; birth proposes a type uniformly
    (probability 1/6, playing the role of the continuous location x mark
    density), death removes a uniformly chosen atom, moves re-draw the node
    uniformly and perturbs flip the amplitude sign.  Acceptance ratios are
    the production ones: birth/death use the count-law and move-probability
    corrections, in-place moves use the plain posterior ratio (the discrete
    location/mark laws are uniform, so their density terms vanish).
    """

    NODES = (0.0, 0.5, 1.0)
    AMPS = (-1.0, 1.0)

    def __init__(self, cfg, count_law, posterior):
        self.cfg = cfg
        self.count = count_law
        self.posterior = posterior
        self.k_max = cfg.k_max
        self.types = list(itertools.product(range(3), range(2)))
        singles = [(t,) for t in self.types]
        pairs = [
            tuple(sorted(p))
            for p in itertools.combinations_with_replacement(self.types, 2)
        ]
        self.states = [()] + singles + pairs
        self.index = {s: i for i, s in enumerate(self.states)}
        self._ll = {}

    def measure(self, state):
        if not state:
            return DiscreteMeasure.empty(UNIT)
        locs = [[self.NODES[t[0]]] for t in state]
        amps = [[self.AMPS[t[1]]] for t in state]
        return DiscreteMeasure(UNIT, locs, amps)

    def loglik(self, state):
        if state not in self._ll:
            self._ll[state] = self.posterior.log_likelihood(self.measure(state))
        return self._ll[state]

    def stationary(self):
        """Exact multiset posterior probabilities by direct enumeration:
        prior prob of an unordered configuration times the likelihood."""
        weights = []
        for s in self.states:
            n = len(s)
            multi = math.factorial(n)
            for _, c in Counter(s).items():
                multi //= math.factorial(c)
            prior = math.exp(self.count.log_pmf(n)) * multi * (1.0 / 6.0) ** n
            weights.append(prior * math.exp(self.loglik(s)))
        w = np.array(weights)
        return w / w.sum()

    def transition_matrix(self):
        m = len(self.states)
        P = np.zeros((m, m))
        for i, s in enumerate(self.states):
            n = len(s)
            pb, pd, pm, pp = move_probabilities(n, self.k_max, self.cfg)
            ll_s = self.loglik(s)
            # births
            if pb > 0:
                for t in self.types:
                    s2 = tuple(sorted(s + (t,)))
                    dll = self.loglik(s2) - ll_s
                    alpha = min(
                        1.0,
                        math.exp(birth_log_acceptance(
                            self.count, self.cfg, self.k_max, n, dll
                        )),
                    )
                    P[i, self.index[s2]] += pb * (1.0 / 6.0) * alpha
            # deaths
            if pd > 0 and n > 0:
                for t, c in Counter(s).items():
                    s2 = list(s)
                    s2.remove(t)
                    s2 = tuple(sorted(s2))
                    dll = self.loglik(s2) - ll_s
                    alpha = min(
                        1.0,
                        math.exp(death_log_acceptance(
                            self.count, self.cfg, self.k_max, n, dll
                        )),
                    )
                    P[i, self.index[s2]] += pd * (c / n) * alpha
            # node moves (uniform over the 3 nodes, symmetric)
            if pm > 0 and n > 0:
                for t, c in Counter(s).items():
                    for node in range(3):
                        t2 = (node, t[1])
                        s2 = list(s)
                        s2.remove(t)
                        s2 = tuple(sorted(s2 + [t2]))
                        alpha = min(1.0, math.exp(self.loglik(s2) - ll_s))
                        P[i, self.index[s2]] += pm * (c / n) * (1.0 / 3.0) * alpha
            # amplitude sign flips (an involution, symmetric)
            if pp > 0 and n > 0:
                for t, c in Counter(s).items():
                    t2 = (t[0], 1 - t[1])
                    s2 = list(s)
                    s2.remove(t)
                    s2 = tuple(sorted(s2 + [t2]))
                    alpha = min(1.0, math.exp(self.loglik(s2) - ll_s))
                    P[i, self.index[s2]] += pp * (c / n) * alpha
            P[i, i] += 1.0 - P[i].sum()
        return P


def frozen_space():
    fwd = GaussianKernelForward(0.3, SensorSet([[0.2], [0.8]]))
    noise = NoiseModel.iso(0.5, 2)
    prior = PriorSpec(
        PoissonCount(1.2), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
    )
    posterior = Posterior(prior, fwd, noise, np.array([0.7, -0.4]))
    cfg = SamplerConfig(k_max=2).resolve(posterior)
    return FrozenSpace(cfg, prior.count, posterior)


