"""
Nearest-neighbour generalization of batch confidences to states the batch
never visited.
"""

import numpy as np

from residual_policy.models import ConfidenceTable
from .models import ConfidenceLabelSet
from .projection import project_confidence


def build_label_set(qp, lam_bar, coordinates=None, metric='manhattan'):
    """Label set holding the solved confidence row of every batch state."""
    return ConfidenceLabelSet(states=qp.states, labels=qp.rows(lam_bar), coordinates=coordinates, metric=metric)


def generalize_confidence(labels, query_state, beta, rho):
    """
    Label of the batch state closest to query_state, projected onto the
    confidence set of the query state's (beta, rho) rows.
    """
    label = labels.labels[labels.nearest(query_state)]
    return project_confidence(label, beta.probs[query_state], rho.probs[query_state])


def generalized_table(labels, beta, rho):
    """
    Full confidence table: batch states keep their own labels, every other
    state takes the generalized label of its nearest batch state.
    """
    table = np.zeros(beta.probs.shape)
    labelled = {int(state): row for state, row in zip(labels.states, labels.labels)}
    for state in range(beta.n_states):
        if state in labelled:
            table[state] = labelled[state]
        else:
            table[state] = generalize_confidence(labels, state, beta, rho)
    return ConfidenceTable(table)
