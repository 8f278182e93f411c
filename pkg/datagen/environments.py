"""
Native finite environments: a reward chain, a slippery gridworld and a
cliff walk, built as FiniteMdp tables from an EnvSpec.
"""

import logging

import numpy as np

from brpo_lab.exceptions import ConfigurationError
from mdp_core.models import FiniteMdp
from .models import EnvSpec

logger = logging.getLogger(__name__)

# Grid moves as (dx, dy): up, right, down, left.
MOVES = ((0, 1), (1, 0), (0, -1), (-1, 0))


def state_coordinates(spec):
    """Per-state coordinate vectors: the position on the chain or the (x, y) cell."""
    if spec.coordinates is not None:
        return np.asarray(spec.coordinates, dtype=np.float64)
    if spec.kind == 'chain':
        return np.arange(spec.n, dtype=np.float64)[:, None]
    cells = np.arange(spec.width * spec.height)
    return np.stack([cells % spec.width, cells // spec.width], axis=1).astype(np.float64)


def chain(n):
    """
    Action 0 stays, action 1 advances to (s + 1) mod n. Both actions pay 1 in
    the last state; the episode starts in state 0.
    """
    transition = np.zeros((n, 2, n))
    states = np.arange(n)
    transition[states, 0, states] = 1.0
    transition[states, 1, (states + 1) % n] = 1.0
    reward = np.zeros((n, 2))
    reward[n - 1] = 1.0
    start = np.zeros(n)
    start[0] = 1.0
    return transition, reward, start


def _grid_transition(width, height, slip, absorbing):
    """
    Four moves; the intended one happens with probability 1 - slip and each
    perpendicular move with slip / 2. Moves off the grid stay put; absorbing
    cells loop on themselves.
    """
    n_states = width * height
    transition = np.zeros((n_states, len(MOVES), n_states))
    for state in range(n_states):
        if state in absorbing:
            transition[state, :, state] = 1.0
            continue
        x, y = state % width, state // width
        for action, move in enumerate(MOVES):
            lateral = [m for m in MOVES if m[0] * move[0] + m[1] * move[1] == 0]
            for (dx, dy), probability in [(move, 1.0 - slip)] + [(m, slip / 2.0) for m in lateral]:
                if probability == 0.0:
                    continue
                nx = min(max(x + dx, 0), width - 1)
                ny = min(max(y + dy, 0), height - 1)
                transition[state, action, ny * width + nx] += probability
    return transition


def _entry_reward(transition, entry):
    """R(s, a) = sum over s' of T(s'|s, a) times the reward for entering s'."""
    return transition @ entry


def gridworld(width, height, slip):
    """
    Start in the corner (0, 0); entering the opposite corner pays 1 and the
    goal is absorbing.
    """
    n_states = width * height
    goal = n_states - 1
    transition = _grid_transition(width, height, slip, absorbing={goal})
    entry = np.zeros(n_states)
    entry[goal] = 1.0
    reward = _entry_reward(transition, entry)
    reward[goal] = 0.0
    start = np.zeros(n_states)
    start[0] = 1.0
    return transition, reward, start


def cliff(width, height, slip, fall_penalty):
    """
    Bottom row: start at (0, 0), goal at (width - 1, 0) and fall cells in
    between. Raw rewards are +1 for entering the goal and -fall_penalty for
    entering a fall cell, then affine-scaled into [0, 1]; goal and fall
    cells are absorbing.

    The scaling adds the same constant to every step, so returns of all
    policies shift by the same amount and their ordering is unchanged.
    Absorbing cells keep a raw reward of 0 and therefore pay
    fall_penalty / (1 + fall_penalty) per step after scaling, 0.5 at the
    default penalty; episodes never end, and a policy parked in the goal or
    a fall cell earns that midpoint forever.
    """
    n_states = width * height
    goal = width - 1
    falls = set(range(1, width - 1))
    transition = _grid_transition(width, height, slip, absorbing=falls | {goal})
    entry = np.zeros(n_states)
    entry[goal] = 1.0
    entry[list(falls)] = -fall_penalty
    raw = _entry_reward(transition, entry)
    raw[list(falls | {goal})] = 0.0
    reward = (raw + fall_penalty) / (1.0 + fall_penalty)
    start = np.zeros(n_states)
    start[0] = 1.0
    return transition, reward, start


def make_env(spec):
    """Build the FiniteMdp described by spec; rewards are scaled to [0, r_max]."""
    if spec.kind == 'chain':
        transition, reward, start = chain(spec.n)
    elif spec.kind == 'gridworld':
        transition, reward, start = gridworld(spec.width, spec.height, spec.slip)
    else:
        transition, reward, start = cliff(spec.width, spec.height, spec.slip, spec.fall_penalty)
    mdp = FiniteMdp(
        reward=np.clip(reward, 0.0, 1.0) * spec.r_max,
        transition=transition,
        start=start,
        gamma=spec.gamma,
        r_max=spec.r_max,
        coordinates=state_coordinates(spec),
        name=spec.label,
    )
    logger.debug(f"Built environment {mdp}")
    return mdp


def parse_env(text, **overrides):
    """
    Parse the CLI form of an environment:

        chain:8
        gridworld:5,5,0.1        width, height, slip
        cliff:4,3,1.0            width, height, fall penalty

    Extra keyword arguments (gamma, r_max, ...) are passed to EnvSpec.
    """
    kind, _, arguments = text.strip().partition(':')
    values = [value.strip() for value in arguments.split(',') if value.strip()]
    names = {'chain': ('n',), 'gridworld': ('width', 'height', 'slip'), 'cliff': ('width', 'height', 'fall_penalty')}
    if kind not in names or len(values) > len(names[kind]):
        raise ConfigurationError(f"unknown environment '{text}'; expected chain:N, gridworld:W,H,SLIP or cliff:W,H,P")
    try:
        fields = {name: float(value) for name, value in zip(names[kind], values)}
    except ValueError as error:
        raise ConfigurationError(f"cannot parse environment '{text}': {error}") from error
    for name in ('n', 'width', 'height'):
        if name in fields:
            if not fields[name].is_integer():
                raise ConfigurationError(f"{name} must be an integer in '{text}'")
            fields[name] = int(fields[name])
    return EnvSpec(kind=kind, **fields, **overrides)
