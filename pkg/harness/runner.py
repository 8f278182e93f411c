"""
Experiment steps shared by the CLI commands and the Celery tasks: resolve
the environment and behavior policy of a batch, train one algorithm,
evaluate a policy and run one cell of the sweep protocol.
"""

import logging
import time

import numpy as np

from baselines.algorithms import BASELINES, behavior_cloning
from brpo_lab.exceptions import ConfigurationError
from brpo_solver.coordinate_ascent import coordinate_ascent
from critic.estimators import estimate_advantage
from datagen.behavior import behavior_policy
from datagen.environments import make_env, parse_env
from datagen.sampling import generate_batch
from mdp_core.evaluation import expected_return, optimal_policy, rollout_returns
from mdp_core.models import TabularPolicy
from .metrics import mean_and_stderr, window
from .models import ExperimentConfig

logger = logging.getLogger(__name__)


def derive_seed(seed, index):
    """Integer seed of run `index` under the master seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def resolve_env(config, env_text=None, batch=None):
    """
    Environment from the CLI string, else the batch metadata, else the
    config. The experiment discount always applies.
    """
    if env_text is None and batch is not None:
        env_text = batch.meta.get('env')
    if env_text is None:
        spec = config.env
    else:
        spec = parse_env(env_text, gamma=config.gamma)
    return make_env(spec)


def resolve_behavior(batch, mdp):
    """Behavior policy recorded in the batch header, else cloned from the batch."""
    recorded = batch.meta.get('behavior')
    if recorded is not None:
        beta = TabularPolicy(recorded)
        beta.check_dimensions(mdp.n_states, mdp.n_actions, name='recorded behavior')
        return beta
    logger.info("Batch header has no behavior policy; using behavior cloning")
    return behavior_cloning(batch, mdp.n_states, mdp.n_actions)


def evaluate(mdp, pi, config, seed=0):
    """
    Score pi under config.evaluation: exact returns by linear solve, or the
    mean and standard error of discounted rollout returns.
    """
    evaluation = config.evaluation
    if evaluation.mode == 'exact':
        return {'mode': 'exact', 'J': expected_return(mdp, pi), 'stderr': 0.0}
    rng = np.random.default_rng(seed)
    mean, stderr = mean_and_stderr(rollout_returns(mdp, pi, evaluation.episodes, rng))
    return {'mode': 'rollout', 'J': mean, 'stderr': stderr}


def evaluation_report(mdp, pi, beta, config, seed=0):
    """J of pi and of beta under the same evaluation mode, and their gap."""
    policy = evaluate(mdp, pi, config, seed=seed)
    behavior = evaluate(mdp, beta, config, seed=seed)
    return {
        'mode': policy['mode'],
        'J_policy': policy['J'],
        'J_policy_stderr': policy['stderr'],
        'J_behavior': behavior['J'],
        'J_behavior_stderr': behavior['stderr'],
        'gap': policy['J'] - behavior['J'],
    }


def _train_brpo(batch, beta, mdp, config, clock):
    started = clock()
    critic = config.critic_for_brpo()
    advantage = estimate_advantage(critic, beta, mdp=mdp, batch=batch)
    exact = config.evaluation.mode == 'exact'
    result = coordinate_ascent(batch, beta, advantage, config.brpo, gamma=config.gamma, mdp=mdp if exact else None,
                               eval_interval=config.evaluation.interval)
    rows = result.trace.as_rows()
    if exact:
        evaluated = [row for row in rows if row['half_step'] == 'lambda' and row['J_exact'] != '']
        smoothed = window([row['J_exact'] for row in evaluated], config.evaluation.window)
        for row, value in zip(evaluated, smoothed):
            row['J_window'] = float(value)
    return result.residual.mixed, rows, clock() - started


def _train_baseline(batch, beta, mdp, config, algo, clock):
    started = clock()
    baseline = config.baseline.model_copy(update={'algo': algo})
    pi = BASELINES[algo](batch, beta, baseline, config.gamma, r_max=mdp.r_max)
    row = {'iter': 1, 'algo': algo}
    if config.evaluation.mode == 'exact':
        row['J_exact'] = expected_return(mdp, pi)
    return pi, [row], clock() - started


def train_policy(batch, beta, mdp, config, algo=None, clock=time.perf_counter):
    """
    Run one algorithm on the batch.

    Returns (policy, metric rows, elapsed seconds). BRPO rows follow the
    coordinate-ascent trace; baselines emit a single row. In rollout mode the
    last row carries the rollout score of the returned policy.
    """
    algo = algo or config.algo
    if algo == 'brpo':
        pi, rows, elapsed = _train_brpo(batch, beta, mdp, config, clock)
    elif algo in BASELINES:
        pi, rows, elapsed = _train_baseline(batch, beta, mdp, config, algo, clock)
    else:
        raise ConfigurationError(f"unknown algorithm '{algo}'")
    if config.evaluation.mode == 'rollout' and rows:
        score = evaluate(mdp, pi, config, seed=config.brpo.seed)
        rows[-1].update({'J_rollout': score['J'], 'J_stderr': score['stderr']})
    for row in rows:
        row['wallclock'] = elapsed
    logger.info(f"Trained {algo} on {len(batch)} transitions in {elapsed:.3f}s")
    return pi, rows, elapsed


def sweep_jobs(config, env_labels=None):
    """
    One job per (env, epsilon, seed, algo). Jobs of the same (env, epsilon,
    seed) share a cell index and therefore the same batch.
    """
    env_labels = env_labels or [config.env.label]
    document = config.model_dump(mode='json', by_alias=True)
    jobs = []
    cell = 0
    for env_label in env_labels:
        for epsilon in config.epsilons:
            for seed in config.seeds:
                for algo in config.algos:
                    jobs.append({'config': document, 'env': env_label, 'epsilon': epsilon, 'seed': seed,
                                 'cell': cell, 'algo': algo})
                cell += 1
    return jobs


def run_job(job):
    """Generate the batch of one sweep cell, train job['algo'] on it and return the summary row."""
    config = ExperimentConfig.model_validate(job['config'])
    mdp = make_env(parse_env(job['env'], gamma=config.gamma))
    beta = behavior_policy(mdp, config.quality, job['epsilon'])
    data_seed = derive_seed(job['seed'], job['cell'])
    batch = generate_batch(
        mdp,
        beta,
        config.batch_size_transitions,
        data_seed,
        episode_cap=config.episode_cap,
        meta={'env': job['env'], 'epsilon': job['epsilon']},
    )
    pi, _, _ = train_policy(batch, beta, mdp, config, algo=job['algo'])
    report = evaluation_report(mdp, pi, beta, config, seed=data_seed)
    optimal, _ = optimal_policy(mdp)
    return {
        'env': job['env'],
        'epsilon': job['epsilon'],
        'seed': job['seed'],
        'algo': job['algo'],
        'J_behavior': report['J_behavior'],
        'J_policy': report['J_policy'],
        'gap': report['gap'],
        'J_optimal': evaluate(mdp, optimal, config, seed=data_seed)['J'],
    }
