"""
Subcommands of manage.py. Each takes the parsed argparse namespace and
returns the process exit code; domain errors propagate to manage.py.
"""

import json
import logging
from itertools import product
from pathlib import Path

from datagen.behavior import behavior_policy
from datagen.environments import parse_env
from datagen.sampling import generate_batch
from datagen.serializers import content_hash, read_batch, write_batch
from brpo_lab.exceptions import ConfigurationError
from mdp_core.evaluation import expected_return
from mdp_core.serializers import dump_policy, load_policy
from mdp_core.models import TabularPolicy
from .metrics import BASELINE_COLUMNS, SUMMARY_COLUMNS, TRACE_COLUMNS, VERIFY_COLUMNS, mean_and_stderr, write_csv
from .models import ExperimentConfig, algorithm_name, load_config
from .runner import evaluation_report, resolve_behavior, resolve_env, sweep_jobs, train_policy
from .tasks import run_training_job, run_verification_trial
from .verification import instance_record, summarize

logger = logging.getLogger(__name__)


def _merge(document, updates):
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(document.get(key), dict):
            _merge(document[key], value)
        elif value is not None:
            document[key] = value
    return document


def with_overrides(config, updates):
    """Re-validate config with CLI values merged in; None values are ignored."""
    document = _merge(config.model_dump(mode='json', by_alias=True), updates)
    return ExperimentConfig.model_validate(document)


def _batch_path(out, env_label, epsilon, seed, single):
    out = Path(out)
    if single and out.suffix == '.jsonl':
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    kind = env_label.split(':')[0]
    return out / f'{kind}_eps{epsilon:g}_seed{seed}.jsonl'


def cmd_gen(args):
    """Write one batch per (epsilon, seed) and print the exact behavior return of each."""
    config = with_overrides(load_config(args.config), {'quality': args.quality})
    mdp = resolve_env(config, args.env)
    epsilons = args.epsilon or config.epsilons
    seeds = args.seed if args.seed is not None else config.seeds
    n = args.n if args.n is not None else config.batch_size_transitions
    combos = list(product(epsilons, seeds))
    for epsilon, seed in combos:
        beta = behavior_policy(mdp, config.quality, epsilon)
        j_behavior = expected_return(mdp, beta)
        batch = generate_batch(
            mdp,
            beta,
            n,
            seed,
            episode_cap=config.episode_cap,
            meta={'env': mdp.name, 'epsilon': epsilon, 'quality': config.quality, 'J_behavior': j_behavior},
        )
        path = write_batch(batch, _batch_path(args.out, mdp.name, epsilon, seed, len(combos) == 1))
        print(f"{path} env={mdp.name} epsilon={epsilon:g} seed={seed} n={n} "
              f"J_behavior={j_behavior:.10g} sha256={content_hash(batch)}")
    return 0


def cmd_train(args):
    """Train one algorithm on a batch file; writes the policy JSON and the metrics CSV."""
    batch = read_batch(args.batch)
    updates = {'algo': args.algo, 'baseline': {'const_lambda': args.const_lambda}}
    if args.config is None:
        updates['gamma'] = batch.meta.get('gamma')
    config = with_overrides(load_config(args.config), updates)
    mdp = resolve_env(config, args.env, batch)
    batch.check_dimensions(mdp.n_states, mdp.n_actions)
    beta = resolve_behavior(batch, mdp)

    pi, rows, elapsed = train_policy(batch, beta, mdp, config)
    columns = TRACE_COLUMNS if config.algo == 'brpo' else BASELINE_COLUMNS
    write_csv(args.metrics, rows, columns)
    dump_policy(pi, args.out, extra={
        'algo': config.algo,
        'env': mdp.name,
        'gamma': config.gamma,
        'behavior': beta.probs.tolist(),
        'batch_sha256': content_hash(batch),
    })
    logger.info(f"Wrote {config.algo} policy to {args.out} ({elapsed:.3f}s)")
    if config.evaluation.mode == 'exact':
        print(f"algo={config.algo} J_policy={expected_return(mdp, pi):.10g} "
              f"J_behavior={expected_return(mdp, beta):.10g}")
    return 0


def cmd_eval(args):
    """Report J of a stored policy, J of the behavior policy and the gap."""
    pi, meta = load_policy(args.policy, with_meta=True)
    updates = {'eval': {'mode': args.mode, 'episodes': args.episodes}}
    if args.config is None:
        updates['gamma'] = meta.get('gamma')
    config = with_overrides(load_config(args.config), updates)
    batch = read_batch(args.batch) if args.batch else None
    env_text = args.env or meta.get('env')
    mdp = resolve_env(config, env_text, batch)
    pi.check_dimensions(mdp.n_states, mdp.n_actions)

    if 'behavior' in meta:
        beta = TabularPolicy(meta['behavior'])
        beta.check_dimensions(mdp.n_states, mdp.n_actions, name='stored behavior')
    elif batch is not None:
        beta = resolve_behavior(batch, mdp)
    else:
        raise ConfigurationError("no behavior policy: the policy file has none and no --batch was given")

    report = {'env': mdp.name, **evaluation_report(mdp, pi, beta, config, seed=args.seed)}
    text = json.dumps(report, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + '\n', encoding='utf-8')
    print(text)
    return 0


def cmd_verify(args):
    """
    Run a certification suite; exit code 1 when any check fails.

    Writes the CSV summary and one JSON object per instance, by default
    next to the CSV with the .jsonl suffix.
    """
    records = []
    for trial in range(args.trials):
        checks = run_verification_trial.delay(args.suite, args.seed, trial).get()
        records.append(instance_record(args.suite, args.seed, trial, checks))
    rows = [row for record in records for row in record['checks']]
    out = Path(args.out)
    write_csv(out, rows, VERIFY_COLUMNS)
    json_path = Path(args.json) if args.json else out.with_suffix('.jsonl')
    with json_path.open('w', encoding='utf-8', newline='\n') as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + '\n')
    logger.info(f"Wrote {len(records)} instance records to {json_path}")

    total, failed, worst = summarize(rows)
    for name, slack in sorted(worst.items()):
        logger.info(f"{args.suite}/{name}: smallest slack {slack:.3e}")
    if failed:
        logger.error(f"Suite {args.suite}: {failed} of {total} checks failed")
        print(f"suite={args.suite} trials={args.trials} checks={total} failed={failed}")
        return 1
    logger.info(f"Suite {args.suite}: all {total} checks passed over {args.trials} trials")
    print(f"suite={args.suite} trials={args.trials} checks={total} failed=0")
    return 0


def cmd_sweep(args):
    """
    Run the experiment protocol over env x epsilon x seed x algo through the
    task queue and write the summary CSV.
    """
    updates = {'algos': [algorithm_name(name) for name in args.algos] if args.algos else None,
               'batch_size_transitions': args.n}
    config = with_overrides(load_config(args.config), updates)
    env_labels = [parse_env(text).label for text in args.env] if args.env else None
    jobs = sweep_jobs(config, env_labels)
    logger.info(f"Sweep: {len(jobs)} jobs")
    results = [run_training_job.delay(job) for job in jobs]
    rows = [result.get() for result in results]
    write_csv(args.out, rows, SUMMARY_COLUMNS)

    groups = {}
    for row in rows:
        groups.setdefault((row['env'], row['epsilon'], row['algo']), []).append(row['gap'])
    for (env, epsilon, algo), gaps in groups.items():
        mean, stderr = mean_and_stderr(gaps)
        print(f"env={env} epsilon={epsilon:g} algo={algo} gap={mean:.6g} +- {stderr:.3g}")
    return 0
