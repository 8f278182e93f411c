#!/usr/bin/env python
"""Command-line utility for the BRPO laboratory: gen, train, eval, verify, sweep."""
import argparse
import logging
import sys

logger = logging.getLogger('brpo_lab')


def build_parser():
    parser = argparse.ArgumentParser(prog='manage.py', description='Batch residual policy optimization laboratory.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    gen = subparsers.add_parser('gen', help='generate logged batches of the behavior policy')
    gen.add_argument('--env', help='environment, e.g. chain:8, gridworld:5,5,0.1 or cliff:4,3,1.0')
    gen.add_argument('--epsilon', type=float, nargs='+', help='exploration rates (default: config epsilons)')
    gen.add_argument('--n', type=int, help='transitions per batch')
    gen.add_argument('--seed', type=int, nargs='+', help='batch seeds (default: config seeds)')
    gen.add_argument('--quality', type=float, help='behavior quality before exploration, in (0, 1]')
    gen.add_argument('--config', help='experiment config JSON')
    gen.add_argument('--out', required=True, help='.jsonl file for a single batch, else a directory')

    train = subparsers.add_parser('train', help='train one algorithm on a batch')
    train.add_argument('--algo', help="brpo, bc, batch_q, kl_q, spibb or brpo_c ('-' spellings accepted)")
    train.add_argument('--batch', required=True, help='batch JSONL file')
    train.add_argument('--config', help='experiment config JSON')
    train.add_argument('--env', help='environment (default: from the batch header)')
    train.add_argument('--lambda', dest='const_lambda', type=float, help='constant confidence of brpo_c')
    train.add_argument('--out', default='policy.json', help='policy JSON to write')
    train.add_argument('--metrics', default='metrics.csv', help='metrics CSV to write')

    evaluate = subparsers.add_parser('eval', help='evaluate a stored policy')
    evaluate.add_argument('--policy', required=True, help='policy JSON')
    evaluate.add_argument('--env', help='environment (default: from the policy file)')
    evaluate.add_argument('--batch', help='batch JSONL supplying the behavior policy')
    evaluate.add_argument('--config', help='experiment config JSON')
    evaluate.add_argument('--mode', choices=('exact', 'rollout'), help='evaluation mode')
    evaluate.add_argument('--episodes', type=int, help='rollout episodes')
    evaluate.add_argument('--seed', type=int, default=0, help='rollout seed')
    evaluate.add_argument('--report', help='JSON report to write')

    verify = subparsers.add_parser('verify', help='run a certification suite on random instances')
    verify.add_argument('--suite', required=True, choices=('identities', 'bounds', 'qp', 'proofs'))
    verify.add_argument('--trials', type=int, default=100)
    verify.add_argument('--seed', type=int, default=0)
    verify.add_argument('--out', default='verify.csv', help='CSV of every check')
    verify.add_argument('--json', help='JSON Lines file with one object per instance (default: next to --out)')

    sweep = subparsers.add_parser('sweep', help='run env x epsilon x seed x algo and summarize')
    sweep.add_argument('--config', help='experiment config JSON')
    sweep.add_argument('--env', nargs='+', help='environments (default: config env)')
    sweep.add_argument('--algos', nargs='+', help='algorithms (default: config algos)')
    sweep.add_argument('--n', type=int, help='transitions per batch')
    sweep.add_argument('--out', default='summary.csv', help='summary CSV to write')
    return parser


def main(argv=None):
    """Run one subcommand and return its exit code."""
    from pydantic import ValidationError

    from brpo_lab import settings
    from brpo_lab.exceptions import BrpoError, ConfigurationError
    from harness import commands

    settings.configure_logging()
    args = build_parser().parse_args(argv)
    handlers = {
        'gen': commands.cmd_gen,
        'train': commands.cmd_train,
        'eval': commands.cmd_eval,
        'verify': commands.cmd_verify,
        'sweep': commands.cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except (ValidationError, ConfigurationError) as error:
        logger.error(f"Configuration error: {error}")
        return 2
    except BrpoError as error:
        logger.error(f"{args.command} failed: {error}")
        return 1
    except (OSError, UnicodeDecodeError) as error:
        logger.error(f"{args.command} failed: {error}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
