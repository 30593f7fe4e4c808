"""
Main entry point for ramp_merge_rl: training, evaluation, traces, gradient
checks and the toy-MDP oracle comparison.
"""

import argparse
import json
import logging
import os
import sys

from .agents.trainer import Trainer
from .evaluation.gradcheck import check_loss_gradients, check_network_gradients
from .evaluation.metrics import evaluate, trace_episode, write_eval_outputs, write_trace
from .evaluation.oracle import compare_with_oracle, oracle_q_iteration
from .models.checkpoint import load_checkpoint, save_checkpoint
from .models.qfunction import TOY_STATE_DIM
from .utils.common import (
    CheckpointError,
    ConfigError,
    ConvergenceError,
    NumericError,
    UsageError,
    ensure_dir,
    make_rng,
)
from .utils.config import ExperimentConfig, load_config

GRADCHECK_TOLERANCE = 1e-4
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class CLIArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def setup_logging(args):
    """Setup logging configuration."""
    level_name = os.getenv("MERGE_RL_LOG", "info").lower()
    level = LOG_LEVELS.get(level_name, logging.INFO)
    log_dir = getattr(args, "log_dir", None)
    if log_dir:
        ensure_dir(log_dir)
        logging.basicConfig(
            filename=f'{log_dir}/{args.name if getattr(args, "name", None) else args.command}.log',
            level=level,
            format='%(asctime)s - %(levelname)s - %(message)s'
        )
    else:
        logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
    if level_name not in LOG_LEVELS:
        logging.getLogger('main').warning(f"Unknown MERGE_RL_LOG value '{level_name}', using info")


def create_argument_parser():
    """Create and return the argument parser."""
    parser = CLIArgumentParser(prog='ramp-merge-rl', description='Continuous-action Q-learning for on-ramp merging')
    parser.add_argument('--log-dir', type=str, default=None, help='Directory for log files (stderr when omitted)')
    parser.add_argument('--name', type=str, default='', help='Run name used for the log file')
    subparsers = parser.add_subparsers(dest='command', required=True)

    train = subparsers.add_parser('train', help='Train a Q-function')
    train.add_argument('--config', type=str, required=True, help='JSON config file')
    train.add_argument('--out', type=str, default='runs/default', help='Output directory')
    train.add_argument('--seed', type=int, default=None, help='Overrides train.seed')
    train.add_argument('--wandb', action='store_true', help='Enable wandb logging')

    evaluate_cmd = subparsers.add_parser('eval', help='Evaluate the greedy policy of a checkpoint')
    evaluate_cmd.add_argument('--checkpoint', type=str, required=True)
    evaluate_cmd.add_argument('--episodes', type=int, default=100)
    evaluate_cmd.add_argument('--seed', type=int, default=0)
    evaluate_cmd.add_argument('--out', type=str, default='runs/eval')
    evaluate_cmd.add_argument('--config', type=str, default=None, help='Environment config (defaults when omitted)')

    trace = subparsers.add_parser('trace', help='Record one greedy merge episode as CSV')
    trace.add_argument('--checkpoint', type=str, required=True)
    trace.add_argument('--seed', type=int, default=0)
    trace.add_argument('--out', type=str, required=True, help='Trace CSV path')
    trace.add_argument('--config', type=str, default=None)

    gradcheck = subparsers.add_parser('gradcheck', help='Finite-difference gradient checks')
    gradcheck.add_argument('--seed', type=int, default=0)
    gradcheck.add_argument('--trials', type=int, default=100)

    oracle = subparsers.add_parser('oracle', help='Compare a toy-MDP policy with value iteration')
    oracle.add_argument('--checkpoint', type=str, default=None, help='Toy checkpoint; trains one when omitted')
    oracle.add_argument('--config', type=str, default=None, help='Config used when training the toy policy')
    oracle.add_argument('--steps', type=int, default=100_000, help='Toy training steps when no checkpoint is given')
    oracle.add_argument('--episodes', type=int, default=200)
    oracle.add_argument('--seed', type=int, default=0)
    oracle.add_argument('--tolerance', type=float, default=0.05, help='Allowed relative return gap')
    return parser


def _config_or_default(path):
    return load_config(path) if path else ExperimentConfig().validate()


def _config_for_checkpoint(pair, path):
    config = _config_or_default(path)
    if pair.prediction.state_dim == TOY_STATE_DIM:
        config.train.environment = "toy"
    return config


def run_train(args):
    logger = logging.getLogger('main')
    config = load_config(args.config, seed=args.seed)
    if args.wandb:
        config.train.use_wandb = True
    ensure_dir(args.out)
    with open(f'{args.out}/config.json', 'w', encoding='utf-8') as f:
        json.dump(config.to_dict(), f, sort_keys=True, indent=2)

    pair, metrics = Trainer(config).train()
    metrics.write(args.out)
    save_checkpoint(pair, f'{args.out}/checkpoint.json')
    summary = metrics.summary()
    logger.info(f"Training summary: {summary}")
    print(json.dumps(summary, sort_keys=True))
    return 0


def run_eval(args):
    pair = load_checkpoint(args.checkpoint)
    config = _config_for_checkpoint(pair, args.config)
    report = evaluate(pair, args.episodes, args.seed, config, workers=config.train.eval_workers)
    path = write_eval_outputs(report, args.out)
    print(f"Wrote {path}: success_rate={report.success_rate} collision_rate={report.collision_rate} "
          f"timeout_rate={report.timeout_rate}")
    return 0


def run_trace(args):
    pair = load_checkpoint(args.checkpoint)
    config = _config_for_checkpoint(pair, args.config)
    rows = trace_episode(pair, args.seed, config)
    write_trace(rows, args.out)
    print(f"Wrote {len(rows)} trace rows to {args.out}")
    return 0


def run_gradcheck(args):
    rng = make_rng(args.seed)
    network_error = check_network_gradients(rng, trials=args.trials)
    loss_error = check_loss_gradients(rng, batches=args.trials)
    print(f"network max relative error: {network_error:.3e}")
    print(f"loss max relative error:    {loss_error:.3e}")
    if max(network_error, loss_error) >= GRADCHECK_TOLERANCE:
        logging.getLogger('main').error(f"gradient check failed (tolerance {GRADCHECK_TOLERANCE})")
        return 2
    return 0


def run_oracle(args):
    logger = logging.getLogger('main')
    config = _config_or_default(args.config)
    config.train.environment = "toy"
    gamma, hold = config.train.gamma, config.train.hold_steps
    table = oracle_q_iteration(gamma=gamma, weights=config.reward)
    print(f"value iteration: {table.iterations} sweeps, residual {table.max_residual:.3e}")

    if args.checkpoint:
        pair = load_checkpoint(args.checkpoint)
        if pair.prediction.state_dim != TOY_STATE_DIM:
            raise UsageError("the oracle comparison needs a toy-MDP checkpoint")
    else:
        config.train.total_steps = args.steps
        config.train.validate()
        logger.info(f"Training a toy policy for {args.steps} steps")
        pair, _ = Trainer(config).train()

    comparison = compare_with_oracle(pair, table, episodes=args.episodes, seed=args.seed, gamma=gamma,
                                     hold_steps=hold, weights=config.reward)
    print(f"learned mean return {comparison.learned_mean_return:.4f}, "
          f"oracle mean return {comparison.oracle_mean_return:.4f}, "
          f"relative gap {comparison.relative_gap:.4f}")
    if comparison.relative_gap > args.tolerance:
        logger.error(f"oracle gap {comparison.relative_gap:.4f} exceeds {args.tolerance}")
        return 2
    return 0


COMMANDS = {
    'train': run_train,
    'eval': run_eval,
    'trace': run_trace,
    'gradcheck': run_gradcheck,
    'oracle': run_oracle,
}


def main(argv=None):
    """Main entry point. Returns the process exit code."""
    parser = create_argument_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_help(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return 1

    setup_logging(args)
    logger = logging.getLogger('main')
    logger.info(f"Command started: {args.command} (PID {os.getpid()})")
    logger.info(args)

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return 1
    except (NumericError, ConvergenceError, CheckpointError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
