from celery import shared_task
import logging

logger = logging.getLogger(__name__)


@shared_task
def run_training_job(job):
    """
    Run one (env, epsilon, seed, algo) cell of the sweep and return its
    summary row. The job is a JSON document built by runner.sweep_jobs.
    """
    from .runner import run_job

    row = run_job(job)
    logger.info(
        f"Job {job['env']} eps={job['epsilon']} seed={job['seed']} {job['algo']}: "
        f"J {row['J_policy']:.6g} (behavior {row['J_behavior']:.6g})"
    )
    return row


@shared_task
def run_verification_trial(suite, seed, trial):
    """
    Run one random instance of a certification suite. Failed checks come
    back as rows with pass = False.
    """
    from .verification import run_trial

    rows = run_trial(suite, seed, trial)
    failed = [row['bound_name'] for row in rows if not row['pass']]
    if failed:
        logger.error(f"Suite {suite} trial {trial} failed checks: {', '.join(failed)}")
    return rows
