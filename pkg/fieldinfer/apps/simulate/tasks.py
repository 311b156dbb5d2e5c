"""
Celery tasks for Monte-Carlo studies.
"""
import logging

from celery import shared_task

from apps.simulate.studies import StudyConfig, coverage_simulation, size_power_simulation

logger = logging.getLogger(__name__)


@shared_task
def run_coverage_simulation(config, index):
    """
    Run one coverage simulation.

    Args:
        config: StudyConfig.to_dict() payload
        index: simulation index, keys the dataset and bootstrap streams
    """
    record = coverage_simulation(StudyConfig.from_dict(config), index)
    logger.info(f"Coverage simulation {index} done with K={record['k']}, B={record['b']}")
    return record


@shared_task
def run_size_power_simulation(config, index):
    """Run one size/power simulation."""
    record = size_power_simulation(StudyConfig.from_dict(config), index)
    logger.info(f"Size/power simulation {index} done")
    return record
