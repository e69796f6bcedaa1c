"""Django signals published by the solvers.

``outer_iteration_completed`` fires after every multiplier update with
``state`` and ``row`` (the new :class:`~maxsamples.solvers.base.TraceRow`).
``run_completed`` fires once per solver run with ``state``.
The receivers below are connected in :meth:`MaxSamplesConfig.ready`.
"""

import logging
from typing import Any

from django.dispatch import Signal

logger = logging.getLogger(__name__)

outer_iteration_completed = Signal()
run_completed = Signal()


def log_event(event: str, **fields: Any) -> None:
    logger.info("maxsamples_%s", event, extra={"ms_event": event, **fields})


def log_outer_iteration(sender, state, row, **kwargs) -> None:
    from maxsamples.conf import maxsamples_config

    if not maxsamples_config.trace_log:
        return
    log_event(
        "outer_iteration",
        solver=sender.name,
        outer_iter=row.outer_iter,
        selected=row.selected,
        lagrangian=row.lagrangian,
        lambda_norm=row.lambda_norm,
        mu_norm=row.mu_norm,
        mu_grad_norm=row.mu_grad_norm,
    )


def log_run_completed(sender, state, **kwargs) -> None:
    log_event(
        "run_completed",
        solver=sender.name,
        outer_iters=state.outer,
        final_selected=state.trace[-1].selected if state.trace else 0,
    )
