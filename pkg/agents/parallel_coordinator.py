# ./agents/parallel_coordinator.py
import asyncio
import logging
from typing import Any, Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


async def sweep(fn: Callable[[Any], T], items: Sequence[Any], label: str) -> List[T]:
    """
    Run ``fn`` over ``items`` concurrently in worker threads.

    Results come back in input order. Every failure is logged; the first one
    is re-raised once all runs have settled.
    """
    logger.debug(f"Starting {label} sweep over {list(items)}")
    results = await asyncio.gather(*(asyncio.to_thread(fn, item) for item in items), return_exceptions=True)

    failures = [(item, r) for item, r in zip(items, results) if isinstance(r, BaseException)]
    for item, error in failures:
        logger.error(f"{label} run for {item} failed: {str(error)}")
    if failures:
        raise failures[0][1]

    logger.info(f"Completed {label} sweep with {len(results)} runs")
    return list(results)
