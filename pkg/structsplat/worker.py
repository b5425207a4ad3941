import asyncio
import logging
import time
from concurrent.futures import ThreadPoolExecutor

from asgiref.sync import SyncToAsync, async_to_sync

logger = logging.getLogger("structsplat.worker")


class JobSyncToAsync(SyncToAsync):
    """
    SyncToAsync version that logs how long each job spent in its thread.
    """

    def thread_handler(self, loop, *args, **kwargs):
        started = time.perf_counter()
        try:
            return super().thread_handler(loop, *args, **kwargs)
        finally:
            logger.debug(
                "Job %s finished in %.3fs",
                getattr(self.func, "__name__", self.func),
                time.perf_counter() - started,
            )


class BatchRunner:
    """
    Runs independent synchronous jobs on a thread pool and returns their
    results in submission order, so output never depends on scheduling.

    Jobs are (callable, args) pairs.
    """

    def __init__(self, threads=1):
        if threads < 1:
            raise ValueError("BatchRunner needs at least one thread")
        self.threads = threads

    def run(self, jobs):
        jobs = list(jobs)
        if self.threads == 1 or len(jobs) < 2:
            return [func(*args) for func, args in jobs]
        return async_to_sync(self.run_pooled)(jobs)

    async def run_pooled(self, jobs):
        # async_to_sync gives us a private loop, so its default executor is ours
        asyncio.get_running_loop().set_default_executor(
            ThreadPoolExecutor(
                max_workers=self.threads, thread_name_prefix="structsplat"
            )
        )
        return await self.gather(jobs)

    async def gather(self, jobs):
        """
        Awaits every job on the running loop's default executor.
        """
        futures = [
            JobSyncToAsync(func, thread_sensitive=False)(*args) for func, args in jobs
        ]
        return list(await asyncio.gather(*futures))
