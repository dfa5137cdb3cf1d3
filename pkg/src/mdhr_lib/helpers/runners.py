import sys
from queue import Queue, Empty, Full
from threading import Event, Lock, Thread

from mdhr_lib.helpers.logger import setup_logger
logger = setup_logger(__name__, "warning")


class BooleanEvent:
    """A ``threading.Event`` that can be tested with ``if``."""

    def __init__(self):
        self._e = Event()

    def __bool__(self):
        return self._e.is_set()

    def set(self, state):
        if state:
            self._e.set()
        else:
            self._e.clear()


class BackgroundRunner:
    """Runs a callable once on a daemon thread and records how it ended.

    After the thread is done, exactly one of ``finished`` and ``failed`` is
    true; ``return_value`` or ``exc_info`` (from ``sys.exc_info()``) holds the
    outcome.

    Args:

        * ``func``: the callable
        * ``*args``, ``**kwargs``: passed on to ``func``"""

    exc_info = None
    return_value = None
    thread = None

    def __init__(self, func, *args, **kwargs):
        self.func = func
        self.args = args
        self.kwargs = kwargs
        self.state_lock = Lock()
        self._running = BooleanEvent()
        self._finished = BooleanEvent()
        self._failed = BooleanEvent()

    def _read(self, event):
        with self.state_lock:
            return bool(event)

    @property
    def running(self):
        return self._read(self._running)

    @property
    def finished(self):
        return self._read(self._finished)

    @property
    def failed(self):
        return self._read(self._failed)

    def _target(self):
        with self.state_lock:
            self._running.set(True)
        try:
            self.return_value = self.func(*self.args, **self.kwargs)
        except BaseException:
            self.exc_info = sys.exc_info()
            logger.debug("{} failed in the background".format(self.func.__name__), exc_info=self.exc_info)
            outcome = self._failed
        else:
            outcome = self._finished
        with self.state_lock:
            self._running.set(False)
            outcome.set(True)

    def run(self, daemonize=True):
        if self.running:
            return
        self.thread = Thread(target=self._target, name="BackgroundRunner for {}".format(self.func.__name__))
        self.thread.daemon = daemonize
        self.thread.start()


class BatchPrefetcher:
    """Builds items of an iterable on a background thread while the consumer
    works on earlier ones. At most ``depth`` items wait in the hand-off queue,
    and they come out in the iterable's order. An exception in the producer
    is re-raised in the consumer once the items before it are used up.

    Args:

        * ``iterable``: the item source, e.g. a batch generator
        * ``depth``: hand-off queue size"""

    _done = object()

    def __init__(self, iterable, depth=2):
        if depth < 1:
            raise ValueError("prefetch depth must be at least 1")
        self.iterable = iterable
        self.queue = Queue(maxsize=depth)
        self._stop = BooleanEvent()
        self.runner = BackgroundRunner(self._produce)

    def _put(self, item):
        # poll so that close() can stop a producer stuck on a full queue
        while not self._stop:
            try:
                self.queue.put(item, timeout=0.1)
                return True
            except Full:
                pass
        return False

    def _produce(self):
        try:
            for item in self.iterable:
                if not self._put(item):
                    return
        finally:
            self._put(self._done)

    def __iter__(self):
        self.runner.run()
        try:
            while True:
                try:
                    item = self.queue.get(timeout=0.1)
                except Empty:
                    if not self.runner.thread.is_alive() and self.queue.empty():
                        break
                    continue
                if item is self._done:
                    break
                yield item
        finally:
            self.close()
        self.runner.thread.join()
        if self.runner.failed:
            exc_type, exc, tb = self.runner.exc_info
            raise exc.with_traceback(tb)

    def close(self):
        self._stop.set(True)
