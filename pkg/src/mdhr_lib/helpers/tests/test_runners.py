"""tests for the background runner and the batch prefetcher"""
import time
import unittest

from mdhr_lib.helpers.runners import BackgroundRunner, BatchPrefetcher


class TestBackgroundRunner(unittest.TestCase):

    def wait(self, runner):
        runner.thread.join(5)

    def test_return_value(self):
        runner = BackgroundRunner(lambda a, b=0: a + b, 2, b=3)
        runner.run()
        self.wait(runner)
        assert(runner.finished and not runner.failed and not runner.running)
        assert(runner.return_value == 5)

    def test_failure_is_recorded(self):
        def broken():
            raise KeyError("x")
        runner = BackgroundRunner(broken)
        runner.run()
        self.wait(runner)
        assert(runner.failed and not runner.finished)
        assert(runner.exc_info[0] is KeyError)


class TestBatchPrefetcher(unittest.TestCase):

    def test_keeps_order(self):
        assert(list(BatchPrefetcher(iter(range(20)), depth=3)) == list(range(20)))

    def test_empty_source(self):
        assert(list(BatchPrefetcher([])) == [])

    def test_producer_error_reaches_consumer(self):
        def batches():
            yield 1
            yield 2
            raise ValueError("bad video")
        seen = []
        with self.assertRaises(ValueError):
            for item in BatchPrefetcher(batches()):
                seen.append(item)
        assert(seen == [1, 2])

    def test_early_exit_stops_producer(self):
        def endless():
            i = 0
            while True:
                yield i
                i += 1
        prefetcher = BatchPrefetcher(endless(), depth=1)
        for item in prefetcher:
            if item == 3:
                break
        prefetcher.runner.thread.join(5)
        assert(not prefetcher.runner.thread.is_alive())

    def test_runs_ahead(self):
        produced = []
        def slow_consumer_source():
            for i in range(3):
                produced.append(i)
                yield i
        iterator = iter(BatchPrefetcher(slow_consumer_source(), depth=2))
        assert(next(iterator) == 0)
        time.sleep(0.3)
        assert(len(produced) == 3)
        assert(list(iterator) == [1, 2])

    def test_depth(self):
        with self.assertRaises(ValueError):
            BatchPrefetcher([], depth=0)


if __name__ == "__main__":
    unittest.main()
