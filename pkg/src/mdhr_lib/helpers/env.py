import os

import numpy as np
import psutil


def host_report():
    """CPU and memory figures logged at the start of a training run."""
    memory = psutil.virtual_memory()
    process = psutil.Process(os.getpid())
    return {
        "cpu_count": psutil.cpu_count(logical=True),
        "physical_cpus": psutil.cpu_count(logical=False),
        "memory_available_mb": memory.available // (1024 * 1024),
        "memory_total_mb": memory.total // (1024 * 1024),
        "process_rss_mb": process.memory_info().rss // (1024 * 1024),
        "numpy": np.__version__,
    }

def format_host_report(report):
    return ", ".join("{}={}".format(key, report[key]) for key in sorted(report))
