import logging
import os

from dotenv import load_dotenv

from .lab import ExperimentGroup, Lab, RunContext


def create_lab() -> Lab:
    load_dotenv()
    logging.basicConfig(
        level=os.getenv("PLAB_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    lab = Lab({
        "THREADS": int(os.getenv("PLAB_THREADS", "1")),
        "OUTPUT_DIR": os.getenv("PLAB_OUTPUT_DIR", "runs"),
        "SCENARIO_DIR": os.getenv("PLAB_SCENARIO_DIR", "scenarios"),
    })

    from .experiments.harmonic import group as harmonic_group
    from .experiments.geometry import group as geometry_group
    from .experiments.evolution import group as evolution_group

    lab.register_group(harmonic_group)
    lab.register_group(geometry_group)
    lab.register_group(evolution_group)

    return lab


__all__ = ["create_lab", "ExperimentGroup", "Lab", "RunContext"]
