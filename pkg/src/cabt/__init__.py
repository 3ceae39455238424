"""Cycle-accurate static binary translation for the TK32 toy RISC ISA.

The pipeline decodes a program image, recovers basic blocks, computes
per-block source-processor cycle counts and emits an annotated program
for a small virtual target machine (VTM) that generates those cycles
alongside execution.  An interpretive reference simulator serves as
the ground truth for every detail level.
"""

from cabt.errors import CabtError
from cabt.procdesc import load_description, default_description
from cabt.image import load_image, store_image, classify_address
from cabt.pipeline import translate, DetailLevel
from cabt.vtm import vm_run
from cabt.oracle import reference_run, OracleConfig

__all__ = [
    "CabtError",
    "load_description",
    "default_description",
    "load_image",
    "store_image",
    "classify_address",
    "translate",
    "DetailLevel",
    "vm_run",
    "reference_run",
    "OracleConfig",
]
__version__ = "0.1.0"
