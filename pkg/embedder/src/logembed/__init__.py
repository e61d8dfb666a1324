"""Host-log text to HFT1 tensor files.

Each sample's event lines are encoded row-wise into an m x n matrix and its
message lines into p x q (pad with zero rows, truncate beyond the row
budget), then all samples are written into one HFT1 container that the
downstream intrusion-detection pipeline ingests directly.
"""

from .config import EmbeddingConfig
from .embed import embed, embed_to_file
from .encoders import EncoderUnavailableError, get_encoder
from .records import LogRecord, LogRecordSet, load_jsonl

__version__ = "0.1.0"
