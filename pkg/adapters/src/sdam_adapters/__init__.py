"""Reference perception servers for the sdam backend wire protocol.

Three roles, one HTTP/JSON contract: grounder (query -> boxes +
confidence level), segmenter (boxes -> masks + predicted IoU), tracker
(mask propagation sessions). Each role wraps a pluggable engine; the
built-in "classical" engines run CPU-only with no model weights, and
model-backed engines (vision-language grounder, promptable segmenter)
load lazily when a checkpoint is configured.
"""

__version__ = "0.1.0"
