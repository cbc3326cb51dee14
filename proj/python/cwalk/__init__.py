# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The cwalk Authors
"""Python bindings for the cwalk cognitive-walkthrough harness.

Structured results come back as plain dicts and lists.
"""

import json as _json
import os as _os

# Wheels ship the prompt templates next to the module.
_bundled = _os.path.join(_os.path.dirname(__file__), "prompts")
if "CWALK_PROMPTS" not in _os.environ and _os.path.isdir(_bundled):
    _os.environ["CWALK_PROMPTS"] = _bundled

from . import _cwalk  # noqa: E402
from ._cwalk import (  # noqa: E402
    CwalkError,
    cohens_kappa,
    collapse_rating,
    corrected_odds_ratio,
    default_prompts_dir,
    js_divergence,
    path_distribution,
)

__all__ = [
    "CwalkError",
    "cohens_kappa",
    "collapse_rating",
    "corrected_odds_ratio",
    "default_prompts_dir",
    "js_divergence",
    "load_app_graph",
    "parse_evaluator_response",
    "path_distribution",
    "rate_screens",
    "metrics",
    "validate_manifest",
    "walk",
]


def load_app_graph(manifest):
    return _json.loads(_cwalk.load_app_graph(manifest))


def validate_manifest(manifest):
    """Returns the list of findings; empty means the manifest is valid."""
    return _json.loads(_cwalk.validate_manifest(manifest))


def parse_evaluator_response(raw, with_confusion=False):
    return _json.loads(_cwalk.parse_evaluator_response(raw, with_confusion))


def walk(manifest, backend, out_dir, run_id, **kwargs):
    """Runs LLM walkthrough sessions. `backend` uses the CLI spec syntax."""
    return _json.loads(_cwalk.run_walk(manifest, backend, out_dir, run_id, **kwargs))


def rate_screens(manifest, screens, backend, out_file, run_id, **kwargs):
    text = _cwalk.run_rate_screens(manifest, screens, backend, out_file, run_id, **kwargs)
    return [_json.loads(line) for line in text.splitlines() if line]


def metrics(traces, out_dir, **kwargs):
    return _json.loads(_cwalk.run_metrics(traces, out_dir, **kwargs))
