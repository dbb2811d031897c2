"""Task description sampling at three paraphrase levels.

Level 0 is the canonical template with task parameters interpolated to three
decimals.  Level 1 draws a clause-reordered template variant and applies
seeded synonym substitution from a fixed table.  Level 2 wraps the level-1
sentence with two distractor clauses from a fixed, number-free pool.  Numeric
literals always appear in canonical parameter order, so any sampled
description identifies its task exactly.
"""

from __future__ import annotations

import numpy as np

from .envs import TaskSpec
from .errors import ConfigError

LEVELS = ("L0", "L1", "L2")

_L0_TEMPLATES = {
    ("veltrack", "velocity"): "Move forward with target velocity {p0:.3f} m/s.",
    ("pointgoal", "reach"): "Go to the point ({p0:.3f}, {p1:.3f}).",
    ("switchworld", "reach"): "Move to the waypoint at ({p0:.3f}, {p1:.3f}).",
    ("switchworld", "hold"): "Stay at the origin and hold your position.",
    ("switchworld", "oscillate"): "Oscillate back and forth along the x axis.",
}

_L1_TEMPLATES = {
    ("veltrack", "velocity"): (
        "Move forward with target velocity {p0:.3f} m/s.",
        "With target velocity {p0:.3f} m/s, move forward.",
        "Move forward, keeping the target velocity {p0:.3f} m/s.",
    ),
    ("pointgoal", "reach"): (
        "Go to the point ({p0:.3f}, {p1:.3f}).",
        "Make your way to the point ({p0:.3f}, {p1:.3f}).",
        "The point ({p0:.3f}, {p1:.3f}) is the destination, go there.",
    ),
    ("switchworld", "reach"): (
        "Move to the waypoint at ({p0:.3f}, {p1:.3f}).",
        "Head for the waypoint at ({p0:.3f}, {p1:.3f}).",
        "The waypoint at ({p0:.3f}, {p1:.3f}) is the destination, move there.",
    ),
    ("switchworld", "hold"): (
        "Stay at the origin and hold your position.",
        "Hold your position, staying at the origin.",
        "Remain at the origin, holding the position.",
    ),
    ("switchworld", "oscillate"): (
        "Oscillate back and forth along the x axis.",
        "Along the x axis, oscillate back and forth.",
        "Keep oscillating back and forth on the x axis.",
    ),
}

# word -> alternatives; a seeded draw picks the original or one alternative
_SYNONYMS = {
    "move": ("travel", "proceed", "advance"),
    "go": ("head", "navigate", "travel"),
    "forward": ("ahead", "onward"),
    "target": ("desired", "goal"),
    "velocity": ("speed",),
    "point": ("location", "spot"),
    "waypoint": ("marker", "target"),
    "stay": ("remain", "keep"),
    "hold": ("keep", "maintain"),
    "oscillate": ("swing", "sweep"),
}

_DISTRACTORS = (
    "keeping the motion smooth and steady",
    "while conserving effort where possible",
    "without drifting off course",
    "staying responsive to small corrections",
    "with a calm and even pace",
    "avoiding any abrupt maneuvers",
    "just as practiced before",
    "maintaining good form throughout",
)


def _format(template: str, task: TaskSpec) -> str:
    slots = {f"p{i}": v for i, v in enumerate(task.params)}
    return template.format(**slots)


def _substitute_synonyms(text: str, rng: np.random.Generator) -> str:
    words = text.split(" ")
    out = []
    for word in words:
        stripped = word.strip(".,()").lower()
        options = _SYNONYMS.get(stripped)
        if options:
            pick = rng.integers(0, len(options) + 1)
            if pick > 0:
                chosen = options[pick - 1]
                if word[:1].isupper():
                    chosen = chosen.capitalize()
                word = word.replace(word.strip(".,()"), chosen)
        out.append(word)
    return " ".join(out)


def canonical_description(task: TaskSpec) -> str:
    """The single level-0 string for a task."""
    key = (task.family, task.behavior)
    if key not in _L0_TEMPLATES:
        raise ConfigError(f"no description templates for {key}")
    return _format(_L0_TEMPLATES[key], task)


def sample_description(task: TaskSpec, level: str, rng: np.random.Generator) -> str:
    """Draw one description at the requested paraphrase level."""
    if level not in LEVELS:
        raise ConfigError(f"unknown paraphrase level {level!r}")
    if level == "L0":
        return canonical_description(task)
    key = (task.family, task.behavior)
    templates = _L1_TEMPLATES.get(key)
    if templates is None:
        raise ConfigError(f"no description templates for {key}")
    base = _format(templates[rng.integers(0, len(templates))], task)
    sentence = _substitute_synonyms(base, rng)
    if level == "L1":
        return sentence
    first, second = rng.choice(len(_DISTRACTORS), size=2, replace=False)
    body = sentence[0].lower() + sentence[1:]
    body = body.rstrip(".")
    return (f"{_DISTRACTORS[first].capitalize()}, {body}, "
            f"and {_DISTRACTORS[second]}.")
