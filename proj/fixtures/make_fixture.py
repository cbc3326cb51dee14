# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The cwalk Authors
"""Regenerates the bundled recipe-app fixture (manifest, screenshots, scripts).

The outputs are checked in; rerun only when the fixture itself changes.
"""

import json
from pathlib import Path

from PIL import Image, ImageDraw

HERE = Path(__file__).resolve().parent
APP = HERE / "recipe_app"
SCRIPTS = HERE / "scripts"

SCREENS = [
    ("home", "Home", (240, 200, 120)),
    ("search", "Search", (120, 200, 240)),
    ("results", "Search results", (120, 240, 160)),
    ("recipe", "Recipe detail", (250, 150, 150)),
    ("profile", "Profile", (200, 160, 240)),
    ("menu", "Side menu", (180, 180, 180)),
    ("settings", "Settings", (160, 220, 220)),
    ("units", "Measurement units", (220, 220, 140)),
    ("favorites", "Saved recipes", (250, 190, 220)),
    ("notifications", "Notifications", (200, 230, 190)),
]


def t(src, action, dst, kind="tap", synonyms=()):
    return {"from": src, "action": action, "synonyms": list(synonyms), "kind": kind, "to": dst}


TRANSITIONS = [
    t("home", "tap search bar", "search", synonyms=["tap search", "search"]),
    t("home", "tap profile icon", "profile", synonyms=["open profile"]),
    t("home", "tap menu button", "menu", synonyms=["open menu", "tap hamburger menu"]),
    t("home", "tap favorites tab", "favorites", synonyms=["open favorites", "tap saved recipes"]),
    t("home", "tap bell icon", "notifications", synonyms=["open notifications"]),
    t("search", "type pasta", "results", kind="type", synonyms=["search for pasta", "enter pasta"]),
    t("search", "go back", "home", kind="back"),
    t("results", "tap first result", "recipe", synonyms=["open pasta recipe"]),
    t("results", "go back", "search", kind="back"),
    t("recipe", "go back", "results", kind="back"),
    t("profile", "tap settings", "settings", synonyms=["open settings", "tap gear icon"]),
    t("profile", "go back", "home", kind="back"),
    t("menu", "tap settings", "settings", synonyms=["open settings"]),
    t("menu", "close menu", "home", kind="back"),
    t("settings", "tap units", "units", synonyms=["open measurement units", "tap measurement units"]),
    t("settings", "go back", "home", kind="back"),
    t("units", "go back", "settings", kind="back"),
    t("favorites", "go back", "home", kind="back"),
    t("notifications", "go back", "home", kind="back"),
]

TASKS = [
    {
        "id": "find_recipe",
        "description": "Find a pasta recipe and open it.",
        "start": "home",
        "goals": ["recipe"],
        "correct_paths": [["home", "search", "results", "recipe"]],
    },
    {
        "id": "change_units",
        "description": "Switch the measurement units used in recipes.",
        "start": "home",
        "goals": ["units"],
        "correct_paths": [["home", "profile", "settings", "units"], ["home", "menu", "settings", "units"]],
    },
    {
        "id": "view_favorites",
        "description": "Open the list of recipes you have saved.",
        "start": "home",
        "goals": ["favorites"],
        "correct_paths": [["home", "favorites"]],
    },
]


def reply(state, action, rationale, confusion="not at all confusing", why="The screen offers an obvious next step."):
    return {
        "current_state": state,
        "possible_actions": [{"action": action, "rationale": rationale, "confidence": "high"}],
        "next_action": action,
        "next_action_rationale": rationale,
        "confusing_or_not": confusion,
        "confusing_or_not_rationale": why,
    }


SLIGHT = "slightly confusing"
VERY = "very confusing"

SCRIPT_A = {
    "find_recipe@home": [reply("Home feed", "tap search bar", "Search is the quickest way to a specific recipe.")],
    "find_recipe@search": [reply("Empty search page", "type pasta", "Typing the dish name should list matching recipes.")],
    "find_recipe@results": [reply("Result list", "tap first result", "The first result is a pasta recipe, which is what I want.")],
    "change_units@home": [reply("Home feed", "tap profile icon", "Preferences usually live under the profile.", SLIGHT, "No visible settings entry on home.")],
    "change_units@profile": [reply("Profile page", "tap settings", "Settings should contain unit preferences.")],
    "change_units@settings": [reply("Settings list", "tap units", "The units row is what the task asks for.")],
    "view_favorites@home": [reply("Home feed", "tap favorites tab", "Saved recipes are behind the favorites tab.")],
}

SCRIPT_B = {
    "find_recipe@home": [
        reply("Home feed", "tap the magnifying glass", "I want to search.", SLIGHT, "The search affordance is small."),
        reply("Home feed", "tap search", "Searching is the direct route to a recipe."),
    ],
    "find_recipe@search": [reply("Search page", "search for pasta", "Entering the dish should list recipes.")],
    "find_recipe@results": [reply("Result list", "open pasta recipe", "This entry matches the dish I searched for.")],
    "change_units@home": [reply("Home feed", "open menu", "The side menu usually lists settings.", VERY, "Nothing on home hints at units.")],
    "change_units@menu": [reply("Side menu", "tap settings", "Settings is listed in the menu.")],
    "change_units@settings": [reply("Settings list", "tap measurement units", "Units are what the task is about.", SLIGHT, "Several similar rows.")],
    "view_favorites@home": [
        reply("Home feed", "tap bell icon", "Maybe saved items show up in notifications.", SLIGHT, "Unclear where saved items live."),
        reply("Home feed", "open favorites", "The favorites tab should hold saved recipes."),
    ],
    "view_favorites@notifications": [reply("Notification list", "go back", "Notifications do not list saved recipes; going back.", SLIGHT, "Not the right place.")],
}

SCRIPT_C = {
    "find_recipe@home": [reply("Home feed", "tap search bar", "Search leads to recipes.")],
    "find_recipe@search": [reply("Search page", "type pasta", "Typing pasta should find recipes.")],
    "find_recipe@results": [reply("Result list", "tap first result", "The first hit is pasta.")],
    "change_units@home": [reply("Home feed", "tap profile icon", "Profile holds preferences.", SLIGHT, "Units are not visible anywhere.")],
    "change_units@profile": [reply("Profile page", "open settings", "Settings come next.")],
    "change_units@settings": [reply("Settings list", "tap units", "Units row.")],
    "view_favorites@home": {
        "responses": [reply("Home feed", "tap the star", "A star usually marks favourites.", VERY, "No favourites entry is recognisable.")],
        "repeat": True,
    },
}

# The looping evaluator used by the engine acceptance check.
SCRIPT_LOOP = {
    "*": {
        "responses": [
            reply("Some screen", "tap b", "Going to B to look around."),
            reply("Some screen", "tap c", "Going to C to look around."),
        ],
        "repeat": True,
    }
}

RATINGS = {
    "find_recipe@home": {"confusing_or_not": "not at all confusing", "confusing_or_not_rationale": "Search bar is prominent."},
    "find_recipe@search": {"confusing_or_not": "not at all confusing", "confusing_or_not_rationale": "A plain text field."},
    "find_recipe@results": {"confusing_or_not": "slightly confusing", "confusing_or_not_rationale": "Results lack photos."},
    "change_units@home": {"confusing_or_not": "very confusing", "confusing_or_not_rationale": "No hint where units are set."},
    "change_units@settings": {"confusing_or_not": "slightly confusing", "confusing_or_not_rationale": "Many rows look alike."},
    "change_units@menu": {"confusing_or_not": "not at all confusing", "confusing_or_not_rationale": "Settings is listed."},
    "view_favorites@home": {"confusing_or_not": "slightly confusing", "confusing_or_not_rationale": "Favorites tab icon is ambiguous."},
}

SCREENS_FILE = [
    {"task": "find_recipe", "screen": "home"},
    {"task": "find_recipe", "screen": "search"},
    {"task": "find_recipe", "screen": "results"},
    {"task": "change_units", "screen": "home"},
    {"task": "change_units", "screen": "menu"},
    {"task": "change_units", "screen": "settings"},
    {"task": "view_favorites", "screen": "home"},
]

HUMAN_LABELS = [
    {"task": "find_recipe", "screen": "home", "confusing": False},
    {"task": "find_recipe", "screen": "search", "confusing": False},
    {"task": "find_recipe", "screen": "results", "confusing": True, "note": "hesitated over the result list"},
    {"task": "change_units", "screen": "home", "confusing": True, "note": "looked for a settings icon"},
    {"task": "change_units", "screen": "profile", "confusing": False},
    {"task": "change_units", "screen": "menu", "confusing": False},
    {"task": "change_units", "screen": "settings", "confusing": True},
    {"task": "view_favorites", "screen": "home", "confusing": False},
    {"task": "view_favorites", "screen": "home", "confusing": True, "note": "second coder"},
]


def write_json(path, doc):
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def main():
    for sid, title, color in SCREENS:
        img = Image.new("RGB", (90, 160), color)
        draw = ImageDraw.Draw(img)
        draw.rectangle([4, 4, 85, 20], outline=(40, 40, 40))
        draw.text((8, 7), title[:13], fill=(20, 20, 20))
        img.save(APP / "screens" / f"{sid}.png", optimize=False)

    write_json(APP / "app.json", {
        "name": "recipe_app",
        "screens": [{"id": s, "image": f"screens/{s}.png", "title": title} for s, title, _ in SCREENS],
        "transitions": TRANSITIONS,
        "tasks": TASKS,
    })
    write_json(SCRIPTS / "evaluator_a.json", SCRIPT_A)
    write_json(SCRIPTS / "evaluator_b.json", SCRIPT_B)
    write_json(SCRIPTS / "evaluator_c.json", SCRIPT_C)
    write_json(SCRIPTS / "evaluator_loop.json", SCRIPT_LOOP)
    write_json(SCRIPTS / "rater.json", {k: [v] for k, v in RATINGS.items()})
    write_jsonl(HERE / "screens.jsonl", SCREENS_FILE)
    write_jsonl(HERE / "human_labels.jsonl", HUMAN_LABELS)


if __name__ == "__main__":
    main()
