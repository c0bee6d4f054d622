"""Regenerate the bundled scenarios: event streams, search tables, model fixtures, golden traces.

Model fixtures are keyed by a hash of the rendered prompt, so they cannot be
written by hand. This script answers each prompt with the authored text below
(looked up by prompt id and scenario time), records the exchanges through
FixtureRecorder, then replays once more on the recorded fixtures and stores the
result as the golden trace. Re-run it after editing a prompt template.

    python scripts/author_fixtures.py
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

from proactive.backends import BackendSlots, CallbackBackend, FixtureRecorder, ModelRequest
from proactive.scenario import load_scenario, replay

ROOT = Path(__file__).resolve().parents[1] / "src" / "proactive" / "scenarios"


def frames(spans: list[tuple[int, int, list[str]]]) -> list[dict]:
    """One frame per second; each span cycles through its texts."""
    out = []
    for start, stop, texts in spans:
        for i, t in enumerate(range(start, stop + 1)):
            out.append({"t": float(t), "kind": "FrameDescription", "payload": texts[i % len(texts)]})
    return out


# --------------------------------------------------------------------- blackjack

BLACKJACK_EVENTS = frames([
    (0, 7, [
        "dealer shuffles the deck at a wooden table",
        "dealer squares the shuffled deck and cuts it",
        "dealer holds the deck, chips stacked near the player",
    ]),
    (8, 12, [
        "player's hand on the table: 4 of spades, 2 of spades; dealer holds the deck",
        "player looks at the hand: 4 of spades, 2 of spades",
    ]),
    (13, 20, [
        "player's hand: 4 of spades, 2 of spades, 6 of spades; dealer holds the deck",
        "player considers the hand: 4 of spades, 2 of spades, 6 of spades",
    ]),
    (21, 26, [
        "player's hand: 4 of spades, 2 of spades, 6 of spades, 3 of hearts; dealer waits",
        "player studies the hand: 4 of spades, 2 of spades, 6 of spades, 3 of hearts",
    ]),
    (27, 32, [
        "player's hand: 4 of spades, 2 of hearts, 6 of spades, 3 of hearts, 10 of spades; round over",
        "cards lie face up: 4 of spades, 2 of hearts, 6 of spades, 3 of hearts, 10 of spades",
    ]),
])

BLACKJACK = {
    "describe.blackjack": {
        8: "[Visual Description] Two players sit at a wooden card table. The player in the foreground holds a 4 of spades and a 2 of spades, totaling 6 points. The player in the background is dealing from a deck; more decks, a white box and small objects lie on the table.",
        13: "[Visual Description] Two players sit at a wooden card table. Three cards lie face up in front of the near player: a 4 of spades, a 2 of spades and a 6 of spades, for a total of 12. The other player holds the deck, ready to deal.",
        21: "[Visual Description] The foreground player's hand is a 4 of spades, a 2 of spades, a 6 of spades and a 3 of hearts, totaling 15. The background player holds the deck; a face-down stack and scattered cards are on the table.",
        27: "[Visual Description] The foreground player's hand is a 4 of spades, a 2 of hearts, a 6 of spades, a 3 of hearts and a 10 of spades. The other player holds several cards; a deck and a box of cards or chips sit on the table.",
    },
    "describe.blackjack/focus": {
        8: "[Visual Description] Close view of the player's hand: 4 of spades and 2 of spades, total 6. The dealer's upcard is not visible from this angle.",
    },
    "cpu.classify": {
        8: "Service: Card Counting Strategy\nReasoning: The player holds 6 points (4 and 2 of spades) at the start of the hand and needs a clear hit-or-stand recommendation grounded in strategy.",
        13: "Service: Card Strategy Analysis\nReasoning: The hand is now a hard 12 with three cards, a classic borderline spot where the right move depends on the dealer's upcard.",
        21: "Service: Card Counting Strategy\nReasoning: At 15 points the bust risk is high; the advice must weigh it against the dealer's likely strength.",
        27: "Service: Game Outcome Analysis and Learning Recommendation\nReasoning: The hand busted at 25 and the round is over; a short review will help the player next time.",
    },
    "cpu.decompose": {
        8: "ToolCall: card counting strategy for blackjack\nDescribeScene: player's hand and dealer upcard\nMemoryRetrieve: blackjack",
        13: "ToolCall: should I hit or stand on a hard 12\nMemoryRetrieve: blackjack strategy",
        21: "ToolCall: multi-deck blackjack strategy\nMemoryRetrieve: blackjack strategy",
        27: "ToolCall: basic card counting techniques for beginners\nMemoryRetrieve: blackjack",
    },
    "cpu.synthesize": {
        8: "Hand: 6 points (4 of spades, 2 of spades). Recommendation: Hit. No single card can bust a 6 and almost every draw improves it; counting cards only pays off once you can track the shoe, so follow basic strategy for now.",
        13: "Hand: 12 points (4, 2 and 6). Recommendation: Hit in most situations. Only a ten-value card busts you, about 16 of 52 cards or 31 percent, while standing on 12 loses to most dealer totals; the usual exception is standing against a dealer 4, 5 or 6.",
        21: "Hand: 15 points (4, 2, 6 and 3). Recommendation: it depends on the dealer's upcard. Stand against 2 to 6, where the dealer busts often, and hit against 7 through Ace, where standing on 15 rarely wins.",
        27: "Outcome: busted with 25 points, so the round is lost. Takeaway: hard 12 to 16 against a strong dealer upcard is still a hit in basic strategy; judge decisions by their long-run results rather than one hand.",
    },
    "output.condense": {
        8: "Hit to improve your hand. A total of 6 cannot bust on the next card.",
        13: "Hit. With 12 points (4, 2 and 6), basic strategy says to draw another card.",
        21: "Look at the dealer's upcard, then stand against 2 to 6 and hit against 7 through Ace. Your 15 is a borderline hand.",
        27: "Treat this bust as practice and keep following basic strategy. Results even out over many hands.",
    },
    "memory.record": {
        8: "Summary: Player held 6 points (4 and 2 of spades) and was advised to hit.\nTopic: blackjack hand strategy",
        13: "Summary: With a hard 12 the player was advised to hit unless the dealer shows 4 to 6.\nTopic: blackjack hand strategy",
        21: "Summary: At 15 points the advice depended on the dealer's upcard.\nTopic: blackjack hand strategy",
        27: "Summary: Player busted with 25 points and reviewed basic strategy for hard 12 to 16.\nTopic: blackjack game review",
    },
}

BLACKJACK_DECIDE = {
    "card counting strategy for blackjack": 'web_search("card counting strategy for blackjack")',
    "should I hit or stand on a hard 12": "Hit a hard 12 against a dealer 2, 3 or 7 through Ace, and stand against 4, 5 or 6.",
    "multi-deck blackjack strategy": 'web_search("multi-deck blackjack strategy")',
    "basic card counting techniques for beginners": 'web_search("basic card counting techniques for beginners")',
}

BLACKJACK_SEARCH = {
    "card counting strategy for blackjack": [
        {"topic": "Card counting",
         "summary": "Card counting tracks the ratio of high to low cards left in the shoe and raises bets when it favours the player.",
         "snippets": "Balanced systems such as Hi-Lo score each card seen as +1, 0 or -1 and keep a running count.",
         "link": "https://en.wikipedia.org/wiki/Card_counting"},
        {"topic": "Blackjack basic strategy",
         "summary": "Basic strategy gives the best hit, stand, double or split decision for every player total and dealer upcard.",
         "snippets": "Counters start from basic strategy and deviate only at specific true counts.",
         "link": "https://en.wikipedia.org/wiki/Blackjack#Basic_strategy"},
    ],
    "multi-deck blackjack strategy": [
        {"topic": "Blackjack strategy for four to eight decks",
         "summary": "Strategy chart for shoe games with four or more decks, dealer stands on soft 17.",
         "snippets": "Hard 15: stand against 2 to 6, hit against 7 through Ace.",
         "link": "https://wizardofodds.com/games/blackjack/strategy/4-decks/"},
        {"topic": "Blackjack",
         "summary": "Rules of play at casinos, including how many decks a shoe holds.",
         "snippets": "Most casino games deal from a shoe of six or eight decks.",
         "link": "https://en.wikipedia.org/wiki/Blackjack"},
    ],
    "basic card counting techniques for beginners": [
        {"topic": "High-Low card counting",
         "summary": "Introduction to the Hi-Lo count and converting the running count to a true count.",
         "snippets": "Cards 2 to 6 count +1, 7 to 9 count 0, tens and aces count -1.",
         "link": "https://wizardofodds.com/games/blackjack/card-counting/high-low/"},
        {"topic": "Card counting systems",
         "summary": "Comparison of common counting systems by betting correlation and playing efficiency.",
         "snippets": "Simpler level-one counts are easier to keep accurately at the table.",
         "link": "https://en.wikipedia.org/wiki/Card_counting#Systems"},
    ],
}

# ------------------------------------------------------------------------ museum

MUSEUM_EVENTS = frames([
    (0, 14, [
        "walking along the gallery corridor past glass display cases",
        "walking slowly through the gallery past display cases and labels",
        "gallery corridor with glass display cases and other visitors",
    ]),
    (15, 20, [
        "black bronze sculpture with four ram heads and curved horns on a pedestal",
        "close view of the bronze sculpture: four ram heads with curved horns",
        "label beside the bronze sculpture with four ram heads",
    ]),
])

MUSEUM = {
    "describe.museum": {
        15: "[Visual Description] A black bronze artifact is displayed on a pedestal in a museum gallery. It is a multi-headed sculpture with four distinct animal heads, probably rams, each with prominent curved horns. Lighting brings out the reflective bronze surface; other exhibits and visitors are visible behind it.",
    },
    "cpu.classify": {
        15: "Service: Guided Tour Explanation\nReasoning: The visitor has stopped at an unfamiliar bronze vessel; context on its period, craftsmanship and use will help them understand what they are looking at.",
    },
    "cpu.decompose": {
        15: "ToolCall: Four-headed bronze ram sculpture historical significance\nToolCall: Multi-headed animal bronze artifact cultural context\nToolCall: Black bronze sculpture with curved horns museum collection",
    },
    "cpu.synthesize": {
        15: "The relic in front of you is the Four-Ram Square Zun, a bronze ritual wine vessel from the Shang dynasty. Four ram heads with curled horns project from its square body, cast with remarkable skill. It held wine for offerings to ancestors and deities, and the ram motif stands for strength and good fortune.",
    },
    "output.condense": {
        15: "This is the Four-Ram Square Zun, a Shang dynasty bronze wine vessel used in ancestral rites. Its four ram heads show the casting skill of the period.",
    },
    "memory.record": {
        15: "Summary: Visitor stopped at the Four-Ram Square Zun and heard its Shang dynasty background.\nTopic: museum bronze artifact tour",
    },
}

MUSEUM_DECIDE = {q: f'web_search("{q}")' for q in (
    "Four-headed bronze ram sculpture historical significance",
    "Multi-headed animal bronze artifact cultural context",
    "Black bronze sculpture with curved horns museum collection",
)}

MUSEUM_SEARCH = {
    "Four-headed bronze ram sculpture historical significance": [
        {"topic": "Four-Ram Square Zun",
         "summary": "A Shang dynasty bronze zun wine vessel with four ram heads at its shoulders, among the finest surviving Shang bronzes.",
         "snippets": "The vessel was cast in sections with the ram heads and horns joined in one piece.",
         "link": "https://en.chnmuseum.cn/"},
        {"topic": "Chinese ritual bronzes",
         "summary": "Bronze vessels used for offerings of food and wine in ancestral rites during the Shang and Zhou dynasties.",
         "snippets": "Zun vessels held wine; animal motifs were common decoration.",
         "link": "https://en.wikipedia.org/wiki/Chinese_ritual_bronzes"},
    ],
    "Multi-headed animal bronze artifact cultural context": [
        {"topic": "Shang dynasty",
         "summary": "The Shang dynasty ruled the Yellow River valley and is known for advanced bronze casting.",
         "snippets": "Ritual bronzes were central to ancestor worship in Shang society.",
         "link": "https://en.wikipedia.org/wiki/Shang_dynasty"},
    ],
    "Black bronze sculpture with curved horns museum collection": [
        {"topic": "National Museum of China collection",
         "summary": "Highlights of the bronze gallery, including ram-decorated wine vessels.",
         "snippets": "The bronze gallery presents vessels from the Shang and Western Zhou periods.",
         "link": "https://en.chnmuseum.cn/"},
    ],
}

# ------------------------------------------------------------------------ retail

RETAIL_EVENTS = frames([
    (0, 15, [
        "racks of denim jeans along the wall",
        "shelves of folded shirts in bright colours",
        "mannequin wearing a wool coat and scarf",
        "aisle with hanging jackets and price tags",
        "table of knitted hats and gloves",
        "mirror near the fitting rooms",
        "display of leather boots on low stands",
        "rail of summer dresses on sale",
    ]),
    (16, 24, [
        "hand holding a dark sweater, sweater sleeve with ribbed cuff",
        "dark sweater held close, fingers on the sweater neckline",
        "examining the sweater fabric: ribbed sweater cuffs and soft knit",
    ]),
])

RETAIL = {
    "describe.retail": {
        18: "[Visual Description] The wearer is holding a dark, long-sleeved garment, probably a sweater or hoodie, with ribbed cuffs and neckline. The fabric looks soft and suited to casual wear, and it is being examined closely for quality and fit.",
    },
    "cpu.classify": {
        18: "Service: Fit Advisor\nReasoning: The shopper keeps examining one garment; advice on sizing, fit and styling will help them decide whether to buy it.",
    },
    "cpu.decompose": {
        18: "ToolCall: Sweater sizing chart\nToolCall: Common hoodie fit issues\nToolCall: 2025 casual wear trends",
    },
    "cpu.synthesize": {
        18: "This looks like a soft knit or fleece sweater with a ribbed collar and cuffs, comfortable for everyday wear. Read the size chart and care label before buying, and confirm chest width and sleeve length. It pairs with jeans or chinos and layers under a casual blazer for a smarter look; dark colours are easy to match in autumn and winter.",
    },
    "output.condense": {
        18: "Check the size chart for chest width and sleeve length before you buy this sweater. It is otherwise a versatile casual piece.",
    },
    "memory.record": {
        18: "Summary: Shopper examined a dark ribbed sweater and was advised to check chest and sleeve sizing.\nTopic: clothing fit sweater",
    },
}

RETAIL_DECIDE = {q: f'web_search("{q}")' for q in (
    "Sweater sizing chart", "Common hoodie fit issues", "2025 casual wear trends",
)}

RETAIL_SEARCH = {
    "Sweater sizing chart": [
        {"topic": "Clothing sizes",
         "summary": "How garment sizes map to body measurements such as chest, waist and sleeve length.",
         "snippets": "Measure around the fullest part of the chest and compare with the brand's chart.",
         "link": "https://en.wikipedia.org/wiki/Clothing_sizes"},
        {"topic": "Sweater",
         "summary": "Knitted garments covering the torso and arms, in pullover and cardigan styles.",
         "snippets": "Ribbed cuffs and hems keep a sweater's shape close to the body.",
         "link": "https://en.wikipedia.org/wiki/Sweater"},
    ],
    "Common hoodie fit issues": [
        {"topic": "Hoodie",
         "summary": "A sweatshirt with a hood, usually cut loose for casual wear.",
         "snippets": "Sleeves that run long and shoulders that sit low are common fit complaints.",
         "link": "https://en.wikipedia.org/wiki/Hoodie"},
    ],
    "2025 casual wear trends": [
        {"topic": "Casual wear",
         "summary": "Everyday clothing that favours comfort, such as knitwear, jeans and chinos.",
         "snippets": "Relaxed fits and layered knitwear remain staples of casual dress.",
         "link": "https://en.wikipedia.org/wiki/Casual_wear"},
    ],
}

SCENARIOS = {
    "blackjack": dict(
        events=BLACKJACK_EVENTS, answers=BLACKJACK, decide=BLACKJACK_DECIDE, search=BLACKJACK_SEARCH,
        config={
            "policy": {"mode": "RuleBased", "change_predicate": "numeric_count"},
            "describe_prompt_id": "describe.blackjack",
            "personalization": True,
            "user_id": "player-01",
            "user_role": "player",
        },
    ),
    "museum": dict(
        events=MUSEUM_EVENTS, answers=MUSEUM, decide=MUSEUM_DECIDE, search=MUSEUM_SEARCH,
        config={
            "policy": {"mode": "RuleBased", "change_predicate": "novel_scene"},
            "describe_prompt_id": "describe.museum",
            "user_id": "visitor-01",
            "user_role": "visitor",
        },
    ),
    "retail": dict(
        events=RETAIL_EVENTS, answers=RETAIL, decide=RETAIL_DECIDE, search=RETAIL_SEARCH,
        config={
            "policy": {"mode": "RuleBased", "change_predicate": "dwell"},
            "describe_prompt_id": "describe.retail",
            "user_id": "shopper-01",
            "user_role": "shopper",
        },
    ),
}


def _time_of(request: ModelRequest) -> int:
    text = "\n".join(m.content for m in request.messages)
    m = re.search(r"^Time: (\d+(?:\.\d+)?)", text, flags=re.MULTILINE)
    if m is None:
        raise KeyError(f"{request.prompt_id}: prompt has no Time line")
    return int(float(m.group(1)))


def make_responder(spec: dict):
    answers, decide = spec["answers"], spec["decide"]
    condense_by_draft: dict[str, str] = {}

    def respond(request: ModelRequest) -> str:
        pid = request.prompt_id
        user = request.messages[-1].content
        if pid == "alu.decide":
            return decide[user.rsplit("\n", 1)[-1]]
        if pid == "output.condense":
            for draft, reply in condense_by_draft.items():
                if draft in user:
                    return reply
            raise KeyError("condense request for an unknown draft")
        t = _time_of(request)
        if pid.startswith("describe.") and "Focus: (none)" not in user:
            return answers[pid + "/focus"][t]
        if pid == "cpu.synthesize":
            text = answers[pid][t]
            condense_by_draft[text] = answers["output.condense"][t]
            tags = sorted(set(re.findall(r"\[#\d+\]", user)), key=lambda s: int(s[2:-1]))
            return text + ("\nSources: " + " ".join(tags) if tags else "")
        return answers[pid][t]

    return respond


def author(name: str, spec: dict) -> None:
    folder = ROOT / name
    folder.mkdir(parents=True, exist_ok=True)
    scenario = {
        "name": name,
        "events": spec["events"],
        "prompt_pack": "../prompts.json",
        "model_fixtures": "models.json",
        "search_fixtures": "search.json",
        "expected": "golden.jsonl",
        "config": spec["config"],
    }
    (folder / "scenario.json").write_text(json.dumps(scenario, indent=2) + "\n", encoding="utf-8")
    (folder / "search.json").write_text(json.dumps(spec["search"], indent=2) + "\n", encoding="utf-8")
    (folder / "models.json").write_text("{}\n", encoding="utf-8")

    loaded = load_scenario(folder / "scenario.json")
    recorder = FixtureRecorder(CallbackBackend(make_responder(spec)))
    slots = BackendSlots(trigger=recorder, streaming=recorder, orchestrator=recorder)
    authored = replay(loaded, backends=slots)
    fixtures = {pid: recorder.fixtures[pid] for pid in sorted(recorder.fixtures)}
    (folder / "models.json").write_text(json.dumps(fixtures, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    scripted = replay(load_scenario(folder / "scenario.json"))
    if scripted.serialize() != authored.serialize():
        sys.exit(f"{name}: scripted replay diverges from the authoring run")
    (folder / "golden.jsonl").write_text(scripted.serialize(), encoding="utf-8")
    print(f"{name}: {len(loaded.events)} events, triggers at {scripted.trigger_times}, services {scripted.services}")


if __name__ == "__main__":
    for scenario_name, scenario_spec in SCENARIOS.items():
        author(scenario_name, scenario_spec)
