#!/usr/bin/env python3
"""Replay a canned model transcript through the LLM-guided search loop.

Useful for inspecting the exact prompts the model would see without any
network access. The transcript proposes progressively smaller networks.

    python scripts/llm_mock_demo.py --show-prompts
"""

import argparse

from fctnrank.data import build_dataset, synth_panel
from fctnrank.fctn import RankAssignment
from fctnrank.llm_client import ScriptedClient
from fctnrank.llm_strategy import LlmStrategy, TensorMeta, format_ranks_block
from fctnrank.report import render_table
from fctnrank.search import SearchConfig, rank_upper_bounds, run_search

MODES = ["Asset group", "Asset within group", "Window time"]
PLAN = [
    ((3, 2, 2), "Groups and assets interact strongly; time coupling looks moderate."),
    ((3, 2, 1), "Assets barely co-move in time, drop that edge."),
    ((2, 2, 1), "Trim the group-asset edge as the error term is still tiny."),
    ((2, 1, 1), "Try a chain-like network."),
    ((1, 1, 1), "Everything may be separable; test the rank-one network."),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--show-prompts", action="store_true")
    args = ap.parse_args()

    panel = synth_panel([3, 3], 40, seed=4, structure="low_rank", latent_rank=1)
    ds = build_dataset(panel, window=3)
    shape = ds.train[0].shape
    meta = TensorMeta(shape, MODES, "equity market microstructure", rank_upper_bounds(shape))
    script = [f"{why}\n\n" + format_ranks_block(RankAssignment(3, r)) for r, why in PLAN]
    strategy = LlmStrategy(ScriptedClient(script), meta)
    log = run_search(strategy, ds.train, ds.test, SearchConfig(max_iterations=len(PLAN)))

    if args.show_prompts:
        for m in strategy.conversation.messages:
            print(f"===== {m.role} =====\n{m.content}\n")
    print(render_table(log))
    print(f"\nconversation holds {len(strategy.conversation)} messages after {len(log.iterations)} iterations")


if __name__ == "__main__":
    main()
