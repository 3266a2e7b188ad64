"""LLM-guided rank proposals over a growing chat conversation.

The conversation opens with a system message and the initial prompt. Each
iteration adds the model's answer and, once the answer has been evaluated,
a user message reporting the previous and best results; so after ``t``
evaluated iterations the conversation holds ``2 + 2t`` messages.

Answers end with a machine-readable block::

    RANKS
    R(1,2)=4
    ...
    END
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DuplicateEdge, InvalidRankToken, MissingEdge, ParseFailure, ProposalFailed
from .fctn import RankAssignment, edges
from .llm_client import ChatClient, ChatMessage, ClientParams, Conversation
from .objective import DEFAULT_LAMBDA
from .search import IterationRecord, Proposal, Strategy, clamp, detect_repeat

logger = logging.getLogger(__name__)

PROMPT_VERSION = "1"
TEMPLATE_NAMES = ("system", "initial", "iterative", "parse_error", "repeat")

_PLACEHOLDER = re.compile(r"\{\{([A-Z_]+)\}\}")
_EDGE_LINE = re.compile(r"^R\((\d+),(\d+)\)=(.*)$")


def load_templates(overrides: Mapping[str, str | Path] | None = None) -> dict[str, str]:
    """Packaged templates, optionally replaced per name by files on disk."""
    pkg = resources.files("fctnrank") / "prompts"
    out = {name: (pkg / f"{name}.txt").read_text(encoding="utf-8") for name in TEMPLATE_NAMES}
    for name, path in (overrides or {}).items():
        if name not in TEMPLATE_NAMES:
            raise KeyError(f"unknown prompt template {name!r}")
        out[name] = Path(path).read_text(encoding="utf-8")
    return out


def render(template: str, values: Mapping[str, object]) -> str:
    def sub(m):
        key = m.group(1)
        if key not in values:
            raise KeyError(f"no value for placeholder {{{{{key}}}}}")
        return str(values[key])

    return _PLACEHOLDER.sub(sub, template)


@dataclass
class TensorMeta:
    shape: tuple[int, ...]
    mode_descriptions: list[str]
    domain_label: str
    bounds: RankAssignment

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if len(self.mode_descriptions) != len(self.shape):
            raise ValueError(
                f"{len(self.mode_descriptions)} mode descriptions for an order-{len(self.shape)} tensor"
            )
        if self.bounds.order != len(self.shape):
            raise ValueError("bounds order does not match the tensor order")


def format_ranks_block(ranks: RankAssignment) -> str:
    lines = ["RANKS"] + [f"R({i},{j})={v}" for (i, j), v in ranks.items()] + ["END"]
    return "\n".join(lines) + "\n"


def format_stanza(order: int) -> str:
    lines = ["RANKS"] + [f"R({i},{j})=<integer>" for i, j in edges(order)] + ["END"]
    return "\n".join(lines)


def _ranks_inline(ranks: RankAssignment) -> str:
    return ", ".join(f"R({i},{j})={v}" for (i, j), v in ranks.items())


def _mode_table(meta: TensorMeta) -> str:
    return "\n".join(
        f"- Mode {k} (size {size}): {desc}"
        for k, (size, desc) in enumerate(zip(meta.shape, meta.mode_descriptions), start=1)
    )


def _bounds_table(meta: TensorMeta) -> str:
    return "\n".join(
        f"- R({i},{j}) joins mode {i} (size {meta.shape[i - 1]}) and mode {j} "
        f"(size {meta.shape[j - 1]}): 1 <= R({i},{j}) <= {b}"
        for (i, j), b in meta.bounds.items()
    )


def _fmt_lambda(lam: float) -> str:
    return f"{lam:g}"


# prompt builders -----------------------------------------------------------

def build_system_message(meta: TensorMeta, lam: float = DEFAULT_LAMBDA, templates: Mapping[str, str] | None = None) -> ChatMessage:
    templates = templates or load_templates()
    text = render(templates["system"], {"DOMAIN": meta.domain_label, "LAMBDA": _fmt_lambda(lam)})
    return ChatMessage("system", text)


def build_initial_prompt(meta: TensorMeta, lam: float = DEFAULT_LAMBDA, templates: Mapping[str, str] | None = None) -> ChatMessage:
    templates = templates or load_templates()
    n = len(meta.shape)
    text = render(
        templates["initial"],
        {
            "ORDER": n,
            "SHAPE": " x ".join(str(s) for s in meta.shape),
            "MODE_TABLE": _mode_table(meta),
            "NUM_EDGES": n * (n - 1) // 2,
            "BOUNDS_TABLE": _bounds_table(meta),
            "LAMBDA": _fmt_lambda(lam),
            "FORMAT": format_stanza(n),
        },
    )
    return ChatMessage("user", text)


def build_iterative_prompt(
    prev: IterationRecord,
    best: IterationRecord,
    meta: TensorMeta,
    lam: float = DEFAULT_LAMBDA,
    templates: Mapping[str, str] | None = None,
) -> ChatMessage:
    templates = templates or load_templates()
    text = render(
        templates["iterative"],
        {
            "PREV_INDEX": prev.index,
            "PREV_LOSS": f"{prev.train.loss:.4f}",
            "PREV_LOG_CR": f"{prev.train.log10_cr:.4f}",
            "PREV_ERROR": f"{prev.train.mean_error:.3e}",
            "PREV_RANKS": _ranks_inline(prev.ranks),
            "BEST_INDEX": best.index,
            "BEST_LOSS": f"{best.train.loss:.4f}",
            "BEST_LOG_CR": f"{best.train.log10_cr:.4f}",
            "BEST_ERROR": f"{best.train.mean_error:.3e}",
            "BEST_RANKS": _ranks_inline(best.ranks),
            "LAMBDA": _fmt_lambda(lam),
            "BOUNDS_TABLE": _bounds_table(meta),
            "FORMAT": format_stanza(len(meta.shape)),
        },
    )
    return ChatMessage("user", text)


# parsing -------------------------------------------------------------------

def _find_block(text: str) -> tuple[int, list[str]]:
    lines = text.splitlines()
    starts = [i for i, line in enumerate(lines) if line.strip() == "RANKS"]
    if not starts:
        raise ParseFailure("no RANKS block found")
    start = starts[-1]
    for end in range(start + 1, len(lines)):
        if lines[end].strip() == "END":
            return start, [l.strip() for l in lines[start + 1:end]]
    raise ParseFailure("RANKS block is not terminated by END")


def parse_ranks(response_text: str, edge_list: Sequence[tuple[int, int]]) -> RankAssignment:
    """Extract the final RANKS block of a response.

    Every edge in ``edge_list`` must appear exactly once with a positive
    integer value.
    """
    _, body = _find_block(response_text)
    wanted = set(edge_list)
    found: dict[tuple[int, int], int] = {}
    for line in body:
        if not line:
            continue
        m = _EDGE_LINE.match(line.replace(" ", ""))
        if m is None:
            raise ParseFailure(f"unexpected line inside RANKS block: {line!r}")
        i, j, token = int(m.group(1)), int(m.group(2)), m.group(3)
        edge = (min(i, j), max(i, j))
        if edge not in wanted:
            raise ParseFailure(f"R({i},{j}) is not an edge of this network")
        if edge in found:
            raise DuplicateEdge(*edge)
        if not re.fullmatch(r"\d+", token) or int(token) < 1:
            raise InvalidRankToken(f"R({i},{j}) has invalid rank {token!r}")
        found[edge] = int(token)
    for e in edge_list:
        if e not in found:
            raise MissingEdge(*e)
    order = max(max(e) for e in edge_list)
    return RankAssignment.from_dict(order, found)


def extract_reasoning(response_text: str) -> str | None:
    try:
        start, _ = _find_block(response_text)
    except ParseFailure:
        return response_text.strip() or None
    text = "\n".join(response_text.splitlines()[:start]).strip()
    return text or None


# proposing -----------------------------------------------------------------

@dataclass
class LlmTurn:
    ranks: RankAssignment
    reasoning: str | None
    retried: bool = False
    repeated: bool = False
    notes: list[str] = field(default_factory=list)


def llm_propose(
    conversation: Conversation,
    history: Sequence[IterationRecord],
    client: ChatClient,
    meta: TensorMeta,
    params: ClientParams,
    lam: float = DEFAULT_LAMBDA,
    templates: Mapping[str, str] | None = None,
) -> LlmTurn:
    """Ask for the next proposal, extending ``conversation`` in place.

    A parse failure gets one corrective re-ask before :class:`ProposalFailed`.
    A proposal equal (after clamping) to an evaluated one gets one corrective
    re-ask; if the model repeats itself again the repeat is accepted.
    """
    templates = templates or load_templates()
    edge_list = edges(len(meta.shape))
    if len(conversation) == 0:
        conversation.append(build_system_message(meta, lam, templates))
    if len(conversation) == 1:
        conversation.append(build_initial_prompt(meta, lam, templates))
    elif conversation.messages[-1].role == "assistant":
        # the previous attempt failed without an evaluation; restate the task
        if history:
            best = min(history, key=lambda r: (r.train.loss, r.index))
            conversation.append(build_iterative_prompt(history[-1], best, meta, lam, templates))
        else:
            conversation.append(build_initial_prompt(meta, lam, templates))

    def ask():
        reply = client.send(conversation, params)
        conversation.append(reply)
        return reply.content

    turn_notes = []
    text = ask()
    retried = False
    try:
        ranks = parse_ranks(text, edge_list)
    except ParseFailure as exc:
        logger.warning("could not parse model answer: %s", exc)
        turn_notes.append(f"parse failure: {exc}")
        retried = True
        conversation.append(ChatMessage(
            "user", render(templates["parse_error"], {"ERROR": str(exc), "FORMAT": format_stanza(len(meta.shape))})
        ))
        text = ask()
        try:
            ranks = parse_ranks(text, edge_list)
        except ParseFailure as exc2:
            raise ProposalFailed(f"model answer unparseable after re-ask: {exc2}") from exc2

    clamped, _ = clamp(ranks, meta.bounds)
    seen = [r.ranks for r in history]
    repeated = detect_repeat(clamped, seen)
    if repeated:
        first = next(r.index for r in history if r.ranks == clamped)
        logger.warning("model repeated the configuration of iteration %d", first)
        turn_notes.append(f"repeat of iteration {first}")
        retried = True
        conversation.append(ChatMessage(
            "user",
            render(templates["repeat"], {
                "RANKS": _ranks_inline(clamped), "ITERATION": first, "FORMAT": format_stanza(len(meta.shape)),
            }),
        ))
        retry_text = ask()
        try:
            retry_ranks = parse_ranks(retry_text, edge_list)
        except ParseFailure as exc:
            turn_notes.append(f"re-ask after repeat unparseable: {exc}")
        else:
            text, ranks = retry_text, retry_ranks
            clamped, _ = clamp(ranks, meta.bounds)
            repeated = detect_repeat(clamped, seen)

    return LlmTurn(clamped, extract_reasoning(text), retried, repeated, turn_notes)


class LlmStrategy(Strategy):
    """Proposer backed by a chat model; see :func:`llm_propose`."""

    name = "llm"

    def __init__(
        self,
        client: ChatClient,
        meta: TensorMeta,
        params: ClientParams | None = None,
        lam: float = DEFAULT_LAMBDA,
        templates: Mapping[str, str] | None = None,
    ):
        self.client = client
        self.meta = meta
        self.params = params or ClientParams()
        self.lam = lam
        self.templates = templates or load_templates()
        self.conversation = Conversation()
        self.conversation.append(build_system_message(meta, lam, self.templates))
        self.turns: list[LlmTurn] = []

    def propose(self, history, bounds):
        if bounds != self.meta.bounds:
            raise ValueError("search bounds differ from the bounds shown to the model")
        turn = llm_propose(self.conversation, history, self.client, self.meta, self.params, self.lam, self.templates)
        self.turns.append(turn)
        return Proposal(turn.ranks, turn.reasoning, turn.retried)

    def observe(self, record, best):
        self.conversation.append(build_iterative_prompt(record, best, self.meta, self.lam, self.templates))
