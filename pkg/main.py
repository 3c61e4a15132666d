import argparse
import asyncio
import json
import logging
import os
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, Optional, Sequence

from dotenv import load_dotenv
from langgraph.graph import END, StateGraph

from agents.flow_run import flow_node
from agents.involutivity import involutivity_node
from agents.paper_check import paper_check_node
from agents.pde_compare import pde_compare_node
from agents.quasirep_check import quasirep_check_node
from agents.storage_response import storage_response_node
from middleware import EXIT_OK, guard_command
from models import ExperimentConfig, LabState
from tools.io_tools import load_config

load_dotenv()
logging.basicConfig(level=os.getenv("LOG_LEVEL", "INFO").upper())
logger = logging.getLogger(__name__)

Node = Callable[[Dict[str, Any]], Awaitable[Dict[str, Any]]]

COMMAND_NODES: Dict[str, Node] = {
    "quasirep-check": quasirep_check_node,
    "flow": flow_node,
    "pde-compare": pde_compare_node,
    "paper-check": paper_check_node,
    "involutivity": involutivity_node,
}


def node_name(command: str) -> str:
    return command.replace("-", "_")


def create_workflow(command: str):
    workflow = StateGraph(LabState)

    workflow.add_node(node_name(command), COMMAND_NODES[command])
    workflow.add_node("storage_response", storage_response_node)

    workflow.set_entry_point(node_name(command))
    workflow.add_edge(node_name(command), "storage_response")
    workflow.add_edge("storage_response", END)

    return workflow.compile()


async def run_workflow(state: LabState) -> LabState:
    workflow = create_workflow(state["command"])
    final_state = state
    async for output in workflow.astream(state):
        for node, update in output.items():
            logger.debug(f"Node {node} finished with status {update.get('status')}")
            final_state = {**final_state, **update}
    return final_state


def initial_state(command: str, config: ExperimentConfig) -> LabState:
    return LabState(
        command=command,
        config=config,
        out_dir=Path(config.output_dir),
        messages=[],
        status="started",
        outputs={},
        summary={},
        response={},
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lax-markov",
        description="Calogero quasi-representations, Markov-split loop algebra Lax flows and their audits.",
    )
    parser.add_argument("command", choices=sorted(COMMAND_NODES), help="experiment to run")
    parser.add_argument("--config", required=True, help="path to a JSON experiment configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides the configuration)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides the configuration)")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = ExperimentConfig.model_validate({**config.model_dump(), **overrides})
    return config


@guard_command
def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    logger.info(f"Running {args.command} into {config.output_dir}")
    state = asyncio.run(run_workflow(initial_state(args.command, config)))
    print(json.dumps(state["response"], indent=2, default=str))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    raise SystemExit(main())
