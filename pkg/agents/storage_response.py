# ./agents/storage_response.py
import logging
from typing import Any, Dict

from tools.io_tools import write_json

logger = logging.getLogger(__name__)


async def storage_response_node(state: Dict[str, Any]) -> Dict[str, Any]:
    """Record the run report next to the outputs and build the response payload."""
    try:
        logger.debug("Entering storage_response_node")
        command = state["command"]
        outputs = state["outputs"]
        summary = state["summary"]

        missing = [name for name, path in outputs.items() if not path]
        success = not missing and summary.get("passed", True)
        if missing:
            message = f"{command} finished without writing: {', '.join(missing)}"
        elif not success:
            message = f"{command} finished; some checks exceeded their tolerance"
        else:
            message = f"{command} completed successfully"

        response = {
            "success": success,
            "message": message,
            "status": "success" if success else "partial_failure",
            "data": {
                "outputs": dict(outputs),
                "summary": summary,
                "messages": list(state["messages"]),
            },
        }
        report_path = write_json(state["out_dir"] / f"{command.replace('-', '_')}_report.json", response, state["config"])
        outputs["report"] = str(report_path)

        state["response"] = response
        state["status"] = "completed"
        logger.info(message)
        return state
    except Exception as e:
        logger.error(f"Storing the run report failed: {str(e)}")
        state["status"] = "storage_failed"
        raise
