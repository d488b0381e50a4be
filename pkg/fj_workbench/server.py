#!/usr/bin/env python3
"""MCP server exposing the workbench through the Model Context Protocol."""

import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import (
    ErrorData,
    TextContent,
    Tool,
)

from fj_workbench import __version__
from fj_workbench.advanced.client import FLOW_OPERATIONS, AdvancedWorkbenchClient
from fj_workbench.base.client import HyperelemRequest, WorkbenchClient
from fj_workbench.base.codec import WorkbenchEncoder, parse_generating_set, parse_matrix
from fj_workbench.config import WorkbenchConfig, configure_logging
from fj_workbench.errors import WorkbenchError

logger = logging.getLogger("fjwb.server")


class WorkbenchJSONRPCError(Exception):
    """Exception that wraps a JSONRPCError so it can be raised and caught."""

    def __init__(self, json_rpc_error: ErrorData):
        self.json_rpc_error = json_rpc_error
        self.code = json_rpc_error.code
        self.message = json_rpc_error.message
        super().__init__(f"JSONRPCError: {json_rpc_error.message}")


def _invalid_params(message: str) -> WorkbenchJSONRPCError:
    return WorkbenchJSONRPCError(ErrorData(code=-32602, message=message))


MATRIX_PROPERTY = {
    "description": 'Twisting matrix as {"n": 2, "rows": [[2, 1], [1, 1]]} or a list of rows',
}


def _schema(properties: Dict[str, Any], required: List[str]) -> Dict[str, Any]:
    return {
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": False,
    }


class WorkbenchMcpServer:
    """MCP server for the workbench's analysis, certification and flow-space tools."""

    def __init__(self, config: Optional[WorkbenchConfig] = None):
        """Initialize the workbench MCP server.

        Args:
            config: Configuration; read from the environment when omitted.
        """
        self.config = config or WorkbenchConfig.from_env()

        self.server = Server(
            name="fj-workbench",
            version=__version__,
        )

        self._base_client: Optional[WorkbenchClient] = None
        self._advanced_client: Optional[AdvancedWorkbenchClient] = None

        @self.server.list_tools()
        async def list_tools() -> List[Tool]:
            logger.info("Handling list_tools request")
            return self.tools()

        @self.server.call_tool()
        async def call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
            logger.info(f"Handling call_tool request for tool: {name}")
            return await self.dispatch(name, arguments or {})

        self.server.onerror = self._handle_error

    def tools(self) -> List[Tool]:
        return [
            Tool(
                name="analyze",
                description="Indices i_k = |det(I - A^k)|, their product K and the root-of-unity eigenvalue test",
                inputSchema=_schema(
                    {"matrix": MATRIX_PROPERTY, "L": {"type": "integer", "minimum": 1}},
                    ["matrix"],
                ),
            ),
            Tool(
                name="dirichlet",
                description="Smallest primes p = 1 mod K with p >= lower",
                inputSchema=_schema(
                    {
                        "K": {"type": "integer", "minimum": 1},
                        "lower": {"type": "integer"},
                        "count": {"type": "integer", "minimum": 1},
                    },
                    ["K", "lower"],
                ),
            ),
            Tool(
                name="hyperelem",
                description="Hyper-elementary subgroups of (Z/s)^n semidirect Z/r and both prime lemmas",
                inputSchema=_schema(
                    {
                        "matrix": MATRIX_PROPERTY,
                        "s": {"type": "integer", "minimum": 2},
                        "r": {"type": "integer", "minimum": 1},
                        "exhaustive": {"type": "boolean"},
                        "samples": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer"},
                    },
                    ["matrix", "s"],
                ),
            ),
            Tool(
                name="torsion",
                description="Self-torsion of a chain equivalence (plain matrices or an interval transfer)",
                inputSchema=_schema({"description": {"type": "object"}}, ["description"]),
            ),
            Tool(
                name="certify",
                description="Run the Farrell-Hsiang pipeline for Z^n semidirect_A Z and return the certificate",
                inputSchema=_schema(
                    {
                        "matrix": MATRIX_PROPERTY,
                        "L": {"type": "integer", "minimum": 1},
                        "eps": {"type": "string", "description": "Target contraction, e.g. 1/2 or 0.5"},
                        "gens": {"type": "array", "description": 'Generating set, [{"v": [1, 0], "k": 0}, ...]'},
                        "mode": {"type": "string", "enum": ["sampling", "exhaustive"]},
                        "samples": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer"},
                    },
                    ["matrix", "L", "eps"],
                ),
            ),
            Tool(
                name="verify",
                description="Replay every check recorded in a certificate",
                inputSchema=_schema({"certificate": {"type": "object"}}, ["certificate"]),
            ),
            Tool(
                name="flow",
                description="Flow-space computations on R^n: " + ", ".join(FLOW_OPERATIONS),
                inputSchema=_schema(
                    {
                        "operation": {"type": "string", "enum": list(FLOW_OPERATIONS)},
                        "arguments": {"type": "object"},
                    },
                    ["operation", "arguments"],
                ),
            ),
        ]

    async def dispatch(self, name: str, arguments: Dict[str, Any]) -> List[TextContent]:
        handlers: Dict[str, Callable[[Dict[str, Any]], Any]] = {
            "analyze": self._analyze,
            "dirichlet": self._dirichlet,
            "hyperelem": self._hyperelem,
            "torsion": self._torsion,
            "certify": self._certify,
            "verify": self._verify,
            "flow": self._flow,
        }
        if name not in handlers:
            raise WorkbenchJSONRPCError(ErrorData(code=-32601, message=f"Unknown tool: {name}"))
        try:
            result = handlers[name](arguments)
        except WorkbenchJSONRPCError:
            raise
        except KeyError as e:
            raise _invalid_params(f"Missing parameter {e}") from e
        except WorkbenchError as e:
            logger.error(f"Error executing tool {name}: {e.message}")
            return [TextContent(type="text", text=json.dumps(e.to_dict(), indent=2))]
        except Exception as e:
            logger.error(f"Error executing tool {name}: {e}")
            raise WorkbenchJSONRPCError(
                ErrorData(code=-32603, message=f"Error executing tool {name}: {e}")
            ) from e
        return [TextContent(type="text", text=json.dumps(result, indent=2, cls=WorkbenchEncoder))]

    @property
    def base_client(self) -> WorkbenchClient:
        """Get the base client, creating it if necessary.

        Returns:
            WorkbenchClient: Client for the exact algebraic operations.
        """
        if self._base_client is None:
            self._base_client = WorkbenchClient(self.config)
        return self._base_client

    @property
    def advanced_client(self) -> AdvancedWorkbenchClient:
        """Get the advanced client, creating it if necessary.

        Returns:
            AdvancedWorkbenchClient: Client for certification and flow spaces.
        """
        if self._advanced_client is None:
            self._advanced_client = AdvancedWorkbenchClient(self.base_client)
        return self._advanced_client

    def _handle_error(self, error: Exception) -> Any:
        """Handle errors in the MCP server.

        Args:
            error: The error that occurred.
        """
        logger.error(f"MCP Error: {error}")
        if isinstance(error, WorkbenchJSONRPCError):
            return error.json_rpc_error
        return error

    def _analyze(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        return self.base_client.analyze(parse_matrix(arguments["matrix"]), int(arguments.get("L", 5)))

    def _dirichlet(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        return self.base_client.dirichlet(
            int(arguments["K"]), int(arguments["lower"]), int(arguments.get("count", 2))
        )

    def _hyperelem(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        req = HyperelemRequest(
            parse_matrix(arguments["matrix"]),
            int(arguments["s"]),
            int(arguments["r"]) if "r" in arguments else None,
            bool(arguments.get("exhaustive", True)),
            int(arguments.get("samples", self.config.samples)),
            int(arguments.get("seed", self.config.seed)),
        )
        return self.base_client.hyperelem(req)

    def _torsion(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        return self.base_client.torsion(arguments["description"])

    def _certify(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        gens = parse_generating_set(arguments["gens"]) if "gens" in arguments else None
        return self.advanced_client.certify(
            parse_matrix(arguments["matrix"]),
            int(arguments["L"]),
            str(arguments["eps"]),
            gens,
            arguments.get("mode"),
            arguments.get("samples"),
            arguments.get("seed"),
        )

    def _verify(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        return self.advanced_client.verify(arguments["certificate"])

    def _flow(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        return self.advanced_client.flow(arguments["operation"], arguments["arguments"])

    async def run(self) -> None:
        """Run the workbench MCP server."""
        logger.info("Starting workbench MCP server...")
        async with stdio_server() as (read_stream, write_stream):
            await self.server.run(
                read_stream=read_stream,
                write_stream=write_stream,
                initialization_options=self.server.create_initialization_options(),
            )
            logger.info("Workbench MCP server started")


def main() -> None:
    """Run the workbench MCP server."""
    config = WorkbenchConfig.from_env()
    configure_logging(config)

    server = WorkbenchMcpServer(config)
    try:
        import asyncio

        asyncio.run(server.run())
    except KeyboardInterrupt:
        logger.info("Workbench MCP server stopped")
    except Exception as e:
        logger.error(f"Error running workbench MCP server: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
